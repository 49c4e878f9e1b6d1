#pragma once

#include <vector>

#include "jnn/tensor.hpp"

namespace jnn {

// ---- layer forwards and analytic backwards -------------------------------
//
// All ops are pure functions of their inputs. Convolution is cross-correlation
// (no kernel flip). Backward functions accumulate into the provided gradient
// tensors when they are non-null and already shaped; otherwise they allocate.

/// x: (B,Cin,H,W), w: (Cout,Cin,k,k), b: (Cout) -> (B,Cout,H',W')
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, int stride,
                     int padding, Tensor* grad_x, Tensor* grad_w, Tensor* grad_b);

/// Windowed max over (kernel,kernel) patches at the given stride, no padding.
/// Ties go to the first position in row-major scan order. argmax (optional)
/// receives the flat input index chosen for each output element.
Tensor maxpool2d(const Tensor& x, int kernel, int stride, std::vector<int64_t>* argmax = nullptr);
Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<int64_t>& input_shape,
                          const std::vector<int64_t>& argmax);

/// x: (B,F), w: (F_out,F), b: (F_out) -> (B,F_out)
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, Tensor* grad_x,
                     Tensor* grad_w, Tensor* grad_b);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out, double slope);

Tensor sigmoid(const Tensor& x);
/// y is the forward output (grad uses y*(1-y)).
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out);
double sigmoid_scalar(double x);

/// Channel-axis concatenation, a first. Batch and spatial extents must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void concat_channels_backward(const Tensor& grad_out, int64_t c_a, Tensor* grad_a, Tensor* grad_b);
Tensor slice_channels(const Tensor& x, int64_t c_begin, int64_t c_end);

/// Classic momentum update for every parameter:
///   buf <- momentum*buf + grad;  value <- value - lr*buf;  grad <- 0.
/// Throws TrainError naming the parameter if its gradient is not finite.
void sgd_step(const std::vector<ParamPtr>& params, double lr, double momentum);

// ---- low-level kernels (exposed for tests) --------------------------------

/// C[M,N] = (accumulate ? C : 0) + A[M,K] * B[K,N], row-major.
void gemm(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
          bool accumulate);
/// C[M,K] = (accumulate ? C : 0) + A[M,N] * B[K,N]^T, i.e. C[i][j] = sum_n A[i][n]*B[j][n].
void gemm_abt(const double* A, const double* B, double* C, int64_t M, int64_t N, int64_t K,
              bool accumulate);
/// C[K,N] = (accumulate ? C : 0) + A[M,K]^T * B[M,N], i.e. C[k][n] = sum_m A[m][k]*B[m][n].
void gemm_atb(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
              bool accumulate);

}  // namespace jnn
