#include "jnn/ops.hpp"

#include <cmath>
#include <cstring>

#include "jnn/parallel.hpp"

namespace jnn {

// ---- GEMM kernels ----------------------------------------------------------
//
// Row-parallel with a fixed accumulation order per output element, so results
// do not depend on the thread count.

void gemm(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
          bool accumulate) {
    parallel_for(M, [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) {
            double* c = C + i * N;
            if (!accumulate) std::memset(c, 0, static_cast<size_t>(N) * sizeof(double));
            const double* a = A + i * K;
            for (int64_t k = 0; k < K; ++k) {
                const double aik = a[k];
                if (aik == 0.0) continue;
                const double* b = B + k * N;
                for (int64_t n = 0; n < N; ++n) c[n] += aik * b[n];
            }
        }
    });
}

void gemm_abt(const double* A, const double* B, double* C, int64_t M, int64_t N, int64_t K,
              bool accumulate) {
    // C[i][j] = sum_n A[i][n] * B[j][n]; both operands row-contiguous in n.
    auto body = [&](int64_t i, int64_t j) {
        const double* a = A + i * N;
        const double* b = B + j * N;
        double s = 0.0;
        for (int64_t n = 0; n < N; ++n) s += a[n] * b[n];
        double* c = C + i * K + j;
        *c = accumulate ? *c + s : s;
    };
    if (M >= K) {
        parallel_for(M, [&](int64_t i0, int64_t i1) {
            for (int64_t i = i0; i < i1; ++i)
                for (int64_t j = 0; j < K; ++j) body(i, j);
        });
    } else {
        parallel_for(K, [&](int64_t j0, int64_t j1) {
            for (int64_t j = j0; j < j1; ++j)
                for (int64_t i = 0; i < M; ++i) body(i, j);
        });
    }
}

void gemm_atb(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N,
              bool accumulate) {
    parallel_for(K, [&](int64_t k0, int64_t k1) {
        for (int64_t k = k0; k < k1; ++k) {
            double* c = C + k * N;
            if (!accumulate) std::memset(c, 0, static_cast<size_t>(N) * sizeof(double));
            for (int64_t m = 0; m < M; ++m) {
                const double amk = A[m * K + k];
                if (amk == 0.0) continue;
                const double* b = B + m * N;
                for (int64_t n = 0; n < N; ++n) c[n] += amk * b[n];
            }
        }
    });
}

// ---- conv2d ----------------------------------------------------------------

static int64_t conv_out_extent(int64_t in, int k, int stride, int padding) {
    return (in + 2 * padding - k) / stride + 1;
}

static void check_conv_args(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                            int padding) {
    if (x.ndim() != 4 || w.ndim() != 4 || b.ndim() != 1)
        throw DimensionError("conv2d expects x(B,C,H,W), w(Cout,Cin,k,k), b(Cout)");
    if (w.dim(2) != w.dim(3)) throw DimensionError("conv2d kernel must be square");
    if (x.dim(1) != w.dim(1))
        throw DimensionError("conv2d input channels " + std::to_string(x.dim(1)) +
                             " do not match weight Cin " + std::to_string(w.dim(1)));
    if (b.dim(0) != w.dim(0)) throw DimensionError("conv2d bias length must equal Cout");
    if (stride < 1 || padding < 0) throw DimensionError("conv2d stride must be >=1, padding >=0");
    const int k = static_cast<int>(w.dim(2));
    if (conv_out_extent(x.dim(2), k, stride, padding) < 1 ||
        conv_out_extent(x.dim(3), k, stride, padding) < 1)
        throw DimensionError("conv2d output would be empty for input " + x.shape_str());
}

// Gathers one batch element into col[Cin*k*k, OH*OW] with zero padding.
static void im2col(const double* x, int64_t C, int64_t H, int64_t W, int k, int stride,
                   int padding, int64_t OH, int64_t OW, double* col) {
    for (int64_t c = 0; c < C; ++c) {
        const double* xc = x + c * H * W;
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                double* row = col + ((c * k + kh) * k + kw) * OH * OW;
                for (int64_t oh = 0; oh < OH; ++oh) {
                    const int64_t ih = oh * stride - padding + kh;
                    double* dst = row + oh * OW;
                    if (ih < 0 || ih >= H) {
                        std::memset(dst, 0, static_cast<size_t>(OW) * sizeof(double));
                        continue;
                    }
                    const double* src = xc + ih * W;
                    for (int64_t ow = 0; ow < OW; ++ow) {
                        const int64_t iw = ow * stride - padding + kw;
                        dst[ow] = (iw < 0 || iw >= W) ? 0.0 : src[iw];
                    }
                }
            }
        }
    }
}

// Scatter-adds col[Cin*k*k, OH*OW] back into one batch element.
static void col2im(const double* col, int64_t C, int64_t H, int64_t W, int k, int stride,
                   int padding, int64_t OH, int64_t OW, double* x) {
    for (int64_t c = 0; c < C; ++c) {
        double* xc = x + c * H * W;
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                const double* row = col + ((c * k + kh) * k + kw) * OH * OW;
                for (int64_t oh = 0; oh < OH; ++oh) {
                    const int64_t ih = oh * stride - padding + kh;
                    if (ih < 0 || ih >= H) continue;
                    double* dst = xc + ih * W;
                    const double* src = row + oh * OW;
                    for (int64_t ow = 0; ow < OW; ++ow) {
                        const int64_t iw = ow * stride - padding + kw;
                        if (iw >= 0 && iw < W) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
    check_conv_args(x, w, b, stride, padding);
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Cout = w.dim(0);
    const int k = static_cast<int>(w.dim(2));
    const int64_t OH = conv_out_extent(H, k, stride, padding);
    const int64_t OW = conv_out_extent(W, k, stride, padding);
    const int64_t ckk = C * k * k, N = OH * OW;

    Tensor out({B, Cout, OH, OW});
    std::vector<double> col(static_cast<size_t>(ckk * N));
    for (int64_t bi = 0; bi < B; ++bi) {
        im2col(x.data() + bi * C * H * W, C, H, W, k, stride, padding, OH, OW, col.data());
        double* o = out.data() + bi * Cout * N;
        gemm(w.data(), col.data(), o, Cout, ckk, N, false);
        parallel_for(Cout, [&](int64_t c0, int64_t c1) {
            for (int64_t oc = c0; oc < c1; ++oc) {
                const double bias = b[oc];
                double* oo = o + oc * N;
                for (int64_t n = 0; n < N; ++n) oo[n] += bias;
            }
        });
    }
    return out;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, int stride,
                     int padding, Tensor* grad_x, Tensor* grad_w, Tensor* grad_b) {
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Cout = w.dim(0);
    const int k = static_cast<int>(w.dim(2));
    const int64_t OH = conv_out_extent(H, k, stride, padding);
    const int64_t OW = conv_out_extent(W, k, stride, padding);
    const int64_t ckk = C * k * k, N = OH * OW;
    if (grad_out.dim(0) != B || grad_out.dim(1) != Cout || grad_out.dim(2) != OH ||
        grad_out.dim(3) != OW)
        throw DimensionError("conv2d_backward grad_out shape mismatch " + grad_out.shape_str());

    if (grad_b) {
        if (grad_b->numel() != Cout) *grad_b = Tensor({Cout});
        parallel_for(Cout, [&](int64_t c0, int64_t c1) {
            for (int64_t oc = c0; oc < c1; ++oc) {
                double s = 0.0;
                for (int64_t bi = 0; bi < B; ++bi) {
                    const double* g = grad_out.data() + (bi * Cout + oc) * N;
                    for (int64_t n = 0; n < N; ++n) s += g[n];
                }
                (*grad_b)[oc] += s;
            }
        });
    }
    if (grad_w) {
        if (!grad_w->same_shape(w)) *grad_w = Tensor(w.shape());
        std::vector<double> col(static_cast<size_t>(ckk * N));
        for (int64_t bi = 0; bi < B; ++bi) {
            im2col(x.data() + bi * C * H * W, C, H, W, k, stride, padding, OH, OW, col.data());
            gemm_abt(grad_out.data() + bi * Cout * N, col.data(), grad_w->data(), Cout, N, ckk,
                     true);
        }
    }
    if (grad_x) {
        if (!grad_x->same_shape(x)) *grad_x = Tensor(x.shape());
        std::vector<double> gcol(static_cast<size_t>(ckk * N));
        for (int64_t bi = 0; bi < B; ++bi) {
            gemm_atb(w.data(), grad_out.data() + bi * Cout * N, gcol.data(), Cout, ckk, N, false);
            col2im(gcol.data(), C, H, W, k, stride, padding, OH, OW,
                   grad_x->data() + bi * C * H * W);
        }
    }
}

// ---- maxpool2d --------------------------------------------------------------

Tensor maxpool2d(const Tensor& x, int kernel, int stride, std::vector<int64_t>* argmax) {
    if (x.ndim() != 4) throw DimensionError("maxpool2d expects (B,C,H,W)");
    if (kernel < 1 || stride < 1) throw DimensionError("maxpool2d kernel/stride must be >= 1");
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (kernel > H || kernel > W)
        throw DimensionError("maxpool2d kernel " + std::to_string(kernel) +
                             " exceeds input extent of " + x.shape_str());
    const int64_t OH = (H - kernel) / stride + 1;
    const int64_t OW = (W - kernel) / stride + 1;

    Tensor out({B, C, OH, OW});
    if (argmax) argmax->assign(static_cast<size_t>(out.numel()), 0);
    parallel_for(B * C, [&](int64_t p0, int64_t p1) {
        for (int64_t p = p0; p < p1; ++p) {
            const double* xp = x.data() + p * H * W;
            double* op = out.data() + p * OH * OW;
            for (int64_t oh = 0; oh < OH; ++oh) {
                for (int64_t ow = 0; ow < OW; ++ow) {
                    const int64_t h0 = oh * stride, w0 = ow * stride;
                    double best = xp[h0 * W + w0];
                    int64_t best_idx = h0 * W + w0;
                    for (int kh = 0; kh < kernel; ++kh)
                        for (int kw = 0; kw < kernel; ++kw) {
                            const int64_t idx = (h0 + kh) * W + (w0 + kw);
                            if (xp[idx] > best) {
                                best = xp[idx];
                                best_idx = idx;
                            }
                        }
                    op[oh * OW + ow] = best;
                    if (argmax)
                        (*argmax)[static_cast<size_t>(p * OH * OW + oh * OW + ow)] =
                            p * H * W + best_idx;
                }
            }
        }
    });
    return out;
}

Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<int64_t>& input_shape,
                          const std::vector<int64_t>& argmax) {
    Tensor gx(input_shape, 0.0);
    const int64_t B = grad_out.dim(0), C = grad_out.dim(1);
    const int64_t plane_out = grad_out.dim(2) * grad_out.dim(3);
    // planes are disjoint in the input, so per-plane scatter-add is safe
    parallel_for(B * C, [&](int64_t p0, int64_t p1) {
        for (int64_t p = p0; p < p1; ++p)
            for (int64_t n = 0; n < plane_out; ++n) {
                const int64_t o = p * plane_out + n;
                gx[argmax[static_cast<size_t>(o)]] += grad_out[o];
            }
    });
    return gx;
}

// ---- linear -----------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1)
        throw DimensionError("linear expects x(B,F), w(Fout,F), b(Fout)");
    if (x.dim(1) != w.dim(1))
        throw DimensionError("linear feature count " + std::to_string(x.dim(1)) +
                             " does not match weight input dim " + std::to_string(w.dim(1)));
    if (b.dim(0) != w.dim(0)) throw DimensionError("linear bias length must equal Fout");
    const int64_t B = x.dim(0), F = x.dim(1), Fo = w.dim(0);
    Tensor out({B, Fo});
    gemm_abt(x.data(), w.data(), out.data(), B, F, Fo, false);
    for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t j = 0; j < Fo; ++j) out.at(bi, j) += b[j];
    return out;
}

void linear_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out, Tensor* grad_x,
                     Tensor* grad_w, Tensor* grad_b) {
    const int64_t B = x.dim(0), F = x.dim(1), Fo = w.dim(0);
    if (grad_out.dim(0) != B || grad_out.dim(1) != Fo)
        throw DimensionError("linear_backward grad_out shape mismatch");
    if (grad_x) {
        if (!grad_x->same_shape(x)) *grad_x = Tensor(x.shape());
        gemm(grad_out.data(), w.data(), grad_x->data(), B, Fo, F, true);
    }
    if (grad_w) {
        if (!grad_w->same_shape(w)) *grad_w = Tensor(w.shape());
        gemm_atb(grad_out.data(), x.data(), grad_w->data(), B, Fo, F, true);
    }
    if (grad_b) {
        if (grad_b->numel() != Fo) *grad_b = Tensor({Fo});
        for (int64_t bi = 0; bi < B; ++bi)
            for (int64_t j = 0; j < Fo; ++j) (*grad_b)[j] += grad_out.at(bi, j);
    }
}

// ---- activations ------------------------------------------------------------

Tensor leaky_relu(const Tensor& x, double slope) {
    Tensor y(x.shape());
    parallel_for(x.numel(), [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
    });
    return y;
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out, double slope) {
    Tensor g(x.shape());
    parallel_for(x.numel(), [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) g[i] = grad_out[i] * (x[i] > 0.0 ? 1.0 : slope);
    });
    return g;
}

double sigmoid_scalar(double x) {
    double y;
    if (x >= 0.0) {
        y = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        y = e / (1.0 + e);
    }
    // keep the output strictly inside (0,1) even where doubles round to the ends
    if (y >= 1.0) y = std::nextafter(1.0, 0.0);
    if (y <= 0.0) y = std::nextafter(0.0, 1.0);
    return y;
}

Tensor sigmoid(const Tensor& x) {
    Tensor y(x.shape());
    parallel_for(x.numel(), [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) y[i] = sigmoid_scalar(x[i]);
    });
    return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
    Tensor g(y.shape());
    parallel_for(y.numel(), [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i) g[i] = grad_out[i] * y[i] * (1.0 - y[i]);
    });
    return g;
}

// ---- concat -----------------------------------------------------------------

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 4 || b.ndim() != 4)
        throw DimensionError("concat_channels expects 4-d tensors");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw DimensionError("concat_channels batch/spatial mismatch: " + a.shape_str() + " vs " +
                             b.shape_str());
    const int64_t B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), HW = a.dim(2) * a.dim(3);
    Tensor out({B, Ca + Cb, a.dim(2), a.dim(3)});
    for (int64_t bi = 0; bi < B; ++bi) {
        std::memcpy(out.data() + bi * (Ca + Cb) * HW, a.data() + bi * Ca * HW,
                    static_cast<size_t>(Ca * HW) * sizeof(double));
        std::memcpy(out.data() + (bi * (Ca + Cb) + Ca) * HW, b.data() + bi * Cb * HW,
                    static_cast<size_t>(Cb * HW) * sizeof(double));
    }
    return out;
}

void concat_channels_backward(const Tensor& grad_out, int64_t c_a, Tensor* grad_a,
                              Tensor* grad_b) {
    const int64_t B = grad_out.dim(0), C = grad_out.dim(1);
    const int64_t H = grad_out.dim(2), W = grad_out.dim(3), HW = H * W;
    const int64_t c_b = C - c_a;
    if (grad_a) *grad_a = Tensor({B, c_a, H, W});
    if (grad_b) *grad_b = Tensor({B, c_b, H, W});
    for (int64_t bi = 0; bi < B; ++bi) {
        if (grad_a)
            std::memcpy(grad_a->data() + bi * c_a * HW, grad_out.data() + bi * C * HW,
                        static_cast<size_t>(c_a * HW) * sizeof(double));
        if (grad_b)
            std::memcpy(grad_b->data() + bi * c_b * HW, grad_out.data() + (bi * C + c_a) * HW,
                        static_cast<size_t>(c_b * HW) * sizeof(double));
    }
}

Tensor slice_channels(const Tensor& x, int64_t c_begin, int64_t c_end) {
    if (x.ndim() != 4 || c_begin < 0 || c_end > x.dim(1) || c_begin >= c_end)
        throw DimensionError("slice_channels range invalid");
    const int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor out({B, c_end - c_begin, x.dim(2), x.dim(3)});
    for (int64_t bi = 0; bi < B; ++bi)
        std::memcpy(out.data() + bi * (c_end - c_begin) * HW,
                    x.data() + (bi * C + c_begin) * HW,
                    static_cast<size_t>((c_end - c_begin) * HW) * sizeof(double));
    return out;
}

// ---- optimizer --------------------------------------------------------------

void sgd_step(const std::vector<ParamPtr>& params, double lr, double momentum) {
    for (const auto& p : params) {
        if (!p->grad.all_finite())
            throw TrainError("non-finite gradient in parameter '" + p->name + "'");
        const int64_t n = p->value.numel();
        double* v = p->value.data();
        double* g = p->grad.data();
        double* m = p->momentum_buf.data();
        parallel_for(n, [&](int64_t i0, int64_t i1) {
            for (int64_t i = i0; i < i1; ++i) {
                m[i] = momentum * m[i] + g[i];
                v[i] -= lr * m[i];
                g[i] = 0.0;
            }
        });
    }
}

}  // namespace jnn
