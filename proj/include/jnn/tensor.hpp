#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "jnn/error.hpp"

namespace jnn {

/// Dense row-major tensor of doubles. Shape order for images is
/// (batch, channels, height, width).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape, double fill = 0.0);

    static Tensor from_data(std::vector<int64_t> shape, std::vector<double> data);

    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
    int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    const std::vector<int64_t>& shape() const { return shape_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // 4-d accessor (b, c, h, w)
    double& at(int64_t b, int64_t c, int64_t h, int64_t w) {
        return data_[static_cast<size_t>(((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    double at(int64_t b, int64_t c, int64_t h, int64_t w) const {
        return data_[static_cast<size_t>(((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    // 2-d accessor (row, col)
    double& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    double at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    /// Returns a tensor with the given shape sharing no storage; numel must match.
    Tensor reshaped(std::vector<int64_t> shape) const;

    void fill(double v);
    bool all_finite() const;

    std::string shape_str() const;

private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
};

/// Trainable tensor: value plus gradient and momentum buffers of the same shape.
/// Branches that share weights hold the same Parameter object.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor momentum_buf;

    Parameter(std::string n, Tensor v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(value.shape(), 0.0),
          momentum_buf(value.shape(), 0.0) {}

    void zero_grad() { grad.fill(0.0); }
};

using ParamPtr = std::shared_ptr<Parameter>;

}  // namespace jnn
