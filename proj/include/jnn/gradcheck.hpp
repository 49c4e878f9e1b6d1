#pragma once

#include <functional>
#include <random>

#include "jnn/tensor.hpp"

namespace jnn {

/// Compares an analytic gradient against central finite differences
/// (f(x+eps) - f(x-eps)) / (2*eps). `f` must re-evaluate the loss using the
/// current contents of `x`; `analytic` holds d f / d x. Probes up to
/// `max_probes` randomly chosen elements (all of them when the tensor is
/// small) and returns the worst relative error.
double grad_check(const std::function<double()>& f, Tensor& x, const Tensor& analytic, double eps,
                  int max_probes, std::mt19937_64& rng);

/// Relative error with a floor so that near-zero gradient pairs compare by
/// absolute difference.
double rel_error(double a, double b);

}  // namespace jnn
