#include "jnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jnn {

double rel_error(double a, double b) {
    const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
    return std::fabs(a - b) / denom;
}

double grad_check(const std::function<double()>& f, Tensor& x, const Tensor& analytic, double eps,
                  int max_probes, std::mt19937_64& rng) {
    if (!x.same_shape(analytic))
        throw DimensionError("grad_check: analytic gradient shape mismatch");
    const int64_t n = x.numel();
    std::vector<int64_t> idx;
    if (n <= max_probes) {
        idx.resize(static_cast<size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
    } else {
        std::uniform_int_distribution<int64_t> pick(0, n - 1);
        for (int i = 0; i < max_probes; ++i) idx.push_back(pick(rng));
    }
    double worst = 0.0;
    for (int64_t i : idx) {
        const double saved = x[i];
        x[i] = saved + eps;
        const double fp = f();
        x[i] = saved - eps;
        const double fm = f();
        x[i] = saved;
        const double numeric = (fp - fm) / (2.0 * eps);
        worst = std::max(worst, rel_error(analytic[i], numeric));
    }
    return worst;
}

}  // namespace jnn
