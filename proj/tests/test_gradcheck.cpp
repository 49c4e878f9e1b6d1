#include <random>

#include "doctest.h"
#include "jnn/gradcheck.hpp"
#include "jnn/losses.hpp"
#include "jnn/net.hpp"
#include "jnn/ops.hpp"

using namespace jnn;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = d(rng);
    return t;
}

// Weighted sum makes the scalar loss sensitive to every output element.
double weighted_sum(const Tensor& y, const Tensor& coeff) {
    double s = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) s += y[i] * coeff[i];
    return s;
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
    std::mt19937_64 rng(21);
    for (int inst = 0; inst < 10; ++inst) {
        Tensor x = random_tensor({1, 2, 6, 6}, rng);
        Tensor w = random_tensor({3, 2, 3, 3}, rng);
        Tensor b = random_tensor({3}, rng);
        const int stride = 1 + inst % 2, pad = inst % 2;
        const Tensor coeff = random_tensor(conv2d(x, w, b, stride, pad).shape(), rng);

        Tensor gx, gw, gb;
        conv2d_backward(x, w, coeff, stride, pad, &gx, &gw, &gb);
        auto f = [&] { return weighted_sum(conv2d(x, w, b, stride, pad), coeff); };
        CHECK(grad_check(f, x, gx, 1e-5, 10, rng) < 1e-5);
        CHECK(grad_check(f, w, gw, 1e-5, 10, rng) < 1e-5);
        CHECK(grad_check(f, b, gb, 1e-5, 3, rng) < 1e-5);
    }
}

TEST_CASE("linear gradients match finite differences") {
    std::mt19937_64 rng(22);
    for (int inst = 0; inst < 10; ++inst) {
        Tensor x = random_tensor({2, 5}, rng);
        Tensor w = random_tensor({4, 5}, rng);
        Tensor b = random_tensor({4}, rng);
        const Tensor coeff = random_tensor({2, 4}, rng);
        Tensor gx, gw, gb;
        linear_backward(x, w, coeff, &gx, &gw, &gb);
        auto f = [&] { return weighted_sum(linear(x, w, b), coeff); };
        CHECK(grad_check(f, x, gx, 1e-5, 10, rng) < 1e-6);
        CHECK(grad_check(f, w, gw, 1e-5, 10, rng) < 1e-6);
        CHECK(grad_check(f, b, gb, 1e-5, 4, rng) < 1e-6);
    }
}

TEST_CASE("maxpool gradient matches finite differences") {
    std::mt19937_64 rng(23);
    for (int inst = 0; inst < 10; ++inst) {
        Tensor x = random_tensor({1, 2, 6, 6}, rng);
        const Tensor coeff = random_tensor({1, 2, 3, 3}, rng);
        std::vector<int64_t> argmax;
        maxpool2d(x, 2, 2, &argmax);
        const Tensor gx = maxpool2d_backward(coeff, x.shape(), argmax);
        auto f = [&] { return weighted_sum(maxpool2d(x, 2, 2), coeff); };
        CHECK(grad_check(f, x, gx, 1e-6, 16, rng) < 1e-4);
    }
}

TEST_CASE("activation gradients match finite differences") {
    std::mt19937_64 rng(24);
    for (int inst = 0; inst < 10; ++inst) {
        Tensor x = random_tensor({3, 7}, rng, 2.0);
        // keep probes away from the leaky-relu kink
        for (int64_t i = 0; i < x.numel(); ++i)
            if (std::fabs(x[i]) < 1e-3) x[i] = 0.5;
        const Tensor coeff = random_tensor({3, 7}, rng);

        const Tensor gs = sigmoid_backward(sigmoid(x), coeff);
        auto fs = [&] { return weighted_sum(sigmoid(x), coeff); };
        CHECK(grad_check(fs, x, gs, 1e-5, 12, rng) < 1e-6);

        const Tensor gl = leaky_relu_backward(x, coeff, 0.1);
        auto fl = [&] { return weighted_sum(leaky_relu(x, 0.1), coeff); };
        CHECK(grad_check(fl, x, gl, 1e-5, 12, rng) < 1e-6);
    }
}

TEST_CASE("concat gradient of sum w.r.t. first operand is all ones") {
    Tensor a({1, 2, 3, 3}, 0.7);
    Tensor b({1, 1, 3, 3}, -0.2);
    Tensor g(concat_channels(a, b).shape(), 1.0);
    Tensor ga, gb;
    concat_channels_backward(g, 2, &ga, &gb);
    for (int64_t i = 0; i < ga.numel(); ++i) CHECK(ga[i] == 1.0);
    for (int64_t i = 0; i < gb.numel(); ++i) CHECK(gb[i] == 1.0);
}

TEST_CASE("bce pair loss gradient matches finite differences") {
    std::mt19937_64 rng(25);
    std::uniform_real_distribution<double> pd(0.1, 0.9);
    for (int inst = 0; inst < 10; ++inst) {
        std::vector<double> p(4), y{1, 0, 1, 0};
        for (auto& v : p) v = pd(rng);
        std::vector<double> grad;
        bce_pair_loss(p, y, &grad);
        Tensor pt = Tensor::from_data({4}, p);
        Tensor gt = Tensor::from_data({4}, grad);
        auto f = [&] {
            std::vector<double> pv(pt.data(), pt.data() + 4);
            return bce_pair_loss(pv, y);
        };
        CHECK(grad_check(f, pt, gt, 1e-6, 4, rng) < 1e-6);
    }
}

TEST_CASE("full recognizer forward plus bce matches finite differences at toy scale") {
    // toy-sized recognizer: same layer table, 64x64 inputs, desk channels
    std::mt19937_64 rng(26);
    NetSpec spec = recognizer_spec(Preset::Desk, 0.1, 64);
    JointModel model(spec, 333);
    const Tensor query = random_tensor({1, 3, 64, 64}, rng, 0.5);
    const Tensor target = random_tensor({1, 3, 64, 64}, rng, 0.5);
    const std::vector<double> label{1.0};

    auto loss_fn = [&] {
        const Tensor p = model.forward(query, target);
        return bce_pair_loss({p[0]}, label);
    };

    // analytic gradients
    const Tensor p = model.forward(query, target);
    std::vector<double> gp;
    bce_pair_loss({p[0]}, label, &gp);
    Tensor g({1, 1});
    g[0] = gp[0];
    model.backward(g);

    // probe a few parameters spread across the depth
    const auto& params = model.parameters();
    std::vector<size_t> probe = {0, 2, 6, 10, params.size() - 2, params.size() - 1};
    for (size_t pi : probe) {
        Parameter& par = *params[pi];
        Tensor analytic = par.grad;
        const double err = grad_check(loss_fn, par.value, analytic, 1e-5, 4, rng);
        INFO("parameter ", par.name);
        CHECK(err < 1e-4);
    }
}
