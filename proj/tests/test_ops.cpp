#include <limits>
#include <random>

#include "doctest.h"
#include "jnn/ops.hpp"
#include "jnn/parallel.hpp"

using namespace jnn;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = d(rng);
    return t;
}

// Independent six-nested-loop convolution, transcribed from the definition.
Tensor naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Cout = w.dim(0);
    const int64_t k = w.dim(2);
    const int64_t OH = (H + 2 * padding - k) / stride + 1;
    const int64_t OW = (W + 2 * padding - k) / stride + 1;
    Tensor out({B, Cout, OH, OW});
    for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t oc = 0; oc < Cout; ++oc)
            for (int64_t oh = 0; oh < OH; ++oh)
                for (int64_t ow = 0; ow < OW; ++ow) {
                    double s = b[oc];
                    for (int64_t ic = 0; ic < C; ++ic)
                        for (int64_t kh = 0; kh < k; ++kh)
                            for (int64_t kw = 0; kw < k; ++kw) {
                                const int64_t ih = oh * stride - padding + kh;
                                const int64_t iw = ow * stride - padding + kw;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                s += x.at(bi, ic, ih, iw) * w.at(oc, ic, kh, kw);
                            }
                    out.at(bi, oc, oh, ow) = s;
                }
    return out;
}

Tensor naive_maxpool(const Tensor& x, int k, int stride) {
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t OH = (H - k) / stride + 1, OW = (W - k) / stride + 1;
    Tensor out({B, C, OH, OW});
    for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t oh = 0; oh < OH; ++oh)
                for (int64_t ow = 0; ow < OW; ++ow) {
                    double best = -1e300;
                    for (int kh = 0; kh < k; ++kh)
                        for (int kw = 0; kw < k; ++kw)
                            best = std::max(best,
                                            x.at(bi, c, oh * stride + kh, ow * stride + kw));
                    out.at(bi, c, oh, ow) = best;
                }
    return out;
}

Tensor naive_linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int64_t B = x.dim(0), F = x.dim(1), Fo = w.dim(0);
    Tensor out({B, Fo});
    for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t j = 0; j < Fo; ++j) {
            double s = b[j];
            for (int64_t f = 0; f < F; ++f) s += x.at(bi, f) * w.at(j, f);
            out.at(bi, j) = s;
        }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("conv2d identity kernel") {
    Tensor x({1, 1, 4, 4});
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = 0.5 * i - 3.0;
    Tensor w({1, 1, 1, 1});
    w[0] = 1.0;
    Tensor b({1});
    const Tensor y = conv2d(x, w, b, 1, 0);
    CHECK(max_abs_diff(x, y) == 0.0);
}

TEST_CASE("conv2d all-ones 3x3 sums to 9") {
    Tensor x({1, 1, 3, 3}, 1.0);
    Tensor w({1, 1, 3, 3}, 1.0);
    Tensor b({1});
    const Tensor y = conv2d(x, w, b, 1, 0);
    CHECK(y.numel() == 1);
    CHECK(y[0] == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("conv2d matches naive loop oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 4; ++trial) {
        const int stride = 1 + trial % 2;
        const int pad = trial % 3;
        const Tensor x = random_tensor({2, 3, 8, 8}, rng);
        const Tensor w = random_tensor({4, 3, 3, 3}, rng);
        const Tensor b = random_tensor({4}, rng);
        CHECK(max_abs_diff(conv2d(x, w, b, stride, pad), naive_conv2d(x, w, b, stride, pad)) <
              1e-12);
    }
}

TEST_CASE("conv2d channel mismatch raises dimension error") {
    Tensor x({1, 3, 8, 8});
    Tensor w({4, 2, 3, 3});
    Tensor b({4});
    CHECK_THROWS_AS(conv2d(x, w, b, 1, 1), DimensionError);
}

TEST_CASE("conv2d empty output raises dimension error") {
    Tensor x({1, 1, 2, 2});
    Tensor w({1, 1, 5, 5});
    Tensor b({1});
    CHECK_THROWS_AS(conv2d(x, w, b, 1, 0), DimensionError);
}

TEST_CASE("maxpool constant input stays constant") {
    Tensor x({1, 2, 6, 6}, 3.25);
    const Tensor y = maxpool2d(x, 2, 2);
    for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == 3.25);
}

TEST_CASE("maxpool single window picks the max") {
    Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    const Tensor y = maxpool2d(x, 2, 2);
    CHECK(y.numel() == 1);
    CHECK(y[0] == 4.0);
}

TEST_CASE("maxpool matches naive oracle") {
    std::mt19937_64 rng(12);
    const Tensor x = random_tensor({1, 2, 6, 6}, rng);
    CHECK(max_abs_diff(maxpool2d(x, 2, 2), naive_maxpool(x, 2, 2)) == 0.0);
    const Tensor x2 = random_tensor({2, 3, 7, 9}, rng);
    CHECK(max_abs_diff(maxpool2d(x2, 3, 2), naive_maxpool(x2, 3, 2)) == 0.0);
}

TEST_CASE("maxpool kernel larger than input raises") {
    Tensor x({1, 1, 2, 2});
    CHECK_THROWS_AS(maxpool2d(x, 3, 1), DimensionError);
}

TEST_CASE("maxpool backward routes to first max on ties") {
    Tensor x({1, 1, 2, 2}, 1.0);  // all equal -> first index wins
    std::vector<int64_t> argmax;
    maxpool2d(x, 2, 2, &argmax);
    REQUIRE(argmax.size() == 1);
    CHECK(argmax[0] == 0);
    Tensor g({1, 1, 1, 1}, 2.0);
    const Tensor gx = maxpool2d_backward(g, x.shape(), argmax);
    CHECK(gx[0] == 2.0);
    CHECK(gx[1] == 0.0);
}

TEST_CASE("linear identity and bias broadcast") {
    Tensor x = Tensor::from_data({1, 3}, {1.0, -2.0, 0.5});
    Tensor w({3, 3});
    for (int i = 0; i < 3; ++i) w.at(i, i) = 1.0;
    Tensor b({3});
    const Tensor y = linear(x, w, b);
    CHECK(max_abs_diff(x, y) == 0.0);

    Tensor w0({2, 3});
    Tensor b2 = Tensor::from_data({2}, {4.0, -1.0});
    const Tensor y2 = linear(x, w0, b2);
    CHECK(y2.at(0, 0) == 4.0);
    CHECK(y2.at(0, 1) == -1.0);
}

TEST_CASE("linear matches naive oracle") {
    std::mt19937_64 rng(13);
    const Tensor x = random_tensor({3, 7}, rng);
    const Tensor w = random_tensor({5, 7}, rng);
    const Tensor b = random_tensor({5}, rng);
    CHECK(max_abs_diff(linear(x, w, b), naive_linear(x, w, b)) < 1e-12);
}

TEST_CASE("linear dimension mismatch raises") {
    Tensor x({1, 3});
    Tensor w({2, 4});
    Tensor b({2});
    CHECK_THROWS_AS(linear(x, w, b), DimensionError);
}

TEST_CASE("activation point values") {
    Tensor x = Tensor::from_data({1, 1}, {0.0});
    CHECK(sigmoid(x)[0] == doctest::Approx(0.5).epsilon(1e-15));
    Tensor xn = Tensor::from_data({1, 1}, {-1.0});
    CHECK(leaky_relu(xn, 0.1)[0] == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(leaky_relu(xn, 0.0)[0] == 0.0);
}

TEST_CASE("sigmoid output strictly inside (0,1)") {
    Tensor x = Tensor::from_data({1, 4}, {-700.0, -30.0, 30.0, 700.0});
    const Tensor y = sigmoid(x);
    for (int64_t i = 0; i < y.numel(); ++i) {
        CHECK(y[i] > 0.0);
        CHECK(y[i] < 1.0);
    }
}

TEST_CASE("concat keeps operands in order and round-trips") {
    Tensor a({2, 1, 3, 3}, 1.5);
    Tensor b({2, 2, 3, 3}, -2.5);
    const Tensor c = concat_channels(a, b);
    CHECK(c.dim(1) == 3);
    CHECK(c.at(0, 0, 1, 1) == 1.5);
    CHECK(c.at(0, 1, 1, 1) == -2.5);
    CHECK(c.at(1, 2, 2, 2) == -2.5);

    std::mt19937_64 rng(14);
    const Tensor ra = random_tensor({2, 3, 4, 5}, rng);
    const Tensor rb = random_tensor({2, 2, 4, 5}, rng);
    const Tensor rc = concat_channels(ra, rb);
    CHECK(max_abs_diff(slice_channels(rc, 0, 3), ra) == 0.0);
    CHECK(max_abs_diff(slice_channels(rc, 3, 5), rb) == 0.0);
}

TEST_CASE("concat spatial mismatch raises dimension error") {
    Tensor a({1, 1, 4, 4});
    Tensor b({1, 1, 5, 4});
    CHECK_THROWS_AS(concat_channels(a, b), DimensionError);
}

TEST_CASE("concat backward splits gradients") {
    Tensor g({1, 3, 2, 2}, 1.0);
    Tensor ga, gb;
    concat_channels_backward(g, 1, &ga, &gb);
    CHECK(ga.shape() == std::vector<int64_t>{1, 1, 2, 2});
    CHECK(gb.shape() == std::vector<int64_t>{1, 2, 2, 2});
    for (int64_t i = 0; i < ga.numel(); ++i) CHECK(ga[i] == 1.0);
}

TEST_CASE("sgd momentum recurrence") {
    auto p = std::make_shared<Parameter>("p", Tensor({1}, 10.0));

    SUBCASE("momentum 0, lr 1 decreases by exactly g") {
        p->grad[0] = 2.0;
        sgd_step({p}, 1.0, 0.0);
        CHECK(p->value[0] == 8.0);
        CHECK(p->grad[0] == 0.0);  // zeroed after the step
    }
    SUBCASE("two steps, momentum 0.9, constant grad: total decrease g + 1.9g") {
        p->grad[0] = 1.0;
        sgd_step({p}, 1.0, 0.9);
        p->grad[0] = 1.0;
        sgd_step({p}, 1.0, 0.9);
        CHECK(p->value[0] == doctest::Approx(10.0 - 2.9).epsilon(1e-15));
    }
    SUBCASE("zero grad leaves value unchanged") {
        sgd_step({p}, 0.5, 0.9);
        CHECK(p->value[0] == 10.0);
    }
    SUBCASE("non-finite gradient names the parameter") {
        p->grad[0] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_WITH_AS(sgd_step({p}, 0.1, 0.9), doctest::Contains("'p'"), TrainError);
    }
}

TEST_CASE("ops keep finite inputs finite") {
    std::mt19937_64 rng(15);
    const Tensor x = random_tensor({2, 3, 8, 8}, rng, 3.0);
    const Tensor w = random_tensor({4, 3, 3, 3}, rng, 3.0);
    const Tensor b = random_tensor({4}, rng, 3.0);
    CHECK(conv2d(x, w, b, 1, 1).all_finite());
    CHECK(maxpool2d(x, 2, 2).all_finite());
    CHECK(sigmoid(x).all_finite());
    CHECK(leaky_relu(x, 0.1).all_finite());
}

TEST_CASE("results are identical across thread counts") {
    std::mt19937_64 rng(16);
    const Tensor x = random_tensor({2, 3, 9, 9}, rng);
    const Tensor w = random_tensor({5, 3, 3, 3}, rng);
    const Tensor b = random_tensor({5}, rng);
    set_num_threads(1);
    const Tensor y1 = conv2d(x, w, b, 2, 1);
    set_num_threads(4);
    const Tensor y4 = conv2d(x, w, b, 2, 1);
    set_num_threads(2);
    CHECK(max_abs_diff(y1, y4) == 0.0);
}
