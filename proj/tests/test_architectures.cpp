#include <random>
#include <set>

#include "doctest.h"
#include "jnn/net.hpp"
#include "jnn/ops.hpp"

using namespace jnn;

namespace {

Tensor random_input(int c, int h, int w, uint64_t seed, double scale = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.0, scale);
    Tensor t({1, c, h, w});
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = d(rng);
    return t;
}

const ParamPtr& find_param(const JointModel& m, const std::string& name) {
    for (const auto& p : m.parameters())
        if (p->name == name) return p;
    throw std::runtime_error("missing parameter " + name);
}

int shape_index(const NetSpec& spec, const std::string& name) {
    for (size_t i = 0; i < spec.layers.size(); ++i)
        if (spec.layers[i].name == name) return static_cast<int>(i);
    throw std::runtime_error("missing layer " + name);
}

}  // namespace

TEST_CASE("recognizer table: conv1 is 64 filters 11x11/4, joint1 fuses 128->64") {
    const NetSpec spec = recognizer_spec(Preset::Paper);
    JointModel model(spec, 1);
    const auto& conv1 = find_param(model, "conv1.w");
    CHECK(conv1->value.shape() == std::vector<int64_t>{64, 3, 11, 11});
    const auto& joint1 = find_param(model, "joint1.w");
    CHECK(joint1->value.shape() == std::vector<int64_t>{64, 128, 3, 3});
    const auto& joint2 = find_param(model, "joint2.w");
    CHECK(joint2->value.shape() == std::vector<int64_t>{192, 384, 5, 5});
}

TEST_CASE("recognizer has 11 weight/bias pairs, all distinct") {
    JointModel model(recognizer_spec(Preset::Paper), 1);
    const auto& params = model.parameters();
    CHECK(params.size() == 22);  // 5 conv + 3 joint + 3 linear
    std::set<const Parameter*> seen;
    for (const auto& p : params) seen.insert(p.get());
    CHECK(seen.size() == params.size());
}

TEST_CASE("branch instances alias one parameter object") {
    JointModel model(recognizer_spec(Preset::Desk), 1);
    // conv1 is held by the params list plus one module instance per branch
    const auto& shared = find_param(model, "conv1.w");
    CHECK(shared.use_count() >= 3);
    // the head runs once, only the main branch holds it
    const auto& head_only = find_param(model, "fc3.w");
    CHECK(head_only.use_count() == 2);

    // parameter objects survive an optimizer step unchanged in identity
    const Parameter* addr = shared.get();
    for (const auto& p : model.parameters()) p->grad.fill(0.01);
    sgd_step(model.parameters(), 0.1, 0.9);
    CHECK(find_param(model, "conv1.w").get() == addr);
}

TEST_CASE("recognizer paper scale: head (1,1), P in (0,1), oracle agrees everywhere") {
    const NetSpec spec = recognizer_spec(Preset::Paper);
    JointModel model(spec, 9);
    model.set_training(false);
    const Tensor q = random_input(3, 224, 224, 41);
    const Tensor t = random_input(3, 224, 224, 42);
    const Tensor p = model.forward(q, t);
    CHECK(p.shape() == std::vector<int64_t>{1, 1});
    CHECK(p[0] > 0.0);
    CHECK(p[0] < 1.0);

    const auto oracle = propagate_shapes(spec);
    const auto& actual = model.last_shapes();
    REQUIRE(oracle.size() == actual.size());
    for (size_t i = 0; i < oracle.size(); ++i) {
        INFO("layer ", i, " (", spec.layers[i].name, ")");
        CHECK(oracle[i].flat == actual[i].flat);
        if (oracle[i].flat) {
            CHECK(oracle[i].features == actual[i].features);
        } else {
            CHECK(oracle[i].c == actual[i].c);
            CHECK(oracle[i].h == actual[i].h);
            CHECK(oracle[i].w == actual[i].w);
        }
    }
}

TEST_CASE("detector paper scale: joint1 at 112x112 and head (B*5,14,14)") {
    const NetSpec spec = detector_spec(Preset::Paper, parse_mask("1,2,4"), 5);
    const auto shapes = propagate_shapes(spec);
    const int j1 = shape_index(spec, "joint1");
    CHECK(shapes[static_cast<size_t>(j1)].h == 112);
    CHECK(shapes[static_cast<size_t>(j1)].w == 112);
    CHECK(shapes[static_cast<size_t>(j1)].c == 64);
    const ShapeInfo& head = shapes.back();
    CHECK(head.c == 25);
    CHECK(head.h == 14);
    CHECK(head.w == 14);
}

TEST_CASE("detector desk scale: forward head (1,B*5,7,7), deterministic, oracle agrees") {
    const NetSpec spec = detector_spec(Preset::Desk, parse_mask("1,2,4"), 5);
    JointModel model(spec, 5);
    model.set_training(false);
    const Tensor q = random_input(3, 56, 56, 51);
    const Tensor t = random_input(3, 112, 112, 52);
    const Tensor h1 = model.forward(q, t);
    CHECK(h1.shape() == std::vector<int64_t>{1, 25, 7, 7});

    const Tensor h2 = model.forward(q, t);
    for (int64_t i = 0; i < h1.numel(); ++i) CHECK(h1[i] == h2[i]);

    const auto oracle = propagate_shapes(spec);
    const auto& actual = model.last_shapes();
    for (size_t i = 0; i < oracle.size(); ++i) {
        CHECK(oracle[i].c == actual[i].c);
        CHECK(oracle[i].h == actual[i].h);
        CHECK(oracle[i].w == actual[i].w);
    }
}

TEST_CASE("detector conv23 emits B*5 filters") {
    for (int b : {3, 5, 7}) {
        JointModel model(detector_spec(Preset::Desk, parse_mask("1,2"), b), 2);
        const auto& w = find_param(model, "conv23.w");
        CHECK(w->value.dim(0) == b * 5);
    }
}

TEST_CASE("detector with mask {1,2,4} owns 26 weight/bias pairs") {
    JointModel model(detector_spec(Preset::Desk, parse_mask("1,2,4"), 5), 3);
    CHECK(model.parameters().size() == 52);  // 23 convs + 3 joints
    JointModel full(detector_spec(Preset::Desk, parse_mask("1,2,3,4,5"), 5), 3);
    CHECK(full.parameters().size() == 56);  // 23 convs + 5 joints
}

TEST_CASE("all ten placement-study masks construct with correct heads") {
    const char* rows[10] = {"1",   "1,2", "1,2,3", "1,2,3,4", "1,2,3,4,5",
                            "1,4", "2,4", "3,4",   "1,2,4",   "1,3,4"};
    for (const char* r : rows) {
        const NetSpec spec = detector_spec(Preset::Desk, parse_mask(r), 5);
        JointModel model(spec, 17);
        const auto shapes = propagate_shapes(spec);
        INFO("mask ", r);
        CHECK(shapes.back().c == 25);
        CHECK(shapes.back().h == 7);
        CHECK(shapes.back().w == 7);
    }
}

TEST_CASE("all-false mask refuses to build") {
    CHECK_THROWS_AS(JointModel(detector_spec(Preset::Desk, parse_mask(""), 5), 1), BuildError);
}

TEST_CASE("channel-arithmetic mismatch names the offending layer") {
    NetSpec spec = detector_spec(Preset::Desk, parse_mask("1,2"), 5);
    // corrupt joint1: output channels that cannot feed the shared backbone
    for (auto& d : spec.layers)
        if (d.name == "joint1") d.out = 24;
    CHECK_THROWS_WITH_AS(JointModel(spec, 1), doctest::Contains("joint1"), BuildError);
}

TEST_CASE("query branch contributes: zeroing the query changes the head") {
    JointModel model(detector_spec(Preset::Desk, parse_mask("1,2,4"), 5), 23);
    const Tensor q = random_input(3, 56, 56, 61);
    const Tensor t = random_input(3, 112, 112, 62);
    const Tensor h = model.forward(q, t);
    const Tensor q0({1, 3, 56, 56}, 0.0);
    const Tensor h0 = model.forward(q0, t);
    double diff = 0.0;
    for (int64_t i = 0; i < h.numel(); ++i) diff = std::max(diff, std::fabs(h[i] - h0[i]));
    CHECK(diff > 0.0);

    // gradient reaches an early shared conv through both branches
    model.forward(q, t);
    Tensor ones({1, 25, 7, 7}, 1.0);
    model.backward(ones);
    const auto& g = find_param(model, "conv1.w")->grad;
    double gmax = 0.0;
    for (int64_t i = 0; i < g.numel(); ++i) gmax = std::max(gmax, std::fabs(g[i]));
    CHECK(gmax > 0.0);
}

TEST_CASE("wrong input resolution raises a dimension error") {
    JointModel model(detector_spec(Preset::Desk, parse_mask("1,2,4"), 5), 3);
    const Tensor bad_q = random_input(3, 60, 60, 7);
    const Tensor t = random_input(3, 112, 112, 8);
    CHECK_THROWS_AS(model.forward(bad_q, t), DimensionError);
    JointModel recog(recognizer_spec(Preset::Desk), 3);
    const Tensor small = random_input(3, 80, 80, 9);
    CHECK_THROWS_AS(recog.forward(small, small), DimensionError);
}

TEST_CASE("paper-scale detector forward matches the oracle at every layer") {
    const NetSpec spec = detector_spec(Preset::Paper, parse_mask("1,2,4"), 5);
    JointModel model(spec, 77);
    model.set_training(false);
    const Tensor q = random_input(3, 224, 224, 71);
    const Tensor t = random_input(3, 448, 448, 72);
    const Tensor head = model.forward(q, t);
    CHECK(head.shape() == std::vector<int64_t>{1, 25, 14, 14});
    const auto oracle = propagate_shapes(spec);
    const auto& actual = model.last_shapes();
    for (size_t i = 0; i < oracle.size(); ++i) {
        INFO("layer ", i, " (", spec.layers[i].name, ")");
        CHECK(oracle[i].c == actual[i].c);
        CHECK(oracle[i].h == actual[i].h);
        CHECK(oracle[i].w == actual[i].w);
    }
}
