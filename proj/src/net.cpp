#include "jnn/net.hpp"

#include <cmath>
#include <sstream>

#include "jnn/ops.hpp"

namespace jnn {

// ---- spec tables ------------------------------------------------------------

namespace {

LayerDef conv_def(std::string name, int out, int k, int stride, int pad) {
    LayerDef d;
    d.op = LayerOp::Conv;
    d.name = std::move(name);
    d.out = out;
    d.k = k;
    d.stride = stride;
    d.pad = pad;
    return d;
}

LayerDef act_def(double slope) {
    LayerDef d;
    d.op = LayerOp::Act;
    d.name = "act";
    d.slope = slope;
    return d;
}

LayerDef pool_def(std::string name, int k, int stride, bool target_only = false) {
    LayerDef d;
    d.op = LayerOp::Pool;
    d.name = std::move(name);
    d.k = k;
    d.stride = stride;
    d.target_only = target_only;
    return d;
}

LayerDef joint_def(int no, int out, int k, int stride, int pad, double slope) {
    LayerDef d;
    d.op = LayerOp::Joint;
    d.name = "joint" + std::to_string(no);
    d.joint_no = no;
    d.out = out;
    d.k = k;
    d.stride = stride;
    d.pad = pad;
    d.slope = slope;
    return d;
}

LayerDef linear_def(std::string name, int out) {
    LayerDef d;
    d.op = LayerOp::Linear;
    d.name = std::move(name);
    d.out = out;
    return d;
}

}  // namespace

NetSpec recognizer_spec(Preset preset, double slope, int input_size) {
    const int div = preset == Preset::Paper ? 1 : 4;
    const int in = input_size > 0 ? input_size : (preset == Preset::Paper ? 224 : 64);
    NetSpec s;
    s.arch = "recognizer";
    s.preset = preset == Preset::Paper ? "paper" : "desk";
    s.query_h = s.query_w = s.target_h = s.target_w = in;
    s.joint_mask = {true, true, true, false, false};
    auto& L = s.layers;
    L.push_back(conv_def("conv1", 64 / div, 11, 4, 2));
    L.push_back(act_def(slope));
    L.push_back(pool_def("pool1", 3, 2));
    L.push_back(joint_def(1, 64 / div, 3, 1, 1, slope));
    L.push_back(conv_def("conv2", 192 / div, 5, 1, 2));
    L.push_back(act_def(slope));
    L.push_back(pool_def("pool2", 3, 2));
    L.push_back(joint_def(2, 192 / div, 5, 1, 2, slope));
    L.push_back(conv_def("conv3", 384 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(joint_def(3, 384 / div, 3, 1, 1, slope));
    L.push_back(conv_def("conv4", 256 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv5", 256 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(pool_def("pool3", 3, 2));
    LayerDef flat;
    flat.op = LayerOp::Flatten;
    flat.name = "flatten";
    L.push_back(flat);
    L.push_back(linear_def("fc1", 4096 / div));
    L.push_back(act_def(slope));
    L.push_back(linear_def("fc2", 4096 / div));
    L.push_back(act_def(slope));
    L.push_back(linear_def("fc3", 1));
    LayerDef sig;
    sig.op = LayerOp::Sigmoid;
    sig.name = "sigmoid";
    L.push_back(sig);
    return s;
}

NetSpec detector_spec(Preset preset, const std::array<bool, 5>& mask, int anchors, double slope) {
    const int div = preset == Preset::Paper ? 1 : 4;
    NetSpec s;
    s.arch = "detector";
    s.preset = preset == Preset::Paper ? "paper" : "desk";
    s.joint_mask = mask;
    s.anchors = anchors;
    if (preset == Preset::Paper) {
        s.target_h = s.target_w = 448;
        s.query_h = s.query_w = 224;
        s.grid = 14;
    } else {
        s.target_h = s.target_w = 112;
        s.query_h = s.query_w = 56;
        s.grid = 7;
    }
    auto& L = s.layers;
    L.push_back(conv_def("conv1", 32 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(pool_def("pool_t", 2, 2, /*target_only=*/true));
    L.push_back(pool_def("pool1", 2, 2));
    L.push_back(conv_def("conv2", 64 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(joint_def(1, 64 / div, 3, 1, 1, slope));
    L.push_back(conv_def("conv3", 128 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv4", 64 / div, 1, 1, 0));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv5", 128 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(pool_def("pool2", 2, 2));
    L.push_back(joint_def(2, 128 / div, 3, 1, 1, slope));
    L.push_back(conv_def("conv6", 256 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv7", 128 / div, 1, 1, 0));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv8", 256 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(pool_def("pool3", 2, 2));
    L.push_back(joint_def(3, 256 / div, 3, 1, 1, slope));
    L.push_back(conv_def("conv9", 512 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv10", 256 / div, 1, 1, 0));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv11", 512 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv12", 256 / div, 1, 1, 0));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv13", 512 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(joint_def(4, 512 / div, 1, 1, 0, slope));
    L.push_back(conv_def("conv14", 64 / div, 1, 1, 0));
    L.push_back(act_def(slope));
    if (preset == Preset::Paper) L.push_back(pool_def("pool4", 2, 2));
    L.push_back(conv_def("conv15", 1024 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv16", 512 / div, 1, 1, 0));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv17", 1024 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv18", 512 / div, 1, 1, 0));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv19", 1024 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv20", 1024 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv21", 1024 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(joint_def(5, 1024 / div, 3, 1, 1, slope));
    L.push_back(conv_def("conv22", 1024 / div, 3, 1, 1));
    L.push_back(act_def(slope));
    L.push_back(conv_def("conv23", anchors * 5, 1, 1, 0));  // raw head, no activation
    return s;
}

std::array<bool, 5> parse_mask(const std::string& s) {
    std::array<bool, 5> mask{false, false, false, false, false};
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        const int v = std::stoi(tok);
        if (v < 1 || v > 5) throw BuildError("joint layer index out of range: " + tok);
        mask[static_cast<size_t>(v - 1)] = true;
    }
    return mask;
}

std::string mask_to_string(const std::array<bool, 5>& mask) {
    std::string s;
    for (int i = 0; i < 5; ++i)
        if (mask[static_cast<size_t>(i)]) {
            if (!s.empty()) s += ",";
            s += std::to_string(i + 1);
        }
    return s;
}

std::string NetSpec::to_text() const {
    std::ostringstream os;
    os << "arch=" << arch << "\npreset=" << preset << "\nmask=" << mask_to_string(joint_mask)
       << "\nin_channels=" << in_channels << "\nquery=" << query_h << "x" << query_w
       << "\ntarget=" << target_h << "x" << target_w << "\nanchors=" << anchors
       << "\ngrid=" << grid << "\n";
    for (const LayerDef& d : layers) {
        switch (d.op) {
            case LayerOp::Conv:
                os << "conv " << d.name << " " << d.out << " " << d.k << "/" << d.stride << " p"
                   << d.pad << "\n";
                break;
            case LayerOp::Act:
                os << "act " << d.slope << "\n";
                break;
            case LayerOp::Pool:
                os << "pool " << d.name << " " << d.k << "/" << d.stride
                   << (d.target_only ? " target-only" : "") << "\n";
                break;
            case LayerOp::Joint:
                os << "joint " << d.joint_no << " " << d.out << " " << d.k << "/" << d.stride
                   << " p" << d.pad << "\n";
                break;
            case LayerOp::Flatten:
                os << "flatten\n";
                break;
            case LayerOp::Linear:
                os << "linear " << d.name << " " << d.out << "\n";
                break;
            case LayerOp::Sigmoid:
                os << "sigmoid\n";
                break;
        }
    }
    return os.str();
}

// ---- shape oracle -----------------------------------------------------------

namespace {

struct SymShape {
    bool flat = false;
    int64_t c = 0, h = 0, w = 0, features = 0;
};

int64_t conv_extent(int64_t in, int k, int stride, int pad, const std::string& name) {
    const int64_t out = (in + 2 * pad - k) / stride + 1;
    if (out < 1) throw BuildError("layer '" + name + "': output extent would be empty");
    return out;
}

bool joint_enabled(const NetSpec& spec, const LayerDef& d) {
    return spec.joint_mask[static_cast<size_t>(d.joint_no - 1)];
}

SymShape apply_def(const NetSpec& spec, const LayerDef& d, SymShape s, bool query_branch) {
    switch (d.op) {
        case LayerOp::Conv:
            s.h = conv_extent(s.h, d.k, d.stride, d.pad, d.name);
            s.w = conv_extent(s.w, d.k, d.stride, d.pad, d.name);
            s.c = d.out;
            return s;
        case LayerOp::Pool:
            if (query_branch && d.target_only) return s;
            if (d.k > s.h || d.k > s.w)
                throw BuildError("layer '" + d.name + "': pool kernel exceeds input extent");
            s.h = (s.h - d.k) / d.stride + 1;
            s.w = (s.w - d.k) / d.stride + 1;
            return s;
        case LayerOp::Joint:
            if (!joint_enabled(spec, d) || query_branch) return s;
            if (d.out != s.c)
                throw BuildError("layer '" + d.name + "': output channels " +
                                 std::to_string(d.out) + " do not match branch channels " +
                                 std::to_string(s.c));
            s.h = conv_extent(s.h, d.k, d.stride, d.pad, d.name);
            s.w = conv_extent(s.w, d.k, d.stride, d.pad, d.name);
            s.c = d.out;
            return s;
        case LayerOp::Flatten:
            s.features = s.c * s.h * s.w;
            s.flat = true;
            return s;
        case LayerOp::Linear:
            s.features = d.out;
            return s;
        case LayerOp::Act:
        case LayerOp::Sigmoid:
            return s;
    }
    return s;
}

}  // namespace

std::vector<ShapeInfo> propagate_shapes(const NetSpec& spec) {
    SymShape main{false, spec.in_channels, spec.target_h, spec.target_w, 0};
    SymShape query{false, spec.in_channels, spec.query_h, spec.query_w, 0};
    bool any_joint = false;
    int last_joint = -1;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDef& d = spec.layers[i];
        if (d.op == LayerOp::Joint && joint_enabled(spec, d)) {
            any_joint = true;
            last_joint = static_cast<int>(i);
        }
    }
    if (!any_joint) throw BuildError("all joint layers disabled: branches would never interact");

    std::vector<ShapeInfo> out;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDef& d = spec.layers[i];
        if (d.op == LayerOp::Joint && joint_enabled(spec, d)) {
            if (main.c != query.c || main.h != query.h || main.w != query.w)
                throw BuildError("layer '" + d.name + "': branch features disagree (main " +
                                 std::to_string(main.c) + "x" + std::to_string(main.h) + "x" +
                                 std::to_string(main.w) + ", query " + std::to_string(query.c) +
                                 "x" + std::to_string(query.h) + "x" + std::to_string(query.w) +
                                 ")");
        }
        main = apply_def(spec, d, main, false);
        if (static_cast<int>(i) <= last_joint) query = apply_def(spec, d, query, true);
        ShapeInfo info;
        info.name = d.name;
        info.flat = main.flat;
        info.c = main.c;
        info.h = main.h;
        info.w = main.w;
        info.features = main.features;
        out.push_back(info);
    }
    return out;
}

// ---- modules ----------------------------------------------------------------

namespace {

Tensor kaiming_tensor(const std::vector<int64_t>& shape, int64_t fan_in, std::mt19937_64& rng) {
    Tensor t(shape);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
    return t;
}

struct Module {
    virtual ~Module() = default;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    virtual Tensor backward(const Tensor& g) = 0;
};

struct Conv2dM final : Module {
    ParamPtr w, b;
    int stride, pad;
    Tensor cache;
    Conv2dM(ParamPtr w_, ParamPtr b_, int s, int p)
        : w(std::move(w_)), b(std::move(b_)), stride(s), pad(p) {}
    Tensor forward(const Tensor& x, bool train) override {
        if (train) cache = x;
        return conv2d(x, w->value, b->value, stride, pad);
    }
    Tensor backward(const Tensor& g) override {
        if (cache.numel() == 0) throw Error("backward requires a forward in training mode");
        Tensor gx;
        conv2d_backward(cache, w->value, g, stride, pad, &gx, &w->grad, &b->grad);
        return gx;
    }
};

struct LinearM final : Module {
    ParamPtr w, b;
    Tensor cache;
    LinearM(ParamPtr w_, ParamPtr b_) : w(std::move(w_)), b(std::move(b_)) {}
    Tensor forward(const Tensor& x, bool train) override {
        if (train) cache = x;
        return linear(x, w->value, b->value);
    }
    Tensor backward(const Tensor& g) override {
        if (cache.numel() == 0) throw Error("backward requires a forward in training mode");
        Tensor gx;
        linear_backward(cache, w->value, g, &gx, &w->grad, &b->grad);
        return gx;
    }
};

struct MaxPoolM final : Module {
    int k, stride;
    std::vector<int64_t> in_shape;
    std::vector<int64_t> argmax;
    MaxPoolM(int k_, int s) : k(k_), stride(s) {}
    Tensor forward(const Tensor& x, bool train) override {
        if (!train) return maxpool2d(x, k, stride, nullptr);
        in_shape = x.shape();
        return maxpool2d(x, k, stride, &argmax);
    }
    Tensor backward(const Tensor& g) override {
        if (argmax.empty()) throw Error("backward requires a forward in training mode");
        return maxpool2d_backward(g, in_shape, argmax);
    }
};

struct LeakyReluM final : Module {
    double slope;
    Tensor cache;
    explicit LeakyReluM(double s) : slope(s) {}
    Tensor forward(const Tensor& x, bool train) override {
        if (train) cache = x;
        return leaky_relu(x, slope);
    }
    Tensor backward(const Tensor& g) override {
        if (cache.numel() == 0) throw Error("backward requires a forward in training mode");
        return leaky_relu_backward(cache, g, slope);
    }
};

struct SigmoidM final : Module {
    Tensor out_cache;
    Tensor forward(const Tensor& x, bool train) override {
        Tensor y = sigmoid(x);
        if (train) out_cache = y;
        return y;
    }
    Tensor backward(const Tensor& g) override {
        if (out_cache.numel() == 0) throw Error("backward requires a forward in training mode");
        return sigmoid_backward(out_cache, g);
    }
};

struct FlattenM final : Module {
    std::vector<int64_t> in_shape;
    Tensor forward(const Tensor& x, bool train) override {
        if (train) in_shape = x.shape();
        return x.reshaped({x.dim(0), x.numel() / x.dim(0)});
    }
    Tensor backward(const Tensor& g) override {
        if (in_shape.empty()) throw Error("backward requires a forward in training mode");
        return g.reshaped(in_shape);
    }
};

void add_into(Tensor& acc, const Tensor& t) {
    if (acc.numel() == 0) {
        acc = t;
        return;
    }
    for (int64_t i = 0; i < acc.numel(); ++i) acc[i] += t[i];
}

}  // namespace

// ---- JointModel -------------------------------------------------------------

struct JointModel::Impl {
    // main branch program: regular module or joint fusion
    struct Step {
        std::unique_ptr<Module> module;  // set for regular steps
        // fusion fields
        int tap = -1;
        std::unique_ptr<Conv2dM> jconv;
        std::unique_ptr<LeakyReluM> jact;
        int64_t main_channels = 0;
        std::string name;
        size_t def_index = 0;
    };
    std::vector<Step> main_steps;
    std::vector<std::unique_ptr<Module>> query_mods;
    std::vector<size_t> tap_positions;  // tap k captured after this many query modules
    std::vector<Tensor> tap_feats;
};

JointModel::~JointModel() = default;
JointModel::JointModel(JointModel&&) noexcept = default;
JointModel& JointModel::operator=(JointModel&&) noexcept = default;

JointModel::JointModel(NetSpec spec, uint64_t seed)
    : impl_(std::make_unique<Impl>()), spec_(std::move(spec)) {
    propagate_shapes(spec_);  // validates channel/spatial arithmetic up front

    int last_joint = -1;
    for (size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerDef& d = spec_.layers[i];
        if (d.op == LayerOp::Joint && spec_.joint_mask[static_cast<size_t>(d.joint_no - 1)])
            last_joint = static_cast<int>(i);
    }

    std::mt19937_64 rng(seed);
    auto make_param_pair = [&](const std::string& name, std::vector<int64_t> wshape,
                               int64_t fan_in) {
        auto w = std::make_shared<Parameter>(name + ".w", kaiming_tensor(wshape, fan_in, rng));
        auto b = std::make_shared<Parameter>(name + ".b", Tensor({wshape[0]}, 0.0));
        params_.push_back(w);
        params_.push_back(b);
        return std::pair{w, b};
    };

    int64_t cur_c = spec_.in_channels;  // branch channels (identical in both branches)
    int64_t flat_features = -1;
    {
        // flatten feature count comes from the shape oracle
        const auto shapes = propagate_shapes(spec_);
        for (size_t i = 0; i < spec_.layers.size(); ++i)
            if (spec_.layers[i].op == LayerOp::Flatten) flat_features = shapes[i].features;
    }

    int64_t cur_features = flat_features;
    for (size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerDef& d = spec_.layers[i];
        const bool in_query_range = static_cast<int>(i) <= last_joint;
        Impl::Step step;
        step.name = d.name;
        step.def_index = i;
        switch (d.op) {
            case LayerOp::Conv: {
                auto [w, b] = make_param_pair(d.name, {d.out, cur_c, d.k, d.k},
                                              cur_c * d.k * d.k);
                step.module = std::make_unique<Conv2dM>(w, b, d.stride, d.pad);
                if (in_query_range)
                    impl_->query_mods.push_back(std::make_unique<Conv2dM>(w, b, d.stride, d.pad));
                cur_c = d.out;
                break;
            }
            case LayerOp::Act: {
                step.module = std::make_unique<LeakyReluM>(d.slope);
                if (in_query_range)
                    impl_->query_mods.push_back(std::make_unique<LeakyReluM>(d.slope));
                break;
            }
            case LayerOp::Pool: {
                step.module = std::make_unique<MaxPoolM>(d.k, d.stride);
                if (in_query_range && !d.target_only)
                    impl_->query_mods.push_back(std::make_unique<MaxPoolM>(d.k, d.stride));
                break;
            }
            case LayerOp::Joint: {
                if (!spec_.joint_mask[static_cast<size_t>(d.joint_no - 1)]) continue;
                auto [w, b] = make_param_pair(d.name, {d.out, 2 * cur_c, d.k, d.k},
                                              2 * cur_c * d.k * d.k);
                step.tap = static_cast<int>(impl_->tap_positions.size());
                impl_->tap_positions.push_back(impl_->query_mods.size());
                step.jconv = std::make_unique<Conv2dM>(w, b, d.stride, d.pad);
                step.jact = std::make_unique<LeakyReluM>(d.slope);
                step.main_channels = cur_c;
                cur_c = d.out;
                break;
            }
            case LayerOp::Flatten: {
                step.module = std::make_unique<FlattenM>();
                break;
            }
            case LayerOp::Linear: {
                auto [w, b] = make_param_pair(d.name, {d.out, cur_features}, cur_features);
                step.module = std::make_unique<LinearM>(w, b);
                cur_features = d.out;
                break;
            }
            case LayerOp::Sigmoid: {
                step.module = std::make_unique<SigmoidM>();
                break;
            }
        }
        impl_->main_steps.push_back(std::move(step));
    }
    impl_->tap_feats.resize(impl_->tap_positions.size());
}

void JointModel::set_training(bool training) { training_ = training; }

Tensor JointModel::forward(const Tensor& query, const Tensor& target) {
    auto check_input = [&](const Tensor& t, int h, int w, const char* side) {
        if (t.ndim() != 4 || t.dim(1) != spec_.in_channels || t.dim(2) != h || t.dim(3) != w)
            throw DimensionError(std::string(side) + " input must be (B," +
                                 std::to_string(spec_.in_channels) + "," + std::to_string(h) +
                                 "," + std::to_string(w) + "), got " + t.shape_str());
    };
    check_input(query, spec_.query_h, spec_.query_w, "query");
    check_input(target, spec_.target_h, spec_.target_w, "target");
    if (query.dim(0) != target.dim(0))
        throw DimensionError("query/target batch sizes differ");

    // query branch, capturing features at every joint tap
    size_t next_tap = 0;
    auto capture = [&](const Tensor& qf, size_t applied) {
        while (next_tap < impl_->tap_positions.size() &&
               impl_->tap_positions[next_tap] == applied) {
            impl_->tap_feats[next_tap] = qf;
            ++next_tap;
        }
    };
    Tensor qf = query;
    capture(qf, 0);
    for (size_t i = 0; i < impl_->query_mods.size(); ++i) {
        qf = impl_->query_mods[i]->forward(qf, training_);
        capture(qf, i + 1);
    }

    // main branch with joint fusions
    last_shapes_.assign(spec_.layers.size(), ShapeInfo{});
    Tensor mf = target;
    for (auto& step : impl_->main_steps) {
        if (step.module) {
            mf = step.module->forward(mf, training_);
        } else {
            Tensor cat = concat_channels(mf, impl_->tap_feats[static_cast<size_t>(step.tap)]);
            mf = step.jact->forward(step.jconv->forward(cat, training_), training_);
        }
        ShapeInfo info;
        info.name = step.name;
        if (mf.ndim() == 4) {
            info.c = mf.dim(1);
            info.h = mf.dim(2);
            info.w = mf.dim(3);
        } else {
            info.flat = true;
            info.features = mf.dim(1);
        }
        last_shapes_[step.def_index] = info;
    }
    // disabled joints keep the previous layer's shape in the trace
    for (size_t i = 1; i < last_shapes_.size(); ++i)
        if (last_shapes_[i].name.empty()) last_shapes_[i] = last_shapes_[i - 1];
    return mf;
}

void JointModel::backward(const Tensor& grad_head) {
    if (!training_) throw Error("backward requires training mode");
    std::vector<Tensor> tap_grads(impl_->tap_feats.size());
    Tensor g = grad_head;
    for (auto it = impl_->main_steps.rbegin(); it != impl_->main_steps.rend(); ++it) {
        auto& step = *it;
        if (step.module) {
            g = step.module->backward(g);
        } else {
            Tensor gcat = step.jconv->backward(step.jact->backward(g));
            Tensor gm, gq;
            concat_channels_backward(gcat, step.main_channels, &gm, &gq);
            g = std::move(gm);
            add_into(tap_grads[static_cast<size_t>(step.tap)], gq);
        }
    }
    // query branch: fold tap gradients in from the deepest tap down
    Tensor gq;
    for (size_t applied = impl_->query_mods.size();; --applied) {
        for (size_t k = 0; k < impl_->tap_positions.size(); ++k)
            if (impl_->tap_positions[k] == applied) add_into(gq, tap_grads[k]);
        if (applied == 0) break;
        if (gq.numel() > 0) gq = impl_->query_mods[applied - 1]->backward(gq);
    }
}

}  // namespace jnn
