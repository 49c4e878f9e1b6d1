#pragma once

#include <array>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "jnn/tensor.hpp"

namespace jnn {

enum class Preset { Paper, Desk };

enum class LayerOp { Conv, Act, Pool, Joint, Flatten, Linear, Sigmoid };

/// One row of a declarative network table.
struct LayerDef {
    LayerOp op = LayerOp::Conv;
    std::string name;
    int out = 0;  // conv/joint out channels, linear out features
    int k = 0;
    int stride = 1;
    int pad = 0;
    double slope = 0.1;        // leaky slope for Act
    bool target_only = false;  // pool applied to the main (target) branch only
    int joint_no = 0;          // 1-based joint index, used by the placement mask
};

/// Declarative description of a twin-branch network: backbone table, joint
/// placement mask, and per-branch input geometry.
struct NetSpec {
    std::string arch;    // "recognizer" | "detector"
    std::string preset;  // "paper" | "desk"
    std::vector<LayerDef> layers;
    std::array<bool, 5> joint_mask{true, true, true, true, true};
    int in_channels = 3;
    int query_h = 0, query_w = 0;
    int target_h = 0, target_w = 0;
    int anchors = 0;  // detector: B boxes per cell
    int grid = 0;     // detector: expected S

    std::string to_text() const;
};

/// AlexNet-style pair recognizer (joint layers after pool1, pool2 and conv3;
/// head = three linear layers and a sigmoid emitting the match score P).
NetSpec recognizer_spec(Preset preset, double slope = 0.1, int input_size = 0);

/// DarkNet19-style multi-box detector with five maskable joint layers and a
/// (B*5, S, S) raw prediction head. The first pooling applies to the target
/// branch only, which is what keeps branch spatial sizes equal at every
/// joint point for the 2:1 target:query input ratio.
NetSpec detector_spec(Preset preset, const std::array<bool, 5>& mask, int anchors = 5,
                      double slope = 0.1);

/// "1,2,4" -> {1,1,0,1,0}
std::array<bool, 5> parse_mask(const std::string& s);
std::string mask_to_string(const std::array<bool, 5>& mask);

/// Symbolic per-layer output extents, used as the shape oracle.
struct ShapeInfo {
    std::string name;
    bool flat = false;
    int64_t c = 0, h = 0, w = 0;  // when !flat
    int64_t features = 0;         // when flat
};

/// Propagates (C,H,W) through the main branch of a spec without building or
/// running anything. Disabled joints are skipped. Throws BuildError on
/// channel/spatial violations.
std::vector<ShapeInfo> propagate_shapes(const NetSpec& spec);

/// A built twin-branch network. Both branches share every backbone parameter;
/// joint layers consume concat(main, query) features and feed the main branch
/// only. The query branch runs up to the last enabled joint layer, after
/// which a single trunk continues to the head.
class JointModel {
public:
    JointModel(NetSpec spec, uint64_t seed);
    ~JointModel();
    JointModel(JointModel&&) noexcept;
    JointModel& operator=(JointModel&&) noexcept;
    JointModel(const JointModel&) = delete;
    JointModel& operator=(const JointModel&) = delete;

    /// Head output: recognizer (B,1) in (0,1); detector (B, B_anchors*5, S, S) raw.
    Tensor forward(const Tensor& query, const Tensor& target);
    /// Accumulates parameter gradients; requires a forward in training mode.
    void backward(const Tensor& grad_head);

    /// Every trainable parameter exactly once, in construction order.
    const std::vector<ParamPtr>& parameters() const { return params_; }

    const NetSpec& spec() const { return spec_; }

    void set_training(bool training);
    bool training() const { return training_; }

    /// Actual main-branch output shapes recorded by the last forward, aligned
    /// with propagate_shapes(spec()).
    const std::vector<ShapeInfo>& last_shapes() const { return last_shapes_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    NetSpec spec_;
    std::vector<ParamPtr> params_;
    std::vector<ShapeInfo> last_shapes_;
    bool training_ = true;
};

/// Optimizer feed: each Parameter appears exactly once no matter how many
/// branch instances alias it.
inline const std::vector<ParamPtr>& shared_parameters(const JointModel& m) {
    return m.parameters();
}

}  // namespace jnn
