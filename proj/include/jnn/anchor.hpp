#pragma once

#include <vector>

#include "jnn/box.hpp"
#include "jnn/tensor.hpp"

namespace jnn {

/// Reference box shape per grid cell, in cell units.
struct AnchorPrior {
    double w = 1.0;
    double h = 1.0;
};

/// The five unbounded head outputs for one cell/anchor.
struct RawPrediction {
    double tx = 0.0;
    double ty = 0.0;
    double tw = 0.0;
    double th = 0.0;
    double to = 0.0;
};

/// b_x = sigmoid(t_x) + c_x,  b_y = sigmoid(t_y) + c_y,
/// b_w = p_w * exp(t_w),      b_h = p_h * exp(t_h),   conf = sigmoid(t_o).
BBox decode_anchor(const RawPrediction& t, int cell_x, int cell_y, const AnchorPrior& prior);

/// Inverse of decode_anchor for the four coordinates (t_o is left at 0).
/// The box center must lie strictly inside the cell: c_x < b_x < c_x + 1.
RawPrediction encode_anchor(const BBox& gt, int cell_x, int cell_y, const AnchorPrior& prior);

/// Per cell/anchor training targets. Flat index is (cell_y*S + cell_x)*B + anchor.
struct TargetAssignment {
    int grid = 0;     // S
    int anchors = 0;  // B
    std::vector<uint8_t> obj_mask;          // 1 where positive
    std::vector<RawPrediction> reg_target;  // valid where obj_mask is set
    std::vector<BBox> matched_gt;           // valid where obj_mask is set

    int64_t size() const { return static_cast<int64_t>(obj_mask.size()); }
    int64_t index(int cx, int cy, int a) const {
        return (static_cast<int64_t>(cy) * grid + cx) * anchors + a;
    }
    int64_t positives() const;
};

/// An anchor j in the cell holding a ground-truth center is positive iff the
/// prior-shaped box centered on that ground truth has IoU > 0.5 with it.
/// Centers exactly on a cell boundary belong to the lower-index cell. When two
/// ground truths claim the same slot the higher-IoU one wins (ties broken by
/// lexicographic box comparison), which keeps the result independent of input
/// order.
TargetAssignment assign_targets(const std::vector<BBox>& gts,
                                const std::vector<AnchorPrior>& priors, int grid);

/// Views a head tensor of shape (B*5, S, S) or (1, B*5, S, S) as
/// RawPredictions; channel c = anchor*5 + component.
RawPrediction raw_at(const Tensor& head, int grid, int anchors, int cx, int cy, int a);

/// Decodes every cell/anchor of a head tensor into grid-unit boxes.
std::vector<BBox> decode_grid(const Tensor& head, const std::vector<AnchorPrior>& priors,
                              int grid);

}  // namespace jnn
