#include "jnn/anchor.hpp"

#include <cmath>
#include <tuple>

#include "jnn/ops.hpp"

namespace jnn {

BBox decode_anchor(const RawPrediction& t, int cell_x, int cell_y, const AnchorPrior& prior) {
    BBox b;
    b.x = sigmoid_scalar(t.tx) + cell_x;
    b.y = sigmoid_scalar(t.ty) + cell_y;
    b.w = prior.w * std::exp(t.tw);
    b.h = prior.h * std::exp(t.th);
    b.conf = sigmoid_scalar(t.to);
    return b;
}

RawPrediction encode_anchor(const BBox& gt, int cell_x, int cell_y, const AnchorPrior& prior) {
    const double ox = gt.x - cell_x;
    const double oy = gt.y - cell_y;
    if (!(ox > 0.0 && ox < 1.0 && oy > 0.0 && oy < 1.0))
        throw DataError("encode_anchor: box center not strictly inside cell (" +
                        std::to_string(cell_x) + "," + std::to_string(cell_y) + ")");
    if (!(gt.w > 0.0 && gt.h > 0.0)) throw DataError("encode_anchor: box extents must be > 0");
    RawPrediction t;
    t.tx = std::log(ox / (1.0 - ox));
    t.ty = std::log(oy / (1.0 - oy));
    t.tw = std::log(gt.w / prior.w);
    t.th = std::log(gt.h / prior.h);
    t.to = 0.0;
    return t;
}

int64_t TargetAssignment::positives() const {
    int64_t n = 0;
    for (uint8_t m : obj_mask) n += m;
    return n;
}

// Lower-index cell for centers exactly on a boundary.
static int owning_cell(double coord, int grid) {
    int c = static_cast<int>(std::floor(coord));
    if (coord == std::floor(coord)) c -= 1;
    if (c < 0) c = 0;
    if (c >= grid) c = grid - 1;
    return c;
}

TargetAssignment assign_targets(const std::vector<BBox>& gts,
                                const std::vector<AnchorPrior>& priors, int grid) {
    TargetAssignment asg;
    asg.grid = grid;
    asg.anchors = static_cast<int>(priors.size());
    const size_t n = static_cast<size_t>(grid) * grid * priors.size();
    asg.obj_mask.assign(n, 0);
    asg.reg_target.assign(n, RawPrediction{});
    asg.matched_gt.assign(n, BBox{});

    std::vector<double> claimed_iou(n, -1.0);
    for (const BBox& gt : gts) {
        const int cx = owning_cell(gt.x, grid);
        const int cy = owning_cell(gt.y, grid);
        for (size_t a = 0; a < priors.size(); ++a) {
            BBox anchor_box{gt.x, gt.y, priors[a].w, priors[a].h, 0.0};
            const double v = iou(anchor_box, gt);
            if (v <= 0.5) continue;
            const int64_t i = asg.index(cx, cy, static_cast<int>(a));
            const auto key = std::tie(gt.x, gt.y, gt.w, gt.h);
            const BBox& cur = asg.matched_gt[static_cast<size_t>(i)];
            const bool win =
                v > claimed_iou[static_cast<size_t>(i)] ||
                (v == claimed_iou[static_cast<size_t>(i)] &&
                 key < std::tie(cur.x, cur.y, cur.w, cur.h));
            if (!win) continue;
            claimed_iou[static_cast<size_t>(i)] = v;
            asg.obj_mask[static_cast<size_t>(i)] = 1;
            // Centers that the boundary rule pushed into the lower cell sit at
            // offset exactly 1; nudge inside so the logit exists.
            BBox enc = gt;
            const double eps = 1e-9;
            if (enc.x - cx >= 1.0) enc.x = cx + 1.0 - eps;
            if (enc.x - cx <= 0.0) enc.x = cx + eps;
            if (enc.y - cy >= 1.0) enc.y = cy + 1.0 - eps;
            if (enc.y - cy <= 0.0) enc.y = cy + eps;
            asg.reg_target[static_cast<size_t>(i)] = encode_anchor(enc, cx, cy, priors[a]);
            asg.matched_gt[static_cast<size_t>(i)] = gt;
        }
    }
    return asg;
}

static const double* head_base(const Tensor& head, int grid, int anchors) {
    const bool ok3 = head.ndim() == 3 && head.dim(0) == anchors * 5 && head.dim(1) == grid &&
                     head.dim(2) == grid;
    const bool ok4 = head.ndim() == 4 && head.dim(0) == 1 && head.dim(1) == anchors * 5 &&
                     head.dim(2) == grid && head.dim(3) == grid;
    if (!ok3 && !ok4)
        throw DimensionError("head tensor must be (B*5,S,S) or (1,B*5,S,S), got " +
                             head.shape_str());
    return head.data();
}

RawPrediction raw_at(const Tensor& head, int grid, int anchors, int cx, int cy, int a) {
    const double* d = head_base(head, grid, anchors);
    const int64_t plane = static_cast<int64_t>(grid) * grid;
    const int64_t cell = static_cast<int64_t>(cy) * grid + cx;
    RawPrediction t;
    t.tx = d[(a * 5 + 0) * plane + cell];
    t.ty = d[(a * 5 + 1) * plane + cell];
    t.tw = d[(a * 5 + 2) * plane + cell];
    t.th = d[(a * 5 + 3) * plane + cell];
    t.to = d[(a * 5 + 4) * plane + cell];
    return t;
}

std::vector<BBox> decode_grid(const Tensor& head, const std::vector<AnchorPrior>& priors,
                              int grid) {
    const int anchors = static_cast<int>(priors.size());
    head_base(head, grid, anchors);
    std::vector<BBox> out;
    out.reserve(static_cast<size_t>(grid) * grid * priors.size());
    for (int cy = 0; cy < grid; ++cy)
        for (int cx = 0; cx < grid; ++cx)
            for (int a = 0; a < anchors; ++a)
                out.push_back(decode_anchor(raw_at(head, grid, anchors, cx, cy, a), cx, cy,
                                            priors[static_cast<size_t>(a)]));
    return out;
}

}  // namespace jnn
