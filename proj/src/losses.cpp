#include "jnn/losses.hpp"

#include <cmath>

#include "jnn/ops.hpp"

namespace jnn {

static double clamp01(double v) {
    if (v < kLogEps) return kLogEps;
    if (v > 1.0 - kLogEps) return 1.0 - kLogEps;
    return v;
}

double bce_pair_loss(const std::vector<double>& p, const std::vector<double>& y,
                     std::vector<double>* grad_p) {
    if (p.empty() || p.size() != y.size())
        throw DataError("bce_pair_loss: empty batch or size mismatch");
    for (double v : y)
        if (v != 0.0 && v != 1.0) throw DataError("bce_pair_loss: label outside {0,1}");
    const double n = static_cast<double>(p.size());
    if (grad_p) grad_p->assign(p.size(), 0.0);
    double loss = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const double pc = clamp01(p[i]);
        loss += -(y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc));
        if (grad_p && p[i] > kLogEps && p[i] < 1.0 - kLogEps)
            (*grad_p)[i] = (pc - y[i]) / (pc * (1.0 - pc)) / n;
    }
    return loss / n;
}

namespace {
// Flat offset of component `comp` of anchor `a` at cell index `cell` inside a
// head tensor (B*5,S,S); the optional leading batch dim of 1 shares the layout.
inline int64_t head_offset(int grid, int a, int comp, int64_t cell) {
    return (static_cast<int64_t>(a) * 5 + comp) * grid * grid + cell;
}
}  // namespace

double loc_loss(const Tensor& head, const TargetAssignment& asg, double lambda_coord,
                Tensor* grad_head) {
    const int S = asg.grid, B = asg.anchors;
    double loss = 0.0;
    for (int64_t cell = 0; cell < static_cast<int64_t>(S) * S; ++cell) {
        for (int a = 0; a < B; ++a) {
            const size_t i = static_cast<size_t>(cell * B + a);
            if (!asg.obj_mask[i]) continue;
            const RawPrediction& t = asg.reg_target[i];
            const double tgt[4] = {t.tx, t.ty, t.tw, t.th};
            for (int comp = 0; comp < 4; ++comp) {
                const int64_t off = head_offset(S, a, comp, cell);
                const double diff = tgt[comp] - head[off];
                loss += lambda_coord * diff * diff;
                if (grad_head) (*grad_head)[off] += 2.0 * lambda_coord * (head[off] - tgt[comp]);
            }
        }
    }
    return loss;
}

double conf_loss(const std::vector<double>& conf, const TargetAssignment& asg, double lambda_obj,
                 double lambda_noobj, std::vector<double>* grad_conf,
                 const std::vector<double>* conf_targets) {
    if (static_cast<int64_t>(conf.size()) != asg.size())
        throw DimensionError("conf_loss: confidence grid size mismatch");
    double loss = 0.0;
    for (size_t i = 0; i < conf.size(); ++i) {
        const double c_pred = clamp01(conf[i]);
        const bool pos = asg.obj_mask[i] != 0;
        const double c = pos ? (conf_targets ? (*conf_targets)[i] : 1.0) : 0.0;
        const double lambda = pos ? lambda_obj : lambda_noobj;
        loss += lambda * -(c * std::log(c_pred) + (1.0 - c) * std::log(1.0 - c_pred));
        if (grad_conf && conf[i] > kLogEps && conf[i] < 1.0 - kLogEps)
            (*grad_conf)[i] += lambda * (-c / c_pred + (1.0 - c) / (1.0 - c_pred));
    }
    return loss;
}

DetectionLoss total_detection_loss(const Tensor& head, const TargetAssignment& asg,
                                   const LossWeights& w,
                                   const std::vector<AnchorPrior>& priors, Tensor* grad_head,
                                   bool iou_targets) {
    const int S = asg.grid, B = asg.anchors;
    if (grad_head && !grad_head->same_shape(head)) *grad_head = Tensor(head.shape(), 0.0);

    DetectionLoss out;
    out.loc = loc_loss(head, asg, w.coord, grad_head);

    const int64_t cells = static_cast<int64_t>(S) * S;
    std::vector<double> conf(static_cast<size_t>(cells * B));
    for (int64_t cell = 0; cell < cells; ++cell)
        for (int a = 0; a < B; ++a)
            conf[static_cast<size_t>(cell * B + a)] =
                sigmoid_scalar(head[head_offset(S, a, 4, cell)]);

    std::vector<double> targets;
    if (iou_targets) {
        targets.assign(conf.size(), 0.0);
        for (int cy = 0; cy < S; ++cy)
            for (int cx = 0; cx < S; ++cx)
                for (int a = 0; a < B; ++a) {
                    const int64_t i = asg.index(cx, cy, a);
                    if (!asg.obj_mask[static_cast<size_t>(i)]) continue;
                    const BBox pred = decode_anchor(raw_at(head, S, B, cx, cy, a), cx, cy,
                                                    priors[static_cast<size_t>(a)]);
                    targets[static_cast<size_t>(i)] =
                        iou(pred, asg.matched_gt[static_cast<size_t>(i)]);
                }
    }

    std::vector<double> gconf;
    if (grad_head) gconf.assign(conf.size(), 0.0);
    out.conf = conf_loss(conf, asg, w.obj, w.noobj, grad_head ? &gconf : nullptr,
                         iou_targets ? &targets : nullptr);
    if (grad_head) {
        for (int64_t cell = 0; cell < cells; ++cell)
            for (int a = 0; a < B; ++a) {
                const double c = conf[static_cast<size_t>(cell * B + a)];
                (*grad_head)[head_offset(S, a, 4, cell)] +=
                    gconf[static_cast<size_t>(cell * B + a)] * c * (1.0 - c);
            }
    }

    out.total = out.loc + out.conf;
    if (!std::isfinite(out.total)) throw TrainError("non-finite detection loss");
    return out;
}

}  // namespace jnn
