#pragma once

#include <vector>

#include "jnn/anchor.hpp"
#include "jnn/tensor.hpp"

namespace jnn {

/// Clamp applied to every log argument.
inline constexpr double kLogEps = 1e-7;

/// Term weights of the detection loss.
struct LossWeights {
    double coord = 5.0;
    double obj = 1.0;
    double noobj = 0.5;
};

/// Mean over the batch of -[y*log(p) + (1-y)*log(1-p)], p clamped to
/// [kLogEps, 1-kLogEps]. Labels must be exactly 0 or 1. grad_p (optional)
/// receives d loss / d p.
double bce_pair_loss(const std::vector<double>& p, const std::vector<double>& y,
                     std::vector<double>* grad_p = nullptr);

/// lambda_coord * sum over positive cell/anchor slots of the squared
/// differences of the four regression components, computed in t-space.
/// grad_head, when given, is accumulated.
double loc_loss(const Tensor& head, const TargetAssignment& asg, double lambda_coord,
                Tensor* grad_head = nullptr);

/// conf[i] in (0,1) per cell/anchor slot. Positives contribute
/// lambda_obj * BCE(conf, c) with c = 1 (or c = IoU(pred, gt) when the
/// iou_targets reading is enabled); negatives contribute
/// lambda_noobj * BCE(conf, 0). Sums, not means. grad_conf accumulates.
double conf_loss(const std::vector<double>& conf, const TargetAssignment& asg, double lambda_obj,
                 double lambda_noobj, std::vector<double>* grad_conf = nullptr,
                 const std::vector<double>* conf_targets = nullptr);

struct DetectionLoss {
    double total = 0.0;
    double loc = 0.0;
    double conf = 0.0;
};

/// Total detection loss on a raw head tensor (B*5,S,S) or (1,B*5,S,S):
/// loc_loss + conf_loss with confidences sigmoid(t_o). grad_head (optional)
/// receives d total / d raw head. iou_targets switches the positive
/// confidence target from 1 to the realized IoU of the decoded prediction
/// with its matched ground truth (treated as a constant).
DetectionLoss total_detection_loss(const Tensor& head, const TargetAssignment& asg,
                                   const LossWeights& w,
                                   const std::vector<AnchorPrior>& priors,
                                   Tensor* grad_head = nullptr, bool iou_targets = false);

}  // namespace jnn
