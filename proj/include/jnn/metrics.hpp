#pragma once

#include <map>
#include <string>
#include <vector>

#include "jnn/box.hpp"
#include "jnn/error.hpp"

namespace jnn {

struct RocPoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points;
    double auc = 0.0;
    RocPoint best;  // maximizes accuracy, lowest threshold on ties
};

/// Sweeps n_thresholds evenly spaced over [min(scores), max(scores)]
/// (score >= threshold predicts a match). AUC is trapezoidal over (FPR,TPR)
/// with implicit (0,0) and (1,1) endpoints. Needs at least one positive and
/// one negative label.
RocResult roc_sweep(const std::vector<double>& scores, const std::vector<int>& labels,
                    int n_thresholds = 20);

struct DetectionRecord {
    int image_id = 0;
    std::string cls;
    BBox box;  // pixel units, center format
    double conf = 0.0;
};

/// Greedy non-maximum suppression: highest confidence first, a record is kept
/// iff its IoU with every already-kept record is <= iou_threshold. Confidence
/// ties are broken by input order.
std::vector<DetectionRecord> nms(const std::vector<DetectionRecord>& records,
                                 double iou_threshold);

struct APResult {
    std::string cls;
    double ap = 0.0;
    int tp = 0;
    int fp = 0;
    int num_gt = 0;
    bool defined = false;  // false when the class has no ground truth
};

/// Raw precision/recall trace in descending-confidence order.
struct PrCurve {
    std::vector<double> recall;
    std::vector<double> precision;
    int tp = 0;
    int fp = 0;
    int num_gt = 0;
};

PrCurve pr_curve(std::vector<DetectionRecord> records,
                 const std::map<int, std::vector<BBox>>& gts_by_image, double iou_threshold);

/// VOC-style average precision for one class: detections matched greedily in
/// descending confidence to the unmatched ground truth with highest IoU >=
/// iou_threshold. Default is the all-points interpolated area; eleven_point
/// switches to the older 11-point mean.
APResult average_precision(const std::string& cls, std::vector<DetectionRecord> records,
                           const std::map<int, std::vector<BBox>>& gts_by_image,
                           double iou_threshold = 0.5, bool eleven_point = false);

/// Unweighted mean over classes with at least one ground truth.
double mean_ap(const std::vector<APResult>& results);

}  // namespace jnn
