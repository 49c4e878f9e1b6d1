#include "jnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jnn/error.hpp"

namespace jnn {

RocResult roc_sweep(const std::vector<double>& scores, const std::vector<int>& labels,
                    int n_thresholds) {
    if (scores.empty() || scores.size() != labels.size())
        throw MetricError("roc_sweep: empty input or size mismatch");
    int64_t pos = 0, neg = 0;
    for (int l : labels) (l ? pos : neg)++;
    if (pos == 0 || neg == 0)
        throw MetricError("roc_sweep: needs at least one positive and one negative label");
    if (n_thresholds < 2) throw MetricError("roc_sweep: needs at least 2 thresholds");

    const auto [mn_it, mx_it] = std::minmax_element(scores.begin(), scores.end());
    const double mn = *mn_it, mx = *mx_it;

    RocResult res;
    res.points.reserve(static_cast<size_t>(n_thresholds));
    for (int i = 0; i < n_thresholds; ++i) {
        const double thr = mn + (mx - mn) * i / (n_thresholds - 1);
        int64_t tp = 0, fp = 0;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (scores[j] >= thr) (labels[j] ? tp : fp)++;
        }
        RocPoint pt;
        pt.threshold = thr;
        pt.tpr = static_cast<double>(tp) / pos;
        pt.fpr = static_cast<double>(fp) / neg;
        pt.accuracy = static_cast<double>(tp + (neg - fp)) / (pos + neg);
        pt.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        res.points.push_back(pt);
    }

    res.best = res.points.front();
    for (const RocPoint& pt : res.points)
        if (pt.accuracy > res.best.accuracy ||
            (pt.accuracy == res.best.accuracy && pt.threshold < res.best.threshold))
            res.best = pt;

    // trapezoid over (FPR,TPR) sorted by FPR with implicit endpoints
    std::vector<std::pair<double, double>> curve;
    curve.reserve(res.points.size() + 2);
    curve.emplace_back(0.0, 0.0);
    for (const RocPoint& pt : res.points) curve.emplace_back(pt.fpr, pt.tpr);
    curve.emplace_back(1.0, 1.0);
    std::sort(curve.begin(), curve.end());
    double auc = 0.0;
    for (size_t i = 1; i < curve.size(); ++i)
        auc += (curve[i].first - curve[i - 1].first) * (curve[i].second + curve[i - 1].second) / 2;
    res.auc = auc;
    return res;
}

std::vector<DetectionRecord> nms(const std::vector<DetectionRecord>& records,
                                 double iou_threshold) {
    std::vector<size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return records[a].conf > records[b].conf; });
    std::vector<DetectionRecord> kept;
    for (size_t i : order) {
        bool suppressed = false;
        for (const DetectionRecord& k : kept)
            if (iou(records[i].box, k.box) > iou_threshold) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(records[i]);
    }
    return kept;
}

PrCurve pr_curve(std::vector<DetectionRecord> records,
                 const std::map<int, std::vector<BBox>>& gts_by_image, double iou_threshold) {
    PrCurve out;
    for (const auto& [img, boxes] : gts_by_image) out.num_gt += static_cast<int>(boxes.size());
    if (out.num_gt == 0) return out;

    std::stable_sort(records.begin(), records.end(),
                     [](const DetectionRecord& a, const DetectionRecord& b) {
                         return a.conf > b.conf;
                     });

    std::map<int, std::vector<bool>> used;
    for (const auto& [img, boxes] : gts_by_image) used[img].assign(boxes.size(), false);

    for (const DetectionRecord& r : records) {
        double best = 0.0;
        int best_j = -1;
        auto it = gts_by_image.find(r.image_id);
        if (it != gts_by_image.end()) {
            const auto& boxes = it->second;
            for (size_t j = 0; j < boxes.size(); ++j) {
                if (used[r.image_id][j]) continue;
                const double v = iou(r.box, boxes[j]);
                if (v >= iou_threshold && v > best) {
                    best = v;
                    best_j = static_cast<int>(j);
                }
            }
        }
        if (best_j >= 0) {
            used[r.image_id][static_cast<size_t>(best_j)] = true;
            ++out.tp;
        } else {
            ++out.fp;
        }
        out.recall.push_back(static_cast<double>(out.tp) / out.num_gt);
        out.precision.push_back(static_cast<double>(out.tp) / (out.tp + out.fp));
    }
    return out;
}

APResult average_precision(const std::string& cls, std::vector<DetectionRecord> records,
                           const std::map<int, std::vector<BBox>>& gts_by_image,
                           double iou_threshold, bool eleven_point) {
    APResult res;
    res.cls = cls;
    const PrCurve curve = pr_curve(std::move(records), gts_by_image, iou_threshold);
    res.num_gt = curve.num_gt;
    if (res.num_gt == 0) return res;  // AP undefined
    res.defined = true;
    res.tp = curve.tp;
    res.fp = curve.fp;
    const std::vector<double>& recall = curve.recall;
    const std::vector<double>& precision = curve.precision;
    if (recall.empty()) {
        res.ap = 0.0;
        return res;
    }

    // monotone precision envelope from the right
    std::vector<double> prec_env = precision;
    for (int i = static_cast<int>(prec_env.size()) - 2; i >= 0; --i)
        prec_env[static_cast<size_t>(i)] =
            std::max(prec_env[static_cast<size_t>(i)], prec_env[static_cast<size_t>(i) + 1]);

    if (eleven_point) {
        double s = 0.0;
        for (int k = 0; k <= 10; ++k) {
            const double r = k / 10.0;
            double p = 0.0;
            for (size_t i = 0; i < recall.size(); ++i)
                if (recall[i] >= r) {
                    p = prec_env[i];
                    break;
                }
            s += p;
        }
        res.ap = s / 11.0;
    } else {
        double ap = 0.0, prev_r = 0.0;
        for (size_t i = 0; i < recall.size(); ++i) {
            ap += (recall[i] - prev_r) * prec_env[i];
            prev_r = recall[i];
        }
        res.ap = ap;
    }
    return res;
}

double mean_ap(const std::vector<APResult>& results) {
    double s = 0.0;
    int n = 0;
    for (const APResult& r : results)
        if (r.defined) {
            s += r.ap;
            ++n;
        }
    if (n == 0) throw MetricError("mean_ap: no class with ground truth");
    return s / n;
}

}  // namespace jnn
