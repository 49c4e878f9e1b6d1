#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

#include "doctest.h"
#include "jnn/metrics.hpp"

using namespace jnn;

namespace {

DetectionRecord rec(int img, double x, double y, double w, double h, double conf) {
    DetectionRecord r;
    r.image_id = img;
    r.box = {x, y, w, h, conf};
    r.conf = conf;
    return r;
}

// Definition-following suppression: repeatedly scan for the highest-confidence
// unsuppressed record (earliest on ties) and drop everything it overlaps.
std::vector<DetectionRecord> brute_force_nms(const std::vector<DetectionRecord>& records,
                                             double thr) {
    std::vector<bool> alive(records.size(), true), kept(records.size(), false);
    for (;;) {
        int best = -1;
        for (size_t i = 0; i < records.size(); ++i)
            if (alive[i] && (best < 0 || records[i].conf > records[static_cast<size_t>(best)].conf))
                best = static_cast<int>(i);
        if (best < 0) break;
        kept[static_cast<size_t>(best)] = true;
        alive[static_cast<size_t>(best)] = false;
        for (size_t i = 0; i < records.size(); ++i)
            if (alive[i] && iou(records[i].box, records[static_cast<size_t>(best)].box) > thr)
                alive[i] = false;
    }
    std::vector<DetectionRecord> out;
    for (size_t i = 0; i < records.size(); ++i)
        if (kept[i]) out.push_back(records[i]);
    return out;
}

bool same_boxes(const std::vector<DetectionRecord>& a, const std::vector<DetectionRecord>& b) {
    if (a.size() != b.size()) return false;
    auto key = [](const DetectionRecord& r) {
        return std::tuple(r.conf, r.box.x, r.box.y, r.box.w, r.box.h);
    };
    std::vector<std::tuple<double, double, double, double, double>> ka, kb;
    for (const auto& r : a) ka.push_back(key(r));
    for (const auto& r : b) kb.push_back(key(r));
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    return ka == kb;
}

}  // namespace

TEST_CASE("iou point cases") {
    const BBox a{1, 1, 2, 2, 0};
    CHECK(iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    const BBox far{10, 10, 2, 2, 0};
    CHECK(iou(a, far) == 0.0);
    // corner boxes (0,0,2,2) and (1,0,2,2): centers (1,1) and (2,1)
    const BBox b{2, 1, 2, 2, 0};
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("nms point cases") {
    SUBCASE("single record unchanged") {
        const auto out = nms({rec(0, 1, 1, 2, 2, 0.7)}, 0.45);
        CHECK(out.size() == 1);
        CHECK(out[0].conf == 0.7);
    }
    SUBCASE("duplicate boxes keep only the stronger one") {
        const auto out = nms({rec(0, 1, 1, 2, 2, 0.9), rec(0, 1, 1, 2, 2, 0.8)}, 0.45);
        CHECK(out.size() == 1);
        CHECK(out[0].conf == 0.9);
    }
    SUBCASE("confidence ties break by input order") {
        const auto out = nms({rec(0, 1, 1, 2, 2, 0.8), rec(0, 1.2, 1, 2, 2, 0.8)}, 0.45);
        CHECK(out.size() == 1);
        CHECK(out[0].box.x == 1.0);
    }
}

TEST_CASE("nms equals the brute-force oracle on random instances") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> pos(0.0, 10.0), size(0.5, 3.0), conf(0.01, 0.99);
    std::uniform_int_distribution<int> count(1, 50);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<DetectionRecord> records;
        const int n = count(rng);
        for (int i = 0; i < n; ++i)
            records.push_back(rec(0, pos(rng), pos(rng), size(rng), size(rng), conf(rng)));
        const double thr = 0.3 + 0.3 * conf(rng);
        CHECK(same_boxes(nms(records, thr), brute_force_nms(records, thr)));
    }
}

TEST_CASE("roc sweep on perfectly separated scores") {
    std::vector<double> scores{0.9, 0.85, 0.8, 0.2, 0.15, 0.1};
    std::vector<int> labels{1, 1, 1, 0, 0, 0};
    const RocResult r = roc_sweep(scores, labels, 20);
    CHECK(r.auc == doctest::Approx(1.0).epsilon(0.01));
    CHECK(r.best.accuracy == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("roc sweep on constant scores is uninformative") {
    std::vector<double> scores(10, 0.5);
    std::vector<int> labels{1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
    const RocResult r = roc_sweep(scores, labels, 20);
    CHECK(r.auc == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("roc sweep rejects single-class input") {
    CHECK_THROWS_AS(roc_sweep({0.1, 0.9}, {1, 1}, 20), MetricError);
}

TEST_CASE("roc best accuracy equals an exhaustive-threshold oracle") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> sd(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i = 0; i < 10; ++i) {
            scores.push_back(sd(rng));
            labels.push_back(i % 2);
        }
        const RocResult r = roc_sweep(scores, labels, 20);
        // exhaustive oracle over the same threshold grid
        const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
        double best = 0.0;
        for (int k = 0; k < 20; ++k) {
            const double thr = *mn + (*mx - *mn) * k / 19.0;
            int correct = 0;
            for (size_t i = 0; i < scores.size(); ++i)
                correct += (scores[i] >= thr ? 1 : 0) == labels[i];
            best = std::max(best, correct / 10.0);
        }
        CHECK(r.best.accuracy == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("roc auc is invariant under strictly monotone score transforms") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> sd(0.05, 0.95);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        scores.push_back(sd(rng));
        labels.push_back(rng() % 2);
    }
    if (std::count(labels.begin(), labels.end(), 1) == 0) labels[0] = 1;
    if (std::count(labels.begin(), labels.end(), 0) == 0) labels[1] = 0;
    const double auc1 = roc_sweep(scores, labels, 20).auc;
    std::vector<double> warped;
    for (double s : scores) warped.push_back(std::exp(3.0 * s));
    const double auc2 = roc_sweep(warped, labels, 20).auc;
    CHECK(std::fabs(auc1 - auc2) <= 0.01 + 1e-12);
}

TEST_CASE("average precision canonical cases") {
    const std::map<int, std::vector<BBox>> gts{{0, {{5, 5, 2, 2, 0}}}};

    SUBCASE("single perfect detection: AP 1") {
        const APResult r = average_precision("c", {rec(0, 5, 5, 2, 2, 0.9)}, gts, 0.5);
        CHECK(r.defined);
        CHECK(r.ap == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("TP above FP: AP 1") {
        const APResult r = average_precision(
            "c", {rec(0, 5, 5, 2, 2, 0.9), rec(0, 20, 20, 2, 2, 0.8)}, gts, 0.5);
        CHECK(r.ap == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("FP above TP: AP 0.5") {
        const APResult r = average_precision(
            "c", {rec(0, 20, 20, 2, 2, 0.9), rec(0, 5, 5, 2, 2, 0.8)}, gts, 0.5);
        CHECK(r.ap == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("no ground truth: AP undefined") {
        const APResult r = average_precision("c", {rec(0, 5, 5, 2, 2, 0.9)}, {}, 0.5);
        CHECK(!r.defined);
    }
    SUBCASE("detections but zero TP: AP 0") {
        const APResult r = average_precision("c", {rec(0, 20, 20, 2, 2, 0.9)}, gts, 0.5);
        CHECK(r.defined);
        CHECK(r.ap == 0.0);
        CHECK(r.tp == 0);
    }
}

TEST_CASE("average precision invariances") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> pos(0.0, 10.0), conf(0.01, 0.99);
    std::map<int, std::vector<BBox>> gts;
    std::vector<DetectionRecord> records;
    for (int img = 0; img < 4; ++img) {
        gts[img] = {{pos(rng), pos(rng), 1.5, 1.5, 0}};
        for (int j = 0; j < 5; ++j) {
            BBox b = gts[img][0];
            b.x += (conf(rng) - 0.5) * 2.0;
            b.y += (conf(rng) - 0.5) * 2.0;
            records.push_back(rec(img, b.x, b.y, b.w, b.h, conf(rng)));
        }
    }
    const double ap = average_precision("c", records, gts, 0.5).ap;
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);

    // order-preserving confidence rescale
    std::vector<DetectionRecord> rescaled = records;
    for (auto& r : rescaled) {
        r.conf = 0.1 + 0.5 * r.conf;
        r.box.conf = r.conf;
    }
    CHECK(average_precision("c", rescaled, gts, 0.5).ap == doctest::Approx(ap).epsilon(1e-12));

    // a FP inserted above every TP cannot raise AP
    std::vector<DetectionRecord> worse = records;
    worse.insert(worse.begin(), rec(0, 50, 50, 1, 1, 1.0));
    CHECK(average_precision("c", worse, gts, 0.5).ap <= ap + 1e-12);
}

TEST_CASE("mean ap") {
    APResult a;
    a.cls = "a";
    a.ap = 1.0;
    a.defined = true;
    a.num_gt = 3;
    APResult b;
    b.cls = "b";
    b.ap = 0.0;
    b.defined = true;
    b.num_gt = 2;
    APResult undef;
    undef.cls = "c";
    CHECK(mean_ap({a, b}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mean_ap({a, b, undef}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mean_ap({a}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(mean_ap({undef}), MetricError);
}
