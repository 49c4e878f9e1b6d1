#pragma once

#include <set>

#include "jnn/checkpoint.hpp"
#include "jnn/config.hpp"
#include "jnn/manifest.hpp"
#include "jnn/metrics.hpp"
#include "jnn/sampler.hpp"

namespace jnn {

struct TrainResult {
    std::vector<double> epoch_losses;
    std::filesystem::path checkpoint_path;
    uint64_t digest = 0;
};

/// Full training run: sample -> forward -> loss -> backward -> sgd_step.
/// Writes losses.csv and a final checkpoint under config.out_dir, asserting
/// every epoch that no test-split class enters a training batch. quiet
/// suppresses the per-epoch stdout line.
TrainResult run_training(const RunConfig& config, bool quiet = false);

struct RecognitionEval {
    RocResult roc;
    int pairs = 0;
};

struct DetectionEval {
    std::vector<APResult> per_class;
    std::vector<PrCurve> curves;  // aligned with per_class
    double map = 0.0;
};

/// Unseen-class pair scoring + ROC sweep over the configured split side.
RecognitionEval evaluate_recognizer(JointModel& model, const DatasetManifest& manifest,
                                    const std::set<std::string>& classes,
                                    const RunConfig& config, uint64_t seed);

/// Per-class AP / mAP over the given split side; every class contributes its
/// images as positive targets plus an equal number of other-class negatives.
DetectionEval evaluate_detector(JointModel& model, const DatasetManifest& manifest,
                                const std::set<std::string>& classes, const RunConfig& config,
                                uint64_t seed);

/// Fraction of positive training targets whose highest-confidence decoded box
/// overlaps a ground truth at IoU > 0.5.
double detection_localization_rate(JointModel& model, const DatasetManifest& manifest,
                                   const std::set<std::string>& classes, const RunConfig& config,
                                   uint64_t seed, int max_items = 0);

/// Loads the checkpoint and writes metrics.txt + results.json under
/// config.out_dir. Returns the headline metric (best accuracy or mAP).
double run_eval(const RunConfig& config, const std::filesystem::path& checkpoint_path,
                bool quiet = false);

struct AblationRow {
    std::array<bool, 5> mask;
    double map = 0.0;
};

/// Trains and evaluates each mask under an identical seed/config; writes
/// ablation.txt under config.out_dir.
std::vector<AblationRow> run_ablation(const RunConfig& config,
                                      const std::vector<std::array<bool, 5>>& masks,
                                      bool quiet = false);

/// The ten joint-layer combinations of the placement study.
std::vector<std::array<bool, 5>> ablation_masks();

/// Emits plot-ready ROC/PR CSV curves from a results.json written by run_eval.
void write_report(const std::filesystem::path& results_json,
                  const std::filesystem::path& out_dir);

}  // namespace jnn
