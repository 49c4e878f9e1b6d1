#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "jnn/anchor.hpp"
#include "jnn/losses.hpp"
#include "jnn/net.hpp"

namespace jnn {

enum class Task { Recognition, Detection };

/// Everything a run needs. Zero-valued optimizer fields are replaced by the
/// task/preset defaults in apply_defaults().
struct RunConfig {
    Task task = Task::Detection;
    Preset preset = Preset::Desk;
    uint64_t seed = 7;
    int threads = 0;  // 0 = auto
    std::filesystem::path out_dir = "out";

    std::filesystem::path manifest;
    std::filesystem::path split;

    double lr = 0.0;
    double momentum = 0.9;
    int epochs = 0;
    int batch_size = 0;
    int batches_per_epoch = 0;  // 0 = one pass over the training entries
    int checkpoint_interval = 0;

    LossWeights loss_weights;
    bool iou_conf_target = false;

    std::array<bool, 5> mask{true, true, false, true, false};
    int anchors = 5;
    std::vector<AnchorPrior> priors;  // empty = default set

    double slope = 0.1;
    int recognizer_input = 0;  // 0 = preset default

    int eval_pairs = 400;
    int max_targets_per_class = 0;  // 0 = all
    double nms_iou = 0.45;
    double conf_floor = 0.005;
    int roc_thresholds = 20;
    bool eleven_point_ap = false;
};

/// Line-oriented key=value file with [section] headers. Unknown keys are an
/// error. Relative paths resolve against the config file's directory.
RunConfig load_config(const std::filesystem::path& path);

/// Fills zero optimizer fields with task/preset defaults and the default
/// anchor priors; validates invariants (lr > 0, epochs >= 1, files exist when
/// set).
void apply_defaults(RunConfig& config);

/// The network spec a config builds (after apply_defaults).
NetSpec model_spec(const RunConfig& config);

/// FNV-1a 64-bit over the architecture description; stored in checkpoints so
/// that a config drift is caught on load.
uint64_t fnv1a(const std::string& text);
uint64_t config_digest(const RunConfig& config);

std::string task_name(Task t);
std::string preset_name(Preset p);

}  // namespace jnn
