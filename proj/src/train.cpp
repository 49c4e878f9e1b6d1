#include "jnn/train.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "jnn/error.hpp"
#include "jnn/losses.hpp"
#include "jnn/ops.hpp"
#include "jnn/parallel.hpp"

namespace jnn {

namespace {

struct LoadedData {
    DatasetManifest manifest;
    ClassSplit split;
};

LoadedData load_data(const RunConfig& config) {
    if (config.manifest.empty()) throw DataError("config: data.manifest is required");
    if (config.split.empty()) throw DataError("config: data.split is required");
    LoadedData d;
    d.manifest = load_manifest(config.manifest);
    d.split = load_split(config.split);
    const auto violations = validate_split(d.manifest, d.split);
    if (!violations.empty()) {
        std::string msg = "invalid class split:";
        for (const auto& v : violations) msg += "\n  " + v;
        throw DataError(msg);
    }
    return d;
}

int64_t side_entry_count(const DatasetManifest& m, const std::set<std::string>& classes) {
    int64_t n = 0;
    for (const auto& e : m.entries)
        if (classes.count(e.label)) ++n;
    return n;
}

void write_losses_csv(const std::filesystem::path& path, const std::vector<double>& losses) {
    std::ofstream f(path);
    f << "epoch,loss\n";
    f.precision(17);
    for (size_t i = 0; i < losses.size(); ++i) f << (i + 1) << "," << losses[i] << "\n";
}

void assert_train_class(const std::string& cls, const ClassSplit& split, int epoch) {
    if (split.test.count(cls))
        throw TrainError("test-split class '" + cls + "' appeared in a training batch (epoch " +
                         std::to_string(epoch) + ")");
    if (!split.train.count(cls))
        throw TrainError("class '" + cls + "' outside the training split (epoch " +
                         std::to_string(epoch) + ")");
}

}  // namespace

TrainResult run_training(const RunConfig& config_in, bool quiet) {
    RunConfig config = config_in;
    apply_defaults(config);
    if (config.threads > 0) set_num_threads(config.threads);
    std::filesystem::create_directories(config.out_dir);

    LoadedData data = load_data(config);
    const NetSpec spec = model_spec(config);
    JointModel model(spec, config.seed);
    const uint64_t digest = config_digest(config);
    const auto& params = model.parameters();

    const int64_t train_entries = side_entry_count(data.manifest, data.split.train);
    if (train_entries == 0) throw DataError("training split selects no manifest entries");
    const int batches =
        config.batches_per_epoch > 0
            ? config.batches_per_epoch
            : std::max<int>(1, static_cast<int>(train_entries / config.batch_size));

    TrainResult result;
    result.digest = digest;
    result.checkpoint_path = config.out_dir / "checkpoint.ckpt";

    std::string rng_state;
    if (config.task == Task::Recognition) {
        PairSampler sampler(data.manifest, data.split.train, spec.query_h,
                            config.seed * 0x9E3779B97F4A7C15ull + 1);
        for (int epoch = 1; epoch <= config.epochs; ++epoch) {
            double epoch_sum = 0.0;
            for (int b = 0; b < batches; ++b) {
                RecognitionBatch batch = sampler.sample_batch(config.batch_size);
                assert_train_class(batch.query_class, data.split, epoch);
                const double n = static_cast<double>(batch.pairs.size());
                std::vector<double> ps, ys;
                for (const PairSample& pair : batch.pairs) {
                    assert_train_class(pair.target_class, data.split, epoch);
                    const Tensor out = model.forward(pair.query, pair.target);
                    const double p = out[0];
                    ps.push_back(p);
                    ys.push_back(pair.label);
                    Tensor g({1, 1});
                    if (p > kLogEps && p < 1.0 - kLogEps)
                        g[0] = (p - pair.label) / (p * (1.0 - p)) / n;
                    model.backward(g);
                }
                const double loss = bce_pair_loss(ps, ys);
                if (!std::isfinite(loss))
                    throw TrainError("non-finite loss at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(b + 1));
                epoch_sum += loss;
                sgd_step(params, config.lr, config.momentum);
            }
            const double mean = epoch_sum / batches;
            result.epoch_losses.push_back(mean);
            if (!quiet)
                std::cout << "[epoch " << epoch << "/" << config.epochs << "] loss " << mean
                          << "\n";
            if (config.checkpoint_interval > 0 && epoch % config.checkpoint_interval == 0)
                save_checkpoint(config.out_dir / ("checkpoint_epoch" + std::to_string(epoch) +
                                                  ".ckpt"),
                                model, digest, static_cast<uint32_t>(epoch),
                                sampler.rng_state());
        }
        rng_state = sampler.rng_state();
    } else {
        DetectionSampler sampler(data.manifest, data.split.train, spec.target_h, spec.query_h,
                                 spec.grid, config.seed * 0x9E3779B97F4A7C15ull + 2);
        for (int epoch = 1; epoch <= config.epochs; ++epoch) {
            double epoch_sum = 0.0;
            int epoch_n = 0;
            for (int b = 0; b < batches; ++b) {
                for (int i = 0; i < config.batch_size; ++i) {
                    DetectionSample s = sampler.sample();
                    assert_train_class(s.query_class, data.split, epoch);
                    const Tensor head = model.forward(s.query, s.target);
                    const TargetAssignment asg = assign_targets(s.gts, config.priors, spec.grid);
                    Tensor ghead;
                    DetectionLoss loss;
                    try {
                        loss = total_detection_loss(head, asg, config.loss_weights,
                                                    config.priors, &ghead,
                                                    config.iou_conf_target);
                    } catch (const TrainError& e) {
                        throw TrainError(std::string(e.what()) + " at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(b + 1));
                    }
                    for (int64_t k = 0; k < ghead.numel(); ++k) ghead[k] /= config.batch_size;
                    model.backward(ghead);
                    epoch_sum += loss.total;
                    ++epoch_n;
                }
                sgd_step(params, config.lr, config.momentum);
            }
            const double mean = epoch_sum / epoch_n;
            if (!std::isfinite(mean))
                throw TrainError("non-finite loss at epoch " + std::to_string(epoch));
            result.epoch_losses.push_back(mean);
            if (!quiet)
                std::cout << "[epoch " << epoch << "/" << config.epochs << "] loss " << mean
                          << "\n";
            if (config.checkpoint_interval > 0 && epoch % config.checkpoint_interval == 0)
                save_checkpoint(config.out_dir / ("checkpoint_epoch" + std::to_string(epoch) +
                                                  ".ckpt"),
                                model, digest, static_cast<uint32_t>(epoch),
                                sampler.rng_state());
        }
        rng_state = sampler.rng_state();
    }

    write_losses_csv(config.out_dir / "losses.csv", result.epoch_losses);
    save_checkpoint(result.checkpoint_path, model, digest,
                    static_cast<uint32_t>(config.epochs), rng_state);
    if (!quiet && config.task == Task::Detection) {
        const double rate = detection_localization_rate(model, data.manifest, data.split.train,
                                                        config, config.seed ^ 0x10CA1ull);
        std::cout << "train localization rate (IoU>0.5) " << rate << "\n";
    }
    return result;
}

RecognitionEval evaluate_recognizer(JointModel& model, const DatasetManifest& manifest,
                                    const std::set<std::string>& classes,
                                    const RunConfig& config, uint64_t seed) {
    const bool was_training = model.training();
    model.set_training(false);
    PairSampler sampler(manifest, classes, model.spec().query_h, seed);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < config.eval_pairs; ++i) {
        const PairSample s = sampler.sample();
        scores.push_back(model.forward(s.query, s.target)[0]);
        labels.push_back(s.label);
    }
    model.set_training(was_training);
    RecognitionEval ev;
    ev.roc = roc_sweep(scores, labels, config.roc_thresholds);
    ev.pairs = config.eval_pairs;
    return ev;
}

namespace {

struct EvalItem {
    size_t entry = 0;
    bool positive = false;
};

std::vector<DetectionRecord> detect_in_target(JointModel& model, const Tensor& query,
                                              const Tensor& target, const RunConfig& config,
                                              int grid, int image_id, const std::string& cls) {
    const Tensor head = model.forward(query, target);
    const std::vector<BBox> boxes = decode_grid(head, config.priors, grid);
    std::vector<DetectionRecord> records;
    for (const BBox& b : boxes) {
        if (b.conf < config.conf_floor) continue;
        DetectionRecord r;
        r.image_id = image_id;
        r.cls = cls;
        r.box = b;
        r.conf = b.conf;
        records.push_back(r);
    }
    return nms(records, config.nms_iou);
}

}  // namespace

DetectionEval evaluate_detector(JointModel& model, const DatasetManifest& manifest,
                                const std::set<std::string>& classes, const RunConfig& config,
                                uint64_t seed) {
    const bool was_training = model.training();
    model.set_training(false);
    const NetSpec& spec = model.spec();
    DetectionSampler sampler(manifest, classes, spec.target_h, spec.query_h, spec.grid, seed);
    std::mt19937_64 rng(seed ^ 0xD1B54A32D192ED03ull);

    DetectionEval ev;
    int image_id = 0;
    for (const std::string& cls : sampler.classes()) {
        const auto& entries = sampler.entries_of(cls);
        const size_t cap = config.max_targets_per_class > 0
                               ? std::min<size_t>(entries.size(),
                                                  static_cast<size_t>(config.max_targets_per_class))
                               : entries.size();
        std::vector<EvalItem> items;
        for (size_t i = 0; i < cap; ++i) items.push_back({entries[i], true});
        // equal number of other-class targets (the 50% no-match case)
        std::vector<size_t> negatives_pool;
        for (const std::string& other : sampler.classes()) {
            if (other == cls) continue;
            for (size_t i : sampler.entries_of(other)) negatives_pool.push_back(i);
        }
        std::uniform_int_distribution<size_t> pick(0, negatives_pool.size() - 1);
        for (size_t i = 0; i < cap; ++i) items.push_back({negatives_pool[pick(rng)], false});

        std::vector<DetectionRecord> records;
        std::map<int, std::vector<BBox>> gts;
        for (const EvalItem& item : items) {
            ++image_id;
            const Tensor query = sampler.query_for_class(
                cls, item.positive ? static_cast<int>(item.entry) : -1, rng);
            const Tensor target = sampler.target_tensor(item.entry);
            auto kept =
                detect_in_target(model, query, target, config, spec.grid, image_id, cls);
            records.insert(records.end(), kept.begin(), kept.end());
            if (item.positive) gts[image_id] = sampler.target_gts(item.entry);
        }
        ev.per_class.push_back(
            average_precision(cls, records, gts, 0.5, config.eleven_point_ap));
        ev.curves.push_back(pr_curve(records, gts, 0.5));
    }
    ev.map = mean_ap(ev.per_class);
    model.set_training(was_training);
    return ev;
}

double detection_localization_rate(JointModel& model, const DatasetManifest& manifest,
                                   const std::set<std::string>& classes, const RunConfig& config,
                                   uint64_t seed, int max_items) {
    const bool was_training = model.training();
    model.set_training(false);
    const NetSpec& spec = model.spec();
    DetectionSampler sampler(manifest, classes, spec.target_h, spec.query_h, spec.grid, seed);
    std::mt19937_64 rng(seed ^ 0xA5A5A5A55A5A5A5Aull);

    int total = 0, matched = 0;
    for (const std::string& cls : sampler.classes()) {
        for (size_t entry : sampler.entries_of(cls)) {
            if (max_items > 0 && total >= max_items) break;
            const Tensor query = sampler.query_for_class(cls, static_cast<int>(entry), rng);
            const Tensor target = sampler.target_tensor(entry);
            const Tensor head = model.forward(query, target);
            const std::vector<BBox> boxes = decode_grid(head, config.priors, spec.grid);
            const BBox* top = nullptr;
            for (const BBox& b : boxes)
                if (!top || b.conf > top->conf) top = &b;
            ++total;
            for (const BBox& gt : sampler.target_gts(entry))
                if (top && iou(*top, gt) > 0.5) {
                    ++matched;
                    break;
                }
        }
    }
    model.set_training(was_training);
    return total > 0 ? static_cast<double>(matched) / total : 0.0;
}

double run_eval(const RunConfig& config_in, const std::filesystem::path& checkpoint_path,
                bool quiet) {
    RunConfig config = config_in;
    apply_defaults(config);
    if (config.threads > 0) set_num_threads(config.threads);
    std::filesystem::create_directories(config.out_dir);

    LoadedData data = load_data(config);
    JointModel model(model_spec(config), config.seed);
    load_checkpoint(checkpoint_path, model, config_digest(config));
    model.set_training(false);

    nlohmann::json j;
    j["task"] = task_name(config.task);
    std::ofstream metrics(config.out_dir / "metrics.txt");
    metrics.precision(10);
    double headline = 0.0;

    if (config.task == Task::Recognition) {
        const RecognitionEval ev = evaluate_recognizer(model, data.manifest, data.split.test,
                                                       config, config.seed ^ 0xE7511E5ull);
        metrics << "pairs " << ev.pairs << "\n";
        metrics << "auc " << ev.roc.auc << "\n";
        metrics << "best_threshold " << ev.roc.best.threshold << "\n";
        metrics << "accuracy " << ev.roc.best.accuracy << "\n";
        metrics << "precision " << ev.roc.best.precision << "\n";
        metrics << "tpr " << ev.roc.best.tpr << "\n";
        metrics << "fpr " << ev.roc.best.fpr << "\n";
        j["auc"] = ev.roc.auc;
        j["best"] = {{"threshold", ev.roc.best.threshold},
                     {"accuracy", ev.roc.best.accuracy},
                     {"precision", ev.roc.best.precision},
                     {"tpr", ev.roc.best.tpr},
                     {"fpr", ev.roc.best.fpr}};
        auto& pts = j["roc"] = nlohmann::json::array();
        for (const RocPoint& p : ev.roc.points)
            pts.push_back({{"threshold", p.threshold},
                           {"fpr", p.fpr},
                           {"tpr", p.tpr},
                           {"accuracy", p.accuracy},
                           {"precision", p.precision}});
        headline = ev.roc.best.accuracy;
        if (!quiet)
            std::cout << "auc " << ev.roc.auc << ", best accuracy " << ev.roc.best.accuracy
                      << "\n";
    } else {
        const DetectionEval ev = evaluate_detector(model, data.manifest, data.split.test, config,
                                                   config.seed ^ 0xDE7EC7ull);
        metrics << "map " << ev.map << "\n";
        for (const APResult& r : ev.per_class)
            metrics << "ap_" << r.cls << " " << (r.defined ? r.ap : -1.0) << "\n";
        j["map"] = ev.map;
        auto& per = j["classes"] = nlohmann::json::array();
        for (size_t i = 0; i < ev.per_class.size(); ++i) {
            const APResult& r = ev.per_class[i];
            nlohmann::json c = {{"class", r.cls}, {"ap", r.ap},       {"defined", r.defined},
                                {"tp", r.tp},     {"fp", r.fp},       {"num_gt", r.num_gt},
                                {"recall", ev.curves[i].recall},
                                {"precision", ev.curves[i].precision}};
            per.push_back(std::move(c));
        }
        headline = ev.map;
        if (!quiet) std::cout << "map " << ev.map << "\n";
    }

    std::ofstream rf(config.out_dir / "results.json");
    rf << j.dump(2) << "\n";
    return headline;
}

std::vector<std::array<bool, 5>> ablation_masks() {
    const char* rows[10] = {"1",         "1,2", "1,2,3", "1,2,3,4", "1,2,3,4,5",
                            "1,4",       "2,4", "3,4",   "1,2,4",   "1,3,4"};
    std::vector<std::array<bool, 5>> masks;
    for (const char* r : rows) masks.push_back(parse_mask(r));
    return masks;
}

std::vector<AblationRow> run_ablation(const RunConfig& config_in,
                                      const std::vector<std::array<bool, 5>>& masks,
                                      bool quiet) {
    if (masks.size() < 2) throw DataError("ablation needs at least 2 masks");
    RunConfig base = config_in;
    apply_defaults(base);
    if (base.task != Task::Detection) throw DataError("ablation applies to the detection task");
    std::filesystem::create_directories(base.out_dir);

    std::vector<AblationRow> rows;
    for (const auto& mask : masks) {
        RunConfig cfg = base;
        cfg.mask = mask;
        std::string tag = mask_to_string(mask);
        std::replace(tag.begin(), tag.end(), ',', '_');
        cfg.out_dir = base.out_dir / ("ablate_" + tag);
        const TrainResult tr = run_training(cfg, quiet);

        LoadedData data = load_data(cfg);
        JointModel model(model_spec(cfg), cfg.seed);
        load_checkpoint(tr.checkpoint_path, model, tr.digest);
        const DetectionEval ev = evaluate_detector(model, data.manifest, data.split.test, cfg,
                                                   cfg.seed ^ 0xDE7EC7ull);
        rows.push_back({mask, ev.map});
        if (!quiet) std::cout << "mask {" << mask_to_string(mask) << "} map " << ev.map << "\n";
    }

    std::ofstream f(base.out_dir / "ablation.txt");
    f << "JL1 JL2 JL3 JL4 JL5   mAP\n";
    f.precision(6);
    for (const AblationRow& r : rows) {
        for (int i = 0; i < 5; ++i) f << (r.mask[static_cast<size_t>(i)] ? " x  " : "    ");
        f << " " << r.map << "\n";
    }
    return rows;
}

void write_report(const std::filesystem::path& results_json,
                  const std::filesystem::path& out_dir) {
    std::ifstream f(results_json);
    if (!f) throw IoError("cannot open results file " + results_json.string());
    nlohmann::json j;
    f >> j;
    std::filesystem::create_directories(out_dir);

    const std::string task = j.at("task");
    if (task == "recognition") {
        std::ofstream roc(out_dir / "roc.csv");
        roc << "threshold,fpr,tpr,accuracy,precision\n";
        roc.precision(10);
        for (const auto& p : j.at("roc"))
            roc << p.at("threshold").get<double>() << "," << p.at("fpr").get<double>() << ","
                << p.at("tpr").get<double>() << "," << p.at("accuracy").get<double>() << ","
                << p.at("precision").get<double>() << "\n";
    } else {
        std::ofstream pr(out_dir / "pr.csv");
        pr << "class,recall,precision\n";
        pr.precision(10);
        for (const auto& c : j.at("classes")) {
            const auto& recall = c.at("recall");
            const auto& precision = c.at("precision");
            for (size_t i = 0; i < recall.size(); ++i)
                pr << c.at("class").get<std::string>() << "," << recall[i].get<double>() << ","
                   << precision[i].get<double>() << "\n";
        }
    }
}

}  // namespace jnn
