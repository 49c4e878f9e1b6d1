#include "jnn/config.hpp"

#include <fstream>
#include <sstream>

#include "jnn/error.hpp"

namespace jnn {

std::string task_name(Task t) { return t == Task::Recognition ? "recognition" : "detection"; }
std::string preset_name(Preset p) { return p == Preset::Paper ? "paper" : "desk"; }

static std::vector<AnchorPrior> default_priors() {
    return {{1.0, 1.0}, {2.0, 2.0}, {3.5, 3.5}, {2.0, 4.0}, {4.0, 2.0}};
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw DataError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<AnchorPrior> parse_priors(const std::string& v) {
    std::vector<AnchorPrior> priors;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const size_t x = tok.find('x');
        if (x == std::string::npos)
            throw DataError("config: priors expect WxH pairs, got '" + tok + "'");
        priors.push_back({std::stod(tok.substr(0, x)), std::stod(tok.substr(x + 1))});
    }
    return priors;
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config " + path.string());
    const std::filesystem::path base =
        path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    auto resolve = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_absolute() ? p : base / p;
    };

    RunConfig c;
    std::string line, section;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw DataError("config line " + std::to_string(line_no) + ": bad section header");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = (section.empty() ? "" : section + ".") + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "task") {
            if (value == "recognition")
                c.task = Task::Recognition;
            else if (value == "detection")
                c.task = Task::Detection;
            else
                throw DataError("config line " + std::to_string(line_no) +
                                ": task must be recognition|detection");
        } else if (key == "preset") {
            if (value == "paper")
                c.preset = Preset::Paper;
            else if (value == "desk")
                c.preset = Preset::Desk;
            else
                throw DataError("config line " + std::to_string(line_no) +
                                ": preset must be paper|desk");
        } else if (key == "seed") {
            c.seed = std::stoull(value);
        } else if (key == "threads") {
            c.threads = std::stoi(value);
        } else if (key == "out_dir") {
            c.out_dir = resolve(value);
        } else if (key == "data.manifest") {
            c.manifest = resolve(value);
        } else if (key == "data.split") {
            c.split = resolve(value);
        } else if (key == "optimizer.lr") {
            c.lr = std::stod(value);
        } else if (key == "optimizer.momentum") {
            c.momentum = std::stod(value);
        } else if (key == "optimizer.epochs") {
            c.epochs = std::stoi(value);
        } else if (key == "optimizer.batch_size") {
            c.batch_size = std::stoi(value);
        } else if (key == "optimizer.batches_per_epoch") {
            c.batches_per_epoch = std::stoi(value);
        } else if (key == "optimizer.checkpoint_interval") {
            c.checkpoint_interval = std::stoi(value);
        } else if (key == "loss.lambda_coord") {
            c.loss_weights.coord = std::stod(value);
        } else if (key == "loss.lambda_obj") {
            c.loss_weights.obj = std::stod(value);
        } else if (key == "loss.lambda_noobj") {
            c.loss_weights.noobj = std::stod(value);
        } else if (key == "loss.iou_conf_target") {
            c.iou_conf_target = parse_bool(value, key);
        } else if (key == "detector.mask") {
            c.mask = parse_mask(value);
        } else if (key == "detector.anchors") {
            c.anchors = std::stoi(value);
        } else if (key == "detector.priors") {
            c.priors = parse_priors(value);
        } else if (key == "model.slope") {
            c.slope = std::stod(value);
        } else if (key == "model.recognizer_input") {
            c.recognizer_input = std::stoi(value);
        } else if (key == "eval.pairs") {
            c.eval_pairs = std::stoi(value);
        } else if (key == "eval.max_targets_per_class") {
            c.max_targets_per_class = std::stoi(value);
        } else if (key == "eval.nms_iou") {
            c.nms_iou = std::stod(value);
        } else if (key == "eval.conf_floor") {
            c.conf_floor = std::stod(value);
        } else if (key == "eval.roc_thresholds") {
            c.roc_thresholds = std::stoi(value);
        } else if (key == "eval.eleven_point_ap") {
            c.eleven_point_ap = parse_bool(value, key);
        } else {
            throw DataError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                            "'");
        }
    }
    return c;
}

void apply_defaults(RunConfig& c) {
    if (c.priors.empty()) c.priors = default_priors();
    if (c.anchors != static_cast<int>(c.priors.size()))
        throw DataError("config: anchors=" + std::to_string(c.anchors) + " but " +
                        std::to_string(c.priors.size()) + " priors given");
    const bool desk = c.preset == Preset::Desk;
    if (c.task == Task::Recognition) {
        if (c.lr == 0.0) c.lr = desk ? 0.0015 : 0.005;
        if (c.epochs == 0) c.epochs = desk ? 50 : 200;
        if (c.batch_size == 0) c.batch_size = desk ? 16 : 64;
    } else {
        if (c.lr == 0.0) c.lr = desk ? 0.0005 : 0.0001;
        if (c.epochs == 0) c.epochs = desk ? 30 : 160;
        if (c.batch_size == 0) c.batch_size = desk ? 8 : 16;
    }
    if (c.lr <= 0.0) throw DataError("config: lr must be > 0");
    if (c.epochs < 1) throw DataError("config: epochs must be >= 1");
    if (c.batch_size < 1) throw DataError("config: batch_size must be >= 1");
    if (!c.manifest.empty() && !std::filesystem::exists(c.manifest))
        throw DataError("config: manifest does not exist: " + c.manifest.string());
    if (!c.split.empty() && !std::filesystem::exists(c.split))
        throw DataError("config: split file does not exist: " + c.split.string());
}

NetSpec model_spec(const RunConfig& c) {
    if (c.task == Task::Recognition)
        return recognizer_spec(c.preset, c.slope, c.recognizer_input);
    return detector_spec(c.preset, c.mask, c.anchors, c.slope);
}

uint64_t fnv1a(const std::string& text) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t config_digest(const RunConfig& c) {
    std::ostringstream os;
    os << task_name(c.task) << "\n" << model_spec(c).to_text();
    os << "priors";
    for (const auto& p : c.priors) os << " " << p.w << "x" << p.h;
    os << "\n";
    return fnv1a(os.str());
}

}  // namespace jnn
