#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "jnn/anchor.hpp"
#include "jnn/losses.hpp"
#include "jnn/metrics.hpp"
#include "jnn/net.hpp"
#include "jnn/ops.hpp"
#include "jnn/parallel.hpp"
#include "jnn/synthetic.hpp"
#include "jnn/train.hpp"

namespace py = pybind11;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

jnn::Tensor to_tensor(const DArray& a) {
    std::vector<int64_t> shape(static_cast<size_t>(a.ndim()));
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<size_t>(i)] = a.shape(i);
    std::vector<double> data(a.data(), a.data() + a.size());
    return jnn::Tensor::from_data(std::move(shape), std::move(data));
}

py::array_t<double> to_numpy(const jnn::Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::copy(t.data(), t.data() + t.numel(), a.mutable_data());
    return a;
}

jnn::BBox tuple_box(const std::array<double, 4>& b) { return {b[0], b[1], b[2], b[3], 0.0}; }

std::vector<jnn::AnchorPrior> to_priors(const std::vector<std::array<double, 2>>& ps) {
    std::vector<jnn::AnchorPrior> out;
    for (const auto& p : ps) out.push_back({p[0], p[1]});
    return out;
}

std::vector<jnn::BBox> to_boxes(const std::vector<std::array<double, 4>>& bs) {
    std::vector<jnn::BBox> out;
    for (const auto& b : bs) out.push_back(tuple_box(b));
    return out;
}

jnn::Preset parse_preset(const std::string& s) {
    if (s == "paper") return jnn::Preset::Paper;
    if (s == "desk") return jnn::Preset::Desk;
    throw jnn::DataError("preset must be paper|desk");
}

class PyModel {
public:
    PyModel(jnn::NetSpec spec, uint64_t seed) : model_(std::move(spec), seed) {
        model_.set_training(false);
    }

    py::array_t<double> forward(const DArray& query, const DArray& target) {
        return to_numpy(model_.forward(to_tensor(query), to_tensor(target)));
    }

    size_t parameter_count() const { return model_.parameters().size(); }
    std::string spec_text() const { return model_.spec().to_text(); }
    int grid() const { return model_.spec().grid; }
    int anchors() const { return model_.spec().anchors; }

private:
    jnn::JointModel model_;
};

}  // namespace

PYBIND11_MODULE(_jnn, m) {
    m.doc() = "joint twin-branch networks: tensor ops, anchor math, metrics, training";

    py::register_exception<jnn::Error>(m, "JnnError");

    m.def("set_num_threads", &jnn::set_num_threads, py::arg("n"));

    // --- tensor ops ---
    m.def(
        "conv2d",
        [](const DArray& x, const DArray& w, const DArray& b, int stride, int padding) {
            return to_numpy(jnn::conv2d(to_tensor(x), to_tensor(w), to_tensor(b), stride,
                                        padding));
        },
        py::arg("x"), py::arg("w"), py::arg("b"), py::arg("stride") = 1, py::arg("padding") = 0);
    m.def(
        "maxpool2d",
        [](const DArray& x, int kernel, int stride) {
            return to_numpy(jnn::maxpool2d(to_tensor(x), kernel, stride));
        },
        py::arg("x"), py::arg("kernel"), py::arg("stride"));
    m.def(
        "linear",
        [](const DArray& x, const DArray& w, const DArray& b) {
            return to_numpy(jnn::linear(to_tensor(x), to_tensor(w), to_tensor(b)));
        },
        py::arg("x"), py::arg("w"), py::arg("b"));
    m.def(
        "leaky_relu",
        [](const DArray& x, double slope) { return to_numpy(jnn::leaky_relu(to_tensor(x), slope)); },
        py::arg("x"), py::arg("slope") = 0.1);
    m.def("sigmoid", [](const DArray& x) { return to_numpy(jnn::sigmoid(to_tensor(x))); },
          py::arg("x"));
    m.def(
        "concat_channels",
        [](const DArray& a, const DArray& b) {
            return to_numpy(jnn::concat_channels(to_tensor(a), to_tensor(b)));
        },
        py::arg("a"), py::arg("b"));

    // --- losses and anchor math ---
    m.def("bce_pair_loss",
          [](const std::vector<double>& p, const std::vector<double>& y) {
              return jnn::bce_pair_loss(p, y);
          },
          py::arg("p"), py::arg("y"));
    m.def(
        "decode_anchor",
        [](const std::array<double, 5>& t, int cx, int cy, const std::array<double, 2>& prior) {
            const jnn::BBox b = jnn::decode_anchor({t[0], t[1], t[2], t[3], t[4]}, cx, cy,
                                                   {prior[0], prior[1]});
            return py::make_tuple(b.x, b.y, b.w, b.h, b.conf);
        },
        py::arg("t"), py::arg("cx"), py::arg("cy"), py::arg("prior"));
    m.def(
        "encode_anchor",
        [](const std::array<double, 4>& box, int cx, int cy, const std::array<double, 2>& prior) {
            const jnn::RawPrediction t =
                jnn::encode_anchor(tuple_box(box), cx, cy, {prior[0], prior[1]});
            return py::make_tuple(t.tx, t.ty, t.tw, t.th);
        },
        py::arg("box"), py::arg("cx"), py::arg("cy"), py::arg("prior"));
    m.def(
        "assign_targets",
        [](const std::vector<std::array<double, 4>>& gts,
           const std::vector<std::array<double, 2>>& priors, int grid) {
            const jnn::TargetAssignment asg =
                jnn::assign_targets(to_boxes(gts), to_priors(priors), grid);
            py::dict d;
            d["obj_mask"] = std::vector<int>(asg.obj_mask.begin(), asg.obj_mask.end());
            d["positives"] = asg.positives();
            return d;
        },
        py::arg("gts"), py::arg("priors"), py::arg("grid"));
    m.def(
        "total_detection_loss",
        [](const DArray& head, const std::vector<std::array<double, 4>>& gts,
           const std::vector<std::array<double, 2>>& priors, double lambda_coord,
           double lambda_obj, double lambda_noobj, bool iou_targets) {
            const auto ps = to_priors(priors);
            const jnn::Tensor h = to_tensor(head);
            const int grid = static_cast<int>(h.dim(h.ndim() - 1));
            const jnn::TargetAssignment asg = jnn::assign_targets(to_boxes(gts), ps, grid);
            const jnn::DetectionLoss l = jnn::total_detection_loss(
                h, asg, {lambda_coord, lambda_obj, lambda_noobj}, ps, nullptr, iou_targets);
            py::dict d;
            d["total"] = l.total;
            d["loc"] = l.loc;
            d["conf"] = l.conf;
            return d;
        },
        py::arg("head"), py::arg("gts"), py::arg("priors"), py::arg("lambda_coord") = 5.0,
        py::arg("lambda_obj") = 1.0, py::arg("lambda_noobj") = 0.5,
        py::arg("iou_targets") = false);

    // --- metrics ---
    m.def(
        "iou",
        [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
            return jnn::iou(tuple_box(a), tuple_box(b));
        },
        py::arg("a"), py::arg("b"), "IoU of two center-format (x,y,w,h) boxes");
    m.def(
        "nms",
        [](const std::vector<std::array<double, 5>>& boxes, double iou_threshold) {
            std::vector<jnn::DetectionRecord> records;
            for (const auto& b : boxes) {
                jnn::DetectionRecord r;
                r.box = {b[0], b[1], b[2], b[3], b[4]};
                r.conf = b[4];
                records.push_back(r);
            }
            std::vector<std::array<double, 5>> out;
            for (const auto& r : jnn::nms(records, iou_threshold))
                out.push_back({r.box.x, r.box.y, r.box.w, r.box.h, r.conf});
            return out;
        },
        py::arg("boxes"), py::arg("iou_threshold") = 0.45);
    m.def(
        "roc_sweep",
        [](const std::vector<double>& scores, const std::vector<int>& labels, int n_thresholds) {
            const jnn::RocResult r = jnn::roc_sweep(scores, labels, n_thresholds);
            py::dict d;
            d["auc"] = r.auc;
            d["best_threshold"] = r.best.threshold;
            d["accuracy"] = r.best.accuracy;
            d["precision"] = r.best.precision;
            d["tpr"] = r.best.tpr;
            d["fpr"] = r.best.fpr;
            return d;
        },
        py::arg("scores"), py::arg("labels"), py::arg("n_thresholds") = 20);
    m.def(
        "average_precision",
        [](const std::vector<std::tuple<int, double, double, double, double, double>>& records,
           const std::map<int, std::vector<std::array<double, 4>>>& gts, double iou_threshold,
           bool eleven_point) {
            std::vector<jnn::DetectionRecord> rs;
            for (const auto& [img, x, y, w, h, conf] : records) {
                jnn::DetectionRecord r;
                r.image_id = img;
                r.box = {x, y, w, h, conf};
                r.conf = conf;
                rs.push_back(r);
            }
            std::map<int, std::vector<jnn::BBox>> gmap;
            for (const auto& [img, boxes] : gts) gmap[img] = to_boxes(boxes);
            const jnn::APResult ap = jnn::average_precision("cls", rs, gmap, iou_threshold,
                                                            eleven_point);
            py::dict d;
            d["ap"] = ap.ap;
            d["defined"] = ap.defined;
            d["tp"] = ap.tp;
            d["fp"] = ap.fp;
            d["num_gt"] = ap.num_gt;
            return d;
        },
        py::arg("records"), py::arg("gts"), py::arg("iou_threshold") = 0.5,
        py::arg("eleven_point") = false);

    // --- models ---
    py::class_<PyModel>(m, "Model")
        .def("forward", &PyModel::forward, py::arg("query"), py::arg("target"))
        .def_property_readonly("parameter_count", &PyModel::parameter_count)
        .def_property_readonly("spec_text", &PyModel::spec_text)
        .def_property_readonly("grid", &PyModel::grid)
        .def_property_readonly("anchors", &PyModel::anchors);
    m.def(
        "recognizer",
        [](const std::string& preset, uint64_t seed, double slope) {
            return PyModel(jnn::recognizer_spec(parse_preset(preset), slope), seed);
        },
        py::arg("preset") = "desk", py::arg("seed") = 7, py::arg("slope") = 0.1);
    m.def(
        "detector",
        [](const std::string& preset, const std::string& mask, int anchors, uint64_t seed,
           double slope) {
            return PyModel(
                jnn::detector_spec(parse_preset(preset), jnn::parse_mask(mask), anchors, slope),
                seed);
        },
        py::arg("preset") = "desk", py::arg("mask") = "1,2,4", py::arg("anchors") = 5,
        py::arg("seed") = 7, py::arg("slope") = 0.1);

    // --- data and harness ---
    m.def(
        "generate_synthetic",
        [](const std::filesystem::path& out_dir, int classes, int images_per_class,
           int image_size, uint64_t seed, int min_instances, int max_instances, int clutter) {
            jnn::SyntheticShapeConfig c;
            c.out_dir = out_dir;
            c.num_classes = classes;
            c.images_per_class = images_per_class;
            c.image_size = image_size;
            c.min_instances = min_instances;
            c.max_instances = max_instances;
            c.clutter = clutter;
            std::mt19937_64 rng(seed);
            const jnn::SyntheticDataset ds = jnn::generate_synthetic(c, rng);
            py::dict d;
            d["manifest"] = ds.manifest_path.string();
            d["split"] = ds.split_path.string();
            d["classes"] = ds.classes;
            return d;
        },
        py::arg("out_dir"), py::arg("classes") = 8, py::arg("images_per_class") = 20,
        py::arg("image_size") = 96, py::arg("seed") = 7, py::arg("min_instances") = 1,
        py::arg("max_instances") = 2, py::arg("clutter") = 6);
    m.def(
        "run_training",
        [](const std::filesystem::path& config_path, bool quiet) {
            jnn::RunConfig c = jnn::load_config(config_path);
            jnn::apply_defaults(c);
            const jnn::TrainResult r = jnn::run_training(c, quiet);
            py::dict d;
            d["losses"] = r.epoch_losses;
            d["checkpoint"] = r.checkpoint_path.string();
            return d;
        },
        py::arg("config"), py::arg("quiet") = true);
    m.def(
        "run_eval",
        [](const std::filesystem::path& config_path, const std::filesystem::path& checkpoint,
           bool quiet) {
            jnn::RunConfig c = jnn::load_config(config_path);
            jnn::apply_defaults(c);
            return jnn::run_eval(c, checkpoint, quiet);
        },
        py::arg("config"), py::arg("checkpoint"), py::arg("quiet") = true);
}
