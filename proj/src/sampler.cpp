#include "jnn/sampler.hpp"

#include <algorithm>
#include <sstream>

#include "jnn/error.hpp"

namespace jnn {

BBox box_to_grid(const BoxPx& b, int img_w, int img_h, int grid) {
    const double sx = static_cast<double>(grid) / img_w;
    const double sy = static_cast<double>(grid) / img_h;
    BBox g;
    g.x = (b.x + b.w / 2) * sx;
    g.y = (b.y + b.h / 2) * sy;
    g.w = b.w * sx;
    g.h = b.h * sy;
    return g;
}

BoxPx grid_to_pixels(const BBox& b, int img_w, int img_h, int grid) {
    const double sx = static_cast<double>(img_w) / grid;
    const double sy = static_cast<double>(img_h) / grid;
    BoxPx p;
    p.w = b.w * sx;
    p.h = b.h * sy;
    p.x = b.x * sx - p.w / 2;
    p.y = b.y * sy - p.h / 2;
    return p;
}

Tensor preprocess(const std::filesystem::path& image_path, int out_w, int out_h) {
    const Image img = read_png(image_path);
    const Tensor t = image_to_tensor(resize_bilinear(img, out_w, out_h));
    return t.reshaped({1, 3, out_h, out_w});
}

namespace {

std::vector<std::string> usable_classes(const DatasetManifest& m,
                                        const std::set<std::string>& side) {
    std::vector<std::string> classes;
    for (const auto& c : m.classes)
        if (side.count(c) && m.by_class.count(c) && !m.by_class.at(c).empty())
            classes.push_back(c);
    return classes;
}

// Crop of a random annotated instance; the whole image when no boxes exist.
Image instance_crop(const DatasetManifest& m, size_t entry_idx, std::mt19937_64& rng) {
    const ManifestEntry& e = m.entries[entry_idx];
    Image img = read_png(m.abs_path(e));
    if (e.boxes.empty()) return img;
    std::uniform_int_distribution<size_t> pick(0, e.boxes.size() - 1);
    const BoxPx& b = e.boxes[pick(rng)];
    return crop(img, static_cast<int>(b.x), static_cast<int>(b.y),
                static_cast<int>(std::ceil(b.w)), static_cast<int>(std::ceil(b.h)));
}

}  // namespace

PairSampler::PairSampler(const DatasetManifest& manifest,
                         const std::set<std::string>& side_classes, int input_size, uint64_t seed)
    : manifest_(manifest),
      classes_(usable_classes(manifest, side_classes)),
      input_size_(input_size),
      rng_(seed) {
    if (classes_.size() < 2)
        throw DataError("pair sampling needs at least 2 classes with instances, have " +
                        std::to_string(classes_.size()));
}

Tensor PairSampler::instance_tensor(size_t entry_idx) {
    const Image c = instance_crop(manifest_, entry_idx, rng_);
    return image_to_tensor(resize_bilinear(c, input_size_, input_size_))
        .reshaped({1, 3, input_size_, input_size_});
}

std::string PairSampler::pick_other_class(const std::string& cls) {
    std::uniform_int_distribution<size_t> pick(0, classes_.size() - 2);
    size_t i = pick(rng_);
    if (classes_[i] == cls) i = classes_.size() - 1;
    return classes_[i];
}

PairSample PairSampler::sample() {
    std::uniform_int_distribution<size_t> pick_class(0, classes_.size() - 1);
    const std::string qcls = classes_[pick_class(rng_)];
    const auto& q_entries = manifest_.by_class.at(qcls);
    std::uniform_int_distribution<size_t> pick_q(0, q_entries.size() - 1);
    const size_t q_idx = q_entries[pick_q(rng_)];

    std::bernoulli_distribution match(0.5);
    PairSample s;
    s.label = match(rng_) ? 1 : 0;
    s.query_class = qcls;
    s.target_class = s.label ? qcls : pick_other_class(qcls);
    const auto& t_entries = manifest_.by_class.at(s.target_class);
    std::uniform_int_distribution<size_t> pick_t(0, t_entries.size() - 1);
    const size_t t_idx = t_entries[pick_t(rng_)];

    s.query = instance_tensor(q_idx);
    s.target = instance_tensor(t_idx);
    return s;
}

RecognitionBatch PairSampler::sample_batch(int n) {
    std::uniform_int_distribution<size_t> pick_class(0, classes_.size() - 1);
    RecognitionBatch batch;
    batch.query_class = classes_[pick_class(rng_)];
    const auto& q_entries = manifest_.by_class.at(batch.query_class);
    std::uniform_int_distribution<size_t> pick_q(0, q_entries.size() - 1);
    const Tensor query = instance_tensor(q_entries[pick_q(rng_)]);

    std::bernoulli_distribution match(0.5);
    for (int i = 0; i < n; ++i) {
        PairSample s;
        s.query_class = batch.query_class;
        s.label = match(rng_) ? 1 : 0;
        s.target_class = s.label ? batch.query_class : pick_other_class(batch.query_class);
        const auto& t_entries = manifest_.by_class.at(s.target_class);
        std::uniform_int_distribution<size_t> pick_t(0, t_entries.size() - 1);
        s.target = instance_tensor(t_entries[pick_t(rng_)]);
        s.query = query;
        batch.pairs.push_back(std::move(s));
    }
    return batch;
}

DetectionSampler::DetectionSampler(const DatasetManifest& manifest,
                                   const std::set<std::string>& side_classes, int target_size,
                                   int query_size, int grid, uint64_t seed)
    : manifest_(manifest),
      classes_(usable_classes(manifest, side_classes)),
      target_size_(target_size),
      query_size_(query_size),
      grid_(grid),
      rng_(seed) {
    if (classes_.size() < 2)
        throw DataError("detection sampling needs at least 2 classes with instances");
    for (const auto& c : classes_) {
        bool boxed = false;
        for (size_t i : manifest_.by_class.at(c))
            if (!manifest_.entries[i].boxes.empty()) boxed = true;
        if (!boxed) throw DataError("class '" + c + "' has no boxed instance to crop queries from");
    }
}

std::string PairSampler::rng_state() const {
    std::ostringstream os;
    os << rng_;
    return os.str();
}

std::string DetectionSampler::rng_state() const {
    std::ostringstream os;
    os << rng_;
    return os.str();
}

const std::vector<size_t>& DetectionSampler::entries_of(const std::string& cls) const {
    return manifest_.by_class.at(cls);
}

Tensor DetectionSampler::query_for_class(const std::string& cls, int exclude_entry,
                                         std::mt19937_64& rng) const {
    std::vector<size_t> candidates;
    for (size_t i : manifest_.by_class.at(cls))
        if (static_cast<int>(i) != exclude_entry && !manifest_.entries[i].boxes.empty())
            candidates.push_back(i);
    if (candidates.empty())
        for (size_t i : manifest_.by_class.at(cls))
            if (!manifest_.entries[i].boxes.empty()) candidates.push_back(i);
    std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
    const Image c = instance_crop(manifest_, candidates[pick(rng)], rng);
    return image_to_tensor(resize_bilinear(c, query_size_, query_size_))
        .reshaped({1, 3, query_size_, query_size_});
}

Tensor DetectionSampler::target_tensor(size_t entry_idx) const {
    return preprocess(manifest_.abs_path(manifest_.entries[entry_idx]), target_size_,
                      target_size_);
}

std::vector<BBox> DetectionSampler::target_gts(size_t entry_idx) const {
    const ManifestEntry& e = manifest_.entries[entry_idx];
    std::vector<BBox> gts;
    for (const BoxPx& b : e.boxes) gts.push_back(box_to_grid(b, e.width, e.height, grid_));
    return gts;
}

DetectionSample DetectionSampler::sample() {
    std::uniform_int_distribution<size_t> pick_class(0, classes_.size() - 1);
    DetectionSample s;
    s.query_class = classes_[pick_class(rng_)];

    std::bernoulli_distribution contains(0.5);
    const bool positive = contains(rng_);
    std::string tcls = s.query_class;
    if (!positive) {
        std::uniform_int_distribution<size_t> pick(0, classes_.size() - 2);
        size_t i = pick(rng_);
        if (classes_[i] == s.query_class) i = classes_.size() - 1;
        tcls = classes_[i];
    }
    const auto& t_entries = manifest_.by_class.at(tcls);
    std::uniform_int_distribution<size_t> pick_t(0, t_entries.size() - 1);
    const size_t t_idx = t_entries[pick_t(rng_)];

    s.target_index = static_cast<int>(t_idx);
    s.query = query_for_class(s.query_class, positive ? static_cast<int>(t_idx) : -1, rng_);
    s.target = target_tensor(t_idx);
    if (positive) s.gts = target_gts(t_idx);
    return s;
}

}  // namespace jnn
