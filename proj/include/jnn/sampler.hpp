#pragma once

#include <random>

#include "jnn/box.hpp"
#include "jnn/image.hpp"
#include "jnn/manifest.hpp"
#include "jnn/tensor.hpp"

namespace jnn {

/// Pixel corner box -> grid-unit center box for an image stretched to the
/// detector input and an SxS prediction grid.
BBox box_to_grid(const BoxPx& b, int img_w, int img_h, int grid);
BoxPx grid_to_pixels(const BBox& b, int img_w, int img_h, int grid);

struct PairSample {
    Tensor query;
    Tensor target;
    int label = 0;  // 1 iff both images show the same class
    std::string query_class;
    std::string target_class;
};

struct RecognitionBatch {
    std::string query_class;
    std::vector<PairSample> pairs;  // one query image against many targets
};

struct DetectionSample {
    Tensor query;
    Tensor target;
    std::vector<BBox> gts;  // grid units; empty iff the target lacks the query class
    std::string query_class;
    int target_index = -1;  // manifest entry used as the target
};

/// Draws pairs/targets from the manifest entries whose class is on one side of
/// a split. Matches happen with probability exactly 1/2. Owns its RNG.
class PairSampler {
public:
    PairSampler(const DatasetManifest& manifest, const std::set<std::string>& side_classes,
                int input_size, uint64_t seed);

    /// Single pair; both images are instance crops resized to the branch input.
    PairSample sample();
    /// One query class and query image per batch, paired against n targets.
    RecognitionBatch sample_batch(int n);

    const std::vector<std::string>& classes() const { return classes_; }
    std::string rng_state() const;

private:
    Tensor instance_tensor(size_t entry_idx);
    std::string pick_other_class(const std::string& cls);

    const DatasetManifest& manifest_;
    std::vector<std::string> classes_;
    int input_size_;
    std::mt19937_64 rng_;
};

class DetectionSampler {
public:
    DetectionSampler(const DatasetManifest& manifest, const std::set<std::string>& side_classes,
                     int target_size, int query_size, int grid, uint64_t seed);

    /// Query = boxed instance crop of a class; target contains that class with
    /// probability 1/2 (ground truths in grid units) and another class otherwise.
    DetectionSample sample();

    /// Deterministic sample parts used by evaluation: query crop for a class
    /// (excluding a given entry when possible) and a prepared target.
    Tensor query_for_class(const std::string& cls, int exclude_entry, std::mt19937_64& rng) const;
    Tensor target_tensor(size_t entry_idx) const;
    std::vector<BBox> target_gts(size_t entry_idx) const;

    const std::vector<std::string>& classes() const { return classes_; }
    const std::vector<size_t>& entries_of(const std::string& cls) const;
    std::mt19937_64& rng() { return rng_; }
    std::string rng_state() const;

private:
    const DatasetManifest& manifest_;
    std::vector<std::string> classes_;
    int target_size_, query_size_, grid_;
    std::mt19937_64 rng_;
};

/// Decode + stretch-resize + scale to [0,1], channels first.
Tensor preprocess(const std::filesystem::path& image_path, int out_w, int out_h);

}  // namespace jnn
