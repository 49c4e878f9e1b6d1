#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace jnn {

enum class GlyphKind { Circle, Square, Triangle, Diamond, Ring, Cross, Star, HBar };

struct ClassStyle {
    GlyphKind kind;
    std::array<uint8_t, 3> color;
    std::string name;
};

/// Fixed table of distinct (glyph, color) styles; index 0..15.
ClassStyle class_style(int index);

/// size x size occupancy mask (0/1) of a glyph; saturated-color glyphs are
/// painted onto grayscale backgrounds so tests can recover them by color.
std::vector<uint8_t> glyph_mask(GlyphKind kind, int size);

struct SyntheticShapeConfig {
    int num_classes = 8;       // 4..16
    int images_per_class = 20;
    int image_size = 96;
    int min_instances = 1;
    int max_instances = 2;
    int clutter = 6;  // grayscale distractor rectangles per image
    std::filesystem::path out_dir;
};

struct SyntheticDataset {
    std::filesystem::path manifest_path;
    std::filesystem::path split_path;
    std::vector<std::string> classes;
};

/// Writes images/, manifest.txt and split.txt under out_dir. Box annotations
/// are the exact bounding boxes of the painted glyph masks. Fully determined
/// by the rng state.
SyntheticDataset generate_synthetic(const SyntheticShapeConfig& config, std::mt19937_64& rng);

}  // namespace jnn
