#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace jnn {

/// Box in pixel units, corner format (x,y = top-left).
struct BoxPx {
    double x = 0, y = 0, w = 0, h = 0;
};

struct ManifestEntry {
    std::string path;  // relative to the manifest's directory
    std::string label;
    std::vector<BoxPx> boxes;
    int width = 0, height = 0;  // from the png header
};

/// Line-oriented dataset manifest. One record per line:
///   <relative-path> <label> [x,y,w,h ...]
/// An optional leading "classes <a> <b> ..." line declares the label universe;
/// otherwise it is inferred. '#' starts a comment.
struct DatasetManifest {
    std::filesystem::path root;
    std::vector<ManifestEntry> entries;
    std::vector<std::string> classes;  // sorted unique
    std::map<std::string, std::vector<size_t>> by_class;

    std::filesystem::path abs_path(const ManifestEntry& e) const { return root / e.path; }
};

/// Parses and validates: files exist, boxes are inside image bounds, labels
/// belong to the declared universe. Errors carry the offending line number.
DatasetManifest load_manifest(const std::filesystem::path& path);

struct ClassSplit {
    std::set<std::string> train;
    std::set<std::string> test;
};

/// Split file: one "train <label>" or "test <label>" per line.
ClassSplit load_split(const std::filesystem::path& path);
void write_split(const std::filesystem::path& path, const ClassSplit& split);

/// Empty result means the split is valid: sides disjoint and every class
/// declared by the manifest.
std::vector<std::string> validate_split(const DatasetManifest& manifest, const ClassSplit& split);

}  // namespace jnn
