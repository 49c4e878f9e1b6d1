#include "jnn/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "jnn/error.hpp"
#include "jnn/image.hpp"

namespace jnn {

static BoxPx parse_box(const std::string& tok, int line_no) {
    BoxPx b;
    char c1, c2, c3;
    std::istringstream is(tok);
    if (!(is >> b.x >> c1 >> b.y >> c2 >> b.w >> c3 >> b.h) || c1 != ',' || c2 != ',' ||
        c3 != ',')
        throw DataError("manifest line " + std::to_string(line_no) + ": malformed box '" + tok +
                        "'");
    return b;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest " + path.string());

    DatasetManifest m;
    m.root = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    std::set<std::string> declared;
    bool has_declaration = false;

    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream is(line);
        std::string first;
        if (!(is >> first)) continue;

        if (first == "classes") {
            if (!m.entries.empty() || has_declaration)
                throw DataError("manifest line " + std::to_string(line_no) +
                                ": classes must be declared once, before any record");
            std::string c;
            while (is >> c) declared.insert(c);
            has_declaration = true;
            continue;
        }

        ManifestEntry e;
        e.path = first;
        if (!(is >> e.label))
            throw DataError("manifest line " + std::to_string(line_no) + ": missing label");
        std::string tok;
        while (is >> tok) e.boxes.push_back(parse_box(tok, line_no));

        const auto abs = m.root / e.path;
        if (!std::filesystem::exists(abs))
            throw DataError("manifest line " + std::to_string(line_no) + ": missing file " +
                            abs.string());
        read_png_header(abs, e.width, e.height);
        for (const BoxPx& b : e.boxes) {
            if (b.w <= 0 || b.h <= 0 || b.x < 0 || b.y < 0 || b.x + b.w > e.width ||
                b.y + b.h > e.height)
                throw DataError("manifest line " + std::to_string(line_no) + ": box " +
                                std::to_string(b.x) + "," + std::to_string(b.y) + "," +
                                std::to_string(b.w) + "," + std::to_string(b.h) +
                                " outside image bounds " + std::to_string(e.width) + "x" +
                                std::to_string(e.height));
        }
        if (has_declaration && !declared.count(e.label))
            throw DataError("manifest line " + std::to_string(line_no) + ": label '" + e.label +
                            "' not in the declared class universe");
        m.entries.push_back(std::move(e));
    }

    std::set<std::string> universe = declared;
    if (!has_declaration)
        for (const auto& e : m.entries) universe.insert(e.label);
    m.classes.assign(universe.begin(), universe.end());
    for (size_t i = 0; i < m.entries.size(); ++i)
        m.by_class[m.entries[i].label].push_back(i);
    return m;
}

ClassSplit load_split(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open split file " + path.string());
    ClassSplit s;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream is(line);
        std::string side, label;
        if (!(is >> side)) continue;
        if (!(is >> label))
            throw DataError("split line " + std::to_string(line_no) + ": missing class label");
        if (side == "train")
            s.train.insert(label);
        else if (side == "test")
            s.test.insert(label);
        else
            throw DataError("split line " + std::to_string(line_no) + ": side must be train|test");
    }
    return s;
}

void write_split(const std::filesystem::path& path, const ClassSplit& split) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write split file " + path.string());
    for (const auto& c : split.train) f << "train " << c << "\n";
    for (const auto& c : split.test) f << "test " << c << "\n";
}

std::vector<std::string> validate_split(const DatasetManifest& manifest,
                                        const ClassSplit& split) {
    std::vector<std::string> violations;
    for (const auto& c : split.train)
        if (split.test.count(c)) violations.push_back("class '" + c + "' in both train and test");
    const std::set<std::string> universe(manifest.classes.begin(), manifest.classes.end());
    for (const auto& c : split.train)
        if (!universe.count(c)) violations.push_back("train class '" + c + "' not in manifest");
    for (const auto& c : split.test)
        if (!universe.count(c)) violations.push_back("test class '" + c + "' not in manifest");
    return violations;
}

}  // namespace jnn
