#include "jnn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "jnn/error.hpp"
#include "jnn/image.hpp"
#include "jnn/manifest.hpp"

namespace jnn {

namespace {

const char* kKindNames[8] = {"circle", "square",  "triangle", "diamond",
                             "ring",   "cross", "star",     "hbar"};

const std::array<uint8_t, 3> kPalette[8] = {
    {220, 40, 40},   // red
    {40, 190, 60},   // green
    {45, 80, 230},   // blue
    {235, 220, 40},  // yellow
    {225, 45, 210},  // magenta
    {45, 215, 215},  // cyan
    {240, 140, 30},  // orange
    {130, 50, 220},  // purple
};

const char* kColorNames[8] = {"red",     "green", "blue",   "yellow",
                              "magenta", "cyan",  "orange", "purple"};

}  // namespace

ClassStyle class_style(int index) {
    if (index < 0 || index >= 16) throw DataError("class_style index must be in [0,16)");
    const int kind = index % 8;
    const int color = (index + (index / 8) * 3) % 8;
    ClassStyle s;
    s.kind = static_cast<GlyphKind>(kind);
    s.color = kPalette[color];
    s.name = std::string(kKindNames[kind]) + "_" + kColorNames[color];
    return s;
}

std::vector<uint8_t> glyph_mask(GlyphKind kind, int size) {
    std::vector<uint8_t> m(static_cast<size_t>(size) * size, 0);
    const double c = (size - 1) / 2.0;
    const double r = size * 0.42;
    auto set = [&](int x, int y, bool on) {
        if (on) m[static_cast<size_t>(y) * size + x] = 1;
    };
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = x - c, dy = y - c;
            switch (kind) {
                case GlyphKind::Circle:
                    set(x, y, dx * dx + dy * dy <= r * r);
                    break;
                case GlyphKind::Square:
                    set(x, y, std::fabs(dx) <= r * 0.82 && std::fabs(dy) <= r * 0.82);
                    break;
                case GlyphKind::Triangle: {
                    // upward triangle: apex at the top, base at the bottom
                    const double t = (dy + r) / (2 * r);  // 0 at apex row, 1 at base
                    set(x, y, dy >= -r && dy <= r && t >= 0 && std::fabs(dx) <= t * r);
                    break;
                }
                case GlyphKind::Diamond:
                    set(x, y, std::fabs(dx) + std::fabs(dy) <= r);
                    break;
                case GlyphKind::Ring: {
                    const double d2 = dx * dx + dy * dy;
                    set(x, y, d2 <= r * r && d2 >= (0.55 * r) * (0.55 * r));
                    break;
                }
                case GlyphKind::Cross:
                    set(x, y, (std::fabs(dx) <= r * 0.3 || std::fabs(dy) <= r * 0.3) &&
                                  std::fabs(dx) <= r && std::fabs(dy) <= r);
                    break;
                case GlyphKind::Star:
                    set(x, y, std::fabs(dx) + std::fabs(dy) <= r ||
                                  (std::fabs(dx) <= r * 0.45 && std::fabs(dy) <= r * 0.45));
                    break;
                case GlyphKind::HBar:
                    set(x, y, std::fabs(dy) <= r * 0.32 && std::fabs(dx) <= r);
                    break;
            }
        }
    }
    return m;
}

namespace {

struct PlacedBox {
    int x0, y0, x1, y1;  // inclusive pixel bounds
};

bool overlaps(const PlacedBox& a, const PlacedBox& b) {
    return a.x0 <= b.x1 + 2 && b.x0 <= a.x1 + 2 && a.y0 <= b.y1 + 2 && b.y0 <= a.y1 + 2;
}

void paint_background(Image& img, int clutter, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> base_d(90, 150);
    std::uniform_int_distribution<int> noise_d(-12, 12);
    const int base = base_d(rng);
    for (size_t i = 0; i < img.pixels.size(); i += 3) {
        const int v = std::clamp(base + noise_d(rng), 0, 255);
        img.pixels[i] = img.pixels[i + 1] = img.pixels[i + 2] = static_cast<uint8_t>(v);
    }
    std::uniform_int_distribution<int> gray_d(60, 190);
    std::uniform_int_distribution<int> tint_d(-15, 15);
    std::uniform_int_distribution<int> pos_d(0, img.w - 1);
    std::uniform_int_distribution<int> len_d(img.w / 12, img.w / 3);
    for (int i = 0; i < clutter; ++i) {
        const int g = gray_d(rng), tint = tint_d(rng);
        const int x0 = pos_d(rng), y0 = pos_d(rng);
        const int w = len_d(rng), h = len_d(rng);
        for (int y = y0; y < std::min(y0 + h, img.h); ++y)
            for (int x = x0; x < std::min(x0 + w, img.w); ++x) {
                uint8_t* p = img.px(x, y);
                p[0] = static_cast<uint8_t>(std::clamp(g + tint, 0, 255));
                p[1] = static_cast<uint8_t>(std::clamp(g, 0, 255));
                p[2] = static_cast<uint8_t>(std::clamp(g - tint, 0, 255));
            }
    }
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticShapeConfig& config, std::mt19937_64& rng) {
    if (config.num_classes < 4)
        throw DataError("generate_synthetic needs at least 4 classes for disjoint splits");
    if (config.num_classes > 16) throw DataError("generate_synthetic supports up to 16 classes");
    if (config.image_size < 32) throw DataError("generate_synthetic image_size too small");

    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir / "images");

    std::vector<ClassStyle> styles;
    for (int i = 0; i < config.num_classes; ++i) styles.push_back(class_style(i));

    std::ofstream manifest(config.out_dir / "manifest.txt");
    if (!manifest) throw IoError("cannot write manifest under " + config.out_dir.string());
    manifest << "classes";
    for (const auto& s : styles) manifest << " " << s.name;
    manifest << "\n";

    const int glyph_min = std::max(10, config.image_size * 8 / 32);
    const int glyph_max = std::max(glyph_min + 2, config.image_size * 14 / 32);
    std::uniform_int_distribution<int> glyph_size_d(glyph_min, glyph_max);
    std::uniform_int_distribution<int> count_d(config.min_instances, config.max_instances);

    for (const auto& style : styles) {
        for (int n = 0; n < config.images_per_class; ++n) {
            Image img = make_image(config.image_size, config.image_size);
            paint_background(img, config.clutter, rng);

            std::vector<PlacedBox> placed;
            const int want = count_d(rng);
            for (int inst = 0; inst < want; ++inst) {
                const int gs = glyph_size_d(rng);
                std::uniform_int_distribution<int> pos_d(1, config.image_size - gs - 2);
                bool done = false;
                for (int attempt = 0; attempt < 40 && !done; ++attempt) {
                    const int ox = pos_d(rng), oy = pos_d(rng);
                    const PlacedBox cand{ox, oy, ox + gs - 1, oy + gs - 1};
                    bool clash = false;
                    for (const auto& pb : placed) clash = clash || overlaps(pb, cand);
                    if (clash) continue;
                    const auto mask = glyph_mask(style.kind, gs);
                    int bx0 = gs, by0 = gs, bx1 = -1, by1 = -1;
                    for (int y = 0; y < gs; ++y)
                        for (int x = 0; x < gs; ++x)
                            if (mask[static_cast<size_t>(y) * gs + x]) {
                                uint8_t* p = img.px(ox + x, oy + y);
                                p[0] = style.color[0];
                                p[1] = style.color[1];
                                p[2] = style.color[2];
                                bx0 = std::min(bx0, x);
                                by0 = std::min(by0, y);
                                bx1 = std::max(bx1, x);
                                by1 = std::max(by1, y);
                            }
                    placed.push_back({ox + bx0, oy + by0, ox + bx1, oy + by1});
                    done = true;
                }
                if (!done) break;  // crowded image, keep what fits
            }
            if (placed.empty()) {
                // guarantee at least one instance per image
                const int gs = glyph_min;
                const int ox = 1, oy = 1;
                const auto mask = glyph_mask(style.kind, gs);
                int bx0 = gs, by0 = gs, bx1 = -1, by1 = -1;
                for (int y = 0; y < gs; ++y)
                    for (int x = 0; x < gs; ++x)
                        if (mask[static_cast<size_t>(y) * gs + x]) {
                            uint8_t* p = img.px(ox + x, oy + y);
                            p[0] = style.color[0];
                            p[1] = style.color[1];
                            p[2] = style.color[2];
                            bx0 = std::min(bx0, x);
                            by0 = std::min(by0, y);
                            bx1 = std::max(bx1, x);
                            by1 = std::max(by1, y);
                        }
                placed.push_back({ox + bx0, oy + by0, ox + bx1, oy + by1});
            }

            const std::string rel = "images/" + style.name + "_" + std::to_string(n) + ".png";
            write_png(config.out_dir / rel, img);
            manifest << rel << " " << style.name;
            for (const auto& pb : placed)
                manifest << " " << pb.x0 << "," << pb.y0 << "," << (pb.x1 - pb.x0 + 1) << ","
                         << (pb.y1 - pb.y0 + 1);
            manifest << "\n";
        }
    }
    manifest.close();

    const int n = config.num_classes;
    const int n_train = std::max(2, std::min(n - 2, (3 * n + 2) / 5));
    ClassSplit split;
    for (int i = 0; i < n; ++i)
        (i < n_train ? split.train : split.test).insert(styles[static_cast<size_t>(i)].name);
    write_split(config.out_dir / "split.txt", split);

    SyntheticDataset out;
    out.manifest_path = config.out_dir / "manifest.txt";
    out.split_path = config.out_dir / "split.txt";
    for (const auto& s : styles) out.classes.push_back(s.name);
    return out;
}

}  // namespace jnn
