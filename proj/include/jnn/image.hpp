#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "jnn/tensor.hpp"

namespace jnn {

/// Interleaved 8-bit RGB image, row-major.
struct Image {
    int w = 0;
    int h = 0;
    std::vector<uint8_t> pixels;  // 3 * w * h

    uint8_t* px(int x, int y) { return pixels.data() + 3 * (static_cast<size_t>(y) * w + x); }
    const uint8_t* px(int x, int y) const {
        return pixels.data() + 3 * (static_cast<size_t>(y) * w + x);
    }
};

Image make_image(int w, int h, uint8_t r = 0, uint8_t g = 0, uint8_t b = 0);

/// 8-bit non-interlaced PNG, color types gray/RGB/RGBA (converted to RGB).
Image read_png(const std::filesystem::path& path);
void read_png_header(const std::filesystem::path& path, int& w, int& h);
/// Writes 8-bit RGB with a fixed zlib level, so identical pixels give
/// identical bytes.
void write_png(const std::filesystem::path& path, const Image& img);

/// Plain bilinear stretch without aspect preservation.
Image resize_bilinear(const Image& img, int out_w, int out_h);

/// Clamped crop of the rectangle (x, y, w, h).
Image crop(const Image& img, int x, int y, int w, int h);

/// (3, H, W) tensor with values scaled to [0,1].
Tensor image_to_tensor(const Image& img);

}  // namespace jnn
