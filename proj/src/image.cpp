#include "jnn/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "jnn/error.hpp"

namespace jnn {

Image make_image(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
    Image img;
    img.w = w;
    img.h = h;
    img.pixels.resize(static_cast<size_t>(3) * w * h);
    for (size_t i = 0; i < img.pixels.size(); i += 3) {
        img.pixels[i] = r;
        img.pixels[i + 1] = g;
        img.pixels[i + 2] = b;
    }
    return img;
}

// ---- png ---------------------------------------------------------------------

namespace {

constexpr uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void write_chunk(std::vector<uint8_t>& out, const char type[4],
                 const std::vector<uint8_t>& data) {
    put_u32(out, static_cast<uint32_t>(data.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
    put_u32(out, crc);
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& img) {
    if (img.w <= 0 || img.h <= 0 ||
        img.pixels.size() != static_cast<size_t>(3) * img.w * img.h)
        throw IoError("write_png: malformed image");

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(img.h) * (1 + static_cast<size_t>(3) * img.w));
    for (int y = 0; y < img.h; ++y) {
        raw.push_back(0);  // filter: none
        const uint8_t* row = img.pixels.data() + static_cast<size_t>(3) * img.w * y;
        raw.insert(raw.end(), row, row + static_cast<size_t>(3) * img.w);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) !=
        Z_OK)
        throw IoError("write_png: deflate failed");
    compressed.resize(bound);

    std::vector<uint8_t> out(kPngSig, kPngSig + 8);
    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(img.w));
    put_u32(ihdr, static_cast<uint32_t>(img.h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(out, "IHDR", ihdr);
    write_chunk(out, "IDAT", compressed);
    write_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_png: cannot open " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write_png: short write to " + path.string());
}

namespace {

struct PngInfo {
    int w = 0, h = 0;
    int color_type = 0;
    int channels = 0;
};

std::vector<uint8_t> load_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

PngInfo parse_header(const std::vector<uint8_t>& buf, const std::filesystem::path& path) {
    if (buf.size() < 33 || std::memcmp(buf.data(), kPngSig, 8) != 0)
        throw IoError("not a png file: " + path.string());
    if (std::memcmp(buf.data() + 12, "IHDR", 4) != 0)
        throw IoError("png missing IHDR: " + path.string());
    PngInfo info;
    info.w = static_cast<int>(get_u32(buf.data() + 16));
    info.h = static_cast<int>(get_u32(buf.data() + 20));
    const int depth = buf[24];
    info.color_type = buf[25];
    const int interlace = buf[28];
    if (depth != 8 || interlace != 0)
        throw IoError("unsupported png (need 8-bit non-interlaced): " + path.string());
    switch (info.color_type) {
        case 0: info.channels = 1; break;
        case 2: info.channels = 3; break;
        case 6: info.channels = 4; break;
        default: throw IoError("unsupported png color type: " + path.string());
    }
    if (info.w <= 0 || info.h <= 0) throw IoError("png has empty extent: " + path.string());
    return info;
}

}  // namespace

void read_png_header(const std::filesystem::path& path, int& w, int& h) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<uint8_t> buf(33);
    f.read(reinterpret_cast<char*>(buf.data()), 33);
    if (f.gcount() < 33) throw IoError("truncated png: " + path.string());
    const PngInfo info = parse_header(buf, path);
    w = info.w;
    h = info.h;
}

Image read_png(const std::filesystem::path& path) {
    const std::vector<uint8_t> buf = load_file(path);
    const PngInfo info = parse_header(buf, path);

    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 12 <= buf.size()) {
        const uint32_t len = get_u32(buf.data() + pos);
        if (pos + 12 + len > buf.size()) throw IoError("truncated png chunk: " + path.string());
        const char* type = reinterpret_cast<const char*>(buf.data() + pos + 4);
        if (std::memcmp(type, "IDAT", 4) == 0)
            idat.insert(idat.end(), buf.data() + pos + 8, buf.data() + pos + 8 + len);
        if (std::memcmp(type, "IEND", 4) == 0) break;
        pos += 12 + len;
    }
    if (idat.empty()) throw IoError("png has no image data: " + path.string());

    const size_t stride = static_cast<size_t>(info.channels) * info.w;
    std::vector<uint8_t> raw((stride + 1) * info.h);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw IoError("png inflate failed: " + path.string());

    // unfilter
    std::vector<uint8_t> flat(stride * info.h);
    const int bpp = info.channels;
    for (int y = 0; y < info.h; ++y) {
        const uint8_t filter = raw[(stride + 1) * y];
        const uint8_t* src = raw.data() + (stride + 1) * y + 1;
        uint8_t* dst = flat.data() + stride * y;
        const uint8_t* up = y > 0 ? flat.data() + stride * (y - 1) : nullptr;
        for (size_t x = 0; x < stride; ++x) {
            const int left = x >= static_cast<size_t>(bpp) ? dst[x - bpp] : 0;
            const int above = up ? up[x] : 0;
            const int upleft = (up && x >= static_cast<size_t>(bpp)) ? up[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += left; break;
                case 2: v += above; break;
                case 3: v += (left + above) / 2; break;
                case 4: v += paeth(left, above, upleft); break;
                default: throw IoError("png bad filter byte: " + path.string());
            }
            dst[x] = static_cast<uint8_t>(v);
        }
    }

    Image img;
    img.w = info.w;
    img.h = info.h;
    img.pixels.resize(static_cast<size_t>(3) * info.w * info.h);
    for (int64_t i = 0; i < static_cast<int64_t>(info.w) * info.h; ++i) {
        const uint8_t* s = flat.data() + static_cast<size_t>(i) * info.channels;
        uint8_t* d = img.pixels.data() + static_cast<size_t>(i) * 3;
        if (info.channels == 1) {
            d[0] = d[1] = d[2] = s[0];
        } else {
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    }
    return img;
}

// ---- geometry ------------------------------------------------------------------

Image resize_bilinear(const Image& img, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) throw DimensionError("resize_bilinear: empty output");
    Image out;
    out.w = out_w;
    out.h = out_h;
    out.pixels.resize(static_cast<size_t>(3) * out_w * out_h);
    const double sx = static_cast<double>(img.w) / out_w;
    const double sy = static_cast<double>(img.h) / out_h;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(img.h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(img.w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.w - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double v = (1 - wy) * ((1 - wx) * img.px(x0, y0)[c] + wx * img.px(x1, y0)[c]) +
                                 wy * ((1 - wx) * img.px(x0, y1)[c] + wx * img.px(x1, y1)[c]);
                out.px(x, y)[c] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return out;
}

Image crop(const Image& img, int x, int y, int w, int h) {
    const int x0 = std::clamp(x, 0, img.w - 1);
    const int y0 = std::clamp(y, 0, img.h - 1);
    const int x1 = std::clamp(x + w, x0 + 1, img.w);
    const int y1 = std::clamp(y + h, y0 + 1, img.h);
    Image out;
    out.w = x1 - x0;
    out.h = y1 - y0;
    out.pixels.resize(static_cast<size_t>(3) * out.w * out.h);
    for (int yy = y0; yy < y1; ++yy)
        std::memcpy(out.pixels.data() + static_cast<size_t>(3) * out.w * (yy - y0),
                    img.px(x0, yy), static_cast<size_t>(3) * out.w);
    return out;
}

Tensor image_to_tensor(const Image& img) {
    Tensor t({3, img.h, img.w});
    const int64_t plane = static_cast<int64_t>(img.w) * img.h;
    for (int64_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c)
            t[c * plane + i] = img.pixels[static_cast<size_t>(i) * 3 + c] / 255.0;
    return t;
}

}  // namespace jnn
