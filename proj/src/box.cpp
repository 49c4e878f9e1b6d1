#include "jnn/box.hpp"

#include <algorithm>

namespace jnn {

double iou(const BBox& a, const BBox& b) {
    const double ax0 = a.x - a.w / 2, ax1 = a.x + a.w / 2;
    const double ay0 = a.y - a.h / 2, ay1 = a.y + a.h / 2;
    const double bx0 = b.x - b.w / 2, bx1 = b.x + b.w / 2;
    const double by0 = b.y - b.h / 2, by1 = b.y + b.h / 2;
    const double iw = std::min(ax1, bx1) - std::max(ax0, bx0);
    const double ih = std::min(ay1, by1) - std::max(ay0, by0);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace jnn
