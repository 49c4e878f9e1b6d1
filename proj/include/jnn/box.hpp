#pragma once

namespace jnn {

/// Axis-aligned box in center format: (x,y) center, (w,h) extents.
/// Units are grid cells inside detection code and pixels inside metrics;
/// conversion between the two is a pure per-axis scale.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
    double conf = 0.0;
};

/// Intersection area over union area; 0 for disjoint boxes.
double iou(const BBox& a, const BBox& b);

}  // namespace jnn
