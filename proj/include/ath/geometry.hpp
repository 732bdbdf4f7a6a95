#pragma once

#include <algorithm>
#include <cmath>

namespace ath {

// Axis-aligned box in pixel coordinates, corners (x1,y1) top-left and
// (x2,y2) bottom-right, x1 < x2 and y1 < y2.
struct BoundingBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }

    bool valid() const {
        return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
               x1 < x2 && y1 < y2;
    }

    // Grown by `fraction` of this box's own width/height on each side.
    BoundingBox expanded(double fraction) const {
        const double dx = fraction * width();
        const double dy = fraction * height();
        return {x1 - dx, y1 - dy, x2 + dx, y2 + dy};
    }

    bool operator==(const BoundingBox&) const = default;
};

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

// Strictly positive overlap in both dimensions; touching edges do not count.
inline bool overlaps(const BoundingBox& a, const BoundingBox& b) {
    return intersection_area(a, b) > 0.0;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

} // namespace ath
