#pragma once

// Polyline and box geometry shared by scene generation, matching costs and
// the metric suite.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "lanetopo/common.hpp"

namespace lanetopo {

using Vec3 = std::array<double, 3>;

inline double dist3(const Vec3& a, const Vec3& b) {
    double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Ordered 3-D points in meters; at least two points, finite, not all
// coincident.
struct Polyline3D {
    std::vector<Vec3> points;

    int size() const { return int(points.size()); }

    double arc_length() const {
        double s = 0.0;
        for (size_t i = 1; i < points.size(); ++i) s += dist3(points[i - 1], points[i]);
        return s;
    }

    void validate() const {
        if (points.size() < 2) throw GeometryError("polyline needs at least 2 points");
        for (const auto& p : points)
            for (double c : p)
                if (!std::isfinite(c)) throw GeometryError("polyline has non-finite coordinate");
        if (arc_length() <= 0.0) throw GeometryError("polyline has zero arc length");
    }
};

// Axis-aligned box in normalized image coordinates.
struct BBox2D {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    double area() const { return (x_max - x_min) * (y_max - y_min); }

    void validate() const {
        if (!(x_min < x_max && y_min < y_max)) throw GeometryError("degenerate box");
    }
};

// n points at equal arc-length spacing; endpoints preserved exactly.
inline Polyline3D resample(const Polyline3D& poly, int n) {
    if (n < 2) throw GeometryError("resample: need n >= 2");
    const double total = poly.arc_length();
    if (!(total > 0.0)) throw GeometryError("resample: degenerate zero-length polyline");
    std::vector<double> cum(poly.points.size(), 0.0);
    for (size_t i = 1; i < poly.points.size(); ++i)
        cum[i] = cum[i - 1] + dist3(poly.points[i - 1], poly.points[i]);
    Polyline3D out;
    out.points.resize(n);
    out.points.front() = poly.points.front();
    out.points.back() = poly.points.back();
    size_t seg = 0;
    for (int i = 1; i + 1 < n; ++i) {
        double target = total * double(i) / double(n - 1);
        while (seg + 2 < cum.size() && cum[seg + 1] < target) ++seg;
        double seg_len = cum[seg + 1] - cum[seg];
        double t = seg_len > 0.0 ? (target - cum[seg]) / seg_len : 0.0;
        const Vec3& a = poly.points[seg];
        const Vec3& b = poly.points[seg + 1];
        out.points[i] = {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]),
                         a[2] + t * (b[2] - a[2])};
    }
    return out;
}

// Discrete Frechet distance by the standard dynamic-programming recurrence.
inline double frechet(const Polyline3D& a, const Polyline3D& b) {
    a.validate();
    b.validate();
    const int n = a.size(), m = b.size();
    std::vector<double> dp(size_t(n) * m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            double d = dist3(a.points[i], b.points[j]);
            if (i == 0 && j == 0)
                dp[0] = d;
            else if (i == 0)
                dp[j] = std::max(dp[j - 1], d);
            else if (j == 0)
                dp[size_t(i) * m] = std::max(dp[size_t(i - 1) * m], d);
            else
                dp[size_t(i) * m + j] =
                    std::max(std::min({dp[size_t(i - 1) * m + j], dp[size_t(i) * m + j - 1],
                                       dp[size_t(i - 1) * m + j - 1]}),
                             d);
        }
    }
    return dp[size_t(n) * m - 1];
}

// Distance from the last point of pred_from to the first point of succ.
// Deliberately not symmetric: it measures end-to-start adjacency.
inline double endpoint_gap(const Polyline3D& pred_from, const Polyline3D& succ) {
    return dist3(pred_from.points.back(), succ.points.front());
}

inline double iou(const BBox2D& a, const BBox2D& b) {
    a.validate();
    b.validate();
    double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// IoU minus (enclosing-minus-union)/enclosing; in (-1, 1].
inline double giou(const BBox2D& a, const BBox2D& b) {
    a.validate();
    b.validate();
    double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    double hx = std::max(a.x_max, b.x_max) - std::min(a.x_min, b.x_min);
    double hy = std::max(a.y_max, b.y_max) - std::min(a.y_min, b.y_min);
    double hull = hx * hy;
    return inter / uni - (hull - uni) / hull;
}

}  // namespace lanetopo
