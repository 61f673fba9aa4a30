#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

namespace rsw {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    bool operator==(const Vec2&) const = default;

    double norm() const { return std::sqrt(x * x + y * y); }
    double norm_sq() const { return x * x + y * y; }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double dist(Vec2 a, Vec2 b) { return (a - b).norm(); }

inline Vec2 unit_or_zero(Vec2 v) {
    double n = v.norm();
    if (n <= 0.0) return {0.0, 0.0};
    return {v.x / n, v.y / n};
}

// Clamp to a maximum Euclidean norm, direction preserved.
inline Vec2 clamp_norm(Vec2 v, double max_norm) {
    double n = v.norm();
    if (n <= max_norm || n == 0.0) return v;
    double s = max_norm / n;
    return {v.x * s, v.y * s};
}

inline double clamp(double v, double lo, double hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

// Symmetric Hausdorff distance max(sup_a inf_b d, sup_b inf_a d).
// Point sets here are tiny (formation-sized), so the quadratic scan is fine.
inline double hausdorff(std::span<const Vec2> a, std::span<const Vec2> b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("hausdorff: point sets must be nonempty");
    auto directed = [](std::span<const Vec2> from, std::span<const Vec2> to) {
        double worst = 0.0;
        for (const Vec2& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec2& q : to) best = std::min(best, dist(p, q));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

} // namespace rsw
