#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "dgrasp/math.hpp"
#include "dgrasp/rng.hpp"

namespace dgrasp {

// Sparse surface point set of a cuboid: 8 vertices + 12 edge centers +
// 6 face centers + geometry center = 27 points.
struct KeyPointCloud {
    std::vector<Vec3> points;
    Vec3 true_center;

    int count() const { return static_cast<int>(points.size()); }
};

// Noisy partial view of a KeyPointCloud.
struct ObservedCloud {
    std::vector<Vec3> points;
    Vec3 estimated_center;
    std::vector<int> source_indices;

    int count() const { return static_cast<int>(points.size()); }
};

inline KeyPointCloud cuboid_key_points(const Vec3& center, const Vec3& half_extents,
                                       double yaw) {
    if (half_extents.x <= 0.0 || half_extents.y <= 0.0 || half_extents.z <= 0.0) {
        throw std::invalid_argument("cuboid_key_points: half extents must be positive");
    }
    KeyPointCloud cloud;
    cloud.true_center = center;
    cloud.points.reserve(27);
    double c = std::cos(yaw), s = std::sin(yaw);
    for (int sx = -1; sx <= 1; ++sx) {
        for (int sy = -1; sy <= 1; ++sy) {
            for (int sz = -1; sz <= 1; ++sz) {
                double lx = sx * half_extents.x;
                double ly = sy * half_extents.y;
                double lz = sz * half_extents.z;
                cloud.points.push_back({center.x + c * lx - s * ly,
                                        center.y + s * lx + c * ly,
                                        center.z + lz});
            }
        }
    }
    return cloud;
}

// Selects the half of the cloud oriented toward the hand (ties broken by
// distance to the hand), then perturbs each coordinate with N(0, sigma).
inline ObservedCloud observe(const KeyPointCloud& cloud, const Vec3& hand_position,
                             double sigma, Rng& rng) {
    if (sigma < 0.0) throw std::invalid_argument("observe: sigma must be >= 0");
    int n = cloud.count();
    int keep = (n + 1) / 2;
    Vec3 toward = (hand_position - cloud.true_center).normalized();

    struct Ranked {
        double dot;
        double dist;
        int index;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(n);
    for (int i = 0; i < n; ++i) {
        Vec3 outward = (cloud.points[i] - cloud.true_center).normalized();
        ranked.push_back({outward.dot(toward), (cloud.points[i] - hand_position).norm(), i});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.dot != b.dot) return a.dot > b.dot;
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.index < b.index;
    });

    ObservedCloud out;
    out.points.reserve(keep);
    out.source_indices.reserve(keep);
    for (int k = 0; k < keep; ++k) {
        out.source_indices.push_back(ranked[k].index);
    }
    std::sort(out.source_indices.begin(), out.source_indices.end());
    Vec3 sum{};
    for (int idx : out.source_indices) {
        Vec3 p = cloud.points[idx];
        p.x += rng.normal(0.0, sigma);
        p.y += rng.normal(0.0, sigma);
        p.z += rng.normal(0.0, sigma);
        out.points.push_back(p);
        sum += p;
    }
    out.estimated_center = sum * (1.0 / static_cast<double>(keep));
    return out;
}

// Full noise-free view; used by fixtures and ground-truth evaluation.
inline ObservedCloud observe_full(const KeyPointCloud& cloud) {
    ObservedCloud out;
    out.points = cloud.points;
    out.estimated_center = cloud.true_center;
    out.source_indices.resize(cloud.points.size());
    for (int i = 0; i < cloud.count(); ++i) out.source_indices[i] = i;
    return out;
}

// Counter-clockwise convex polygon. `degenerate` marks collinear generator
// sets; containment is defined false for degenerate hulls.
struct ConvexHull2D {
    std::vector<Vec2> vertices;
    bool degenerate = false;
};

// Andrew monotone chain; collinear points are dropped so vertices are in
// strictly convex position.
inline ConvexHull2D convex_hull(std::vector<Vec2> pts) {
    ConvexHull2D hull;
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x != b.x ? a.x < b.x : a.y < b.y;
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) {
                              return a.x == b.x && a.y == b.y;
                          }),
              pts.end());
    int n = static_cast<int>(pts.size());
    if (n < 3) {
        hull.vertices = pts;
        hull.degenerate = true;
        return hull;
    }
    std::vector<Vec2> h(2 * n);
    int k = 0;
    for (int i = 0; i < n; ++i) {
        while (k >= 2 && (h[k - 1] - h[k - 2]).cross(pts[i] - h[k - 2]) <= 0.0) --k;
        h[k++] = pts[i];
    }
    int lower = k + 1;
    for (int i = n - 2; i >= 0; --i) {
        while (k >= lower && (h[k - 1] - h[k - 2]).cross(pts[i] - h[k - 2]) <= 0.0) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    if (h.size() < 3) {
        hull.vertices = std::move(h);
        hull.degenerate = true;
        return hull;
    }
    hull.vertices = std::move(h);
    return hull;
}

// True iff p is inside the hull or within `tol` of its boundary.
inline bool contains(const ConvexHull2D& hull, const Vec2& p, double tol = 1e-9) {
    if (hull.degenerate) return false;
    int n = static_cast<int>(hull.vertices.size());
    for (int i = 0; i < n; ++i) {
        const Vec2& a = hull.vertices[i];
        const Vec2& b = hull.vertices[(i + 1) % n];
        Vec2 edge = b - a;
        double side = edge.cross(p - a);
        // scale tolerance by edge length so tol is a distance
        if (side < -tol * edge.norm()) return false;
    }
    return true;
}

inline double hull_area(const ConvexHull2D& hull) {
    if (hull.degenerate) return 0.0;
    double a = 0.0;
    int n = static_cast<int>(hull.vertices.size());
    for (int i = 0; i < n; ++i) {
        a += hull.vertices[i].cross(hull.vertices[(i + 1) % n]);
    }
    return 0.5 * a;
}

inline double nearest_key_point_distance(const Vec3& p, const ObservedCloud& cloud) {
    if (cloud.points.empty()) {
        throw std::invalid_argument("nearest_key_point_distance: empty cloud");
    }
    double best = (p - cloud.points[0]).norm();
    for (size_t i = 1; i < cloud.points.size(); ++i) {
        best = std::min(best, (p - cloud.points[i]).norm());
    }
    return best;
}

}  // namespace dgrasp
