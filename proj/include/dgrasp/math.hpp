#pragma once

#include <array>
#include <cmath>

namespace dgrasp {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    // z-component of the 3-D cross product
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::sqrt(x * x + y * y); }
    double norm_sq() const { return x * x + y * y; }

    Vec2 normalized() const {
        double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
    }
    // counter-clockwise rotation
    Vec2 rotated(double angle) const {
        double c = std::cos(angle), s = std::sin(angle);
        return {c * x - s * y, s * x + c * y};
    }
    // +90 degree rotation
    Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }

    Vec3 normalized() const {
        double n = norm();
        return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{0.0, 0.0, 0.0};
    }
    Vec2 xy() const { return {x, y}; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double clamp(double v, double lo, double hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

// distance between two 2-D segments [a0,a1] and [b0,b1]
inline double segment_segment_distance(const Vec2& a0, const Vec2& a1,
                                       const Vec2& b0, const Vec2& b1) {
    Vec2 d1 = a1 - a0;
    Vec2 d2 = b1 - b0;
    Vec2 r = a0 - b0;
    double A = d1.norm_sq();
    double E = d2.norm_sq();
    double F = d2.dot(r);
    double s = 0.0, t = 0.0;
    if (A <= 1e-18 && E <= 1e-18) {
        return r.norm();
    }
    if (A <= 1e-18) {
        t = clamp(F / E, 0.0, 1.0);
    } else {
        double C = d1.dot(r);
        if (E <= 1e-18) {
            s = clamp(-C / A, 0.0, 1.0);
        } else {
            double B = d1.dot(d2);
            double denom = A * E - B * B;
            if (denom > 1e-18) {
                s = clamp((B * F - C * E) / denom, 0.0, 1.0);
            }
            t = (B * s + F) / E;
            if (t < 0.0) {
                t = 0.0;
                s = clamp(-C / A, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = clamp((B - C) / A, 0.0, 1.0);
            }
        }
    }
    Vec2 p = a0 + d1 * s;
    Vec2 q = b0 + d2 * t;
    return (p - q).norm();
}

// closest point on segment [a,b] to point p
inline Vec2 closest_point_on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    Vec2 d = b - a;
    double len2 = d.norm_sq();
    if (len2 <= 1e-18) return a;
    double t = clamp((p - a).dot(d) / len2, 0.0, 1.0);
    return a + d * t;
}

}  // namespace dgrasp
