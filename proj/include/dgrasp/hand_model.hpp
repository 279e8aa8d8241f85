#pragma once

#include <array>

#include "dgrasp/geometry.hpp"
#include "dgrasp/math.hpp"

namespace dgrasp {

// Planar three-finger hand. Hand frame: +x is the palm normal (grasp
// direction), origin at the center of the palm front face. The palm body
// extends backwards from the front face. Fingers are two-segment rigid
// links driven by a single base joint each; the distal segment is fixed at
// 60 degrees of relative flexion toward the closing side.
//
// Finger layout (hand frame): two fingers share the top edge at different
// depths and close downward; the thumb sits centered between them on the
// bottom edge and closes upward. The staggered bases make the pads press an
// object in the pocket at mid-closure instead of only at the joint stop,
// and the opposing pads interleave instead of colliding at full close.
//   finger 0: base at the top front corner, closes downward
//   finger 1: base on the top edge behind finger 0, closes downward
//   finger 2: base on the bottom edge between the two, closes upward
namespace hand {

inline constexpr double kPalmHalfWidth = 0.04;   // m
inline constexpr double kPalmDepth = 0.08;       // m
inline constexpr double kPalmHeight = 0.04;      // z of the grasp plane, m
inline constexpr double kPalmHalfHeight = 0.04;  // vertical slab half extent, m
inline constexpr double kProximalLength = 0.07;  // m
inline constexpr double kDistalLength = 0.05;    // m
inline constexpr double kFingerRadius = 0.008;   // m
inline constexpr double kDistalFlexion = 1.0471975511965976;
inline constexpr double kJointMin = 0.0;
inline constexpr double kJointMax = 2.4;  // rad
inline constexpr double kFingerStagger = 0.045;  // base offset along the palm, m

inline constexpr std::array<double, 3> kRestAngle = {
    2.4783675378319345,   // +142 deg
    2.4783675378319345,   // +142 deg
    -2.4783675378319345,  // -142 deg
};
inline constexpr std::array<double, 3> kClosingSign = {-1.0, -1.0, 1.0};

inline Vec2 finger_base_local(int i) {
    switch (i) {
        case 0: return {0.0, kPalmHalfWidth};
        case 1: return {-kFingerStagger, kPalmHalfWidth};
        default: return {-kFingerStagger * 0.5, -kPalmHalfWidth};
    }
}

}  // namespace hand

struct HandPose {
    Vec2 position;  // palm front-face center, world frame
    double yaw = 0.0;
};

// Three fingertips + palm center, with inner-surface normals. Houses the
// hand key points used by the distance and vector reward terms.
struct HandKeyPoints {
    std::array<Vec3, 4> positions;
    std::array<Vec3, 4> normals;
};

// One finger solved in world frame.
struct FingerGeometry {
    Vec2 base;
    Vec2 knuckle;  // proximal/distal junction
    Vec2 tip;
    double proximal_angle;  // world frame, rad
    double distal_angle;
    Vec2 proximal_dir;
    Vec2 distal_dir;
    Vec2 inner_normal_proximal;  // unit, faces the grasp region
    Vec2 inner_normal_distal;
};

inline Vec2 hand_to_world(const HandPose& pose, const Vec2& local) {
    return pose.position + local.rotated(pose.yaw);
}

inline FingerGeometry finger_geometry(const HandPose& pose, int i, double q) {
    FingerGeometry f;
    double s = hand::kClosingSign[i];
    f.proximal_angle = pose.yaw + hand::kRestAngle[i] + s * q;
    f.distal_angle = f.proximal_angle + s * hand::kDistalFlexion;
    f.proximal_dir = {std::cos(f.proximal_angle), std::sin(f.proximal_angle)};
    f.distal_dir = {std::cos(f.distal_angle), std::sin(f.distal_angle)};
    f.base = hand_to_world(pose, hand::finger_base_local(i));
    f.knuckle = f.base + f.proximal_dir * hand::kProximalLength;
    f.tip = f.knuckle + f.distal_dir * hand::kDistalLength;
    // closing sign -1 curls clockwise, so the inner surface faces -90 deg
    // from the link direction; +1 mirrors.
    if (s < 0.0) {
        f.inner_normal_proximal = {f.proximal_dir.y, -f.proximal_dir.x};
        f.inner_normal_distal = {f.distal_dir.y, -f.distal_dir.x};
    } else {
        f.inner_normal_proximal = {-f.proximal_dir.y, f.proximal_dir.x};
        f.inner_normal_distal = {-f.distal_dir.y, f.distal_dir.x};
    }
    return f;
}

inline std::array<Vec2, 4> palm_corners(const HandPose& pose) {
    using namespace hand;
    return {hand_to_world(pose, {0.0, kPalmHalfWidth}),
            hand_to_world(pose, {0.0, -kPalmHalfWidth}),
            hand_to_world(pose, {-kPalmDepth, -kPalmHalfWidth}),
            hand_to_world(pose, {-kPalmDepth, kPalmHalfWidth})};
}

// The 10 hull generators: 3 fingertips, 3 finger base joints, 4 palm corners.
inline std::vector<Vec2> hull_generators(const HandPose& pose,
                                         const std::array<double, 3>& q) {
    std::vector<Vec2> pts;
    pts.reserve(10);
    for (int i = 0; i < 3; ++i) {
        FingerGeometry f = finger_geometry(pose, i, q[i]);
        pts.push_back(f.tip);
        pts.push_back(f.base);
    }
    for (const Vec2& c : palm_corners(pose)) pts.push_back(c);
    return pts;
}

inline ConvexHull2D hand_hull(const HandPose& pose, const std::array<double, 3>& q) {
    return convex_hull(hull_generators(pose, q));
}

inline HandKeyPoints hand_key_points(const HandPose& pose,
                                     const std::array<double, 3>& q) {
    HandKeyPoints kp;
    for (int i = 0; i < 3; ++i) {
        FingerGeometry f = finger_geometry(pose, i, q[i]);
        kp.positions[i] = {f.tip.x, f.tip.y, hand::kPalmHeight};
        kp.normals[i] = {f.inner_normal_distal.x, f.inner_normal_distal.y, 0.0};
    }
    Vec2 palm_center = pose.position;
    Vec2 palm_normal = Vec2{1.0, 0.0}.rotated(pose.yaw);
    kp.positions[3] = {palm_center.x, palm_center.y, hand::kPalmHeight};
    kp.normals[3] = {palm_normal.x, palm_normal.y, 0.0};
    return kp;
}

}  // namespace dgrasp
