#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "dgrasp/dynamics.hpp"
#include "dgrasp/geometry.hpp"
#include "dgrasp/hand_model.hpp"

namespace dgrasp {

// Term order: distTips, vector, contact, topology, collision, objVel.
struct RewardWeights {
    std::array<double, 6> w = {1.0, 1.0, 2.0, 10.0, -1.0, -2.0};
    std::array<bool, 6> mask = {true, true, true, true, true, true};

    static constexpr int kDistTips = 0;
    static constexpr int kVector = 1;
    static constexpr int kContact = 2;
    static constexpr int kTopology = 3;
    static constexpr int kCollision = 4;
    static constexpr int kObjVel = 5;
};

struct RewardBreakdown {
    double dist_tips = 0.0;
    double vector = 0.0;
    double contact = 0.0;
    double topology = 0.0;
    double collision = 0.0;
    double obj_vel = 0.0;
    double total = 0.0;

    double term(int i) const {
        switch (i) {
            case 0: return dist_tips;
            case 1: return vector;
            case 2: return contact;
            case 3: return topology;
            case 4: return collision;
            default: return obj_vel;
        }
    }
};

// exp(-sum over the 4 hand key points of the distance to the nearest
// observed object key point)
inline double r_dist_tips(const HandKeyPoints& hand, const ObservedCloud& cloud) {
    if (cloud.points.empty()) {
        throw std::invalid_argument("r_dist_tips: empty cloud");
    }
    double sum = 0.0;
    for (const Vec3& x : hand.positions) {
        sum += nearest_key_point_distance(x, cloud);
    }
    return std::exp(-sum);
}

// mean alignment of the hand key-point normals with the unit vectors toward
// the estimated object center
inline double r_vector(const HandKeyPoints& hand, const Vec3& estimated_center) {
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        Vec3 u = estimated_center - hand.positions[i];
        double n = u.norm();
        if (n < 1e-9) continue;  // direction undefined, term contributes 0
        sum += (u * (1.0 / n)).dot(hand.normals[i]);
    }
    return sum / 4.0;
}

// fraction of observed key points enclosed by the hand hull; a point counts
// when its horizontal projection is in the hull and its height is within
// the hand's vertical slab
inline double r_topology(const ConvexHull2D& hull, const ObservedCloud& cloud,
                         double slab_z_min = hand::kPalmHeight - hand::kPalmHalfHeight,
                         double slab_z_max = hand::kPalmHeight + hand::kPalmHalfHeight) {
    if (hull.degenerate || cloud.points.empty()) return 0.0;
    int n_in = 0;
    for (const Vec3& p : cloud.points) {
        if (p.z < slab_z_min || p.z > slab_z_max) continue;
        if (contains(hull, p.xy())) ++n_in;
    }
    return static_cast<double>(n_in) / static_cast<double>(cloud.count());
}

inline std::pair<double, double> contact_terms(const ContactReport& report) {
    return {static_cast<double>(report.n_con), static_cast<double>(report.n_c)};
}

inline double p_obj_vel(const ObjectState& obj) { return obj.velocity.norm(); }

inline RewardBreakdown total_reward(const RewardWeights& weights,
                                    const HandKeyPoints& hand,
                                    const ObservedCloud& cloud,
                                    const ConvexHull2D& hull,
                                    const ContactReport& report,
                                    const ObjectState& obj) {
    RewardBreakdown b;
    b.dist_tips = r_dist_tips(hand, cloud);
    b.vector = r_vector(hand, cloud.estimated_center);
    auto [rc, pc] = contact_terms(report);
    b.contact = rc;
    b.collision = pc;
    b.topology = r_topology(hull, cloud);
    b.obj_vel = p_obj_vel(obj);
    b.total = 0.0;
    for (int i = 0; i < 6; ++i) {
        if (weights.mask[i]) b.total += weights.w[i] * b.term(i);
    }
    return b;
}

}  // namespace dgrasp
