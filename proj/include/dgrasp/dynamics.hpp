#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "dgrasp/hand_model.hpp"
#include "dgrasp/math.hpp"

namespace dgrasp {

struct simulation_diverged : std::runtime_error {
    simulation_diverged() : std::runtime_error("simulation diverged") {}
};

struct HandState {
    HandPose pose;
    Vec2 velocity;
    double yaw_rate = 0.0;
    std::array<double, 3> q = {0.0, 0.0, 0.0};
    std::array<double, 3> dq = {0.0, 0.0, 0.0};
};

struct ObjectState {
    Vec2 position;
    double yaw = 0.0;
    Vec2 velocity;
    double yaw_rate = 0.0;
    Vec3 half_extents = {0.03, 0.03, 0.03};
    double mass = 0.1;  // kg

    double footprint_inertia() const {
        double lx = 2.0 * half_extents.x, ly = 2.0 * half_extents.y;
        return mass * (lx * lx + ly * ly) / 12.0;
    }
    Vec3 center3() const { return {position.x, position.y, half_extents.z}; }
};

// Contact summary for one control step. n_con counts inner-surface sensor
// patches in contact (3 fingers + palm), n_c counts finger links touched on
// their outer surface. sensor_forces: finger 0..2 inner pads, then palm.
struct ContactReport {
    int n_con = 0;
    int n_c = 0;
    std::array<double, 4> sensor_forces = {0.0, 0.0, 0.0, 0.0};
};

struct ActuationCommand {
    Vec2 hand_velocity;               // m/s, |component| <= 1
    double yaw_rate = 0.0;            // rad/s, |.| <= 1
    std::array<double, 3> finger_torques = {0.0, 0.0, 0.0};  // N*m, |.| <= 2

    static constexpr double kMaxHandVelocity = 1.0;
    static constexpr double kMaxYawRate = 1.0;
    static constexpr double kMaxFingerTorque = 2.0;

    ActuationCommand clamped() const {
        ActuationCommand c = *this;
        c.hand_velocity.x = clamp(c.hand_velocity.x, -kMaxHandVelocity, kMaxHandVelocity);
        c.hand_velocity.y = clamp(c.hand_velocity.y, -kMaxHandVelocity, kMaxHandVelocity);
        c.yaw_rate = clamp(c.yaw_rate, -kMaxYawRate, kMaxYawRate);
        for (double& t : c.finger_torques) {
            t = clamp(t, -kMaxFingerTorque, kMaxFingerTorque);
        }
        return c;
    }
};

struct WorldParams {
    double dt = 0.002;          // s, low-level step
    int substeps = 10;          // low-level steps per control step (500Hz/50Hz)
    double contact_stiffness = 5000.0;  // N/m
    double contact_damping = 50.0;      // N*s/m
    double ground_friction = 0.5;
    double gravity = 9.81;
    double hand_mass = 0.5;        // kg
    double hand_yaw_inertia = 2e-3;  // kg*m^2
    double pd_gain = 50.0;         // 1/s, on velocity error
    double finger_inertia = 2e-3;  // kg*m^2
    double finger_damping = 0.05;  // N*m*s
    double finger_speed_limit = 10.0;  // rad/s
    double workspace_half = 0.6;       // m, hand center clamp
    double disturbance_slide_cap = 1.0;  // m/s, free-sliding speed under a push
    // Tangential grip of the finger pads. Kept moderate: higher values let a
    // fast-sweeping pad sling the object at the pad surface speed instead of
    // guiding it into the palm pocket.
    double pad_friction = 0.3;
    double divergence_limit = 1e3;
};

namespace detail {

// point signed distance to an axis-aligned box of the given half extents
inline double box_sdf(const Vec2& p, const Vec2& he, Vec2* grad) {
    double dx = std::abs(p.x) - he.x;
    double dy = std::abs(p.y) - he.y;
    if (dx > 0.0 || dy > 0.0) {
        Vec2 d{std::max(dx, 0.0), std::max(dy, 0.0)};
        double dist = d.norm();
        if (grad) {
            Vec2 g{p.x >= 0.0 ? d.x : -d.x, p.y >= 0.0 ? d.y : -d.y};
            *grad = dist > 0.0 ? g * (1.0 / dist) : Vec2{1.0, 0.0};
        }
        return dist;
    }
    // inside: distance to the nearest face
    if (dx > dy) {
        if (grad) *grad = {p.x >= 0.0 ? 1.0 : -1.0, 0.0};
        return dx;
    }
    if (grad) *grad = {0.0, p.y >= 0.0 ? 1.0 : -1.0};
    return dy;
}

}  // namespace detail

// One capsule collider of the hand.
struct HandCapsule {
    Vec2 a, b;
    double radius;
    int sensor;        // 0..2 finger index, 3 palm face, 4 palm body (no sensor)
    int link_id;       // unique per collider, for n_c counting
    Vec2 inner_normal; // valid for sensors 0..3
    Vec2 joint_base;   // finger base joint, valid for sensors 0..2
    double joint_sign; // closing sign, valid for sensors 0..2
};

struct World {
    WorldParams params;
    HandState hand;
    ObjectState object;
    double time = 0.0;

    // external disturbance at the object's center of mass
    Vec2 disturbance_force;
    double disturbance_time_left = 0.0;

    // kinematic slide used by the dynamic re-grasp displacement
    Vec2 slide_velocity;
    double slide_time_left = 0.0;

    // extraction force used by the lift/shake tests
    Vec2 external_force;
    bool base_frozen = false;

    // impulse bookkeeping for the momentum audit, integrated since the last
    // reset_impulse_audit: applied forces (contact + disturbance + external)
    // and the velocity-level friction impulse, recorded separately
    Vec2 object_force_impulse_accum;
    Vec2 object_friction_impulse_accum;

    void reset_impulse_audit() {
        object_force_impulse_accum = {0.0, 0.0};
        object_friction_impulse_accum = {0.0, 0.0};
    }

    std::vector<HandCapsule> hand_capsules() const {
        std::vector<HandCapsule> caps;
        caps.reserve(8);
        int link_id = 0;
        for (int i = 0; i < 3; ++i) {
            FingerGeometry f = finger_geometry(hand.pose, i, hand.q[i]);
            caps.push_back({f.base, f.knuckle, hand::kFingerRadius, i, link_id++,
                            f.inner_normal_proximal, f.base, hand::kClosingSign[i]});
            caps.push_back({f.knuckle, f.tip, hand::kFingerRadius, i, link_id++,
                            f.inner_normal_distal, f.base, hand::kClosingSign[i]});
        }
        Vec2 palm_normal = Vec2{1.0, 0.0}.rotated(hand.pose.yaw);
        Vec2 fa = hand_to_world(hand.pose, {-0.003, hand::kPalmHalfWidth - 0.005});
        Vec2 fb = hand_to_world(hand.pose, {-0.003, -(hand::kPalmHalfWidth - 0.005)});
        caps.push_back({fa, fb, 0.003, 3, link_id++, palm_normal, {}, 0.0});
        Vec2 ba = hand_to_world(hand.pose, {-0.070, 0.0});
        Vec2 bb = hand_to_world(hand.pose, {-0.012, 0.0});
        caps.push_back({ba, bb, hand::kPalmHalfWidth - 0.006, 4, link_id++, {}, {}, 0.0});
        return caps;
    }
};

struct ContactForce {
    Vec2 point;        // world
    Vec2 normal;       // unit, from object toward the hand collider
    double magnitude;  // N
    Vec2 friction;     // N, tangential Coulomb force on the hand collider
    const HandCapsule* capsule;
    bool inner;
};

namespace detail {

inline Vec2 world_to_object(const ObjectState& obj, const Vec2& p) {
    return (p - obj.position).rotated(-obj.yaw);
}

// deepest penetration of a capsule against the object footprint, by
// sampling the capsule axis with the box SDF
inline bool capsule_object_contact(const ObjectState& obj, const HandCapsule& cap,
                                   Vec2* point, Vec2* normal, double* penetration) {
    constexpr int kSamples = 9;
    Vec2 he{obj.half_extents.x, obj.half_extents.y};
    double best_sd = 1e9;
    Vec2 best_p;
    Vec2 best_grad{1.0, 0.0};
    for (int k = 0; k < kSamples; ++k) {
        double t = static_cast<double>(k) / (kSamples - 1);
        Vec2 p = cap.a + (cap.b - cap.a) * t;
        Vec2 local = world_to_object(obj, p);
        Vec2 grad;
        double sd = box_sdf(local, he, &grad);
        if (sd < best_sd) {
            best_sd = sd;
            best_p = p;
            best_grad = grad;
        }
    }
    double pen = cap.radius - best_sd;
    if (pen <= 0.0) return false;
    *point = best_p;
    *normal = best_grad.rotated(obj.yaw);  // object frame -> world
    *penetration = pen;
    return true;
}

}  // namespace detail

// Velocity of a point rigidly attached to the hand (palm colliders) or to a
// finger link.
inline Vec2 hand_point_velocity(const World& w, const HandCapsule& cap, const Vec2& p) {
    Vec2 v = w.hand.velocity + w.hand.yaw_rate * (p - w.hand.pose.position).perp();
    if (cap.sensor < 3) {
        v += cap.joint_sign * w.hand.dq[cap.sensor] * (p - cap.joint_base).perp();
    }
    return v;
}

inline Vec2 object_point_velocity(const ObjectState& obj, const Vec2& p) {
    return obj.velocity + obj.yaw_rate * (p - obj.position).perp();
}

// Resolve all hand/object overlaps into penalty contact forces.
inline std::vector<ContactForce> solve_contacts(const World& w,
                                                const std::vector<HandCapsule>& caps) {
    struct Raw {
        const HandCapsule* cap;
        Vec2 point, normal, v_rel;
        double pen, approach;
    };
    std::vector<Raw> raw;
    for (const HandCapsule& cap : caps) {
        Vec2 point, normal;
        double pen;
        if (!detail::capsule_object_contact(w.object, cap, &point, &normal, &pen)) {
            continue;
        }
        Vec2 v_rel = hand_point_velocity(w, cap, point) -
                     object_point_velocity(w.object, point);
        raw.push_back({&cap, point, normal, v_rel, pen, -v_rel.dot(normal)});
    }
    // The damping budget is shared across simultaneous contacts: the full
    // coefficient per contact would remove more than the whole approach
    // velocity in one substep when the object is squeezed from both sides,
    // pumping energy into it instead of dissipating.
    double share = raw.empty() ? 1.0 : 1.0 / static_cast<double>(raw.size());
    std::vector<ContactForce> forces;
    for (const Raw& rc : raw) {
        const HandCapsule& cap = *rc.cap;
        double f = w.params.contact_stiffness * rc.pen +
                   w.params.contact_damping * share * rc.approach;
        if (f <= 0.0) continue;
        const Vec2& point = rc.point;
        const Vec2& normal = rc.normal;
        // Coulomb pad friction opposing tangential slip. Rubber pads grip:
        // a light touch drags the object along and a partial close holds
        // it. The force is capped at the (shared) impulse that would cancel
        // the slip within one substep, which keeps it dissipative instead
        // of ringing.
        Vec2 v_t = rc.v_rel - normal * rc.v_rel.dot(normal);
        double slip = v_t.norm();
        Vec2 friction{0.0, 0.0};
        if (slip > 1e-12) {
            double cap = w.object.mass * slip / w.params.dt * share;
            double mag = std::min(w.params.pad_friction * f, cap);
            friction = v_t * (-mag / slip);
        }
        bool inner;
        if (cap.sensor == 3) {
            inner = true;
        } else if (cap.sensor == 4) {
            inner = false;  // palm body, unclassified but force-bearing
        } else {
            // object on the closing side of the link -> inner pad contact
            inner = normal.dot(cap.inner_normal) < 0.0;
        }
        forces.push_back({point, normal, f, friction, &cap, inner});
    }
    return forces;
}

inline ContactReport summarize_contacts(const std::vector<ContactForce>& forces) {
    ContactReport report;
    std::array<bool, 4> inner_patch = {false, false, false, false};
    for (const ContactForce& c : forces) {
        int s = c.capsule->sensor;
        if (s == 4) continue;
        if (c.inner) {
            inner_patch[s] = true;
            report.sensor_forces[s] += c.magnitude;
        } else if (s < 3) {
            ++report.n_c;
        }
    }
    for (bool b : inner_patch) {
        if (b) ++report.n_con;
    }
    return report;
}

// Classify current overlaps without advancing the simulation.
inline ContactReport detect_contacts(const World& w) {
    auto caps = w.hand_capsules();
    return summarize_contacts(solve_contacts(w, caps));
}

// True if links of two different fingers overlap (capsule distance below
// the sum of radii).
inline bool finger_self_collision(const HandPose& pose, const std::array<double, 3>& q) {
    std::array<FingerGeometry, 3> f = {finger_geometry(pose, 0, q[0]),
                                       finger_geometry(pose, 1, q[1]),
                                       finger_geometry(pose, 2, q[2])};
    auto segs = [&](int i, int link, Vec2& a, Vec2& b) {
        if (link == 0) {
            a = f[i].base;
            b = f[i].knuckle;
        } else {
            a = f[i].knuckle;
            b = f[i].tip;
        }
    };
    // The two top fingers ride side by side out of plane and cannot touch;
    // only finger-vs-thumb pairs can actually collide.
    for (int i = 0; i < 2; ++i) {
        for (int j = 2; j < 3; ++j) {
            for (int li = 0; li < 2; ++li) {
                for (int lj = 0; lj < 2; ++lj) {
                    Vec2 a0, a1, b0, b1;
                    segs(i, li, a0, a1);
                    segs(j, lj, b0, b1);
                    if (segment_segment_distance(a0, a1, b0, b1) <
                        2.0 * hand::kFingerRadius) {
                        return true;
                    }
                }
            }
        }
    }
    return false;
}

// Register an external force at the object's center of mass for the next
// 0.3 s of simulated time.
inline void apply_disturbance(World& w, const Vec2& direction, double magnitude,
                              double duration = 0.3) {
    if (magnitude < 0.0) throw std::invalid_argument("disturbance magnitude < 0");
    w.disturbance_force = direction * magnitude;
    w.disturbance_time_left = duration;
}

// One 500 Hz step. PD velocity tracking on the hand base, direct torques on
// the fingers, penalty contacts, Coulomb ground friction, semi-implicit
// Euler.
inline ContactReport substep(World& w, const ActuationCommand& command, double dt) {
    const WorldParams& p = w.params;
    ActuationCommand cmd = command.clamped();

    auto caps = w.hand_capsules();
    std::vector<ContactForce> contacts = solve_contacts(w, caps);

    Vec2 hand_force;
    double hand_torque = 0.0;
    std::array<double, 3> finger_torque = {0.0, 0.0, 0.0};
    Vec2 object_force;
    double object_torque = 0.0;

    for (const ContactForce& c : contacts) {
        Vec2 F = c.normal * c.magnitude + c.friction;  // on the hand collider
        hand_force += F;
        hand_torque += (c.point - w.hand.pose.position).cross(F);
        if (c.capsule->sensor < 3) {
            finger_torque[c.capsule->sensor] +=
                c.capsule->joint_sign * (c.point - c.capsule->joint_base).cross(F);
        }
        object_force -= F;
        object_torque -= (c.point - w.object.position).cross(F);
    }

    // hand base: velocity PD (or frozen during lift/shake tests)
    if (w.base_frozen) {
        w.hand.velocity = {0.0, 0.0};
        w.hand.yaw_rate = 0.0;
    } else {
        Vec2 pd = p.hand_mass * p.pd_gain * (cmd.hand_velocity - w.hand.velocity);
        w.hand.velocity += (pd + hand_force) * (dt / p.hand_mass);
        double pd_yaw = p.hand_yaw_inertia * p.pd_gain * (cmd.yaw_rate - w.hand.yaw_rate);
        w.hand.yaw_rate += (pd_yaw + hand_torque) * (dt / p.hand_yaw_inertia);
        w.hand.pose.position += w.hand.velocity * dt;
        w.hand.pose.yaw += w.hand.yaw_rate * dt;
        // workspace clamp
        for (int axis = 0; axis < 2; ++axis) {
            double& x = axis == 0 ? w.hand.pose.position.x : w.hand.pose.position.y;
            double& v = axis == 0 ? w.hand.velocity.x : w.hand.velocity.y;
            if (x > p.workspace_half) {
                x = p.workspace_half;
                if (v > 0.0) v = 0.0;
            } else if (x < -p.workspace_half) {
                x = -p.workspace_half;
                if (v < 0.0) v = 0.0;
            }
        }
    }

    // fingers: torque-driven with viscous damping and hard joint limits
    for (int i = 0; i < 3; ++i) {
        double tau = cmd.finger_torques[i] - p.finger_damping * w.hand.dq[i] +
                     finger_torque[i];
        w.hand.dq[i] += tau * (dt / p.finger_inertia);
        w.hand.dq[i] = clamp(w.hand.dq[i], -p.finger_speed_limit, p.finger_speed_limit);
        w.hand.q[i] += w.hand.dq[i] * dt;
        if (w.hand.q[i] < hand::kJointMin) {
            w.hand.q[i] = hand::kJointMin;
            if (w.hand.dq[i] < 0.0) w.hand.dq[i] = 0.0;
        } else if (w.hand.q[i] > hand::kJointMax) {
            w.hand.q[i] = hand::kJointMax;
            if (w.hand.dq[i] > 0.0) w.hand.dq[i] = 0.0;
        }
    }

    // object
    bool pushed = w.disturbance_time_left > 0.0;
    if (pushed) {
        object_force += w.disturbance_force;
        w.disturbance_time_left -= dt;
    }
    object_force += w.external_force;

    if (w.slide_time_left > 0.0) {
        // kinematic displacement overrides the dynamics for its duration
        w.object.velocity = w.slide_velocity;
        w.object.yaw_rate = 0.0;
        w.object.position += w.object.velocity * dt;
        w.slide_time_left -= dt;
        if (w.slide_time_left <= 0.0) w.object.velocity = {0.0, 0.0};
    } else {
        w.object.velocity += object_force * (dt / w.object.mass);
        w.object_force_impulse_accum += object_force * dt;
        Vec2 v_pre_friction = w.object.velocity;
        double inertia = w.object.footprint_inertia();
        w.object.yaw_rate += object_torque * (dt / inertia);

        // Coulomb friction against the ground, velocity-level clamp
        double friction_dv = dt * p.ground_friction * p.gravity;
        double speed = w.object.velocity.norm();
        if (speed <= friction_dv) {
            w.object.velocity = {0.0, 0.0};
        } else {
            w.object.velocity -= w.object.velocity * (friction_dv / speed);
        }
        // A pushed object slides rather than flies: the planar model has no
        // tipping or edge digging, so an unopposed push of several newtons
        // on a 0.1 kg object would reach tens of m/s. Cap its free-sliding
        // speed during the push window at the trackable slide speed.
        if (pushed) {
            double s = w.object.velocity.norm();
            if (s > p.disturbance_slide_cap) {
                w.object.velocity = w.object.velocity * (p.disturbance_slide_cap / s);
            }
        }
        double friction_dw =
            dt * p.ground_friction * w.object.mass * p.gravity * 0.02 /
            w.object.footprint_inertia();
        if (std::abs(w.object.yaw_rate) <= friction_dw) {
            w.object.yaw_rate = 0.0;
        } else {
            w.object.yaw_rate -= friction_dw * (w.object.yaw_rate > 0.0 ? 1.0 : -1.0);
        }
        w.object.position += w.object.velocity * dt;
        w.object.yaw += w.object.yaw_rate * dt;
        w.object_friction_impulse_accum +=
            (w.object.velocity - v_pre_friction) * w.object.mass;
    }

    w.time += dt;

    auto finite = [&](double v) {
        return std::isfinite(v) && std::abs(v) <= p.divergence_limit;
    };
    if (!finite(w.hand.pose.position.x) || !finite(w.hand.pose.position.y) ||
        !finite(w.hand.velocity.x) || !finite(w.hand.velocity.y) ||
        !finite(w.object.position.x) || !finite(w.object.position.y) ||
        !finite(w.object.velocity.x) || !finite(w.object.velocity.y) ||
        !finite(w.hand.dq[0]) || !finite(w.hand.dq[1]) || !finite(w.hand.dq[2])) {
        throw simulation_diverged();
    }

    return summarize_contacts(contacts);
}

// One 50 Hz control step: clamp the command and run exactly `substeps`
// low-level steps. The returned report covers the last substep.
inline ContactReport apply_action(World& w, const ActuationCommand& command) {
    ActuationCommand cmd = command.clamped();
    ContactReport report;
    for (int i = 0; i < w.params.substeps; ++i) {
        report = substep(w, cmd, w.params.dt);
    }
    return report;
}

inline double kinetic_energy(const World& w) {
    double e = 0.5 * w.params.hand_mass * w.hand.velocity.norm_sq() +
               0.5 * w.params.hand_yaw_inertia * w.hand.yaw_rate * w.hand.yaw_rate +
               0.5 * w.object.mass * w.object.velocity.norm_sq() +
               0.5 * w.object.footprint_inertia() * w.object.yaw_rate * w.object.yaw_rate;
    for (double dq : w.hand.dq) {
        e += 0.5 * w.params.finger_inertia * dq * dq;
    }
    return e;
}

inline void write_trace_header(std::ostream& os) {
    os << "time,hand_x,hand_y,hand_yaw,q0,q1,q2,obj_x,obj_y,obj_yaw,"
          "n_con,n_c,f0,f1,f2,f_palm\n";
}

inline void write_trace_row(std::ostream& os, const World& w, const ContactReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%d,%d,%.17g,%.17g,%.17g,%.17g\n",
                  w.time, w.hand.pose.position.x, w.hand.pose.position.y,
                  w.hand.pose.yaw, w.hand.q[0], w.hand.q[1], w.hand.q[2],
                  w.object.position.x, w.object.position.y, w.object.yaw, r.n_con,
                  r.n_c, r.sensor_forces[0], r.sensor_forces[1], r.sensor_forces[2],
                  r.sensor_forces[3]);
    os << buf;
}

}  // namespace dgrasp
