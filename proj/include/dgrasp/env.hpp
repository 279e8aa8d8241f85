#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "dgrasp/dynamics.hpp"
#include "dgrasp/geometry.hpp"
#include "dgrasp/hand_model.hpp"
#include "dgrasp/reward.hpp"
#include "dgrasp/rng.hpp"

namespace dgrasp {

// Flat length-14 state vector: estimated object position (3), hand yaw,
// finger angles (3), fingertip-to-nearest-key-point distances (3), sensor
// forces (4).
struct Observation {
    static constexpr int kSize = 14;
    std::array<double, kSize> v = {};

    Vec3 object_position() const { return {v[0], v[1], v[2]}; }
    double hand_yaw() const { return v[3]; }
    double finger_angle(int i) const { return v[4 + i]; }
    double tip_distance(int i) const { return v[7 + i]; }
    double sensor_force(int i) const { return v[10 + i]; }
};

enum class TerminationReason { none, horizon, self_collision, joint_limit, diverged };

// Assemble the state vector from a world, an observed cloud, and the last
// contact report.
inline Observation build_observation(const World& world, const ObservedCloud& cloud,
                                     const ContactReport& report) {
    Observation obs;
    obs.v[0] = cloud.estimated_center.x;
    obs.v[1] = cloud.estimated_center.y;
    obs.v[2] = cloud.estimated_center.z;
    obs.v[3] = world.hand.pose.yaw;
    for (int i = 0; i < 3; ++i) {
        obs.v[4 + i] = world.hand.q[i];
    }
    for (int i = 0; i < 3; ++i) {
        FingerGeometry f = finger_geometry(world.hand.pose, i, world.hand.q[i]);
        obs.v[7 + i] = nearest_key_point_distance(
            {f.tip.x, f.tip.y, hand::kPalmHeight}, cloud);
    }
    for (int i = 0; i < 4; ++i) {
        obs.v[10 + i] = report.sensor_forces[i];
    }
    return obs;
}

enum class SpecialState { close_fingers, shallow_grasp };

struct EpisodeConfig {
    int horizon = 400;
    double beta = 0.7;  // probability of a normal initial state
    double disturbance_min = 3.0;       // N
    double disturbance_max = 8.0;       // N
    double disturbance_duration = 0.3;  // s
    bool enable_disturbance = true;
    double sigma = 0.02;  // key-point observation noise, m
    double object_min_radius = 0.15;    // object spawn annulus, m
    double object_max_radius = 0.45;
    Vec3 object_half_extents = {0.03, 0.03, 0.03};
    double object_mass = 0.1;  // kg
    RewardWeights weights;
    uint64_t seed = 0;
    WorldParams world_params;
};

struct StepResult {
    Observation observation;
    RewardBreakdown reward;
    bool done = false;
    TerminationReason reason = TerminationReason::none;
};

class Env {
public:
    explicit Env(const EpisodeConfig& config)
        : cfg_(config), rng_(config.seed), obs_rng_(0) {}

    // Alg-style episode start: with probability beta a random object
    // position, otherwise one of the two special re-grasp states. Schedules
    // one disturbance in the first half of normal episodes.
    Observation reset() {
        bool normal = rng_.uniform() < cfg_.beta;
        if (normal) {
            init_world();
            double radius = rng_.uniform(cfg_.object_min_radius, cfg_.object_max_radius);
            double angle = rng_.uniform(0.0, 2.0 * M_PI);
            world_.object.position = {radius * std::cos(angle), radius * std::sin(angle)};
            world_.object.yaw = rng_.uniform(0.0, 2.0 * M_PI);
            if (cfg_.enable_disturbance) {
                disturbance_step_ = static_cast<int>(rng_.uniform_int(
                    static_cast<uint64_t>(cfg_.horizon / 2)));
                disturbance_dir_ = rng_.unit_vector();
                disturbance_mag_ =
                    rng_.uniform(cfg_.disturbance_min, cfg_.disturbance_max);
            } else {
                disturbance_step_ = -1;
            }
        } else {
            SpecialState kind = rng_.uniform() < 0.5 ? SpecialState::close_fingers
                                                     : SpecialState::shallow_grasp;
            place_special(kind);
            disturbance_step_ = -1;  // special episodes isolate the re-grasp skill
        }
        finish_reset();
        return current_obs_;
    }

    // Deterministic reset into one of the two special initial states.
    Observation reset_special(SpecialState kind) {
        place_special(kind);
        disturbance_step_ = -1;
        finish_reset();
        return current_obs_;
    }

    // Reset with an externally chosen object placement (evaluation tasks).
    Observation reset_static(const Vec2& object_position, double object_yaw) {
        init_world();
        world_.object.position = object_position;
        world_.object.yaw = object_yaw;
        disturbance_step_ = -1;
        finish_reset();
        return current_obs_;
    }

    // Schedule a disturbance of fixed magnitude at a random step in the
    // first half (dynamic-grasp evaluation).
    void schedule_disturbance(double magnitude) {
        disturbance_step_ =
            static_cast<int>(rng_.uniform_int(static_cast<uint64_t>(cfg_.horizon / 2)));
        disturbance_dir_ = rng_.unit_vector();
        disturbance_mag_ = magnitude;
    }

    // Arm the dynamic re-grasp displacement: fires once, when the nearest
    // fingertip comes within trigger_distance of the object surface.
    void arm_displacement(double trigger_distance = 0.01) {
        displace_armed_ = true;
        displace_fired_ = false;
        displace_trigger_ = trigger_distance;
    }
    bool displacement_fired() const { return displace_fired_; }

    StepResult step(const ActuationCommand& command) {
        if (done_) throw std::logic_error("Env::step on a finished episode");
        ActuationCommand cmd = command.clamped();
        last_command_ = cmd;
        track_peaks(cmd);

        if (step_count_ == disturbance_step_) {
            apply_disturbance(world_, disturbance_dir_, disturbance_mag_,
                              cfg_.disturbance_duration);
        }
        if (displace_armed_ && !displace_fired_ &&
            min_fingertip_surface_distance() < displace_trigger_) {
            displace_fired_ = true;
            Vec2 dir = rng_.unit_vector();
            world_.slide_velocity = dir * 1.5;  // 0.15 m over 0.1 s
            world_.slide_time_left = 0.1;
        }

        StepResult result;
        try {
            last_report_ = apply_action(world_, cmd);
        } catch (const simulation_diverged&) {
            done_ = true;
            ++step_count_;
            result.observation = current_obs_;
            result.done = true;
            result.reason = TerminationReason::diverged;
            return result;
        }
        ++step_count_;
        refresh_observation();
        if (last_report_.n_c > 0) ++outer_contact_events_;

        result.observation = current_obs_;
        result.reward = compute_reward();

        if (finger_self_collision(world_.hand.pose, world_.hand.q)) {
            result.done = true;
            result.reason = TerminationReason::self_collision;
        } else if (joint_limit_hit(cmd)) {
            result.done = true;
            result.reason = TerminationReason::joint_limit;
        } else if (step_count_ >= cfg_.horizon) {
            result.done = true;
            result.reason = TerminationReason::horizon;
        }
        done_ = result.done;
        return result;
    }

    const World& world() const { return world_; }
    World& world() { return world_; }
    const EpisodeConfig& config() const { return cfg_; }
    const Observation& observation() const { return current_obs_; }
    const ObservedCloud& observed_cloud() const { return cloud_; }
    const ContactReport& last_report() const { return last_report_; }
    const ActuationCommand& last_command() const { return last_command_; }
    int step_count() const { return step_count_; }
    bool done() const { return done_; }
    int disturbance_step() const { return disturbance_step_; }
    int outer_contact_events() const { return outer_contact_events_; }

    // peak realized actuation, for the Table-III style audit
    double peak_finger_torque(int i) const { return peak_torque_[i]; }
    double peak_velocity_x() const { return peak_vel_[0]; }
    double peak_velocity_y() const { return peak_vel_[1]; }
    double peak_yaw_rate() const { return peak_vel_[2]; }

    // smallest distance from a fingertip to the object surface
    double min_fingertip_surface_distance() const {
        Vec2 he{world_.object.half_extents.x, world_.object.half_extents.y};
        double best = 1e9;
        for (int i = 0; i < 3; ++i) {
            FingerGeometry f =
                finger_geometry(world_.hand.pose, i, world_.hand.q[i]);
            Vec2 local = (f.tip - world_.object.position).rotated(-world_.object.yaw);
            best = std::min(best, detail::box_sdf(local, he, nullptr));
        }
        return best;
    }

    // smallest distance from a fingertip to a ground-truth key point
    double min_fingertip_key_point_distance() const {
        KeyPointCloud truth = ground_truth_cloud();
        ObservedCloud full = observe_full(truth);
        double best = 1e9;
        for (int i = 0; i < 3; ++i) {
            FingerGeometry f =
                finger_geometry(world_.hand.pose, i, world_.hand.q[i]);
            best = std::min(best, nearest_key_point_distance(
                                      {f.tip.x, f.tip.y, hand::kPalmHeight}, full));
        }
        return best;
    }

    KeyPointCloud ground_truth_cloud() const {
        return cuboid_key_points(world_.object.center3(),
                                 world_.object.half_extents, world_.object.yaw);
    }

private:
    void init_world() {
        world_ = World{};
        world_.params = cfg_.world_params;
        world_.hand = HandState{};
        world_.object = ObjectState{};
        world_.object.half_extents = cfg_.object_half_extents;
        world_.object.mass = cfg_.object_mass;
    }

    void place_special(SpecialState kind) {
        init_world();
        if (kind == SpecialState::close_fingers) {
            // Fingers nearly closed with the object resting against the
            // outer surface of the bottom finger: opening in place collides.
            // the thumb side has no neighbouring finger, so the object can
            // rest cleanly against its outer surface
            world_.hand.q = {2.0, 2.0, 2.0};
            FingerGeometry f = finger_geometry(world_.hand.pose, 2, 2.0);
            Vec2 mid = (f.knuckle + f.tip) * 0.5;
            Vec2 outer = -f.inner_normal_distal;
            Vec2 forward = f.distal_dir;
            world_.object.position =
                mid + outer * (hand::kFingerRadius + cfg_.object_half_extents.y + 0.001) +
                forward * 0.02;
            world_.object.yaw = f.distal_angle;
        } else {
            // Object pinched only between the distal fingertip pads: an
            // unreliable shallow grasp.
            world_.hand.q = {2.3, 2.3, 2.3};
            FingerGeometry f0 = finger_geometry(world_.hand.pose, 0, 2.3);
            FingerGeometry f1 = finger_geometry(world_.hand.pose, 1, 2.3);
            double tip_x = 0.5 * (f0.tip.x + f1.tip.x);
            world_.object.position = {tip_x + cfg_.object_half_extents.x + 0.004, 0.0};
            world_.object.yaw = 0.0;
        }
    }

    void finish_reset() {
        obs_rng_.reseed(rng_.next_u64());
        step_count_ = 0;
        done_ = false;
        outer_contact_events_ = 0;
        joint_limit_streak_ = 0;
        displace_armed_ = false;
        displace_fired_ = false;
        peak_torque_ = {0.0, 0.0, 0.0};
        peak_vel_ = {0.0, 0.0, 0.0};
        last_command_ = ActuationCommand{};
        last_report_ = detect_contacts(world_);
        refresh_observation();
    }

    void refresh_observation() {
        KeyPointCloud truth = ground_truth_cloud();
        Vec3 hand_pos{world_.hand.pose.position.x, world_.hand.pose.position.y,
                      hand::kPalmHeight};
        cloud_ = observe(truth, hand_pos, cfg_.sigma, obs_rng_);
        current_obs_ = build_observation(world_, cloud_, last_report_);
    }

    RewardBreakdown compute_reward() const {
        HandKeyPoints kp = hand_key_points(world_.hand.pose, world_.hand.q);
        ConvexHull2D hull = hand_hull(world_.hand.pose, world_.hand.q);
        return total_reward(cfg_.weights, kp, cloud_, hull, last_report_,
                            world_.object);
    }

    bool joint_limit_hit(const ActuationCommand& cmd) {
        bool pinned = false;
        for (int i = 0; i < 3; ++i) {
            if (world_.hand.q[i] >= hand::kJointMax - 1e-9 &&
                cmd.finger_torques[i] > 0.0) {
                pinned = true;
            }
        }
        // A finger stalled against the object is a grasp in progress, not a
        // runaway close; only drive-into-the-stop with nothing in the hand
        // counts toward termination.
        bool touching = last_report_.n_con > 0 || last_report_.n_c > 0;
        joint_limit_streak_ = (pinned && !touching) ? joint_limit_streak_ + 1 : 0;
        return joint_limit_streak_ >= 10;
    }

    void track_peaks(const ActuationCommand& cmd) {
        for (int i = 0; i < 3; ++i) {
            peak_torque_[i] =
                std::max(peak_torque_[i], std::abs(cmd.finger_torques[i]));
        }
        peak_vel_[0] = std::max(peak_vel_[0], std::abs(cmd.hand_velocity.x));
        peak_vel_[1] = std::max(peak_vel_[1], std::abs(cmd.hand_velocity.y));
        peak_vel_[2] = std::max(peak_vel_[2], std::abs(cmd.yaw_rate));
    }

    EpisodeConfig cfg_;
    Rng rng_;
    Rng obs_rng_;
    World world_;
    ObservedCloud cloud_;
    Observation current_obs_;
    ContactReport last_report_;
    ActuationCommand last_command_;
    int step_count_ = 0;
    bool done_ = true;
    int disturbance_step_ = -1;
    Vec2 disturbance_dir_;
    double disturbance_mag_ = 0.0;
    bool displace_armed_ = false;
    bool displace_fired_ = false;
    double displace_trigger_ = 0.01;
    int outer_contact_events_ = 0;
    int joint_limit_streak_ = 0;
    std::array<double, 3> peak_torque_ = {0.0, 0.0, 0.0};
    std::array<double, 3> peak_vel_ = {0.0, 0.0, 0.0};
};

}  // namespace dgrasp
