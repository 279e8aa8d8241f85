#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dgrasp/env.hpp"
#include "dgrasp/nn.hpp"
#include "dgrasp/ppo.hpp"

#include "json.hpp"

namespace dgrasp {

// Deterministic policy for evaluation: the Gaussian mean, clamped to the
// actuation limits by the command path.
struct MeanPolicy {
    const ActorCritic* params;

    ActuationCommand act(const Observation& obs) const {
        ActionDistribution dist = params->policy_forward(obs);
        return action_to_command(dist.mean).clamped();
    }
};

enum class TaskKind {
    static_grasp,
    dynamic_5n,
    dynamic_8n,
    close_fingers_regrasp,
    shallow_grasp_regrasp,
    dynamic_regrasp,
};

inline const char* task_name(TaskKind k) {
    switch (k) {
        case TaskKind::static_grasp: return "static";
        case TaskKind::dynamic_5n: return "dynamic_5N";
        case TaskKind::dynamic_8n: return "dynamic_8N";
        case TaskKind::close_fingers_regrasp: return "close_fingers_regrasp";
        case TaskKind::shallow_grasp_regrasp: return "shallow_grasp_regrasp";
        default: return "dynamic_regrasp";
    }
}

inline std::optional<TaskKind> task_from_name(const std::string& name) {
    for (TaskKind k : {TaskKind::static_grasp, TaskKind::dynamic_5n,
                       TaskKind::dynamic_8n, TaskKind::close_fingers_regrasp,
                       TaskKind::shallow_grasp_regrasp, TaskKind::dynamic_regrasp}) {
        if (name == task_name(k)) return k;
    }
    return std::nullopt;
}

struct TaskSpec {
    TaskKind kind = TaskKind::static_grasp;
    int trials = 100;
    Vec3 object_half_extents = {0.03, 0.03, 0.03};
    uint64_t seed = 0;
};

struct TrialDetail {
    bool grasped = false;  // lift-test precondition reached
    bool lift = false;
    bool shake12 = false;
    bool shake15 = false;
    double recovery_time = -1.0;  // s, -1 when no lift-passing grasp
    double final_tip_distance = 0.0;
    int outer_contact_events = 0;
    uint64_t seed = 0;
};

struct TaskMetrics {
    std::string task;
    int trials = 0;
    double lift_rate = 0.0;
    double shake12_rate = 0.0;
    double shake15_rate = 0.0;
    double mean_recovery_time = std::numeric_limits<double>::quiet_NaN();
    std::array<double, 3> peak_torques = {0.0, 0.0, 0.0};
    std::array<double, 3> peak_velocities = {0.0, 0.0, 0.0};  // x, y, yaw
    std::vector<TrialDetail> details;
};

// True when the current step is a candidate grasp: every finger is driving
// closed and at least two inner sensor patches are in contact.
inline bool grasp_precondition(const ContactReport& report,
                               const ActuationCommand& command) {
    if (report.n_con < 2) return false;
    for (double t : command.finger_torques) {
        if (t <= 0.0) return false;
    }
    return true;
}

namespace detail_eval {

// Shared body of the lift and shake tests: freeze the hand base, apply an
// extraction/disturbance force on the object for 10 simulated seconds while
// the policy keeps control of the fingers. Success requires the ground-truth
// containment fraction to stay above half its starting value and inner
// contact never to lapse for more than 0.5 s.
inline bool hold_test(World world, const MeanPolicy& policy, double sigma,
                      double force_magnitude, bool redraw_direction, Rng rng) {
    world.base_frozen = true;
    world.hand.velocity = {0.0, 0.0};
    world.hand.yaw_rate = 0.0;
    world.disturbance_time_left = 0.0;
    world.slide_time_left = 0.0;

    Vec2 away = Vec2{1.0, 0.0}.rotated(world.hand.pose.yaw);
    if (!redraw_direction) {
        world.external_force = away * force_magnitude;
    }

    auto containment = [&]() {
        KeyPointCloud truth = cuboid_key_points(
            world.object.center3(), world.object.half_extents, world.object.yaw);
        ConvexHull2D hull = hand_hull(world.hand.pose, world.hand.q);
        return r_topology(hull, observe_full(truth));
    };
    double start_fraction = containment();
    if (start_fraction <= 0.0) return false;

    constexpr int kSteps = 500;        // 10 s at 50 Hz
    constexpr int kRedrawPeriod = 25;  // 0.5 s
    constexpr int kMaxContactLoss = 25;
    int contact_loss_streak = 0;
    ContactReport report = detect_contacts(world);
    for (int step = 0; step < kSteps; ++step) {
        if (redraw_direction && step % kRedrawPeriod == 0) {
            world.external_force = rng.unit_vector() * force_magnitude;
        }
        Vec3 hand_pos{world.hand.pose.position.x, world.hand.pose.position.y,
                      hand::kPalmHeight};
        KeyPointCloud truth = cuboid_key_points(
            world.object.center3(), world.object.half_extents, world.object.yaw);
        ObservedCloud cloud = observe(truth, hand_pos, sigma, rng);
        Observation obs = build_observation(world, cloud, report);
        ActuationCommand cmd = policy.act(obs);
        cmd.hand_velocity = {0.0, 0.0};
        cmd.yaw_rate = 0.0;
        try {
            report = apply_action(world, cmd);
        } catch (const simulation_diverged&) {
            return false;
        }
        contact_loss_streak = report.n_con == 0 ? contact_loss_streak + 1 : 0;
        if (contact_loss_streak > kMaxContactLoss) return false;
        if (containment() < 0.5 * start_fraction) return false;
    }
    return true;
}

}  // namespace detail_eval

// Gravity-scale extraction hold for 10 s.
inline bool lift_test(const World& world_with_grasp, const MeanPolicy& policy,
                      const ContactReport& report, const ActuationCommand& command,
                      double sigma, uint64_t seed) {
    if (!grasp_precondition(report, command)) {
        throw std::logic_error("lift_test: no candidate grasp");
    }
    double extraction = world_with_grasp.object.mass * 9.81;
    return detail_eval::hold_test(world_with_grasp, policy, sigma, extraction,
                                  false, Rng(seed));
}

// Random-direction disturbance hold for 10 s, directions re-drawn every 0.5 s.
inline bool shake_test(const World& world_with_grasp, const MeanPolicy& policy,
                       const ContactReport& report, const ActuationCommand& command,
                       double magnitude, double sigma, uint64_t seed) {
    if (!grasp_precondition(report, command)) {
        throw std::logic_error("shake_test: no candidate grasp");
    }
    return detail_eval::hold_test(world_with_grasp, policy, sigma, magnitude, true,
                                  Rng(seed));
}

// Run `trials` seeded episodes of one scenario and aggregate success rates,
// recovery time, and peak actuation.
inline TaskMetrics run_task(const TaskSpec& spec, const MeanPolicy& policy,
                            EpisodeConfig base_config) {
    TaskMetrics metrics;
    metrics.task = task_name(spec.kind);
    metrics.trials = spec.trials;
    double recovery_sum = 0.0;
    int recovery_count = 0;

    for (int trial = 0; trial < spec.trials; ++trial) {
        uint64_t trial_seed = spec.seed * 1000003ULL + trial;
        EpisodeConfig cfg = base_config;
        cfg.seed = trial_seed;
        cfg.beta = 1.0;
        cfg.enable_disturbance = false;
        cfg.object_half_extents = spec.object_half_extents;
        Env env(cfg);

        TrialDetail detail;
        detail.seed = trial_seed;

        Observation obs;
        switch (spec.kind) {
            case TaskKind::close_fingers_regrasp:
                obs = env.reset_special(SpecialState::close_fingers);
                break;
            case TaskKind::shallow_grasp_regrasp:
                obs = env.reset_special(SpecialState::shallow_grasp);
                break;
            default:
                obs = env.reset();
                break;
        }
        if (spec.kind == TaskKind::dynamic_5n) env.schedule_disturbance(5.0);
        if (spec.kind == TaskKind::dynamic_8n) env.schedule_disturbance(8.0);
        if (spec.kind == TaskKind::dynamic_regrasp) env.arm_displacement();

        double displace_time = 0.0;
        bool have_pass = false;
        World pass_world;
        ContactReport pass_report;
        ActuationCommand pass_command;
        int last_lift_check = -100;
        constexpr int kLiftCheckPeriod = 10;  // 0.2 s cadence

        while (!env.done()) {
            ActuationCommand cmd = policy.act(obs);
            bool fired_before = env.displacement_fired();
            StepResult sr = env.step(cmd);
            if (sr.reason == TerminationReason::diverged) break;
            if (!fired_before && env.displacement_fired()) {
                displace_time = env.step_count() * 0.02;
            }
            if (!have_pass && grasp_precondition(env.last_report(), cmd)) {
                detail.grasped = true;
                if (env.step_count() - last_lift_check >= kLiftCheckPeriod) {
                    last_lift_check = env.step_count();
                    if (lift_test(env.world(), policy, env.last_report(), cmd,
                                  cfg.sigma, trial_seed ^ 0x1111)) {
                        have_pass = true;
                        pass_world = env.world();
                        pass_report = env.last_report();
                        pass_command = cmd;
                        double t = env.step_count() * 0.02;
                        if (spec.kind == TaskKind::dynamic_regrasp) {
                            t -= displace_time;
                        }
                        detail.recovery_time = t;
                    }
                }
            }
            obs = sr.observation;
        }

        detail.final_tip_distance = env.min_fingertip_key_point_distance();
        detail.outer_contact_events = env.outer_contact_events();
        if (have_pass) {
            detail.lift = true;
            detail.shake12 = shake_test(pass_world, policy, pass_report, pass_command,
                                        12.0, cfg.sigma, trial_seed ^ 0x2222);
            detail.shake15 = shake_test(pass_world, policy, pass_report, pass_command,
                                        15.0, cfg.sigma, trial_seed ^ 0x3333);
            if (detail.recovery_time >= 0.0) {
                recovery_sum += detail.recovery_time;
                ++recovery_count;
            }
        }
        for (int i = 0; i < 3; ++i) {
            metrics.peak_torques[i] =
                std::max(metrics.peak_torques[i], env.peak_finger_torque(i));
        }
        metrics.peak_velocities[0] =
            std::max(metrics.peak_velocities[0], env.peak_velocity_x());
        metrics.peak_velocities[1] =
            std::max(metrics.peak_velocities[1], env.peak_velocity_y());
        metrics.peak_velocities[2] =
            std::max(metrics.peak_velocities[2], env.peak_yaw_rate());

        metrics.lift_rate += detail.lift ? 1.0 : 0.0;
        metrics.shake12_rate += detail.shake12 ? 1.0 : 0.0;
        metrics.shake15_rate += detail.shake15 ? 1.0 : 0.0;
        metrics.details.push_back(detail);
    }
    metrics.lift_rate /= spec.trials;
    metrics.shake12_rate /= spec.trials;
    metrics.shake15_rate /= spec.trials;
    if (recovery_count > 0) {
        metrics.mean_recovery_time = recovery_sum / recovery_count;
    }
    return metrics;
}

// Capability grid of a policy trained with an incomplete reward function.
struct CapabilityRow {
    std::string name;
    bool reach = false;
    bool grasp = false;
    bool regrasp = false;
    bool lift = false;
};

struct AblationConfig {
    std::string name;
    int masked_term = -1;       // RewardWeights index, -1 for none
    bool special_states = true;  // false: train without the special initial states
};

// Score the four capabilities of a trained policy.
inline CapabilityRow score_capabilities(const std::string& name,
                                        const MeanPolicy& policy,
                                        const EpisodeConfig& base_config,
                                        uint64_t seed, int trials = 30) {
    CapabilityRow row;
    row.name = name;

    TaskSpec static_spec{TaskKind::static_grasp, trials,
                         base_config.object_half_extents, seed};
    TaskMetrics st = run_task(static_spec, policy, base_config);
    int reach_ok = 0, grasp_ok = 0, lift_ok = 0;
    for (const TrialDetail& d : st.details) {
        if (d.final_tip_distance < 0.05) ++reach_ok;
        if (d.grasped) ++grasp_ok;
        if (d.lift) ++lift_ok;
    }
    row.reach = reach_ok * 2 >= trials;
    row.grasp = grasp_ok * 2 >= trials;
    row.lift = lift_ok * 2 >= trials;

    TaskSpec regrasp_spec{TaskKind::close_fingers_regrasp, trials,
                          base_config.object_half_extents, seed + 1};
    TaskMetrics rg = run_task(regrasp_spec, policy, base_config);
    int regrasp_ok = 0;
    for (const TrialDetail& d : rg.details) {
        if (d.grasped && d.outer_contact_events == 0) ++regrasp_ok;
    }
    row.regrasp = regrasp_ok * 2 >= trials;
    return row;
}

// Train one desk-scale policy per ablation configuration and score it.
inline std::vector<CapabilityRow> ablate(const std::vector<AblationConfig>& battery,
                                         TrainSettings settings, int trials = 30) {
    std::vector<CapabilityRow> rows;
    for (const AblationConfig& ab : battery) {
        TrainSettings s = settings;
        if (ab.masked_term >= 0) {
            s.episode.weights.mask[ab.masked_term] = false;
        }
        if (!ab.special_states) {
            s.episode.beta = 1.0;
        }
        TrainResult trained = train(s);
        MeanPolicy policy{&trained.params};
        EpisodeConfig eval_cfg = settings.episode;  // full reward for scoring
        rows.push_back(score_capabilities(ab.name, policy, eval_cfg,
                                          settings.seed ^ 0x5b5b, trials));
    }
    return rows;
}

// Static-grasp metrics for a set of bounding boxes the policy never trained
// on.
inline std::vector<TaskMetrics> unseen_object_battery(
    const MeanPolicy& policy, const std::vector<Vec3>& boxes,
    const EpisodeConfig& base_config, uint64_t seed, int trials = 100) {
    std::vector<TaskMetrics> out;
    int i = 0;
    for (const Vec3& box : boxes) {
        TaskSpec spec{TaskKind::static_grasp, trials, box, seed + i++};
        TaskMetrics m = run_task(spec, policy, base_config);
        char label[96];
        std::snprintf(label, sizeof(label), "static_box_%gx%gx%g", 2.0 * box.x,
                      2.0 * box.y, 2.0 * box.z);
        m.task = label;
        out.push_back(m);
    }
    return out;
}

inline void write_task_csv_header(std::ostream& os) {
    os << "task,trials,lift,shake12,shake15,recover_s,peak_tau0,peak_tau1,"
          "peak_tau2,peak_vx,peak_vy,peak_yaw\n";
}

inline void write_task_csv_row(std::ostream& os, const TaskMetrics& m) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g\n",
                  m.task.c_str(), m.trials, m.lift_rate, m.shake12_rate,
                  m.shake15_rate, m.mean_recovery_time, m.peak_torques[0],
                  m.peak_torques[1], m.peak_torques[2], m.peak_velocities[0],
                  m.peak_velocities[1], m.peak_velocities[2]);
    os << buf;
}

inline nlohmann::json task_metrics_to_json(const TaskMetrics& m) {
    nlohmann::json j;
    j["task"] = m.task;
    j["trials"] = m.trials;
    j["lift_rate"] = m.lift_rate;
    j["shake12_rate"] = m.shake12_rate;
    j["shake15_rate"] = m.shake15_rate;
    if (std::isnan(m.mean_recovery_time)) {
        j["mean_recovery_time"] = nullptr;
    } else {
        j["mean_recovery_time"] = m.mean_recovery_time;
    }
    j["peak_torques"] = m.peak_torques;
    j["peak_velocities"] = m.peak_velocities;
    nlohmann::json trials = nlohmann::json::array();
    for (const TrialDetail& d : m.details) {
        trials.push_back({{"seed", d.seed},
                          {"grasped", d.grasped},
                          {"lift", d.lift},
                          {"shake12", d.shake12},
                          {"shake15", d.shake15},
                          {"recovery_time", d.recovery_time},
                          {"final_tip_distance", d.final_tip_distance},
                          {"outer_contact_events", d.outer_contact_events}});
    }
    j["trial_details"] = trials;
    return j;
}

}  // namespace dgrasp
