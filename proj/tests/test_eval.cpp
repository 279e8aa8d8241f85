#include <cmath>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "dgrasp/eval.hpp"

using namespace dgrasp;

namespace {

// Policy with constant finger torque and no base motion: zero weights, torque
// biases only.
ActorCritic closing_net(double torque) {
    ActorCritic ac;
    ac.zero();
    for (int k = 3; k < 6; ++k) {
        ac.actor_params()[ac.actor_shape.b3() + k] = torque;
    }
    return ac;
}

struct GraspFixture {
    World world;
    ContactReport report;
    ActuationCommand command;
};

// Close the fingers on an object placed in front of the palm until the step
// budget runs out.
GraspFixture closed_on_object(double half, Vec2 position, int steps,
                              double torque = 0.8) {
    GraspFixture f;
    f.world.object.half_extents = {half, half, half};
    f.world.object.position = position;
    f.command.finger_torques = {torque, torque, torque};
    for (int i = 0; i < steps; ++i) {
        f.report = apply_action(f.world, f.command);
    }
    return f;
}

}  // namespace

TEST_CASE("task names round trip") {
    for (TaskKind k : {TaskKind::static_grasp, TaskKind::dynamic_5n,
                       TaskKind::dynamic_8n, TaskKind::close_fingers_regrasp,
                       TaskKind::shallow_grasp_regrasp, TaskKind::dynamic_regrasp}) {
        auto back = task_from_name(task_name(k));
        REQUIRE(back.has_value());
        REQUIRE(*back == k);
    }
    REQUIRE_FALSE(task_from_name("juggle").has_value());
}

TEST_CASE("grasp precondition") {
    ContactReport two_contacts;
    two_contacts.n_con = 2;
    ActuationCommand closing;
    closing.finger_torques = {0.5, 0.5, 0.5};

    REQUIRE(grasp_precondition(two_contacts, closing));

    ContactReport one_contact;
    one_contact.n_con = 1;
    REQUIRE_FALSE(grasp_precondition(one_contact, closing));

    ActuationCommand opening = closing;
    opening.finger_torques[1] = -0.1;
    REQUIRE_FALSE(grasp_precondition(two_contacts, opening));

    ActuationCommand idle = closing;
    idle.finger_torques[2] = 0.0;
    REQUIRE_FALSE(grasp_precondition(two_contacts, idle));
}

TEST_CASE("hold tests require a candidate grasp") {
    World w;
    ContactReport no_contact;
    ActuationCommand no_torque;
    ActorCritic ac = closing_net(0.8);
    MeanPolicy policy{&ac};
    REQUIRE_THROWS_AS(lift_test(w, policy, no_contact, no_torque, 0.02, 1),
                      std::logic_error);
    REQUIRE_THROWS_AS(shake_test(w, policy, no_contact, no_torque, 12.0, 0.02, 1),
                      std::logic_error);
}

TEST_CASE("enclosing grasp holds against extraction and gentle shaking") {
    GraspFixture f = closed_on_object(0.03, {0.06, 0.0}, 20);
    REQUIRE(grasp_precondition(f.report, f.command));
    ActorCritic ac = closing_net(0.8);
    MeanPolicy policy{&ac};
    REQUIRE(lift_test(f.world, policy, f.report, f.command, 0.02, 99));
    // zero-magnitude shaking is no harder than holding still
    REQUIRE(shake_test(f.world, policy, f.report, f.command, 0.0, 0.02, 99));
    // verdicts are deterministic for a fixed seed
    REQUIRE(lift_test(f.world, policy, f.report, f.command, 0.02, 99) ==
            lift_test(f.world, policy, f.report, f.command, 0.02, 99));
    REQUIRE(shake_test(f.world, policy, f.report, f.command, 12.0, 0.02, 7) ==
            shake_test(f.world, policy, f.report, f.command, 12.0, 0.02, 7));
}

TEST_CASE("a grasp that goes slack loses the extraction hold") {
    GraspFixture f = closed_on_object(0.05, {0.08, 0.0}, 150);
    REQUIRE(grasp_precondition(f.report, f.command));
    // the hold must be actively maintained: a near-limp policy lets the
    // extraction force drag the object out of the pinch
    ActorCritic ac = closing_net(0.05);
    MeanPolicy policy{&ac};
    REQUIRE_FALSE(lift_test(f.world, policy, f.report, f.command, 0.02, 99));
}

TEST_CASE("mean policy is deterministic and clamped") {
    ActorCritic ac;
    ac.zero();
    // huge biases on every action channel
    for (int k = 0; k < 6; ++k) {
        ac.actor_params()[ac.actor_shape.b3() + k] = 50.0;
    }
    MeanPolicy policy{&ac};
    Observation obs;
    obs.v[0] = 0.2;
    ActuationCommand a = policy.act(obs);
    ActuationCommand b = policy.act(obs);
    REQUIRE(a.hand_velocity.x == 1.0);
    REQUIRE(a.hand_velocity.y == 1.0);
    REQUIRE(a.yaw_rate == 1.0);
    for (double t : a.finger_torques) REQUIRE(t == 2.0);
    REQUIRE(a.hand_velocity.x == b.hand_velocity.x);
    REQUIRE(a.finger_torques == b.finger_torques);
}

TEST_CASE("run_task aggregates trial details") {
    ActorCritic ac;
    ac.zero();  // inert policy: never reaches, never grasps
    MeanPolicy policy{&ac};
    TaskSpec spec;
    spec.kind = TaskKind::static_grasp;
    spec.trials = 3;
    spec.seed = 5;
    EpisodeConfig cfg;
    TaskMetrics m = run_task(spec, policy, cfg);

    REQUIRE(m.task == std::string("static"));
    REQUIRE(m.trials == 3);
    REQUIRE(static_cast<int>(m.details.size()) == 3);
    REQUIRE(m.lift_rate == 0.0);
    REQUIRE(m.shake12_rate == 0.0);
    REQUIRE(std::isnan(m.mean_recovery_time));
    for (const TrialDetail& d : m.details) {
        REQUIRE_FALSE(d.grasped);
        REQUIRE(d.recovery_time == -1.0);
        REQUIRE(d.final_tip_distance > 0.05);  // object spawns >= 0.15 m away
    }
    // an inert policy never commands motion, so no peaks are recorded
    for (double t : m.peak_torques) REQUIRE(t == 0.0);
    for (double v : m.peak_velocities) REQUIRE(v == 0.0);

    SECTION("identical specs give identical reports") {
        TaskMetrics again = run_task(spec, policy, cfg);
        REQUIRE(task_metrics_to_json(again).dump() ==
                task_metrics_to_json(m).dump());
    }
    SECTION("report serialization") {
        nlohmann::json j = task_metrics_to_json(m);
        REQUIRE(j["task"] == "static");
        REQUIRE(j["mean_recovery_time"].is_null());
        REQUIRE(j["trial_details"].size() == 3);
        std::ostringstream header, row;
        write_task_csv_header(header);
        write_task_csv_row(row, m);
        auto count_fields = [](const std::string& s) {
            return std::count(s.begin(), s.end(), ',') + 1;
        };
        REQUIRE(count_fields(header.str()) == 12);
        REQUIRE(count_fields(row.str()) == count_fields(header.str()));
    }
}

TEST_CASE("unseen-object battery labels each bounding box") {
    ActorCritic ac;
    ac.zero();
    MeanPolicy policy{&ac};
    EpisodeConfig cfg;
    std::vector<Vec3> boxes = {{0.03, 0.03, 0.06}, {0.02, 0.02, 0.02}};
    auto reports = unseen_object_battery(policy, boxes, cfg, 3, 1);
    REQUIRE(reports.size() == 2);
    REQUIRE(reports[0].task == "static_box_0.06x0.06x0.12");
    REQUIRE(reports[1].task == "static_box_0.04x0.04x0.04");
    REQUIRE(reports[0].trials == 1);
}
