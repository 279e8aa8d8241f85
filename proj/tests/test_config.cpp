#include <cstdio>
#include <fstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "dgrasp/config.hpp"

using namespace dgrasp;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
    std::string path = "/tmp/dgrasp_test_config_" + name + ".json";
    std::ofstream out(path);
    out << body;
    return path;
}

}  // namespace

TEST_CASE("empty config file yields the documented defaults") {
    std::string path = write_temp("empty", "{}");
    RunConfig c = parse_config(path);
    REQUIRE(c.gamma == 0.99);
    REQUIRE(c.clip_epsilon == 0.2);
    REQUIRE(c.horizon == 400);
    REQUIRE(c.beta == 0.7);
    REQUIRE(c.learning_rate == 3e-4);
    REQUIRE(c.epochs == 4);
    REQUIRE(c.minibatch_size == 256);
    REQUIRE(c.episodes_per_iteration == 16);
    REQUIRE(c.grad_norm_cap == 0.5);
    REQUIRE(c.advantage_normalization);
    REQUIRE_FALSE(c.use_gae);
    REQUIRE(c.sigma == 0.02);
    REQUIRE(c.disturbance_min == 3.0);
    REQUIRE(c.disturbance_max == 8.0);
    REQUIRE(c.disturbance_duration == 0.3);
    REQUIRE(c.friction == 0.5);
    REQUIRE(c.task == "static");
    REQUIRE(c.trials == 100);
}

TEST_CASE("no config path at all behaves like the empty file") {
    RunConfig from_empty = parse_config(write_temp("empty2", "{}"));
    RunConfig bare = parse_config("");
    REQUIRE(config_to_json(bare) == config_to_json(from_empty));
}

TEST_CASE("overrides win over file values") {
    std::string path = write_temp("gamma", R"({"gamma": 0.9, "horizon": 300})");
    nlohmann::json overrides = {{"gamma", 0.95}};
    RunConfig c = parse_config(path, overrides);
    REQUIRE(c.gamma == 0.95);   // override beats the file
    REQUIRE(c.horizon == 300);  // untouched file value survives
}

TEST_CASE("range violations name the offending key") {
    std::string path = write_temp("bad_gamma", R"({"gamma": 1.5})");
    try {
        parse_config(path);
        FAIL("expected a configuration error");
    } catch (const config_error& e) {
        REQUIRE(std::string(e.what()).find("gamma") != std::string::npos);
        REQUIRE(std::string(e.what()).find("range") != std::string::npos);
    }
    REQUIRE_THROWS_AS(parse_config(write_temp("bad_beta", R"({"beta": -0.1})")),
                      config_error);
    REQUIRE_THROWS_AS(parse_config(write_temp("bad_eps", R"({"clip_epsilon": 1.0})")),
                      config_error);
    REQUIRE_THROWS_AS(parse_config(write_temp("bad_iter", R"({"iterations": 0})")),
                      config_error);
    REQUIRE_THROWS_AS(
        parse_config(write_temp("bad_dist",
                                R"({"disturbance_min": 5, "disturbance_max": 2})")),
        config_error);
}

TEST_CASE("unknown keys are rejected") {
    std::string path = write_temp("unknown", R"({"gama": 0.9})");
    try {
        parse_config(path);
        FAIL("expected a configuration error");
    } catch (const config_error& e) {
        REQUIRE(std::string(e.what()).find("gama") != std::string::npos);
        REQUIRE(std::string(e.what()).find("unknown") != std::string::npos);
    }
}

TEST_CASE("type mismatches are rejected with the key name") {
    REQUIRE_THROWS_AS(parse_config(write_temp("type1", R"({"gamma": "high"})")),
                      config_error);
    REQUIRE_THROWS_AS(parse_config(write_temp("type2", R"({"iterations": 2.5})")),
                      config_error);
    REQUIRE_THROWS_AS(parse_config(write_temp("type3", R"({"use_gae": 1})")),
                      config_error);
    REQUIRE_THROWS_AS(parse_config(write_temp("type4", R"({"task": 7})")),
                      config_error);
}

TEST_CASE("structural errors") {
    REQUIRE_THROWS_AS(parse_config("/tmp/definitely_missing_config.json"),
                      config_error);
    REQUIRE_THROWS_AS(parse_config(write_temp("mal", "{not json")), config_error);
    REQUIRE_THROWS_AS(parse_config(write_temp("arr", "[1, 2]")), config_error);
}

TEST_CASE("task names are validated") {
    for (std::string name :
         {"static", "dynamic_5N", "dynamic_8N", "close_fingers_regrasp",
          "shallow_grasp_regrasp", "dynamic_regrasp"}) {
        std::string path = write_temp("task_ok", "{\"task\": \"" + name + "\"}");
        REQUIRE(parse_config(path).task == name);
    }
    REQUIRE_THROWS_AS(parse_config(write_temp("task_bad", R"({"task": "juggle"})")),
                      config_error);
}

TEST_CASE("drop accepts reward terms and the curriculum switch") {
    for (std::string name : {"r_distTips", "r_vector", "r_contact", "r_topology",
                             "p_collision", "p_objVel", "special_states"}) {
        std::string path = write_temp("drop_ok", "{\"drop\": \"" + name + "\"}");
        REQUIRE(parse_config(path).drop == name);
    }
    REQUIRE_THROWS_AS(parse_config(write_temp("drop_bad", R"({"drop": "r_magic"})")),
                      config_error);
}

TEST_CASE("config echo round-trips exactly") {
    std::string path = write_temp("round", R"({
        "seed": 42, "gamma": 0.97, "beta": 0.5, "iterations": 7,
        "task": "close_fingers_regrasp", "out": "/tmp/somewhere", "sigma": 0.01
    })");
    RunConfig c = parse_config(path);
    nlohmann::json echo = config_to_json(c);
    RunConfig c2;
    apply_config_json(c2, echo);
    REQUIRE(config_to_json(c2) == echo);
}

TEST_CASE("converters carry the values into the runtime structs") {
    std::string path = write_temp("convert", R"({
        "seed": 9, "horizon": 250, "beta": 0.4, "sigma": 0.05,
        "friction": 0.3, "pd_gain": 40.0, "gamma": 0.9, "epochs": 2,
        "iterations": 3, "out": "/tmp/conv_out"
    })");
    RunConfig c = parse_config(path);
    EpisodeConfig e = c.episode_config();
    REQUIRE(e.horizon == 250);
    REQUIRE(e.beta == 0.4);
    REQUIRE(e.sigma == 0.05);
    REQUIRE(e.seed == 9);
    REQUIRE(e.world_params.ground_friction == 0.3);
    REQUIRE(e.world_params.pd_gain == 40.0);
    PPOConfig p = c.ppo_config();
    REQUIRE(p.gamma == 0.9);
    REQUIRE(p.epochs == 2);
    TrainSettings s = c.train_settings();
    REQUIRE(s.iterations == 3);
    REQUIRE(s.out_dir == "/tmp/conv_out");
    REQUIRE(s.seed == 9);
}

TEST_CASE("reward term name lookup") {
    REQUIRE(reward_term_index("r_distTips") == RewardWeights::kDistTips);
    REQUIRE(reward_term_index("r_topology") == RewardWeights::kTopology);
    REQUIRE(reward_term_index("p_objVel") == RewardWeights::kObjVel);
    REQUIRE(reward_term_index("nonsense") == -1);
}
