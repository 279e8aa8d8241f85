#pragma once

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include "dgrasp/env.hpp"
#include "dgrasp/eval.hpp"
#include "dgrasp/ppo.hpp"

#include "json.hpp"

namespace dgrasp {

struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Merged run configuration. Flat keys, every field defaulted; parsing
// rejects unknown keys and out-of-range values by name.
struct RunConfig {
    uint64_t seed = 0;
    int iterations = 100;
    int checkpoint_every = 50;
    std::string out = "run_out";

    // learning
    double gamma = 0.99;
    double clip_epsilon = 0.2;
    double learning_rate = 3e-4;
    int epochs = 4;
    int minibatch_size = 256;
    int episodes_per_iteration = 16;
    double grad_norm_cap = 0.5;
    bool advantage_normalization = true;
    double value_coef = 0.5;
    double entropy_coef = 0.0;
    bool use_gae = false;
    double gae_lambda = 0.95;

    // episode
    int horizon = 400;
    double beta = 0.7;
    double disturbance_min = 3.0;
    double disturbance_max = 8.0;
    double disturbance_duration = 0.3;
    bool enable_disturbance = true;
    double sigma = 0.02;
    double object_min_radius = 0.15;
    double object_max_radius = 0.45;
    double object_half_x = 0.03;
    double object_half_y = 0.03;
    double object_half_z = 0.03;
    double object_mass = 0.1;

    // physics
    double friction = 0.5;
    double contact_stiffness = 5000.0;
    double contact_damping = 50.0;
    double pd_gain = 50.0;
    double hand_mass = 0.5;

    // evaluation
    std::string task = "static";
    int trials = 100;
    std::string checkpoint;
    std::string drop;  // reward term or "special_states", for ablation

    EpisodeConfig episode_config() const {
        EpisodeConfig e;
        e.horizon = horizon;
        e.beta = beta;
        e.disturbance_min = disturbance_min;
        e.disturbance_max = disturbance_max;
        e.disturbance_duration = disturbance_duration;
        e.enable_disturbance = enable_disturbance;
        e.sigma = sigma;
        e.object_min_radius = object_min_radius;
        e.object_max_radius = object_max_radius;
        e.object_half_extents = {object_half_x, object_half_y, object_half_z};
        e.object_mass = object_mass;
        e.seed = seed;
        e.world_params.ground_friction = friction;
        e.world_params.contact_stiffness = contact_stiffness;
        e.world_params.contact_damping = contact_damping;
        e.world_params.pd_gain = pd_gain;
        e.world_params.hand_mass = hand_mass;
        return e;
    }

    PPOConfig ppo_config() const {
        PPOConfig p;
        p.gamma = gamma;
        p.clip_epsilon = clip_epsilon;
        p.learning_rate = learning_rate;
        p.epochs = epochs;
        p.minibatch_size = minibatch_size;
        p.episodes_per_iteration = episodes_per_iteration;
        p.grad_norm_cap = grad_norm_cap;
        p.advantage_normalization = advantage_normalization;
        p.value_coef = value_coef;
        p.entropy_coef = entropy_coef;
        p.use_gae = use_gae;
        p.gae_lambda = gae_lambda;
        return p;
    }

    TrainSettings train_settings() const {
        TrainSettings s;
        s.episode = episode_config();
        s.ppo = ppo_config();
        s.iterations = iterations;
        s.checkpoint_every = checkpoint_every;
        s.out_dir = out;
        s.seed = seed;
        return s;
    }
};

inline int reward_term_index(const std::string& name) {
    if (name == "r_distTips") return RewardWeights::kDistTips;
    if (name == "r_vector") return RewardWeights::kVector;
    if (name == "r_contact") return RewardWeights::kContact;
    if (name == "r_topology") return RewardWeights::kTopology;
    if (name == "p_collision") return RewardWeights::kCollision;
    if (name == "p_objVel") return RewardWeights::kObjVel;
    return -1;
}

namespace detail_config {

inline double as_number(const std::string& key, const nlohmann::json& v) {
    if (!v.is_number()) {
        throw config_error("config: type mismatch for key '" + key +
                           "' (expected number)");
    }
    return v.get<double>();
}

inline int as_int(const std::string& key, const nlohmann::json& v) {
    if (!v.is_number_integer()) {
        throw config_error("config: type mismatch for key '" + key +
                           "' (expected integer)");
    }
    return v.get<int>();
}

inline bool as_bool(const std::string& key, const nlohmann::json& v) {
    if (!v.is_boolean()) {
        throw config_error("config: type mismatch for key '" + key +
                           "' (expected boolean)");
    }
    return v.get<bool>();
}

inline std::string as_string(const std::string& key, const nlohmann::json& v) {
    if (!v.is_string()) {
        throw config_error("config: type mismatch for key '" + key +
                           "' (expected string)");
    }
    return v.get<std::string>();
}

inline void require(bool ok, const std::string& key, const std::string& range) {
    if (!ok) {
        throw config_error("config: value out of range for key '" + key + "' (" +
                           range + ")");
    }
}

}  // namespace detail_config

// Apply one key to the config; shared by file parsing and flag overrides so
// precedence is just application order.
inline void set_config_key(RunConfig& c, const std::string& key,
                           const nlohmann::json& v) {
    using namespace detail_config;
    if (key == "seed") {
        if (!v.is_number_integer()) {
            throw config_error("config: type mismatch for key 'seed'");
        }
        c.seed = v.get<uint64_t>();
    } else if (key == "iterations") {
        c.iterations = as_int(key, v);
        require(c.iterations > 0, key, "> 0");
    } else if (key == "checkpoint_every") {
        c.checkpoint_every = as_int(key, v);
        require(c.checkpoint_every >= 0, key, ">= 0");
    } else if (key == "out") {
        c.out = as_string(key, v);
    } else if (key == "gamma") {
        c.gamma = as_number(key, v);
        require(c.gamma > 0.0 && c.gamma <= 1.0, key, "in (0, 1]");
    } else if (key == "clip_epsilon") {
        c.clip_epsilon = as_number(key, v);
        require(c.clip_epsilon > 0.0 && c.clip_epsilon < 1.0, key, "in (0, 1)");
    } else if (key == "learning_rate") {
        c.learning_rate = as_number(key, v);
        require(c.learning_rate > 0.0, key, "> 0");
    } else if (key == "epochs") {
        c.epochs = as_int(key, v);
        require(c.epochs > 0, key, "> 0");
    } else if (key == "minibatch_size") {
        c.minibatch_size = as_int(key, v);
        require(c.minibatch_size > 0, key, "> 0");
    } else if (key == "episodes_per_iteration") {
        c.episodes_per_iteration = as_int(key, v);
        require(c.episodes_per_iteration > 0, key, "> 0");
    } else if (key == "grad_norm_cap") {
        c.grad_norm_cap = as_number(key, v);
        require(c.grad_norm_cap >= 0.0, key, ">= 0");
    } else if (key == "advantage_normalization") {
        c.advantage_normalization = as_bool(key, v);
    } else if (key == "value_coef") {
        c.value_coef = as_number(key, v);
        require(c.value_coef >= 0.0, key, ">= 0");
    } else if (key == "entropy_coef") {
        c.entropy_coef = as_number(key, v);
        require(c.entropy_coef >= 0.0, key, ">= 0");
    } else if (key == "use_gae") {
        c.use_gae = as_bool(key, v);
    } else if (key == "gae_lambda") {
        c.gae_lambda = as_number(key, v);
        require(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0, key, "in [0, 1]");
    } else if (key == "horizon") {
        c.horizon = as_int(key, v);
        require(c.horizon > 0, key, "> 0");
    } else if (key == "beta") {
        c.beta = as_number(key, v);
        require(c.beta >= 0.0 && c.beta <= 1.0, key, "in [0, 1]");
    } else if (key == "disturbance_min") {
        c.disturbance_min = as_number(key, v);
        require(c.disturbance_min >= 0.0, key, ">= 0");
    } else if (key == "disturbance_max") {
        c.disturbance_max = as_number(key, v);
        require(c.disturbance_max >= 0.0, key, ">= 0");
    } else if (key == "disturbance_duration") {
        c.disturbance_duration = as_number(key, v);
        require(c.disturbance_duration > 0.0, key, "> 0");
    } else if (key == "enable_disturbance") {
        c.enable_disturbance = as_bool(key, v);
    } else if (key == "sigma") {
        c.sigma = as_number(key, v);
        require(c.sigma >= 0.0, key, ">= 0");
    } else if (key == "object_min_radius") {
        c.object_min_radius = as_number(key, v);
        require(c.object_min_radius > 0.0, key, "> 0");
    } else if (key == "object_max_radius") {
        c.object_max_radius = as_number(key, v);
        require(c.object_max_radius > 0.0, key, "> 0");
    } else if (key == "object_half_x") {
        c.object_half_x = as_number(key, v);
        require(c.object_half_x > 0.0, key, "> 0");
    } else if (key == "object_half_y") {
        c.object_half_y = as_number(key, v);
        require(c.object_half_y > 0.0, key, "> 0");
    } else if (key == "object_half_z") {
        c.object_half_z = as_number(key, v);
        require(c.object_half_z > 0.0, key, "> 0");
    } else if (key == "object_mass") {
        c.object_mass = as_number(key, v);
        require(c.object_mass > 0.0, key, "> 0");
    } else if (key == "friction") {
        c.friction = as_number(key, v);
        require(c.friction >= 0.0, key, ">= 0");
    } else if (key == "contact_stiffness") {
        c.contact_stiffness = as_number(key, v);
        require(c.contact_stiffness > 0.0, key, "> 0");
    } else if (key == "contact_damping") {
        c.contact_damping = as_number(key, v);
        require(c.contact_damping >= 0.0, key, ">= 0");
    } else if (key == "pd_gain") {
        c.pd_gain = as_number(key, v);
        require(c.pd_gain > 0.0, key, "> 0");
    } else if (key == "hand_mass") {
        c.hand_mass = as_number(key, v);
        require(c.hand_mass > 0.0, key, "> 0");
    } else if (key == "task") {
        c.task = as_string(key, v);
        require(task_from_name(c.task).has_value(), key, "known task name");
    } else if (key == "trials") {
        c.trials = as_int(key, v);
        require(c.trials > 0, key, "> 0");
    } else if (key == "checkpoint") {
        c.checkpoint = as_string(key, v);
    } else if (key == "drop") {
        c.drop = as_string(key, v);
        require(reward_term_index(c.drop) >= 0 || c.drop == "special_states" ||
                    c.drop.empty(),
                key, "reward term or 'special_states'");
    } else {
        throw config_error("config: unknown key '" + key + "'");
    }
}

inline void apply_config_json(RunConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) {
        throw config_error("config: top level must be a flat JSON object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        set_config_key(c, it.key(), it.value());
    }
    detail_config::require(c.disturbance_max >= c.disturbance_min,
                           "disturbance_max", ">= disturbance_min");
    detail_config::require(c.object_max_radius >= c.object_min_radius,
                           "object_max_radius", ">= object_min_radius");
}

// Defaults, then the file, then the overrides (in order).
inline RunConfig parse_config(const std::string& path,
                              const nlohmann::json& overrides = nlohmann::json::object()) {
    RunConfig c;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw config_error("config: cannot open file '" + path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw config_error("config: malformed JSON in '" + path + "': " + e.what());
        }
        apply_config_json(c, j);
    }
    apply_config_json(c, overrides);
    return c;
}

// Fully-resolved config, written next to the run artifacts for provenance.
inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["iterations"] = c.iterations;
    j["checkpoint_every"] = c.checkpoint_every;
    j["out"] = c.out;
    j["gamma"] = c.gamma;
    j["clip_epsilon"] = c.clip_epsilon;
    j["learning_rate"] = c.learning_rate;
    j["epochs"] = c.epochs;
    j["minibatch_size"] = c.minibatch_size;
    j["episodes_per_iteration"] = c.episodes_per_iteration;
    j["grad_norm_cap"] = c.grad_norm_cap;
    j["advantage_normalization"] = c.advantage_normalization;
    j["value_coef"] = c.value_coef;
    j["entropy_coef"] = c.entropy_coef;
    j["use_gae"] = c.use_gae;
    j["gae_lambda"] = c.gae_lambda;
    j["horizon"] = c.horizon;
    j["beta"] = c.beta;
    j["disturbance_min"] = c.disturbance_min;
    j["disturbance_max"] = c.disturbance_max;
    j["disturbance_duration"] = c.disturbance_duration;
    j["enable_disturbance"] = c.enable_disturbance;
    j["sigma"] = c.sigma;
    j["object_min_radius"] = c.object_min_radius;
    j["object_max_radius"] = c.object_max_radius;
    j["object_half_x"] = c.object_half_x;
    j["object_half_y"] = c.object_half_y;
    j["object_half_z"] = c.object_half_z;
    j["object_mass"] = c.object_mass;
    j["friction"] = c.friction;
    j["contact_stiffness"] = c.contact_stiffness;
    j["contact_damping"] = c.contact_damping;
    j["pd_gain"] = c.pd_gain;
    j["hand_mass"] = c.hand_mass;
    j["task"] = c.task;
    j["trials"] = c.trials;
    j["checkpoint"] = c.checkpoint;
    j["drop"] = c.drop;
    return j;
}

}  // namespace dgrasp
