// Command-line entry point: train | evaluate | ablate | inspect.
// Exit codes: 0 success, 1 usage/configuration error, 2 runtime error.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "dgrasp/config.hpp"
#include "dgrasp/eval.hpp"
#include "dgrasp/ppo.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_sigint(int) { g_stop.store(true); }

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::string task;
    std::string drop;
    std::string checkpoint;
    uint64_t seed = 0;
    int iterations = 0;
    int trials = 0;

    CLI::Option* opt_seed = nullptr;
    CLI::Option* opt_out = nullptr;
    CLI::Option* opt_iterations = nullptr;
    CLI::Option* opt_task = nullptr;
    CLI::Option* opt_trials = nullptr;
    CLI::Option* opt_drop = nullptr;
    CLI::Option* opt_checkpoint = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "flat JSON config file");
        opt_seed = cmd->add_option("--seed", seed, "global seed");
        opt_out = cmd->add_option("--out", out, "output directory");
        opt_iterations = cmd->add_option("--iterations", iterations,
                                         "training iterations");
        opt_task = cmd->add_option("--task", task, "evaluation task name");
        opt_trials = cmd->add_option("--trials", trials, "evaluation trials");
        opt_drop = cmd->add_option("--drop", drop,
                                   "reward term or 'special_states' to drop");
        opt_checkpoint = cmd->add_option("--checkpoint", checkpoint,
                                         "checkpoint JSON path");
    }

    // Flags the user actually passed, applied on top of the file values.
    nlohmann::json overrides() const {
        nlohmann::json j = nlohmann::json::object();
        if (opt_seed->count()) j["seed"] = seed;
        if (opt_out->count()) j["out"] = out;
        if (opt_iterations->count()) j["iterations"] = iterations;
        if (opt_task->count()) j["task"] = task;
        if (opt_trials->count()) j["trials"] = trials;
        if (opt_drop->count()) j["drop"] = drop;
        if (opt_checkpoint->count()) j["checkpoint"] = checkpoint;
        return j;
    }
};

void echo_config(const dgrasp::RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out);
    std::ofstream out(cfg.out + "/config.json");
    out << dgrasp::config_to_json(cfg).dump(2) << "\n";
}

void apply_drop(dgrasp::TrainSettings& settings, const std::string& drop) {
    if (drop.empty()) return;
    if (drop == "special_states") {
        settings.episode.beta = 1.0;
        return;
    }
    int idx = dgrasp::reward_term_index(drop);
    settings.episode.weights.mask[idx] = false;
}

nlohmann::json load_checkpoint_file(const std::string& path, dgrasp::ActorCritic& ac,
                                    dgrasp::Adam& adam, long* iteration) {
    if (path.empty()) {
        throw CLI::ValidationError("--checkpoint", "a checkpoint path is required");
    }
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt checkpoint '" + path + "': " + e.what());
    }
    dgrasp::checkpoint_from_json(j, ac, adam, iteration);
    return j;
}

int cmd_train(const CommonFlags& flags) {
    dgrasp::RunConfig cfg = dgrasp::parse_config(flags.config_path, flags.overrides());
    echo_config(cfg);
    dgrasp::TrainSettings settings = cfg.train_settings();
    apply_drop(settings, cfg.drop);
    settings.stop = &g_stop;
    std::signal(SIGINT, on_sigint);

    dgrasp::TrainResult result = dgrasp::train(settings);
    const dgrasp::IterationStats& last = result.history.back();
    std::printf("trained %zu iterations, mean return %.4f, dropped episodes %d\n",
                result.history.size(), last.mean_return, result.dropped_episodes);
    std::printf("artifacts in %s\n", cfg.out.c_str());
    return g_stop.load() ? 2 : 0;
}

int cmd_evaluate(const CommonFlags& flags) {
    dgrasp::RunConfig cfg = dgrasp::parse_config(flags.config_path, flags.overrides());
    dgrasp::ActorCritic ac;
    dgrasp::Adam adam;
    load_checkpoint_file(cfg.checkpoint, ac, adam, nullptr);
    echo_config(cfg);

    auto kind = dgrasp::task_from_name(cfg.task);
    dgrasp::TaskSpec spec;
    spec.kind = *kind;  // validated by the config parser
    spec.trials = cfg.trials;
    spec.object_half_extents = {cfg.object_half_x, cfg.object_half_y,
                                cfg.object_half_z};
    spec.seed = cfg.seed;

    dgrasp::MeanPolicy policy{&ac};
    dgrasp::TaskMetrics metrics =
        dgrasp::run_task(spec, policy, cfg.episode_config());

    std::ofstream csv(cfg.out + "/results.csv");
    dgrasp::write_task_csv_header(csv);
    dgrasp::write_task_csv_row(csv, metrics);
    std::ofstream js(cfg.out + "/results.json");
    js << dgrasp::task_metrics_to_json(metrics).dump(2) << "\n";

    std::printf("%s: lift %.0f%%, shake12 %.0f%%, shake15 %.0f%% over %d trials\n",
                metrics.task.c_str(), 100.0 * metrics.lift_rate,
                100.0 * metrics.shake12_rate, 100.0 * metrics.shake15_rate,
                metrics.trials);
    return 0;
}

int cmd_ablate(const CommonFlags& flags) {
    dgrasp::RunConfig cfg = dgrasp::parse_config(flags.config_path, flags.overrides());
    echo_config(cfg);

    std::vector<dgrasp::AblationConfig> battery;
    if (!cfg.drop.empty()) {
        battery.push_back({"no " + cfg.drop, dgrasp::reward_term_index(cfg.drop),
                           cfg.drop != "special_states"});
    } else {
        battery.push_back({"no r_distTips", dgrasp::RewardWeights::kDistTips, true});
        battery.push_back({"no p_objVel", dgrasp::RewardWeights::kObjVel, true});
        battery.push_back({"no p_collision", dgrasp::RewardWeights::kCollision, true});
        battery.push_back({"no special_states", -1, false});
    }

    dgrasp::TrainSettings settings = cfg.train_settings();
    settings.out_dir.clear();  // per-row training runs keep no checkpoints
    std::vector<dgrasp::CapabilityRow> rows =
        dgrasp::ablate(battery, settings, cfg.trials);

    std::ofstream csv(cfg.out + "/ablation.csv");
    csv << "configuration,reach,grasp,regrasp,lift\n";
    for (const dgrasp::CapabilityRow& r : rows) {
        csv << r.name << "," << (r.reach ? 1 : 0) << "," << (r.grasp ? 1 : 0) << ","
            << (r.regrasp ? 1 : 0) << "," << (r.lift ? 1 : 0) << "\n";
        std::printf("%-22s reach=%d grasp=%d regrasp=%d lift=%d\n", r.name.c_str(),
                    r.reach, r.grasp, r.regrasp, r.lift);
    }
    return 0;
}

int cmd_inspect(const CommonFlags& flags) {
    dgrasp::RunConfig cfg = dgrasp::parse_config(flags.config_path, flags.overrides());
    dgrasp::ActorCritic ac;
    dgrasp::Adam adam;
    long iteration = 0;
    nlohmann::json j = load_checkpoint_file(cfg.checkpoint, ac, adam, &iteration);
    echo_config(cfg);

    std::printf("checkpoint: %s\n", cfg.checkpoint.c_str());
    std::printf("  version: %d\n", j.at("version").get<int>());
    std::printf("  iteration: %ld\n", iteration);
    std::printf("  dims: obs %d, action %d, hidden %d\n",
                j.at("obs_dim").get<int>(), j.at("action_dim").get<int>(),
                j.at("hidden").get<int>());
    std::printf("  parameters: %d\n", ac.param_count());
    std::printf("  optimizer steps: %ld, lr %g\n", adam.step_count, adam.lr);

    // replay one seeded episode with the deterministic policy
    dgrasp::EpisodeConfig ep = cfg.episode_config();
    ep.beta = 1.0;
    dgrasp::Env env(ep);
    dgrasp::MeanPolicy policy{&ac};
    dgrasp::Observation obs = env.reset();
    std::ofstream trace(cfg.out + "/trace.csv");
    dgrasp::write_trace_header(trace);
    dgrasp::write_trace_row(trace, env.world(), env.last_report());
    double total = 0.0;
    while (!env.done()) {
        dgrasp::StepResult sr = env.step(policy.act(obs));
        dgrasp::write_trace_row(trace, env.world(), env.last_report());
        total += sr.reward.total;
        obs = sr.observation;
    }
    std::printf("  replay: %d steps, return %.4f, trace in %s/trace.csv\n",
                env.step_count(), total, cfg.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unified reach/grasp/re-grasp training and evaluation"};
    app.require_subcommand(1);

    CommonFlags train_flags, eval_flags, ablate_flags, inspect_flags;
    CLI::App* train_cmd = app.add_subcommand("train", "run a training loop");
    train_flags.attach(train_cmd);
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "run an evaluation battery");
    eval_flags.attach(eval_cmd);
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "reward-term ablation grid");
    ablate_flags.attach(ablate_cmd);
    CLI::App* inspect_cmd = app.add_subcommand("inspect", "checkpoint info + replay");
    inspect_flags.attach(inspect_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_flags);
        if (eval_cmd->parsed()) return cmd_evaluate(eval_flags);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_flags);
        return cmd_inspect(inspect_flags);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const dgrasp::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
