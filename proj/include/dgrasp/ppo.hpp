#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "dgrasp/env.hpp"
#include "dgrasp/nn.hpp"

namespace dgrasp {

struct PPOConfig {
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
};

// Trajectories of one rollout phase. `done` marks the last step of each
// episode; returns and advantages never cross episode boundaries.
struct RolloutBuffer {
    std::vector<Observation> observations;
    std::vector<std::array<double, 6>> actions;
    std::vector<double> log_probs_old;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<uint8_t> dones;
    std::vector<double> returns;
    std::vector<double> advantages;

    int size() const { return static_cast<int>(rewards.size()); }

    void clear() {
        observations.clear();
        actions.clear();
        log_probs_old.clear();
        rewards.clear();
        values.clear();
        dones.clear();
        returns.clear();
        advantages.clear();
    }

    void push(const Observation& obs, const std::array<double, 6>& action,
              double logp, double reward, double value, bool done) {
        observations.push_back(obs);
        actions.push_back(action);
        log_probs_old.push_back(logp);
        rewards.push_back(reward);
        values.push_back(value);
        dones.push_back(done ? 1 : 0);
    }
};

// Monte-Carlo discounted returns by backward recursion within each episode;
// advantage = return - value estimate (or GAE when enabled), optionally
// normalized to zero mean / unit variance over the batch.
inline void compute_returns_advantages(RolloutBuffer& buffer, double gamma,
                                       bool normalize = false, bool use_gae = false,
                                       double gae_lambda = 0.95) {
    int n = buffer.size();
    if (n == 0) throw std::invalid_argument("compute_returns_advantages: empty buffer");
    buffer.returns.assign(n, 0.0);
    buffer.advantages.assign(n, 0.0);
    double running = 0.0;
    for (int t = n - 1; t >= 0; --t) {
        if (buffer.dones[t]) running = 0.0;
        running = buffer.rewards[t] + gamma * running;
        buffer.returns[t] = running;
    }
    if (use_gae) {
        double gae = 0.0;
        for (int t = n - 1; t >= 0; --t) {
            double next_value = (buffer.dones[t] || t == n - 1) ? 0.0 : buffer.values[t + 1];
            if (buffer.dones[t]) gae = 0.0;
            double delta = buffer.rewards[t] + gamma * next_value - buffer.values[t];
            gae = delta + gamma * gae_lambda * gae;
            buffer.advantages[t] = gae;
        }
    } else {
        for (int t = 0; t < n; ++t) {
            buffer.advantages[t] = buffer.returns[t] - buffer.values[t];
        }
    }
    if (normalize) {
        double mean = std::accumulate(buffer.advantages.begin(),
                                      buffer.advantages.end(), 0.0) / n;
        double var = 0.0;
        for (double a : buffer.advantages) var += (a - mean) * (a - mean);
        double std = std::sqrt(var / n) + 1e-8;
        for (double& a : buffer.advantages) a = (a - mean) / std;
    }
}

// Clipped surrogate of the policy objective, evaluated over the given batch
// indices (all samples if empty).
inline double surrogate_objective(const ActorCritic& params,
                                  const ActorCritic& params_old,
                                  const RolloutBuffer& buffer, double epsilon,
                                  const std::vector<int>& batch = {}) {
    std::vector<int> all;
    const std::vector<int>* idx = &batch;
    if (batch.empty()) {
        all.resize(buffer.size());
        std::iota(all.begin(), all.end(), 0);
        idx = &all;
    }
    double sum = 0.0;
    for (int i : *idx) {
        ActionDistribution d_new = params.policy_forward(buffer.observations[i]);
        ActionDistribution d_old = params_old.policy_forward(buffer.observations[i]);
        double ratio = std::exp(log_prob(d_new, buffer.actions[i]) -
                                log_prob(d_old, buffer.actions[i]));
        double adv = buffer.advantages[i];
        double clipped = clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv;
        sum += std::min(ratio * adv, clipped);
    }
    return sum / static_cast<double>(idx->size());
}

inline double value_loss(const ActorCritic& params, const RolloutBuffer& buffer,
                         const std::vector<int>& batch = {}) {
    std::vector<int> all;
    const std::vector<int>* idx = &batch;
    if (batch.empty()) {
        all.resize(buffer.size());
        std::iota(all.begin(), all.end(), 0);
        idx = &all;
    }
    double sum = 0.0;
    for (int i : *idx) {
        double v = params.value_forward(buffer.observations[i]);
        double e = v - buffer.returns[i];
        sum += e * e;
    }
    return sum / static_cast<double>(idx->size());
}

struct UpdateStats {
    double mean_ratio_start = 0.0;  // over the buffer before the first step
    double clip_fraction = 0.0;
    double policy_loss = 0.0;  // negated surrogate, last epoch average
    double value_loss = 0.0;
    double grad_norm = 0.0;  // pre-cap norm of the last minibatch
};

struct update_aborted : std::runtime_error {
    explicit update_aborted(const std::string& what) : std::runtime_error(what) {}
};

// Minibatch gradient of (-surrogate + value_coef * value MSE - entropy
// bonus), accumulated into `grads`. Returns per-batch loss pieces.
inline void accumulate_loss_gradient(const ActorCritic& ac, const PPOConfig& cfg,
                                     const RolloutBuffer& buffer,
                                     const std::vector<int>& batch,
                                     std::vector<double>& grads,
                                     double* policy_loss, double* vloss,
                                     int* clipped_count) {
    double inv_b = 1.0 / static_cast<double>(batch.size());
    double psum = 0.0, vsum = 0.0;
    std::span<double> actor_grads{grads.data(),
                                  static_cast<size_t>(ac.actor_shape.param_count())};
    std::span<double> log_std_grads{grads.data() + ac.log_std_offset(), 6};
    std::span<double> critic_grads{grads.data() + ac.critic_offset(),
                                   static_cast<size_t>(ac.critic_shape.param_count())};
    auto log_std_raw = ac.log_std_params();
    MlpCache cache_a, cache_c;
    for (int i : batch) {
        ActionDistribution dist = ac.policy_forward(buffer.observations[i], &cache_a);
        double lp = log_prob(dist, buffer.actions[i]);
        double ratio = std::exp(lp - buffer.log_probs_old[i]);
        double adv = buffer.advantages[i];
        double unclipped = ratio * adv;
        double clipped = clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * adv;
        double surr = std::min(unclipped, clipped);
        psum += -surr;
        if (std::abs(ratio - 1.0) > cfg.clip_epsilon) ++(*clipped_count);

        // gradient flows only through the unclipped branch when active
        double dlogp = (unclipped <= clipped) ? -adv * ratio * inv_b : 0.0;
        std::array<double, 6> dmean;
        for (int k = 0; k < 6; ++k) {
            double std = std::exp(dist.log_std[k]);
            double z = (buffer.actions[i][k] - dist.mean[k]) / std;
            dmean[k] = dlogp * z / std;
            bool clamped = log_std_raw[k] <= kLogStdMin || log_std_raw[k] >= kLogStdMax;
            if (!clamped) {
                double dls = dlogp * (z * z - 1.0);
                dls += -cfg.entropy_coef * inv_b;  // dH/dlog_std = 1 per dim
                log_std_grads[k] += dls;
            }
        }
        mlp_backward(ac.actor_params(), ac.actor_shape, cache_a, dmean, actor_grads);

        double v = ac.value_forward(buffer.observations[i], &cache_c);
        double err = v - buffer.returns[i];
        vsum += err * err;
        std::array<double, 1> dv = {cfg.value_coef * 2.0 * err * inv_b};
        mlp_backward(ac.critic_params(), ac.critic_shape, cache_c, dv, critic_grads);
    }
    *policy_loss = psum * inv_b;
    *vloss = vsum * inv_b;
}

// One PPO update: `epochs` passes of shuffled minibatches, gradient-norm
// capped, adaptive-moment steps.
inline UpdateStats update(const RolloutBuffer& buffer, const PPOConfig& cfg,
                          ActorCritic& ac, Adam& adam, Rng& rng) {
    int n = buffer.size();
    if (n == 0) throw std::invalid_argument("update: empty buffer");
    adam.lr = cfg.learning_rate;

    UpdateStats stats;
    {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            ActionDistribution d = ac.policy_forward(buffer.observations[i]);
            sum += std::exp(log_prob(d, buffer.actions[i]) - buffer.log_probs_old[i]);
        }
        stats.mean_ratio_start = sum / n;
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grads(ac.param_count());
    long total_samples = 0;
    long total_clipped = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the provided stream, for reproducibility
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(i + 1)));
            std::swap(order[i], order[j]);
        }
        for (int start = 0; start < n; start += cfg.minibatch_size) {
            int end = std::min(start + cfg.minibatch_size, n);
            std::vector<int> batch(order.begin() + start, order.begin() + end);
            std::fill(grads.begin(), grads.end(), 0.0);
            double ploss = 0.0, vloss = 0.0;
            int clipped = 0;
            accumulate_loss_gradient(ac, cfg, buffer, batch, grads, &ploss, &vloss,
                                     &clipped);
            if (!std::isfinite(ploss) || !std::isfinite(vloss)) {
                char msg[128];
                std::snprintf(msg, sizeof(msg),
                              "non-finite loss (policy=%g value=%g)", ploss, vloss);
                throw update_aborted(msg);
            }
            total_samples += batch.size();
            total_clipped += clipped;
            stats.policy_loss = ploss;
            stats.value_loss = vloss;

            double norm_sq = 0.0;
            for (double g : grads) norm_sq += g * g;
            double norm = std::sqrt(norm_sq);
            stats.grad_norm = norm;
            if (cfg.grad_norm_cap > 0.0 && norm > cfg.grad_norm_cap) {
                double scale = cfg.grad_norm_cap / norm;
                for (double& g : grads) g *= scale;
            }
            adam.apply(ac.data, grads);
        }
    }
    stats.clip_fraction = total_samples > 0
                              ? static_cast<double>(total_clipped) / total_samples
                              : 0.0;
    return stats;
}

struct IterationStats {
    int iteration = 0;
    double mean_return = 0.0;
    std::array<double, 6> term_means = {};  // distTips, vector, contact,
                                            // topology, collision, objVel
    double clip_fraction = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double mean_ratio_start = 0.0;
    int episodes = 0;
    int dropped_episodes = 0;
};

struct TrainSettings {
    EpisodeConfig episode;
    PPOConfig ppo;
    int iterations = 100;
    int checkpoint_every = 50;
    std::string out_dir;  // empty: no files written
    uint64_t seed = 0;
    std::atomic<bool>* stop = nullptr;  // cooperative interrupt; a final
                                        // checkpoint is flushed on stop
};

struct TrainResult {
    ActorCritic params;
    Adam adam;
    std::vector<IterationStats> history;
    int dropped_episodes = 0;
};

inline ActuationCommand action_to_command(const std::array<double, 6>& a) {
    ActuationCommand cmd;
    cmd.hand_velocity = {a[0], a[1]};
    cmd.yaw_rate = a[2];
    cmd.finger_torques = {a[3], a[4], a[5]};
    return cmd;
}

inline void write_metrics_header(std::ostream& os) {
    os << "iteration,mean_return,mean_dist_tips,mean_vector,mean_contact,"
          "mean_topology,mean_collision,mean_obj_vel,clip_fraction,"
          "policy_loss,value_loss,mean_ratio,episodes,dropped\n";
}

inline void write_metrics_row(std::ostream& os, const IterationStats& it) {
    char buf[640];
    std::snprintf(buf, sizeof(buf),
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%d,%d\n",
                  it.iteration, it.mean_return, it.term_means[0], it.term_means[1],
                  it.term_means[2], it.term_means[3], it.term_means[4],
                  it.term_means[5], it.clip_fraction, it.policy_loss, it.value_loss,
                  it.mean_ratio_start, it.episodes, it.dropped_episodes);
    os << buf;
}

// The outer loop: collect -> compute returns -> clipped-surrogate update,
// with per-iteration reward-term logging and periodic checkpoints.
inline TrainResult train(const TrainSettings& settings) {
    TrainResult result;
    Rng init_rng(settings.seed);
    result.params.init(init_rng);
    result.adam.reset(result.params.param_count());
    result.adam.lr = settings.ppo.learning_rate;
    Rng action_rng(settings.seed ^ 0x9e3779b97f4a7c15ULL);
    Rng update_rng(settings.seed ^ 0x6a09e667f3bcc909ULL);

    EpisodeConfig env_cfg = settings.episode;
    env_cfg.seed = settings.seed ^ 0xbb67ae8584caa73bULL;
    Env env(env_cfg);

    std::ofstream metrics;
    bool log_files = !settings.out_dir.empty();
    if (log_files) {
        std::filesystem::create_directories(settings.out_dir);
        metrics.open(settings.out_dir + "/metrics.csv");
        write_metrics_header(metrics);
    }

    RolloutBuffer buffer;
    for (int iter = 0; iter < settings.iterations; ++iter) {
        buffer.clear();
        IterationStats it;
        it.iteration = iter;
        double return_sum = 0.0;
        std::array<double, 6> term_sums = {};
        long term_count = 0;
        int collected = 0;
        while (collected < settings.ppo.episodes_per_iteration) {
            Observation obs = env.reset();
            std::vector<size_t> marks;  // rollback on divergence
            size_t start_size = buffer.rewards.size();
            double ep_return = 0.0;
            bool diverged = false;
            while (true) {
                ActionDistribution dist = result.params.policy_forward(obs);
                std::array<double, 6> action = sample_action(dist, action_rng);
                double logp = log_prob(dist, action);
                double value = result.params.value_forward(obs);
                StepResult sr = env.step(action_to_command(action));
                if (sr.reason == TerminationReason::diverged) {
                    diverged = true;
                    break;
                }
                buffer.push(obs, action, logp, sr.reward.total, value, sr.done);
                ep_return += sr.reward.total;
                for (int k = 0; k < 6; ++k) term_sums[k] += sr.reward.term(k);
                ++term_count;
                obs = sr.observation;
                if (sr.done) break;
            }
            if (diverged) {
                buffer.observations.resize(start_size);
                buffer.actions.resize(start_size);
                buffer.log_probs_old.resize(start_size);
                buffer.rewards.resize(start_size);
                buffer.values.resize(start_size);
                buffer.dones.resize(start_size);
                ++result.dropped_episodes;
                ++it.dropped_episodes;
                continue;
            }
            return_sum += ep_return;
            ++collected;
        }
        it.episodes = collected;
        it.mean_return = return_sum / collected;
        for (int k = 0; k < 6; ++k) {
            it.term_means[k] = term_count > 0 ? term_sums[k] / term_count : 0.0;
        }

        compute_returns_advantages(buffer, settings.ppo.gamma,
                                   settings.ppo.advantage_normalization,
                                   settings.ppo.use_gae, settings.ppo.gae_lambda);
        UpdateStats us = update(buffer, settings.ppo, result.params, result.adam,
                                update_rng);
        it.clip_fraction = us.clip_fraction;
        it.policy_loss = us.policy_loss;
        it.value_loss = us.value_loss;
        it.mean_ratio_start = us.mean_ratio_start;
        result.history.push_back(it);

        bool stopping = settings.stop && settings.stop->load();
        if (log_files) {
            write_metrics_row(metrics, it);
            metrics.flush();
            bool last = stopping || iter + 1 == settings.iterations;
            if (last || (settings.checkpoint_every > 0 &&
                         (iter + 1) % settings.checkpoint_every == 0)) {
                char name[64];
                std::snprintf(name, sizeof(name), "/checkpoint_%06d.json", iter + 1);
                std::ofstream out(settings.out_dir + name);
                out << checkpoint_to_json(result.params, result.adam, iter + 1).dump();
            }
        }
        if (stopping) break;
    }
    return result;
}

}  // namespace dgrasp
