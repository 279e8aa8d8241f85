#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "dgrasp/env.hpp"
#include "dgrasp/rng.hpp"

#include "json.hpp"

namespace dgrasp {

// Fully-connected net with two tanh hidden layers and a linear head.
// Parameters live in one flat vector: W1 (h x in), b1, W2 (h x h), b2,
// W3 (out x h), b3, all row-major.
struct MlpShape {
    int in = 0;
    int hidden = 0;
    int out = 0;

    int w1() const { return 0; }
    int b1() const { return hidden * in; }
    int w2() const { return b1() + hidden; }
    int b2() const { return w2() + hidden * hidden; }
    int w3() const { return b2() + hidden; }
    int b3() const { return w3() + out * hidden; }
    int param_count() const { return b3() + out; }
};

struct MlpCache {
    std::vector<double> x, h1, h2;
};

inline void mlp_forward(std::span<const double> params, const MlpShape& s,
                        std::span<const double> x, std::span<double> out,
                        MlpCache* cache = nullptr) {
    if (static_cast<int>(x.size()) != s.in) {
        throw std::invalid_argument("mlp_forward: input size mismatch");
    }
    std::vector<double> h1(s.hidden), h2(s.hidden);
    const double* w1 = params.data() + s.w1();
    const double* b1 = params.data() + s.b1();
    const double* w2 = params.data() + s.w2();
    const double* b2 = params.data() + s.b2();
    const double* w3 = params.data() + s.w3();
    const double* b3 = params.data() + s.b3();
    for (int i = 0; i < s.hidden; ++i) {
        double a = b1[i];
        const double* row = w1 + i * s.in;
        for (int j = 0; j < s.in; ++j) a += row[j] * x[j];
        h1[i] = std::tanh(a);
    }
    for (int i = 0; i < s.hidden; ++i) {
        double a = b2[i];
        const double* row = w2 + i * s.hidden;
        for (int j = 0; j < s.hidden; ++j) a += row[j] * h1[j];
        h2[i] = std::tanh(a);
    }
    for (int i = 0; i < s.out; ++i) {
        double a = b3[i];
        const double* row = w3 + i * s.hidden;
        for (int j = 0; j < s.hidden; ++j) a += row[j] * h2[j];
        out[i] = a;
    }
    if (cache) {
        cache->x.assign(x.begin(), x.end());
        cache->h1 = std::move(h1);
        cache->h2 = std::move(h2);
    }
}

// Reverse-mode pass. Accumulates parameter gradients into dparams.
inline void mlp_backward(std::span<const double> params, const MlpShape& s,
                         const MlpCache& cache, std::span<const double> dout,
                         std::span<double> dparams) {
    const double* w2 = params.data() + s.w2();
    const double* w3 = params.data() + s.w3();
    double* dw1 = dparams.data() + s.w1();
    double* db1 = dparams.data() + s.b1();
    double* dw2 = dparams.data() + s.w2();
    double* db2 = dparams.data() + s.b2();
    double* dw3 = dparams.data() + s.w3();
    double* db3 = dparams.data() + s.b3();

    std::vector<double> dh2(s.hidden, 0.0), dh1(s.hidden, 0.0);
    for (int i = 0; i < s.out; ++i) {
        double g = dout[i];
        db3[i] += g;
        const double* row = w3 + i * s.hidden;
        double* drow = dw3 + i * s.hidden;
        for (int j = 0; j < s.hidden; ++j) {
            drow[j] += g * cache.h2[j];
            dh2[j] += g * row[j];
        }
    }
    for (int i = 0; i < s.hidden; ++i) {
        double g = dh2[i] * (1.0 - cache.h2[i] * cache.h2[i]);
        db2[i] += g;
        const double* row = w2 + i * s.hidden;
        double* drow = dw2 + i * s.hidden;
        for (int j = 0; j < s.hidden; ++j) {
            drow[j] += g * cache.h1[j];
            dh1[j] += g * row[j];
        }
    }
    for (int i = 0; i < s.hidden; ++i) {
        double g = dh1[i] * (1.0 - cache.h1[i] * cache.h1[i]);
        db1[i] += g;
        double* drow = dw1 + i * s.in;
        for (int j = 0; j < s.in; ++j) {
            drow[j] += g * cache.x[j];
        }
    }
}

// Diagonal Gaussian over the 6-D action.
struct ActionDistribution {
    std::array<double, 6> mean;
    std::array<double, 6> log_std;  // clamped to [-5, 1]
};

// The floor keeps a minimum of action noise alive for the whole run:
// the surrogate objective otherwise shrinks the noise onto whatever local
// optimum is found first, and a policy that must perform under persistent
// noise is pushed toward contact-rich holds that tolerate it.
inline constexpr double kLogStdMin = -1.6;
inline constexpr double kLogStdMax = 1.0;

inline double log_prob(const ActionDistribution& dist,
                       const std::array<double, 6>& action) {
    double lp = 0.0;
    for (int i = 0; i < 6; ++i) {
        double ls = clamp(dist.log_std[i], kLogStdMin, kLogStdMax);
        double std = std::exp(ls);
        double z = (action[i] - dist.mean[i]) / std;
        lp += -0.5 * z * z - ls - 0.5 * std::log(2.0 * M_PI);
    }
    return lp;
}

inline std::array<double, 6> sample_action(const ActionDistribution& dist, Rng& rng) {
    std::array<double, 6> a;
    for (int i = 0; i < 6; ++i) {
        double ls = clamp(dist.log_std[i], kLogStdMin, kLogStdMax);
        a[i] = dist.mean[i] + std::exp(ls) * rng.normal();
    }
    return a;
}

// Fixed elementwise input scaling so all observation channels land in a
// comparable range for the tanh layers.
inline constexpr std::array<double, Observation::kSize> kObsScale = {
    2.0, 2.0, 2.0,          // estimated object position
    0.3183098861837907,     // hand yaw (1/pi)
    0.4166666666666667, 0.4166666666666667, 0.4166666666666667,  // q (1/2.4)
    2.0, 2.0, 2.0,          // fingertip distances
    0.1, 0.1, 0.1, 0.1,     // sensor forces
};

// Actor (14 -> 64 -> 64 -> 6 mean, plus 6 state-independent log-std values)
// and critic (14 -> 64 -> 64 -> 1) in one flat parameter vector.
struct ActorCritic {
    static constexpr int kObsDim = Observation::kSize;
    static constexpr int kActionDim = 6;
    static constexpr int kHidden = 64;

    MlpShape actor_shape{kObsDim, kHidden, kActionDim};
    MlpShape critic_shape{kObsDim, kHidden, 1};
    std::vector<double> data;

    int log_std_offset() const { return actor_shape.param_count(); }
    int critic_offset() const { return log_std_offset() + kActionDim; }
    int param_count() const { return critic_offset() + critic_shape.param_count(); }

    std::span<double> actor_params() {
        return {data.data(), static_cast<size_t>(actor_shape.param_count())};
    }
    std::span<const double> actor_params() const {
        return {data.data(), static_cast<size_t>(actor_shape.param_count())};
    }
    std::span<double> log_std_params() {
        return {data.data() + log_std_offset(), 6};
    }
    std::span<const double> log_std_params() const {
        return {data.data() + log_std_offset(), 6};
    }
    std::span<double> critic_params() {
        return {data.data() + critic_offset(),
                static_cast<size_t>(critic_shape.param_count())};
    }
    std::span<const double> critic_params() const {
        return {data.data() + critic_offset(),
                static_cast<size_t>(critic_shape.param_count())};
    }

    void zero() { data.assign(param_count(), 0.0); }

    // uniform 1/sqrt(fan_in) init; the actor output layer is scaled down so
    // initial actions are near zero, except for a gentle closing prior on
    // the finger torques: with fingers defaulting to close, any chance
    // encounter that puts the object between the pads converts itself into
    // a held grasp, which is the behaviour the contact terms reward.
    void init(Rng& rng, double log_std_init = -0.5) {
        zero();
        init_mlp(actor_params(), actor_shape, rng, 0.01);
        init_mlp(critic_params(), critic_shape, rng, 1.0);
        for (int k = 3; k < 6; ++k) actor_params()[actor_shape.b3() + k] = 0.5;
        for (double& ls : log_std_params()) ls = log_std_init;
    }

    static std::array<double, kObsDim> scale_obs(const Observation& obs) {
        std::array<double, kObsDim> x;
        for (int i = 0; i < kObsDim; ++i) x[i] = obs.v[i] * kObsScale[i];
        return x;
    }

    ActionDistribution policy_forward(const Observation& obs,
                                      MlpCache* cache = nullptr) const {
        auto x = scale_obs(obs);
        ActionDistribution dist;
        mlp_forward(actor_params(), actor_shape, x, dist.mean, cache);
        auto ls = log_std_params();
        for (int i = 0; i < 6; ++i) {
            dist.log_std[i] = clamp(ls[i], kLogStdMin, kLogStdMax);
        }
        return dist;
    }

    double value_forward(const Observation& obs, MlpCache* cache = nullptr) const {
        auto x = scale_obs(obs);
        std::array<double, 1> out;
        mlp_forward(critic_params(), critic_shape, x, out, cache);
        return out[0];
    }

private:
    static void init_mlp(std::span<double> params, const MlpShape& s, Rng& rng,
                         double head_scale) {
        auto fill = [&](int offset, int count, int fan_in, double scale) {
            double bound = scale / std::sqrt(static_cast<double>(fan_in));
            for (int i = 0; i < count; ++i) {
                params[offset + i] = rng.uniform(-bound, bound);
            }
        };
        fill(s.w1(), s.hidden * s.in, s.in, 1.0);
        fill(s.b1(), s.hidden, s.in, 1.0);
        fill(s.w2(), s.hidden * s.hidden, s.hidden, 1.0);
        fill(s.b2(), s.hidden, s.hidden, 1.0);
        fill(s.w3(), s.out * s.hidden, s.hidden, head_scale);
        fill(s.b3(), s.out, s.hidden, head_scale);
    }
};

// Adaptive-moment optimizer over the flat parameter vector.
struct Adam {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<double> m, v;

    void reset(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step_count = 0;
    }

    void apply(std::span<double> params, std::span<const double> grads) {
        if (m.size() != params.size()) reset(params.size());
        ++step_count;
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            double mhat = m[i] / c1;
            double vhat = v[i] / c2;
            params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
};

// Versioned JSON checkpoint: layer shapes, row-major weights, optimizer
// state. Doubles survive the round trip bit-exactly.
inline nlohmann::json checkpoint_to_json(const ActorCritic& ac, const Adam& adam,
                                         long iteration) {
    nlohmann::json j;
    j["version"] = 1;
    j["iteration"] = iteration;
    j["obs_dim"] = ActorCritic::kObsDim;
    j["action_dim"] = ActorCritic::kActionDim;
    j["hidden"] = ActorCritic::kHidden;
    j["params"] = ac.data;
    j["adam_m"] = adam.m;
    j["adam_v"] = adam.v;
    j["adam_step"] = adam.step_count;
    j["adam_lr"] = adam.lr;
    return j;
}

inline void checkpoint_from_json(const nlohmann::json& j, ActorCritic& ac,
                                 Adam& adam, long* iteration = nullptr) {
    if (!j.contains("version") || j.at("version").get<int>() != 1) {
        throw std::runtime_error("checkpoint: unsupported version");
    }
    if (j.at("obs_dim").get<int>() != ActorCritic::kObsDim ||
        j.at("action_dim").get<int>() != ActorCritic::kActionDim ||
        j.at("hidden").get<int>() != ActorCritic::kHidden) {
        throw std::runtime_error("checkpoint: shape mismatch");
    }
    ac.data = j.at("params").get<std::vector<double>>();
    if (static_cast<int>(ac.data.size()) != ac.param_count()) {
        throw std::runtime_error("checkpoint: parameter count mismatch");
    }
    adam.m = j.at("adam_m").get<std::vector<double>>();
    adam.v = j.at("adam_v").get<std::vector<double>>();
    adam.step_count = j.at("adam_step").get<long>();
    adam.lr = j.at("adam_lr").get<double>();
    if (iteration) *iteration = j.at("iteration").get<long>();
}

}  // namespace dgrasp
