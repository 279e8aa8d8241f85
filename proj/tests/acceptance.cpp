// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Criterion 10 exercises the CLI binary whose path is argv[1].
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dgrasp/config.hpp"
#include "dgrasp/eval.hpp"
#include "dgrasp/ppo.hpp"

using namespace dgrasp;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("%s criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion,
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: reward anchors and weighted totals

void criterion_1() {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string why;

    // hand far from the object: zero containment
    HandPose far_pose;
    far_pose.position = {10.0, 10.0};
    ConvexHull2D far_hull = hand_hull(far_pose, {0.0, 0.0, 0.0});
    KeyPointCloud cube = cuboid_key_points({0, 0, 0.03}, {0.03, 0.03, 0.03}, 0.0);
    double zero_case = r_topology(far_hull, observe_full(cube));
    if (std::abs(zero_case - 0.0) > 1e-12) {
        ok = false;
        why = fmt("zero anchor gave %g", zero_case);
    }

    // tall cuboid whose top layer leaves the vertical slab; a small hull
    // containing exactly two of the nine point columns yields exactly 4/27
    KeyPointCloud tall = cuboid_key_points({0, 0, 0.06}, {0.03, 0.03, 0.06}, 0.0);
    ConvexHull2D small = convex_hull(
        {{-0.05, -0.01}, {0.01, -0.01}, {0.01, 0.01}, {-0.05, 0.01}});
    double four_case = r_topology(small, observe_full(tall));
    if (std::abs(four_case - 4.0 / 27.0) > 1e-12) {
        ok = false;
        why = fmt("4/27 anchor gave %.17g", four_case);
    }

    // weighted totals on random fixtures
    Rng rng(101);
    RewardWeights weights;
    for (int trial = 0; trial < 20 && ok; ++trial) {
        World w;
        w.hand.pose.position = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
        w.hand.pose.yaw = rng.uniform(-M_PI, M_PI);
        for (double& q : w.hand.q) q = rng.uniform(0.0, 2.4);
        w.object.position = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
        w.object.yaw = rng.uniform(-M_PI, M_PI);
        w.object.velocity = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        for (int k = 0; k < 6; ++k) weights.mask[k] = rng.uniform(0, 1) < 0.7;

        KeyPointCloud truth = cuboid_key_points(w.object.center3(),
                                                w.object.half_extents, w.object.yaw);
        Vec3 hand_pos{w.hand.pose.position.x, w.hand.pose.position.y,
                      hand::kPalmHeight};
        ObservedCloud cloud = observe(truth, hand_pos, 0.02, rng);
        HandKeyPoints hkp = hand_key_points(w.hand.pose, w.hand.q);
        ConvexHull2D hull = hand_hull(w.hand.pose, w.hand.q);
        ContactReport rep = detect_contacts(w);

        RewardBreakdown b = total_reward(weights, hkp, cloud, hull, rep, w.object);
        double manual = 0.0;
        double terms[6] = {r_dist_tips(hkp, cloud),
                           r_vector(hkp, cloud.estimated_center),
                           static_cast<double>(rep.n_con),
                           r_topology(hull, cloud),
                           static_cast<double>(rep.n_c),
                           p_obj_vel(w.object)};
        for (int k = 0; k < 6; ++k) {
            if (weights.mask[k]) manual += weights.w[k] * terms[k];
        }
        if (std::abs(b.total - manual) > 1e-12) {
            ok = false;
            why = fmt("weighted total mismatch %.17g vs %.17g", b.total, manual);
        }
    }
    double dt = seconds_since(t0);
    if (ok && dt >= 1.0) {
        ok = false;
        why = fmt("too slow: %.2f s", dt);
    }
    if (ok) why = fmt("reward anchors exact, 20 weighted totals match (%.2f s)", dt);
    report(1, ok, why);
}

// ---------------------------------------------------------------------------
// criterion 2: geometry oracles

bool inside_half_planes(const ConvexHull2D& hull, Vec2 p, double* min_dist) {
    int n = static_cast<int>(hull.vertices.size());
    bool inside = true;
    *min_dist = 1e300;
    for (int i = 0; i < n; ++i) {
        Vec2 a = hull.vertices[i];
        Vec2 b = hull.vertices[(i + 1) % n];
        Vec2 e = b - a;
        double len = e.norm();
        double cross = e.x * (p.y - a.y) - e.y * (p.x - a.x);
        double dist = std::abs(cross) / (len > 0 ? len : 1.0);
        *min_dist = std::min(*min_dist, dist);
        if (cross < 0.0) inside = false;
    }
    return inside;
}

// extreme point: not inside (or on) any triangle of three other points
bool is_extreme(const std::vector<Vec2>& pts, size_t idx) {
    Vec2 p = pts[idx];
    size_t n = pts.size();
    const double eps = 1e-12;
    for (size_t a = 0; a < n; ++a) {
        if (a == idx) continue;
        for (size_t b = a + 1; b < n; ++b) {
            if (b == idx) continue;
            for (size_t c = b + 1; c < n; ++c) {
                if (c == idx) continue;
                Vec2 A = pts[a], B = pts[b], C = pts[c];
                double area = (B.x - A.x) * (C.y - A.y) - (B.y - A.y) * (C.x - A.x);
                if (std::abs(area) < eps) continue;
                if (area < 0) std::swap(B, C);
                double d1 = (B.x - A.x) * (p.y - A.y) - (B.y - A.y) * (p.x - A.x);
                double d2 = (C.x - B.x) * (p.y - B.y) - (C.y - B.y) * (p.x - B.x);
                double d3 = (A.x - C.x) * (p.y - C.y) - (A.y - C.y) * (p.x - C.x);
                if (d1 > eps && d2 > eps && d3 > eps) return false;
            }
        }
    }
    return true;
}

// hull vertices with near-collinear (within 1e-12) neighbors dropped, as an
// order-independent canonical set
std::vector<Vec2> canonical_vertices(const std::vector<Vec2>& verts) {
    size_t n = verts.size();
    std::vector<Vec2> out;
    for (size_t i = 0; i < n; ++i) {
        Vec2 prev = verts[(i + n - 1) % n];
        Vec2 cur = verts[i];
        Vec2 next = verts[(i + 1) % n];
        double cross = (cur.x - prev.x) * (next.y - prev.y) -
                       (cur.y - prev.y) * (next.x - prev.x);
        if (std::abs(cross) > 1e-12) out.push_back(cur);
    }
    return out;
}

bool same_point_set(std::vector<Vec2> a, std::vector<Vec2> b) {
    if (a.size() != b.size()) return false;
    auto lt = [](const Vec2& p, const Vec2& q) {
        return p.x < q.x || (p.x == q.x && p.y < q.y);
    };
    std::sort(a.begin(), a.end(), lt);
    std::sort(b.begin(), b.end(), lt);
    for (size_t i = 0; i < a.size(); ++i) {
        if ((a[i] - b[i]).norm() > 1e-9) return false;
    }
    return true;
}

void criterion_2() {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string why;
    Rng rng(202);

    int checked = 0;
    while (checked < 10000 && ok) {
        int n = 3 + static_cast<int>(rng.uniform_int(12));
        std::vector<Vec2> pts;
        for (int i = 0; i < n; ++i) {
            pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
        }
        ConvexHull2D hull = convex_hull(pts);
        if (hull.degenerate) continue;
        Vec2 q{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)};
        double min_dist = 0.0;
        bool oracle = inside_half_planes(hull, q, &min_dist);
        if (min_dist < 1e-6) continue;  // boundary band excluded
        if (contains(hull, q) != oracle) {
            ok = false;
            why = fmt("containment mismatch at (%g, %g)", q.x, q.y);
        }
        ++checked;
    }

    for (int trial = 0; trial < 1000 && ok; ++trial) {
        HandPose pose;
        pose.position = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        pose.yaw = rng.uniform(-M_PI, M_PI);
        std::array<double, 3> q = {rng.uniform(0, 2.4), rng.uniform(0, 2.4),
                                   rng.uniform(0, 2.4)};
        std::vector<Vec2> gens = hull_generators(pose, q);
        ConvexHull2D hull = hand_hull(pose, q);
        std::vector<Vec2> expect;
        for (size_t i = 0; i < gens.size(); ++i) {
            bool dup = false;
            for (size_t j = 0; j < i; ++j) {
                if ((gens[i] - gens[j]).norm() < 1e-12) dup = true;
            }
            if (!dup && is_extreme(gens, i)) expect.push_back(gens[i]);
        }
        if (!same_point_set(canonical_vertices(hull.vertices),
                            canonical_vertices(expect))) {
            ok = false;
            why = fmt("hull vertex set mismatch on trial %d", trial);
        }
    }

    double dt = seconds_since(t0);
    if (ok && dt >= 10.0) {
        ok = false;
        why = fmt("too slow: %.2f s", dt);
    }
    if (ok) {
        why = fmt("10000 containment cases + 1000 hull enumerations agree (%.2f s)",
                  dt);
    }
    report(2, ok, why);
}

// ---------------------------------------------------------------------------
// criterion 3: gradient checks against central finite differences

void criterion_3() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(303);
    PPOConfig cfg;
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        ActorCritic ac;
        ac.actor_shape.hidden = 8;
        ac.critic_shape.hidden = 8;
        ac.init(rng);
        for (auto& ls : ac.log_std_params()) ls = rng.uniform(-1.0, 0.5);

        RolloutBuffer b;
        for (int i = 0; i < 4; ++i) {
            Observation obs;
            for (int k = 0; k < Observation::kSize; ++k) {
                obs.v[k] = rng.uniform(-0.5, 0.5);
            }
            ActionDistribution dist = ac.policy_forward(obs);
            std::array<double, 6> action = sample_action(dist, rng);
            double logp = log_prob(dist, action) + rng.uniform(-0.3, 0.3);
            b.push(obs, action, logp, rng.uniform(-1, 1), 0.0, i == 3);
        }
        b.returns.assign(4, 0.0);
        b.advantages.assign(4, 0.0);
        for (int i = 0; i < 4; ++i) {
            b.returns[i] = rng.uniform(-1, 1);
            b.advantages[i] = rng.uniform(-2, 2);
        }

        auto loss = [&](const std::vector<double>& params) {
            ActorCritic probe = ac;
            probe.data = params;
            double sum = 0.0;
            for (int i = 0; i < b.size(); ++i) {
                ActionDistribution d = probe.policy_forward(b.observations[i]);
                double ratio =
                    std::exp(log_prob(d, b.actions[i]) - b.log_probs_old[i]);
                double adv = b.advantages[i];
                double clipped = clamp(ratio, 1.0 - cfg.clip_epsilon,
                                       1.0 + cfg.clip_epsilon) * adv;
                sum += -std::min(ratio * adv, clipped);
                double e = probe.value_forward(b.observations[i]) - b.returns[i];
                sum += cfg.value_coef * e * e;
            }
            return sum / b.size();
        };

        std::vector<double> grads(ac.param_count(), 0.0);
        std::vector<int> batch = {0, 1, 2, 3};
        double ploss = 0, vloss = 0;
        int clipped = 0;
        accumulate_loss_gradient(ac, cfg, b, batch, grads, &ploss, &vloss, &clipped);
        for (int i = 0; i < ac.param_count(); ++i) {
            std::vector<double> p = ac.data;
            p[i] += h;
            double up = loss(p);
            p[i] -= 2 * h;
            double down = loss(p);
            double fd = (up - down) / (2 * h);
            double rel = std::abs(grads[i] - fd) /
                         std::max({std::abs(fd), std::abs(grads[i]), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    double dt = seconds_since(t0);
    bool ok = worst < 1e-4 && dt < 30.0;
    report(3, ok,
           fmt("surrogate+value gradient max rel err %.3g over 100 nets (%.2f s)",
               worst, dt));
}

// ---------------------------------------------------------------------------
// criterion 4: recursive returns vs brute-force double sum

void criterion_4() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(404);
    double worst = 0.0;
    RolloutBuffer b;
    std::vector<int> lengths;
    for (int e = 0; e < 1000; ++e) {
        int len = 1 + static_cast<int>(rng.uniform_int(50));
        lengths.push_back(len);
        for (int t = 0; t < len; ++t) {
            Observation obs{};
            b.push(obs, {}, 0.0, rng.uniform(-2, 2), rng.uniform(-1, 1),
                   t == len - 1);
        }
    }
    double gamma = 0.99;
    compute_returns_advantages(b, gamma);
    int base = 0;
    for (int len : lengths) {
        for (int t = 0; t < len; ++t) {
            double expect = 0.0;
            double g = 1.0;
            for (int k = t; k < len; ++k) {
                expect += g * b.rewards[base + k];
                g *= gamma;
            }
            worst = std::max(worst, std::abs(b.returns[base + t] - expect));
        }
        base += len;
    }
    double dt = seconds_since(t0);
    report(4, worst <= 1e-12,
           fmt("1000 episodes, max |recursive - double sum| = %.3g (%.2f s)",
               worst, dt));
}

// ---------------------------------------------------------------------------
// criteria 5-9: learning experiments

void criterion_5() {
    auto t0 = std::chrono::steady_clock::now();
    TrainSettings s;
    s.seed = 42;
    s.iterations = 200;
    s.episode.beta = 1.0;
    s.episode.enable_disturbance = false;
    for (int k = 0; k < 6; ++k) {
        s.episode.weights.mask[k] = (k == RewardWeights::kDistTips);
    }
    TrainResult r = train(s);
    double first = 0, last = 0;
    for (int i = 0; i < 10; ++i) {
        first += r.history[i].mean_return / 10.0;
        last += r.history[190 + i].mean_return / 10.0;
    }
    double dt = seconds_since(t0);
    bool ok = last >= 1.5 * first && dt < 600.0;
    report(5, ok,
           fmt("reach-only: first-10 mean %.2f, last-10 mean %.2f, ratio %.2f "
               "(%.0f s)",
               first, last, last / std::max(first, 1e-9), dt));
}

struct FullRun {
    TrainResult trained;
    TaskMetrics static_metrics;
    TaskMetrics regrasp_metrics;
    bool valid = false;
};

FullRun g_full;

void criterion_6(int iterations) {
    auto t0 = std::chrono::steady_clock::now();
    TrainSettings s;
    s.seed = 42;
    s.iterations = iterations;
    g_full.trained = train(s);
    const auto& hist = g_full.trained.history;
    int n = static_cast<int>(hist.size());
    int tenth = std::max(1, n / 10);
    double topo_first = 0, topo_last = 0, con_first = 0, con_last = 0;
    for (int i = 0; i < tenth; ++i) {
        topo_first += hist[i].term_means[RewardWeights::kTopology] / tenth;
        con_first += hist[i].term_means[RewardWeights::kContact] / tenth;
        topo_last += hist[n - 1 - i].term_means[RewardWeights::kTopology] / tenth;
        con_last += hist[n - 1 - i].term_means[RewardWeights::kContact] / tenth;
    }

    MeanPolicy policy{&g_full.trained.params};
    EpisodeConfig cfg;
    TaskSpec spec;
    spec.kind = TaskKind::static_grasp;
    spec.trials = 100;
    spec.seed = 42;
    g_full.static_metrics = run_task(spec, policy, cfg);

    spec.kind = TaskKind::close_fingers_regrasp;
    spec.seed = 43;
    g_full.regrasp_metrics = run_task(spec, policy, cfg);
    g_full.valid = true;

    const TaskMetrics& m = g_full.static_metrics;
    double dt = seconds_since(t0);
    bool ok = topo_last > topo_first && con_last > con_first &&
              m.lift_rate >= 0.70 &&
              m.shake15_rate <= m.shake12_rate + 0.05 && dt < 14400.0;
    report(6, ok,
           fmt("full: topo %.4f->%.4f, contact %.3f->%.3f, lift %.0f%%, "
               "shake12 %.0f%% shake15 %.0f%% (%.0f s)",
               topo_first, topo_last, con_first, con_last, 100 * m.lift_rate,
               100 * m.shake12_rate, 100 * m.shake15_rate, dt));
}

void criterion_7() {
    if (!g_full.valid) {
        report(7, false, "skipped: full training unavailable");
        return;
    }
    const TaskMetrics& m = g_full.regrasp_metrics;
    int recovered = 0;
    double recovery_sum = 0.0;
    for (const TrialDetail& d : m.details) {
        if (d.lift && d.outer_contact_events == 0) {
            ++recovered;
            recovery_sum += d.recovery_time;
        }
    }
    double mean_recovery = recovered > 0 ? recovery_sum / recovered : -1.0;
    bool ok = recovered >= 60 && mean_recovery >= 0.0 && mean_recovery < 5.0;
    report(7, ok,
           fmt("close_fingers: clean recoveries %d/100, mean recovery %.2f s",
               recovered, mean_recovery));
}

void criterion_8(int iterations) {
    auto t0 = std::chrono::steady_clock::now();
    TrainSettings s;
    s.seed = 42;
    s.iterations = iterations;
    std::vector<AblationConfig> battery = {
        {"no_r_distTips", RewardWeights::kDistTips, true},
        {"no_p_objVel", RewardWeights::kObjVel, true},
        {"no_p_collision", RewardWeights::kCollision, true},
        {"no_special_states", -1, false},
    };
    std::vector<CapabilityRow> rows = ablate(battery, s);
    auto row_str = [](const CapabilityRow& r) {
        return fmt("%s[R%d G%d RG%d L%d]", r.name.c_str(), r.reach, r.grasp,
                   r.regrasp, r.lift);
    };
    bool ok = !rows[0].reach &&                       // no r_distTips
              rows[1].reach && rows[1].grasp && rows[1].regrasp && rows[1].lift &&
              rows[2].reach && rows[2].grasp && rows[2].lift && !rows[2].regrasp &&
              !rows[3].regrasp;                       // no special states
    double dt = seconds_since(t0);
    report(8, ok,
           fmt("%s %s %s %s (%.0f s)", row_str(rows[0]).c_str(),
               row_str(rows[1]).c_str(), row_str(rows[2]).c_str(),
               row_str(rows[3]).c_str(), dt));
}

void criterion_9() {
    if (!g_full.valid) {
        report(9, false, "skipped: full training unavailable");
        return;
    }
    double max_v = 0.0, max_tau = 0.0;
    for (const TaskMetrics* m :
         {&g_full.static_metrics, &g_full.regrasp_metrics}) {
        max_v = std::max({max_v, m->peak_velocities[0], m->peak_velocities[1]});
        max_tau = std::max({max_tau, m->peak_torques[0], m->peak_torques[1],
                            m->peak_torques[2]});
    }
    bool ok = max_v <= 1.0 && max_tau <= 2.0;
    report(9, ok,
           fmt("peak hand velocity %.3f m/s (cap 1), peak torque %.3f N m (cap 2)",
               max_v, max_tau));
}

// ---------------------------------------------------------------------------
// criterion 10: CLI determinism

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_10(const char* cli) {
    if (!cli) {
        report(10, false, "no CLI binary path supplied");
        return;
    }
    std::string base = "/tmp/dgrasp_acceptance";
    std::filesystem::remove_all(base);
    auto run = [&](const std::string& args) {
        std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    bool ok = true;
    std::string why;
    if (run("train --iterations 5 --seed 42 --out " + base + "/a") != 0 ||
        run("train --iterations 5 --seed 42 --out " + base + "/b") != 0) {
        ok = false;
        why = "train invocation failed";
    } else {
        std::string a = slurp(base + "/a/metrics.csv");
        std::string b = slurp(base + "/b/metrics.csv");
        if (a.empty() || a != b) {
            ok = false;
            why = "train metrics differ between identical runs";
        }
    }
    if (ok) {
        std::string ckpt = base + "/a/checkpoint_000005.json";
        std::string eval_args = "evaluate --checkpoint " + ckpt +
                                " --task static --trials 10 --seed 7 --out ";
        if (run(eval_args + base + "/ea") != 0 || run(eval_args + base + "/eb") != 0) {
            ok = false;
            why = "evaluate invocation failed";
        } else {
            bool same_csv = slurp(base + "/ea/results.csv") ==
                            slurp(base + "/eb/results.csv");
            bool same_json = slurp(base + "/ea/results.json") ==
                             slurp(base + "/eb/results.json");
            std::string csv = slurp(base + "/ea/results.csv");
            if (csv.empty() || !same_csv || !same_json) {
                ok = false;
                why = "evaluate outputs differ between identical runs";
            }
        }
    }
    if (ok) why = "train and evaluate outputs byte-identical across reruns";
    report(10, ok, why);
}

}  // namespace

int main(int argc, char** argv) {
    const char* cli = argc > 1 ? argv[1] : nullptr;
    int full_iterations = argc > 2 ? std::atoi(argv[2]) : 2000;
    int ablation_iterations = argc > 3 ? std::atoi(argv[3]) : 800;

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6(full_iterations);
    criterion_7();
    criterion_8(ablation_iterations);
    criterion_9();
    criterion_10(cli);

    std::printf("%s (%d/10 criteria)\n", g_failures == 0 ? "ALL PASS" : "FAILURES",
                10 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
