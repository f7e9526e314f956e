// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include "CLI11.hpp"

#include "roborun/bench.hpp"
#include "roborun/calibration.hpp"
#include "roborun/mapping.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

using namespace roborun;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

const std::vector<double> kLadder{0.3, 0.6, 1.2, 2.4, 4.8, 9.6};

// no observed gap (sentinel): p0 floor drops to 2.4
double lo(const ProfileSnapshot& s) { return s.g_min >= 9.6 ? 2.4 : s.g_min; }

// ---- 4: solver vs brute force
double grid_optimum(const ProfileSnapshot& s, double T, const LatencyModel& m, double cap) {
    const double V = std::min(s.v_sensor, s.v_map + s.v_sensor);
    double best = kInf;
    for (double p0 : kLadder) {
        if (p0 < lo(s) - 1e-9 || p0 > std::min(s.g_avg, s.d_obs) + 1e-9) continue;
        for (double p1 : kLadder) {
            if (p1 < p0) continue;
            for (int i = 0; i < 8; ++i)
                for (int j = i; j < 8; ++j)
                    for (int k = 0; k < 8; ++k) {
                        const double lat = stage_latency(m, 0, p0, V * i / 7.0) + stage_latency(m, 1, p1, V * j / 7.0) +
                                           stage_latency(m, 2, p1, cap * k / 7.0);
                        if (lat <= T) best = std::min(best, (T - lat) * (T - lat));
                    }
        }
    }
    return best;
}

std::string constraint_violation(const KnobPolicy& k, const ProfileSnapshot& s, const LatencyModel& m, double cap) {
    const double V = std::min(s.v_sensor, s.v_map + s.v_sensor);
    const double lat = stage_latency(m, 0, k.p0, k.v0) + stage_latency(m, 1, k.p1, k.v1) + stage_latency(m, 2, k.p2, k.v2);
    auto on = [](double p) { return std::find(kLadder.begin(), kLadder.end(), p) != kLadder.end(); };
    if (!on(k.p0) || !on(k.p1) || !on(k.p2)) return "precision off ladder";
    if (k.p1 != k.p2) return "p1 != p2";
    if (k.p0 < lo(s) - 1e-9 || k.p0 > std::min({k.p1, s.g_avg, s.d_obs}) + 1e-9) return "p0 out of range";
    if (k.v0 < 0 || k.v0 > k.v1 + 1e-9 * (1 + k.v1) || k.v1 > V + 1e-9 * (1 + V)) return "perception volumes";
    if (k.v2 < 0 || k.v2 > cap * (1 + 1e-12)) return "planning volume";
    if (lat > k.deadline * (1 + 1e-9) + 1e-12) return "late";
    return {};
}

Verdict solver_oracle(const LatencyModel& m) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int compared = 0, worse = 0, broken = 0;
    double worst_gap = -kInf;
    while (compared < 200) {
        ProfileSnapshot s;
        s.g_min = 0.1 + 5.0 * u(rng);
        s.g_avg = s.g_min + 6.0 * u(rng);
        s.d_obs = u(rng) < 0.2 ? kInf : 15.0 * u(rng);
        if (u(rng) < 0.2) s.g_min = s.g_avg = kGapSentinel;
        s.v_sensor = 50000.0 * u(rng);
        s.v_map = 200000.0 * u(rng);
        bool any = false;
        for (double p : kLadder) any = any || (p >= lo(s) - 1e-9 && p <= std::min(s.g_avg, s.d_obs) + 1e-9);
        if (!any) continue;
        const double T = 3.0 * u(rng);
        const KnobPolicy k = solve(s, T, m);
        const double grid = grid_optimum(s, T, m, 1e6);
        worst_gap = std::max(worst_gap, k.objective - grid);
        if (k.objective > grid + 1e-9) ++worse;
        if (!constraint_violation(k, s, m, 1e6).empty()) ++broken;
        ++compared;
    }
    const double secs = seconds_since(t0);
    return {worse == 0 && broken == 0 && secs < 60.0,
            fmt("%d snapshots, %d above grid optimum (max gap %.3g), %d constraint failures, %.1f s", compared, worse,
                worst_gap, broken, secs)};
}

// ---- 5: calibration
Verdict calibration_fidelity() {
    std::string detail;
    bool ok = true;
    try {
        const auto t0 = Clock::now();
        const CalibrationResult r = calibrate(real_executors(), CalibrationConfig{});
        detail = fmt("real executors mse %.4f (%.4f/%.4f/%.4f) in %.0f s", r.model.fit_mse, r.model.stage_mse[0],
                     r.model.stage_mse[1], r.model.stage_mse[2], seconds_since(t0));
        ok = r.model.fit_mse < 0.08;
    } catch (const CalibrationError& e) {
        ok = false;
        detail = std::string("real executors: ") + e.what();
    }
    const StageExecutor exact = [](double p, double v) { return (2.0 / (p * p) + 1.0 / p) * 0.5 * v; };
    CalibrationConfig c;
    c.fit_q3 = 0.5;
    c.latency_scale = 1.0;
    const auto r = calibrate({exact, exact, exact}, c);
    double err = 0.0;
    for (const auto& q : r.model.q)
        err = std::max({err, std::abs(q[0]), std::abs(q[1] - 2.0), std::abs(q[2] - 1.0), std::abs(q[3] - 0.5)});
    ok = ok && err <= 1e-6;
    return {ok, detail + fmt("; synthetic max coefficient error %.2g", err)};
}

// ---- 6: time budget
Verdict alg1() {
    const std::vector<double> ft{1.0, 1.0};
    const double a = time_budget(std::vector<double>{5, 4, 10}, ft);
    const double b = time_budget(std::vector<double>{5, 0.5, 10}, ft);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> ub(0.0, 10.0), uf(0.05, 3.0);
    int bad = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const int n = static_cast<int>(rng() % 13);
        std::vector<double> lb{ub(rng)}, f;
        for (int i = 0; i < n; ++i) {
            lb.push_back(ub(rng));
            f.push_back(uf(rng));
        }
        const double bg = time_budget(lb, f);
        double acc = 0.0;
        int k = 0;
        while (k < n && acc + f[k] <= bg + 1e-12) acc += f[k++];
        if (std::abs(acc - bg) > 1e-9 || bg > lb[0] + 1e-12) ++bad;
        double pre = 0.0;
        for (int i = 1; i <= k; ++i) {
            pre += f[i - 1];
            if (bg > lb[i] + pre + 1e-12) ++bad;
        }
    }
    return {a == 2.0 && b == 1.0 && bad == 0, fmt("traces return %g and %g; %d property failures in 10000", a, b, bad)};
}

// ---- 7: voxel laws
Verdict voxel_laws() {
    bool ok = true;
    std::string detail;
    for (int level = 1; level <= 3; ++level) {
        auto fill = [](int l) {
            OccupancyTree t({-38.4, -38.4, -38.4}, 0.3, 8);
            const double s = t.size_at(l);
            const int n = static_cast<int>(std::lround(2.4 / s));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int m = 0; m < n; ++m) {
                        VoxelKey k;
                        t.key_of({(i + 0.5) * s, (j + 0.5) * s, (m + 0.5) * s}, k);
                        t.mark_occupied(k.at_level(l), l);
                    }
            return t.leaf_count(Occupancy::Occupied);
        };
        const auto coarse = fill(level), fine = fill(level - 1);
        ok = ok && fine == 8 * coarse;
        detail += fmt("%zu->%zu ", coarse, fine);
    }
    const Aabb arena{{-30, -30, 0}, {30, 30, 10}};
    GroundTruth gt({{{6.0, 0.0, 0.0}, 0.5, 10.0}}, {0, 0, 2}, {20, 0, 2}, arena, 2.0);
    const auto cloud = sense(gt, {0, 0, 2}, {1, 0, 0});
    for (double v : {3.0, 10.0, 40.0, 200.0}) {
        OccupancyTree a({-38.4, -38.4, -38.4}, 0.3, 8), b({-38.4, -38.4, -38.4}, 0.3, 8);
        const auto ra = integrate(a, cloud, {0.3, v}, {});
        const auto rb = integrate(b, cloud, {0.3, 2 * v}, {});
        const long diff = static_cast<long>(rb.voxels_touched) - 2 * static_cast<long>(ra.voxels_touched);
        ok = ok && std::abs(diff) <= 1 && ra.integrated_volume <= v + 1e-12;
        detail += fmt("| v0 %g: %zu, 2v0: %zu ", v, ra.voxels_touched, rb.voxels_touched);
    }
    return {ok, detail};
}

// ---- 10: determinism
Verdict determinism(const LatencyModel& m) {
    int same = 0, total = 0;
    EnvSpec base;
    for (int env : {0, 13, 26})
        for (ModeKind k : {ModeKind::Baseline, ModeKind::RoboRun}) {
            const auto gt = generate_environment(suite_27(base, 3)[static_cast<std::size_t>(env)]);
            const auto mode = k == ModeKind::Baseline ? RuntimeMode::baseline() : RuntimeMode::roborun();
            std::ostringstream a, b;
            write_mission_csv(a, run_mission(gt, mode, m, 3));
            write_mission_csv(b, run_mission(gt, mode, m, 3));
            same += a.str() == b.str() ? 1 : 0;
            ++total;
        }
    return {same == total, fmt("%d/%d reruns byte-identical", same, total)};
}

const SuiteCheck* find(const std::vector<SuiteCheck>& v, const std::string& name) {
    for (const auto& c : v)
        if (c.name == name) return &c;
    return nullptr;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string model_path = ROBORUN_MODEL_FILE, out;
    int seeds = 5;
    app.add_option("--model", model_path, "latency model file");
    app.add_option("--out", out, "suite output directory");
    app.add_option("--seeds", seeds, "seeds per env");
    CLI11_PARSE(app, argc, argv);

    LatencyModel model;
    try {
        model = load_model(model_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }

    std::map<int, Verdict> v;
    std::fprintf(stderr, "solver oracle...\n");
    v[4] = solver_oracle(model);
    std::fprintf(stderr, "calibration...\n");
    v[5] = calibration_fidelity();
    v[6] = alg1();
    v[7] = voxel_laws();
    std::fprintf(stderr, "determinism...\n");
    v[10] = determinism(model);

    std::fprintf(stderr, "suite (27 envs x 2 modes x %d seeds)...\n", seeds);
    SuiteConfig cfg;
    cfg.seeds_per_env = seeds;
    cfg.output_dir = out;
    const auto t0 = Clock::now();
    const SuiteReport report = run_suite(cfg, model);
    const double secs = seconds_since(t0);
    const auto checks = suite_checks(report);
    auto pick = [&](std::initializer_list<const char*> names, std::string extra = {}) {
        Verdict r{true, std::move(extra)};
        for (const char* n : names) {
            const SuiteCheck* c = find(checks, n);
            r.pass = r.pass && c && c->pass;
            if (!r.detail.empty()) r.detail += "; ";
            r.detail += c ? c->detail : std::string(n) + " missing";
        }
        return r;
    };
    v[1] = pick({"deadline_safety"}, fmt("suite wall time %.0f s", secs));
    v[1].pass = v[1].pass && secs < 900.0;
    v[2] = pick({"mission_time_ratio<=0.5", "velocity_ratio>=2", "energy_tracks_time"});
    v[3] = pick({"collision_rate_baseline<=0.2", "collision_rate_roborun<=0.2"});
    v[8] = pick({"density_sensitivity_order", "goal_distance_sensitivity_order"});
    v[9] = pick({"cpu_proxy>0"});

    const char* names[] = {"",
                           "deadline safety",
                           "mission time / velocity / energy",
                           "collision-free rate",
                           "solver oracle equivalence",
                           "calibration fidelity",
                           "time budget hand traces",
                           "voxel-count laws",
                           "sensitivity orderings",
                           "cpu proxy",
                           "determinism"};
    bool all = true;
    for (int i = 1; i <= 10; ++i) {
        std::printf("%s %2d %s: %s\n", v[i].pass ? "PASS" : "FAIL", i, names[i], v[i].detail.c_str());
        all = all && v[i].pass;
    }
    std::fflush(stdout);
    return all ? 0 : 1;
}
