#include "roborun/bench.hpp"
#include "roborun/svg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace roborun {

void SuiteConfig::validate() const {
    if (seeds_per_env < 1) throw std::invalid_argument("seeds_per_env must be >= 1");
    if (!(scale > 0.0 && scale <= 1.0)) throw std::invalid_argument("scale must be in (0, 1]");
    if (modes.empty()) throw std::invalid_argument("no modes selected");
    if (parallelism < 0) throw std::invalid_argument("parallelism must be >= 0");
}

namespace {

EnvSpec base_spec(const SuiteConfig& cfg) {
    EnvSpec base;
    base.scale = cfg.scale;
    return base;
}

EnvSpec env_of(const SuiteConfig& cfg, int env, int seed) {
    return suite_27(base_spec(cfg), cfg.base_seed + static_cast<std::uint64_t>(seed))[static_cast<std::size_t>(env)];
}

RuntimeMode mode_of(const SuiteConfig& cfg, ModeKind kind) {
    RuntimeMode m = kind == ModeKind::Baseline ? RuntimeMode::baseline(cfg.latency_source)
                                               : RuntimeMode::roborun(cfg.latency_source);
    if (kind == ModeKind::RoboRun) m.pin_static = cfg.pin_roborun;
    return m;
}

std::uint64_t mission_seed(const SuiteConfig& cfg, int seed) { return cfg.base_seed + static_cast<std::uint64_t>(seed); }

struct Job {
    int env;
    ModeKind mode;
    int seed;
};

void write_outputs(const SuiteReport& report, const SuiteConfig& cfg, const LatencyModel& model) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    {
        std::ofstream f(cfg.output_dir / "report.csv");
        write_report_csv(f, report);
    }
    {
        std::ofstream f(cfg.output_dir / "summary.csv");
        write_summary_csv(f, report);
    }
    if (auto rep = representative_mission(report, cfg, model)) {
        std::ofstream m(cfg.output_dir / "representative_mission.csv");
        write_mission_csv(m, rep->log);
        std::ofstream o(cfg.output_dir / "representative_obstacles.csv");
        write_obstacles_csv(o, rep->world);
    }
    write_report_plots(cfg.output_dir);
}

}  // namespace

SuiteReport run_suite(const SuiteConfig& cfg, const LatencyModel& model) {
    cfg.validate();
    std::vector<Job> jobs;
    for (int s = 0; s < cfg.seeds_per_env; ++s)
        for (int e = 0; e < 27; ++e)
            for (ModeKind m : cfg.modes) jobs.push_back({e, m, s});

    SuiteReport report;
    report.scale = cfg.scale;
    report.rows.resize(jobs.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const Job& j = jobs[i];
            RunRow& row = report.rows[i];
            row.env = j.env;
            row.mode = j.mode;
            row.seed = j.seed;
            try {
                const EnvSpec spec = env_of(cfg, j.env, j.seed);
                row.density = spec.obstacle_density;
                row.spread_m = spec.spread_m;
                row.goal_distance_m = spec.goal_distance_m;
                const GroundTruth gt = generate_environment(spec);
                const MissionLog log = run_mission(gt, mode_of(cfg, j.mode), model, mission_seed(cfg, j.seed), cfg.mission);
                row.summary = log.summary;
                for (const auto& r : log.records)
                    for (int k = 0; k < 3; ++k) row.stage_total[static_cast<std::size_t>(k)] += r.stage_latency[static_cast<std::size_t>(k)];
            } catch (const std::exception&) {
                row.failed = true;
            }
        }
    };
    int n = cfg.parallelism > 0 ? cfg.parallelism : static_cast<int>(std::thread::hardware_concurrency());
    n = std::clamp(n, 1, static_cast<int>(jobs.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    if (!cfg.output_dir.empty()) write_outputs(report, cfg, model);
    return report;
}

ModeAggregate SuiteReport::aggregate(ModeKind mode) const {
    ModeAggregate a;
    double lat = 0.0, comp = 0.0;
    int collided = 0, reached = 0;
    for (const RunRow& r : rows) {
        if (r.mode != mode) continue;
        ++a.runs;
        if (r.failed) {
            ++a.failed;
            continue;
        }
        const MissionSummary& s = r.summary;
        a.mission_time += s.flight_time;
        a.velocity += s.avg_velocity;
        a.energy += s.energy;
        collided += s.collided ? 1 : 0;
        reached += s.reached ? 1 : 0;
        lat += s.mean_latency * s.decisions;
        comp += s.mean_compute * s.decisions;
        a.decisions += s.decisions;
        a.feasible_decisions += s.feasible_decisions;
        a.feasible_violations += s.feasible_violations;
    }
    const int ok = a.runs - a.failed;
    if (ok > 0) {
        a.mission_time /= ok;
        a.velocity /= ok;
        a.energy /= ok;
        a.collision_rate = static_cast<double>(collided) / ok;
        a.reach_rate = static_cast<double>(reached) / ok;
    }
    if (a.decisions > 0) {
        a.latency = lat / static_cast<double>(a.decisions);
        a.compute = comp / static_cast<double>(a.decisions);
    }
    return a;
}

std::vector<ModeKind> SuiteReport::modes() const {
    std::set<ModeKind> s;
    for (const RunRow& r : rows) s.insert(r.mode);
    return {s.begin(), s.end()};
}

double SuiteReport::ratio(double ModeAggregate::*field) const {
    const auto ms = modes();
    if (std::find(ms.begin(), ms.end(), ModeKind::RoboRun) == ms.end() ||
        std::find(ms.begin(), ms.end(), ModeKind::Baseline) == ms.end())
        return std::numeric_limits<double>::quiet_NaN();
    return aggregate(ModeKind::RoboRun).*field / aggregate(ModeKind::Baseline).*field;
}

// suite_27 is density-major, then spread, then goal distance; middle level of each
int mid_difficulty_env() { return 9 * 1 + 3 * 1 + 1; }

std::optional<RepresentativeMission> representative_mission(const SuiteReport& report, const SuiteConfig& cfg,
                                                            const LatencyModel& model) {
    std::vector<const RunRow*> cands;
    for (const RunRow& r : report.rows)
        if (r.mode == ModeKind::RoboRun && r.env == mid_difficulty_env() && !r.failed) cands.push_back(&r);
    if (cands.empty()) return std::nullopt;
    std::sort(cands.begin(), cands.end(), [](const RunRow* a, const RunRow* b) {
        if (a->summary.flight_time != b->summary.flight_time) return a->summary.flight_time < b->summary.flight_time;
        return a->seed < b->seed;
    });
    const RunRow& pick = *cands[(cands.size() - 1) / 2];
    RepresentativeMission rep;
    rep.spec = env_of(cfg, pick.env, pick.seed);
    rep.world = generate_environment(rep.spec);
    rep.log = run_mission(rep.world, mode_of(cfg, ModeKind::RoboRun), model, mission_seed(cfg, pick.seed), cfg.mission);
    return rep;
}

const char* knob_name(Knob k) {
    switch (k) {
        case Knob::Density: return "density";
        case Knob::Spread: return "spread";
        case Knob::GoalDistance: return "goal_distance";
    }
    return "?";
}

SensitivitySeries sensitivity(const SuiteReport& report, Knob knob) {
    auto level_of = [knob](const RunRow& r) {
        return knob == Knob::Density ? r.density : knob == Knob::Spread ? r.spread_m : r.goal_distance_m;
    };
    SensitivitySeries out;
    out.knob = knob;
    std::set<double> levels;
    for (const RunRow& r : report.rows) levels.insert(level_of(r));
    out.levels.assign(levels.begin(), levels.end());
    for (ModeKind m : report.modes()) {
        std::vector<double> sum(out.levels.size(), 0.0);
        std::vector<int> cnt(out.levels.size(), 0);
        for (const RunRow& r : report.rows) {
            if (r.mode != m || r.failed) continue;
            const auto i = static_cast<std::size_t>(
                std::lower_bound(out.levels.begin(), out.levels.end(), level_of(r)) - out.levels.begin());
            sum[i] += r.summary.flight_time;
            ++cnt[i];
        }
        std::vector<double> means;
        for (std::size_t i = 0; i < sum.size(); ++i)
            if (cnt[i] > 0) means.push_back(sum[i] / cnt[i]);
        out.mission_time[m] = means;
        double ratio = 1.0;
        if (means.size() > 1) {
            const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
            ratio = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
        }
        out.worst_ratio[m] = ratio;
    }
    return out;
}

namespace {
double proxy(double c_roborun, double c_baseline) {
    if (c_baseline <= 0.0) return 0.0;
    return 100.0 * (1.0 - c_roborun / c_baseline);
}

double pooled_compute(const std::vector<MissionLog>& logs) {
    double c = 0.0;
    long n = 0;
    for (const auto& l : logs) {
        c += l.summary.mean_compute * l.summary.decisions;
        n += l.summary.decisions;
    }
    return n > 0 ? c / static_cast<double>(n) : 0.0;
}
}  // namespace

double cpu_proxy(const SuiteReport& report) {
    return proxy(report.aggregate(ModeKind::RoboRun).compute, report.aggregate(ModeKind::Baseline).compute);
}

double cpu_proxy(const std::vector<MissionLog>& roborun, const std::vector<MissionLog>& baseline) {
    return proxy(pooled_compute(roborun), pooled_compute(baseline));
}

std::vector<SuiteCheck> suite_checks(const SuiteReport& report) {
    std::vector<SuiteCheck> out;
    char buf[256];
    auto add = [&](const char* name, bool pass) { out.push_back({name, pass, buf}); };
    const ModeAggregate rr = report.aggregate(ModeKind::RoboRun);
    const ModeAggregate bl = report.aggregate(ModeKind::Baseline);

    std::snprintf(buf, sizeof buf, "%ld violations in %ld solver-feasible decisions", rr.feasible_violations,
                  rr.feasible_decisions);
    add("deadline_safety", rr.feasible_decisions > 0 && rr.feasible_violations == 0);

    const double t = report.ratio(&ModeAggregate::mission_time);
    const double v = report.ratio(&ModeAggregate::velocity);
    const double e = report.ratio(&ModeAggregate::energy);
    std::snprintf(buf, sizeof buf, "roborun/baseline mission time %.3f (%.1f s / %.1f s)", t, rr.mission_time,
                  bl.mission_time);
    add("mission_time_ratio<=0.5", t <= 0.5);
    std::snprintf(buf, sizeof buf, "roborun/baseline velocity %.3f (%.2f / %.2f m/s)", v, rr.velocity, bl.velocity);
    add("velocity_ratio>=2", v >= 2.0);
    std::snprintf(buf, sizeof buf, "energy ratio %.4f vs mission time ratio %.4f", e, t);
    add("energy_tracks_time", std::abs(e - t) <= 0.01 * std::abs(t));

    for (ModeKind m : {ModeKind::Baseline, ModeKind::RoboRun}) {
        const ModeAggregate& a = m == ModeKind::RoboRun ? rr : bl;
        std::snprintf(buf, sizeof buf, "%s collision rate %.3f over %d runs (%d failed)", mode_name(m),
                      a.collision_rate, a.runs, a.failed);
        add(m == ModeKind::RoboRun ? "collision_rate_roborun<=0.2" : "collision_rate_baseline<=0.2",
            a.runs > a.failed && a.failed == 0 && a.collision_rate <= 0.2);
    }

    const SensitivitySeries d = sensitivity(report, Knob::Density);
    const SensitivitySeries g = sensitivity(report, Knob::GoalDistance);
    auto wr = [](const SensitivitySeries& s, ModeKind m) {
        auto it = s.worst_ratio.find(m);
        return it == s.worst_ratio.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
    };
    std::snprintf(buf, sizeof buf, "density worst-case ratio roborun %.3f vs baseline %.3f",
                  wr(d, ModeKind::RoboRun), wr(d, ModeKind::Baseline));
    add("density_sensitivity_order", wr(d, ModeKind::RoboRun) > wr(d, ModeKind::Baseline));
    std::snprintf(buf, sizeof buf, "goal-distance worst-case ratio baseline %.3f vs roborun %.3f",
                  wr(g, ModeKind::Baseline), wr(g, ModeKind::RoboRun));
    add("goal_distance_sensitivity_order", wr(g, ModeKind::Baseline) > wr(g, ModeKind::RoboRun));

    std::snprintf(buf, sizeof buf, "per-decision compute %.4f s vs %.4f s, reduction %.1f%%", rr.compute, bl.compute,
                  cpu_proxy(report));
    add("cpu_proxy>0", rr.compute < bl.compute);
    return out;
}

namespace {
constexpr const char* kReportHeader =
    "env,mode,seed,density,spread_m,goal_distance_m,failed,flight_time,distance,avg_velocity,energy,collided,"
    "timed_out,reached,decisions,replans,mean_compute,mean_latency,deadline_violations,feasible_decisions,"
    "feasible_violations,stage0_total,stage1_total,stage2_total";
}

void write_report_csv(std::ostream& os, const SuiteReport& report) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, "# scale=%.17g", report.scale);
    os << buf << '\n' << kReportHeader << '\n';
    for (const RunRow& r : report.rows) {
        const MissionSummary& s = r.summary;
        std::snprintf(buf, sizeof buf,
                      "%d,%s,%d,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%d,%d,%d,%d,%d,%.17g,%.17g,%d,%d,%d,"
                      "%.17g,%.17g,%.17g",
                      r.env, mode_name(r.mode), r.seed, r.density, r.spread_m, r.goal_distance_m, r.failed ? 1 : 0,
                      s.flight_time, s.distance, s.avg_velocity, s.energy, s.collided ? 1 : 0, s.timed_out ? 1 : 0,
                      s.reached ? 1 : 0, s.decisions, s.replans, s.mean_compute, s.mean_latency,
                      s.deadline_violations, s.feasible_decisions, s.feasible_violations, r.stage_total[0],
                      r.stage_total[1], r.stage_total[2]);
        os << buf << '\n';
    }
}

SuiteReport read_report_csv(std::istream& is) {
    SuiteReport rep;
    std::string line;
    bool header = false;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.rfind("# scale=", 0) == 0) {
            rep.scale = std::strtod(line.c_str() + 8, nullptr);
            continue;
        }
        if (line[0] == '#') continue;
        if (!header) {
            if (line != kReportHeader) throw std::runtime_error("report csv: unexpected header");
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 24) throw std::runtime_error("report csv: line " + std::to_string(lineno) + " has " +
                                                     std::to_string(f.size()) + " fields");
        auto d = [&](int i) { return std::strtod(f[static_cast<std::size_t>(i)].c_str(), nullptr); };
        auto n = [&](int i) { return std::stoi(f[static_cast<std::size_t>(i)]); };
        RunRow r;
        r.env = n(0);
        r.mode = parse_mode(f[1]);
        r.seed = n(2);
        r.density = d(3);
        r.spread_m = d(4);
        r.goal_distance_m = d(5);
        r.failed = n(6) != 0;
        MissionSummary& s = r.summary;
        s.flight_time = d(7);
        s.distance = d(8);
        s.avg_velocity = d(9);
        s.energy = d(10);
        s.collided = n(11) != 0;
        s.timed_out = n(12) != 0;
        s.reached = n(13) != 0;
        s.decisions = n(14);
        s.replans = n(15);
        s.mean_compute = d(16);
        s.mean_latency = d(17);
        s.deadline_violations = n(18);
        s.feasible_decisions = n(19);
        s.feasible_violations = n(20);
        r.stage_total = {d(21), d(22), d(23)};
        rep.rows.push_back(r);
    }
    if (!header) throw std::runtime_error("report csv: missing header");
    return rep;
}

void write_summary_csv(std::ostream& os, const SuiteReport& report) {
    char buf[256];
    auto kv = [&](const std::string& k, double v) {
        std::snprintf(buf, sizeof buf, "%s,%.17g", k.c_str(), v);
        os << buf << '\n';
    };
    os << "key,value\n";
    for (ModeKind m : report.modes()) {
        const ModeAggregate a = report.aggregate(m);
        const std::string p = mode_name(m);
        kv(p + ".runs", a.runs);
        kv(p + ".failed", a.failed);
        kv(p + ".mission_time_s", a.mission_time);
        kv(p + ".velocity_mps", a.velocity);
        kv(p + ".energy_J", a.energy);
        kv(p + ".collision_rate", a.collision_rate);
        kv(p + ".reach_rate", a.reach_rate);
        kv(p + ".decision_latency_s", a.latency);
        kv(p + ".decision_compute_s", a.compute);
        kv(p + ".feasible_decisions", static_cast<double>(a.feasible_decisions));
        kv(p + ".feasible_violations", static_cast<double>(a.feasible_violations));
    }
    kv("ratio.mission_time", report.ratio(&ModeAggregate::mission_time));
    kv("ratio.velocity", report.ratio(&ModeAggregate::velocity));
    kv("ratio.energy", report.ratio(&ModeAggregate::energy));
    kv("cpu_proxy_percent", cpu_proxy(report));
    for (Knob k : {Knob::Density, Knob::Spread, Knob::GoalDistance}) {
        const SensitivitySeries s = sensitivity(report, k);
        for (const auto& [m, r] : s.worst_ratio) kv(std::string("sensitivity.") + knob_name(k) + "." + mode_name(m), r);
    }
}

}  // namespace roborun
