#pragma once

#include "roborun/runtime.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace roborun {

struct SuiteConfig {
    double scale = 0.1;
    int seeds_per_env = 5;
    std::vector<ModeKind> modes{ModeKind::Baseline, ModeKind::RoboRun};
    LatencySource latency_source = LatencySource::Modeled;
    /// Empty: nothing is written.
    std::filesystem::path output_dir;
    /// 0 = hardware concurrency.
    int parallelism = 0;
    /// Seed s of env e uses the world suite_27(base, base_seed + s)[e].
    std::uint64_t base_seed = 1;
    MissionConfig mission;
    /// RoboRun runs skip the solver (self-comparison control).
    bool pin_roborun = false;

    void validate() const;  // throws std::invalid_argument
};

/// One (env, mode, seed) mission.
struct RunRow {
    int env = 0;
    ModeKind mode = ModeKind::Baseline;
    int seed = 0;
    double density = 0.0;
    double spread_m = 0.0;
    double goal_distance_m = 0.0;
    bool failed = false;
    MissionSummary summary;
    /// Σ over decisions of modeled stage latency, for the breakdown figure.
    std::array<double, 3> stage_total{};
};

struct ModeAggregate {
    int runs = 0;
    int failed = 0;
    double mission_time = 0.0;
    double velocity = 0.0;
    double energy = 0.0;
    double collision_rate = 0.0;
    double reach_rate = 0.0;
    /// Per-decision means, pooled over every decision of every run.
    double latency = 0.0;
    double compute = 0.0;
    long decisions = 0;
    long feasible_decisions = 0;
    long feasible_violations = 0;
};

struct SuiteReport {
    double scale = 0.1;
    std::vector<RunRow> rows;

    /// Mean over the runs of `mode` (failed runs excluded from the means).
    ModeAggregate aggregate(ModeKind mode) const;
    std::vector<ModeKind> modes() const;
    /// RoboRun / Baseline for mission time, velocity and energy (NaN when a mode is missing).
    double ratio(double ModeAggregate::*field) const;
};

SuiteReport run_suite(const SuiteConfig& cfg, const LatencyModel& model);

/// Index of the environment with density 0.45, spread 80, goal 900 in suite_27 order.
int mid_difficulty_env();

/// Re-runs the median-mission-time RoboRun mission of the mid-difficulty env.
struct RepresentativeMission {
    EnvSpec spec;
    GroundTruth world;
    MissionLog log;
};
std::optional<RepresentativeMission> representative_mission(const SuiteReport& report, const SuiteConfig& cfg,
                                                            const LatencyModel& model);

enum class Knob { Density, Spread, GoalDistance };
const char* knob_name(Knob k);

struct SensitivitySeries {
    Knob knob = Knob::Density;
    std::vector<double> levels;
    /// Mean mission time per level, per mode.
    std::map<ModeKind, std::vector<double>> mission_time;
    /// max/min over levels of the mean mission time.
    std::map<ModeKind, double> worst_ratio;
};

SensitivitySeries sensitivity(const SuiteReport& report, Knob knob);

/// 1 - (mean per-decision compute RoboRun / Baseline), in percent.
double cpu_proxy(const SuiteReport& report);
double cpu_proxy(const std::vector<MissionLog>& roborun, const std::vector<MissionLog>& baseline);

struct SuiteCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Suite-level thresholds: deadline safety, mission-time/velocity/energy ratios, collision
/// rate per mode, sensitivity orderings, CPU proxy sign.
std::vector<SuiteCheck> suite_checks(const SuiteReport& report);

/// One row per run; doubles at %.17g so a read-back aggregates bit-identically.
void write_report_csv(std::ostream& os, const SuiteReport& report);
SuiteReport read_report_csv(std::istream& is);

/// Aggregates, ratios, sensitivity and CPU proxy as key,value lines.
void write_summary_csv(std::ostream& os, const SuiteReport& report);

}  // namespace roborun
