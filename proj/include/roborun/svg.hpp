#pragma once

#include "roborun/bench.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace roborun {

/// What the per-decision plots need; built from a live log or read back from CSV.
struct MissionTrace {
    /// perception, handoff, planning, point cloud, runtime (s) per decision
    std::vector<std::array<double, 5>> latency;
    std::vector<double> budget;
    std::vector<double> p0;
    std::vector<Vec3> position;
    std::vector<Obstacle> obstacles;
};

MissionTrace trace_of(const MissionLog& log, const GroundTruth& world);
/// Reads a mission CSV (write_mission_csv) plus an obstacles CSV (write_obstacles_csv).
MissionTrace read_trace(std::istream& mission_csv, std::istream& obstacles_csv);

/// Mean mission time, velocity, energy and collision rate per mode.
void write_bars_svg(std::ostream& os, const SuiteReport& report);
void write_sensitivity_svg(std::ostream& os, const SensitivitySeries& series);
/// Stacked per-decision latency with the deadline drawn on top.
void write_breakdown_svg(std::ostream& os, const MissionTrace& trace);
/// Top view: pillars plus the flown path colored by perception precision.
void write_trajectory_svg(std::ostream& os, const MissionTrace& trace);

/// Regenerates every plot in `dir` from report.csv (and representative_*.csv when present).
void write_report_plots(const std::filesystem::path& dir);

}  // namespace roborun
