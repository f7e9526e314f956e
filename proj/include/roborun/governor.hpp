#pragma once

#include "roborun/profilers.hpp"
#include "roborun/trajectory.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace roborun {

/// Speed used in place of 0 when evaluating the local budget of a hovering drone.
inline constexpr double kHoverSpeed = 0.1;

/// (d - d_stop(v)) / v clamped at 0; v <= 0 uses kHoverSpeed.
double local_budget(double d, double v);

/// Time-budgeting loop over precomputed local budgets b_l(W_0..W_n) and flight times
/// between consecutive waypoints (flight_times[i-1] is W_{i-1} -> W_i).
double time_budget(std::span<const double> local_budgets, std::span<const double> flight_times);

/// Time-budgeting loop on a trajectory: W_0 is the current state (snapshot d_unknown and
/// velocity), W_i (i >= 1) are the trajectory waypoints after the first, with their
/// planned visibility and velocity. flightTime = segment length / mean planned speed
/// (floored at kHoverSpeed).
double time_budget(const Trajectory& traj, const ProfileSnapshot& snapshot);

enum Stage : int { kPerception = 0, kHandoff = 1, kPlanning = 2 };

const char* stage_name(int stage);

struct LatencyModel {
    std::array<std::array<double, 4>, 3> q{};
    double fit_mse = 0.0;
    std::array<double, 3> stage_mse{};
};

/// (q0 p̂³ + q1 p̂² + q2 p̂)(q3 v), p̂ = 1/p
double stage_latency(const LatencyModel& model, int stage, double p, double v);
/// Latency per unit volume at precision p.
double stage_rate(const LatencyModel& model, int stage, double p);

/// Plain text: three lines "q0 q1 q2 q3" (perception, handoff, planning) and "mse <value>".
void write_model(std::ostream& os, const LatencyModel& model);
LatencyModel read_model(std::istream& is);
LatencyModel load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const LatencyModel& model);

struct LatencySample {
    int stage = 0;
    double p = 0.3;
    double v = 0.0;
    double latency = 0.0;
};

struct StageFit {
    std::array<double, 4> q{};
    double mse = 0.0;  // mean squared relative error
    /// Index into the input of the worst relative error.
    std::size_t worst = 0;
    double worst_error = 0.0;
};

/// Non-negative least squares on relative errors with q3 held at `q3`.
StageFit fit_stage(std::span<const LatencySample> samples, double q3);

struct SolverConfig {
    std::vector<double> precisions{0.3, 0.6, 1.2, 2.4, 4.8, 9.6};
    /// Planner explored-volume ceiling (absent from the printed constraints).
    double v2_cap = 1.0e6;
    /// p0 floor when no gap is in view (g_min at the sentinel): the sentinel only
    /// relaxes the upper bound. 2.4 is the coarsest voxel that fits inside the
    /// sensor band (±12°) at half range.
    double open_space_floor = 2.4;
};

/// Lower bound on p0: g_min, or cfg.open_space_floor when no gap was observed.
double gap_floor(const ProfileSnapshot& s, const SolverConfig& cfg = {});

struct KnobPolicy {
    double p0 = 0.3, p1 = 0.3, p2 = 0.3;
    double v0 = 0.0, v1 = 0.0, v2 = 0.0;
    /// Stage budget the policy was solved for (s).
    double deadline = 0.0;
    double predicted_latency = 0.0;
    double objective = 0.0;
    /// No precision satisfies the gap/obstacle constraints.
    bool degraded = false;
    /// deadline <= 0.
    bool budget_infeasible = false;
};

/// Upper bound used for v0 and v1: min(v_sensor, v_map + v_sensor) — the map
/// volume available once the current scan has been ingested.
double volume_bound(const ProfileSnapshot& s);

/// Exhaustive over (p0, p1 = p2) pairs, water-filled volumes per pair.
KnobPolicy solve(const ProfileSnapshot& snapshot, double deadline, const LatencyModel& model,
                 const SolverConfig& cfg = {});

/// Independent check of every constraint; returns a list of violations (empty = ok).
std::vector<std::string> check_policy(const KnobPolicy& policy, const ProfileSnapshot& snapshot,
                                      const LatencyModel& model, const SolverConfig& cfg = {});

}  // namespace roborun
