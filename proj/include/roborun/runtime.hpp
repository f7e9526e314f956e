#pragma once

#include "roborun/governor.hpp"
#include "roborun/mapping.hpp"
#include "roborun/planning.hpp"
#include "roborun/vehicle.hpp"
#include "roborun/world.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace roborun {

enum class ModeKind { Baseline, RoboRun };
enum class LatencySource { Modeled, Measured };

const char* mode_name(ModeKind k);
ModeKind parse_mode(const std::string& s);
LatencySource parse_latency_source(const std::string& s);

struct RuntimeMode {
    ModeKind kind = ModeKind::RoboRun;
    /// Knobs used every decision in Baseline mode (and by RoboRun when pinned).
    KnobPolicy static_policy{};
    LatencySource latency_source = LatencySource::Modeled;
    double v_max = 6.0;
    /// Baseline design-time deadline; <= 0 means local_budget(sensor range, v_max).
    double static_deadline = 0.0;
    /// RoboRun only: skip the solver and use static_policy (self-comparison control).
    bool pin_static = false;

    static RuntimeMode baseline(LatencySource src = LatencySource::Modeled);
    static RuntimeMode roborun(LatencySource src = LatencySource::Modeled);
};

/// Static column of the knob table.
KnobPolicy static_knobs();

struct MissionConfig {
    SensorModel sensor;
    PlannerConfig planner;
    double body_radius = 0.3;
    /// Extra radius used by the planner and blocked-path checks (not by collision).
    double clearance_margin = 0.3;
    double a_max = 5.0;
    double point_cloud_overhead = 0.21;  // s
    double runtime_reserve = 0.05;       // s
    /// Deadline used while hovering without a plan (the time budget is 0 there).
    double hover_deadline = 1.0;
    /// Volumes used when the deadline is already spent (≈ a 5 m ball).
    double min_volume = 500.0;
    /// Each consecutive hovering NoPath doubles the hover deadline, up to this factor.
    double hover_escalation_max = 8.0;
    /// Replan when a frontier plan has less than this fraction of sensor range left.
    double replan_horizon = 0.5;
    /// Sim-time cap = factor × goal distance / 0.5 m/s.
    double time_cap_factor = 3.0;
    /// Platform scale for wall-clock stage times in Measured mode.
    double measured_scale = 40.0;
    double waypoint_spacing = 1.0;
};

struct DecisionRecord {
    int index = 0;
    double sim_time = 0.0;
    /// Deadline δ_d (end-to-end) and the part left for the three stages.
    double budget = 0.0;
    double stage_budget = 0.0;
    double time_budget_raw = 0.0;
    std::array<double, 3> stage_latency{};
    double point_cloud_latency = 0.0;
    double runtime_overhead = 0.0;
    double latency = 0.0;  // accounted end-to-end
    KnobPolicy policy;
    ProfileSnapshot snapshot;
    /// Consumed volumes (<= policy volumes).
    double used_v0 = 0.0, used_v1 = 0.0, used_v2 = 0.0;
    double swept_v0 = 0.0;
    double v_cmd = 0.0;
    bool replanned = false;
    PlanStatus plan_status = PlanStatus::NoPath;
    Zone zone = Zone::A;
    bool solver_feasible = true;
    bool deadline_ok = true;
    bool stalled = false;
    /// Planning retried at vox_min after a NoPath at the policy precision.
    bool escape = false;
};

struct MissionSummary {
    double flight_time = 0.0;
    double distance = 0.0;
    double avg_velocity = 0.0;
    double energy = 0.0;
    bool collided = false;
    bool timed_out = false;
    bool reached = false;
    int decisions = 0;
    int replans = 0;
    /// Mean modeled compute (Σ stage latencies) per decision.
    double mean_compute = 0.0;
    double mean_latency = 0.0;
    int deadline_violations = 0;
    int feasible_decisions = 0;
    /// Violations among solver-feasible decisions only.
    int feasible_violations = 0;
};

struct MissionLog {
    std::string mode;
    std::uint64_t seed = 0;
    std::vector<DecisionRecord> records;
    MissionSummary summary;
    /// Flown positions, one per decision commit (for plots).
    std::vector<Vec3> path;
};

/// Call counters used to verify mode isolation.
struct GovernorCalls {
    long solve = 0;
    long time_budget = 0;
};

MissionLog run_mission(const GroundTruth& gt, const RuntimeMode& mode, const LatencyModel& model,
                       std::uint64_t seed, const MissionConfig& cfg = {}, GovernorCalls* calls = nullptr);

enum class SafetyVerdict { Ok, Violation };

/// Accounted latency against δ_d (RoboRun) or the static deadline (Baseline); equality is ok.
SafetyVerdict safety_monitor(const DecisionRecord& record, const VehicleState& state);

std::string mission_csv_header();
void write_mission_csv(std::ostream& os, const MissionLog& log);

}  // namespace roborun
