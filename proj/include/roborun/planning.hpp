#pragma once

#include "roborun/geometry.hpp"
#include "roborun/octree.hpp"
#include "roborun/trajectory.hpp"

#include <cstdint>

namespace roborun {

/// Sub-sampled, volume-limited copy of the map handed to the planner.
struct PlannerView {
    OccupancyTree tree;
    double p1 = 0.3;
    double v1 = 0.0;
    /// Known volume actually handed over.
    double known_volume = 0.0;
    std::size_t nodes_included = 0;
    std::size_t nodes_available = 0;
};

/// Nodes at precision p1 are taken nearest-first (distance from drone_pos to the
/// node box) while the cumulative known volume stays within v1; each is collapsed
/// so that no leaf is finer than p1.
PlannerView handoff(const OccupancyTree& tree, double p1, double v1, const Vec3& drone_pos);

struct PlanBudget {
    double p2 = 0.3;
    double v2 = 150000.0;
};

struct PlannerConfig {
    double body_radius = 0.3;
    double goal_bias = 0.05;
    /// Steering step = steer_factor * p2.
    double steer_factor = 4.0;
    /// Rewire radius gamma * (log n / n)^(1/3), capped at the steering step; gamma = gamma_factor * step.
    double gamma_factor = 3.0;
    int max_iterations = 800;
    /// Extra iterations spent rewiring once the goal is connected.
    int refine_iterations = 150;
    /// Goal counts as reached within this distance.
    double goal_tolerance = 0.5;
    /// When no node gets closer to the goal, retreat to one at least this many steps away.
    double retreat_steps = 2.0;
};

enum class PlanStatus { Goal, Frontier, NoPath };

const char* plan_status_name(PlanStatus s);

struct PlanResult {
    PlanStatus status = PlanStatus::NoPath;
    Trajectory trajectory;
    /// Union volume of voxels touched by collision checks.
    double explored_volume = 0.0;
    int iterations = 0;
    std::size_t tree_nodes = 0;
    bool budget_exhausted = false;
};

/// 2.5-D RRT* at the start altitude over Free space of the view at p2.
PlanResult plan(const PlannerView& view, const Vec3& start, const Vec3& goal, const PlanBudget& budget,
                std::uint64_t rng_seed, const PlannerConfig& cfg = {});

/// True when a body of the given radius can sit at p: center and 8 points on the
/// horizontal ring all read Free at level.
bool body_free(const OccupancyTree& tree, const Vec3& p, int level, double body_radius);
/// Segment check stepping at the voxel size of `level`.
bool segment_free(const OccupancyTree& tree, const Vec3& a, const Vec3& b, int level, double body_radius);

/// Greedy shortcutting (collision-free at p2) followed by densification to
/// `spacing` and a trapezoidal velocity profile from v_start down to 0 at the end.
Trajectory smooth(const Trajectory& path, const PlannerView& view, double p2, double body_radius,
                  double v_max, double a_max, double v_start = 0.0, double spacing = 1.0);

/// planned_visibility per waypoint: arc distance along the remaining trajectory to
/// the first non-Free voxel at p2, capped at max_range and the remaining length.
void annotate_visibility(Trajectory& traj, const OccupancyTree& tree, double p2, double max_range);

}  // namespace roborun
