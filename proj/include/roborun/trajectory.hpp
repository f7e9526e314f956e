#pragma once

#include "roborun/geometry.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace roborun {

struct Waypoint {
    Vec3 position;
    double planned_velocity = 0.0;    // m/s
    double planned_visibility = 0.0;  // m
};

/// Ordered waypoints; consecutive pairs are straight segments.
struct Trajectory {
    std::vector<Waypoint> waypoints;
    /// True when the last waypoint is the mission goal; false for frontier paths.
    bool reaches_goal = false;

    bool empty() const { return waypoints.empty(); }
    std::size_t size() const { return waypoints.size(); }
    double total_length() const;
    std::vector<Vec3> positions() const;
    /// Cumulative arc length at each waypoint (front() == 0).
    std::vector<double> arc_lengths() const;
    /// Position at arc length s (clamped to the ends).
    Vec3 point_at(double s) const;
    /// Arc length of the point on the polyline closest to p.
    double project(const Vec3& p) const;
    /// Portion of the trajectory from arc length s to the end; the first
    /// waypoint is point_at(s).
    Trajectory tail_from(double s) const;
    /// Portion from the start up to arc length s.
    Trajectory head_to(double s) const;
};

/// Shortest distance from p to a polyline (distance to the single point when it has one vertex).
double polyline_distance(std::span<const Vec3> polyline, const Vec3& p);

/// Inserts vertices so that no segment is longer than `spacing`; geometry is unchanged.
Trajectory densify(const Trajectory& traj, double spacing);

/// Annotates planned_velocity with a trapezoidal profile along the arc:
/// starts at v_start, ends at 0, never exceeds v_max, accelerations bounded by a_max.
void apply_trapezoidal_profile(Trajectory& traj, double v_start, double v_max, double a_max);

/// Rows: t_index,x,y,z,v_planned,visibility_m
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace roborun
