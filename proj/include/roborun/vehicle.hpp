#pragma once

#include "roborun/geometry.hpp"
#include "roborun/trajectory.hpp"
#include "roborun/world.hpp"

#include <vector>

namespace roborun {

/// Stopping distance, magnitude form of the fitted quadratic: 0.055 v² + 0.36 v + 0.20.
double d_stop(double v);

struct VehicleState {
    Vec3 position;
    double velocity = 0.0;  // scalar speed along the trajectory
    Vec3 heading{1.0, 0.0, 0.0};
    double v_max = 6.0;
    double a_max = 5.0;
    /// Commanded speed ceiling for the current decision (<= v_max).
    double speed_limit = 6.0;
    /// Arc length already travelled on the trajectory being tracked.
    double arc = 0.0;
};

/// Advances along `traj` by dt with exact tracking: speed approaches
/// min(speed_limit, v_max, sqrt(2 a_max · remaining)) with |accel| <= a_max.
/// Reaching the end sets velocity 0 and position to the last waypoint.
/// `trace` (optional) receives the positions at every internal substep.
VehicleState step(const VehicleState& state, const Trajectory& traj, double dt,
                  std::vector<Vec3>* trace = nullptr);

/// Exact capsule-vs-pillar test; touching (distance == radius sum) is not a collision.
bool check_collision(const GroundTruth& gt, const Vec3& a, const Vec3& b, double body_radius);

struct EnergyModel {
    double hover_power = 478.0;  // W
};

double mission_energy(double flight_time, const EnergyModel& model = {});

}  // namespace roborun
