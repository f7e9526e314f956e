#pragma once

#include "roborun/geometry.hpp"
#include "roborun/mapping.hpp"
#include "roborun/octree.hpp"
#include "roborun/trajectory.hpp"

#include <iosfwd>
#include <string>

namespace roborun {

/// Gap sentinel when fewer than two obstacles are in view: the coarsest precision.
inline constexpr double kGapSentinel = 9.6;

struct ProfileSnapshot {
    double g_min = kGapSentinel;
    double g_avg = kGapSentinel;
    double d_obs = kInf;
    double d_unknown = 0.0;
    double v_sensor = 0.0;
    double v_map = 0.0;
    double velocity = 0.0;
    Vec3 position;
    Trajectory trajectory;
};

struct GapProfile {
    double g_min = kGapSentinel;
    double g_avg = kGapSentinel;
    int clusters = 0;
};

/// Obstacles = single-linkage clusters of hit points (horizontal distance,
/// linkage 2·vox_min). Adjacent clusters = edges of the minimum spanning tree over
/// clusters with a point in the forward half-space; gaps are nearest-point
/// distances along those edges.
GapProfile profile_gaps(const PointCloud& cloud, const Vec3& pose, const Vec3& heading,
                        double vox_min = 0.3);

struct DistanceProfile {
    double d_obs = kInf;
    double d_unknown = 0.0;
};

/// d_obs from the nearest Occupied leaf; d_unknown = arc distance along `traj`
/// (starting at its first waypoint) to the first non-Free point, capped at its length.
DistanceProfile profile_distances(const OccupancyTree& tree, const Vec3& pose, const Trajectory& traj);

struct VolumeProfile {
    double v_sensor = 0.0;
    double v_map = 0.0;
};

VolumeProfile profile_volumes(const OccupancyTree& tree, const PointCloud& cloud);

std::string snapshot_csv_header();
/// g_min,g_avg,d_obs,d_unknown,v_sensor,v_map,velocity,x,y,z,traj_length
std::string snapshot_csv_row(const ProfileSnapshot& s);

}  // namespace roborun
