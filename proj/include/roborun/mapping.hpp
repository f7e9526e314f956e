#pragma once

#include "roborun/geometry.hpp"
#include "roborun/octree.hpp"
#include "roborun/world.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace roborun {

/// Horizontal frusta of 90° each, centered on the heading; 4 gives full coverage.
struct SensorModel {
    int frusta = 4;
    double max_range = 20.0;
    double azimuth_step_deg = 1.0;
    /// Ring spacing; rings sit at -1, 0, +1 times this elevation.
    double ring_elevation_deg = 8.0;

    double azimuth_span_rad() const;
    /// Solid angle of the swept band: azimuth span × (sin(top) - sin(bottom)).
    double fov_solid_angle() const;
    /// Solid angle represented by one ray.
    double ray_solid_angle() const;
    double frustum_volume() const;
};

struct PointCloud {
    Vec3 origin;
    /// Surface hits.
    std::vector<Vec3> points;
    /// Rays that reached max_range without a hit; their endpoints certify free space.
    std::vector<Vec3> free_endpoints;
    double max_range = 20.0;
    double fov_solid_angle = 0.0;
    /// Per-ray return distance (hit distance or max_range) and solid angle, for v_sensor.
    std::vector<float> ray_ranges;
    double ray_solid_angle = 0.0;
};

PointCloud sense(const GroundTruth& gt, const Vec3& pose, const Vec3& heading,
                 const SensorModel& sensor = {});

/// One mean point per occupied cubic cell of side p0, cells aligned to `anchor` (pass the
/// map origin so a cell is exactly one map voxel and a mean never lands in a neighbour).
/// Free endpoints keep the first real endpoint per cell; ray metadata is kept.
PointCloud downsample_cloud(const PointCloud& cloud, double p0, const Vec3& anchor = {});

struct InsertionBudget {
    double p0 = 0.3;
    double v0 = 46000.0;
};

struct IntegrationResult {
    /// Volume of distinct voxels touched this scan (counted against v0).
    double integrated_volume = 0.0;
    /// Ray-swept volume with repeats (logged alongside).
    double swept_volume = 0.0;
    std::size_t voxels_touched = 0;
    std::size_t rays_used = 0;
    std::size_t rays_total = 0;
    std::size_t new_occupied = 0;
    bool truncated = false;
};

/// Inserts the cloud at precision p0 under the volume budget v0. Rays are taken in
/// ascending distance of their endpoint to `reference` (or to the cloud origin when
/// empty). Integration stops before the voxel that would push the touched volume
/// above v0, so integrated_volume <= v0 always.
IntegrationResult integrate(OccupancyTree& tree, const PointCloud& cloud,
                            const InsertionBudget& budget, std::span<const Vec3> reference);

/// x,y,z per row
void write_cloud_csv(std::ostream& os, const PointCloud& cloud);

}  // namespace roborun
