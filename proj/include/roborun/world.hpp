#pragma once

#include "roborun/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace roborun {

/// Vertical pillar standing on the ground plane.
struct Obstacle {
    Vec3 center;  // base center; z is the ground height
    double radius = 0.0;
    double height = 0.0;
};

/// Generator knobs for one environment.
///
/// `spread_m` and `goal_distance_m` hold the full-scale table values; the
/// effective (simulated) distances are those multiplied by `scale`. Grid, gap
/// and arena quantities are already in simulated meters.
struct EnvSpec {
    double obstacle_density = 0.45;
    double spread_m = 80.0;
    double goal_distance_m = 900.0;
    double scale = 0.1;
    double grid_size_m = 2.0;
    double gap_size_m = 2.0;
    std::uint64_t seed = 1;
    /// Explicit centroids; derived from start/goal placement when empty.
    std::vector<Vec3> centroid_positions;
    /// Explicit arena; derived from the goal distance and spread when unset.
    std::optional<Aabb> arena_bounds;
    double flight_altitude_m = 2.0;
    double arena_height_m = 10.0;

    double spread() const { return spread_m * scale; }
    double goal_distance() const { return goal_distance_m * scale; }
    double pillar_radius() const { return grid_size_m / 4.0; }
};

enum class Zone { A, B, C };

const char* zone_name(Zone z);

/// Immutable result of environment generation.
class GroundTruth {
public:
    GroundTruth() = default;
    GroundTruth(std::vector<Obstacle> obstacles, Vec3 start, Vec3 goal, Aabb arena,
                double grid_size);

    const std::vector<Obstacle>& obstacles() const { return obstacles_; }
    const Vec3& start() const { return start_; }
    const Vec3& goal() const { return goal_; }
    const Aabb& arena() const { return arena_; }
    double grid_size() const { return grid_size_; }

    /// x-coordinates delimiting zone A | B | C.
    std::vector<double> zone_boundaries;
    std::vector<Vec3> centroids;
    double spread = 0.0;
    /// Smallest surface-to-surface distance between two pillars (inf if < 2 pillars).
    double measured_min_gap = kInf;

    Zone zone_of(const Vec3& p) const;

    /// First pillar hit along origin + t*dir (dir need not be unit) for t in (0, t_max].
    /// Returns the ray parameter of the hit.
    std::optional<double> raycast(const Vec3& origin, const Vec3& dir, double t_max) const;

    /// Index of obstacles whose disk may intersect the xy box [lo, hi].
    void candidates(const Vec3& lo, const Vec3& hi, std::vector<std::size_t>& out) const;

private:
    void build_index();
    long bucket_x(double x) const;
    long bucket_y(double y) const;

    std::vector<Obstacle> obstacles_;
    Vec3 start_;
    Vec3 goal_;
    Aabb arena_;
    double grid_size_ = 1.0;

    double bucket_size_ = 1.0;
    long nbx_ = 0;
    long nby_ = 0;
    std::vector<std::vector<std::uint32_t>> buckets_;
};

/// Derived arena for a spec (explicit bounds win).
Aabb arena_for(const EnvSpec& spec);
Vec3 start_for(const EnvSpec& spec);
Vec3 goal_for(const EnvSpec& spec);
std::vector<Vec3> centroids_for(const EnvSpec& spec);

/// Spawns pillars around each centroid with a truncated radial Gaussian.
/// Throws std::invalid_argument on an invalid spec.
GroundTruth generate_environment(const EnvSpec& spec);

/// Cartesian product of the three difficulty knobs, 27 specs with derived seeds.
std::vector<EnvSpec> suite_27(const EnvSpec& base, std::uint64_t seed);

/// Occupied-cell ratio in a (2*window_cells+1)^2 window of grid cells around `center`.
/// A cell counts as occupied when a pillar center lies in it.
double measure_density(const GroundTruth& gt, const Vec3& center, int window_cells);

// key=value configuration (density, spread_m, goal_distance_m, grid_size_m, gap_size_m, seed, scale)
void write_env_config(std::ostream& os, const EnvSpec& spec);
EnvSpec read_env_config(std::istream& is);
EnvSpec load_env_config(const std::filesystem::path& path);

/// One obstacle per row: cx,cy,cz,r,h
void write_obstacles_csv(std::ostream& os, const GroundTruth& gt);

}  // namespace roborun
