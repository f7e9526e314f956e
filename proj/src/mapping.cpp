#include "roborun/mapping.hpp"
#include "roborun/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <unordered_map>

namespace roborun {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;

int azimuth_rays(const SensorModel& s) {
    return std::max(1, static_cast<int>(std::lround(s.frusta * 90.0 / s.azimuth_step_deg)));
}
}  // namespace

double SensorModel::azimuth_span_rad() const { return std::min(frusta, 4) * 90.0 * kDeg; }

double SensorModel::fov_solid_angle() const {
    return azimuth_span_rad() * 2.0 * std::sin(1.5 * ring_elevation_deg * kDeg);
}

double SensorModel::ray_solid_angle() const { return fov_solid_angle() / (3.0 * azimuth_rays(*this)); }

double SensorModel::frustum_volume() const {
    return fov_solid_angle() * max_range * max_range * max_range / 3.0;
}

PointCloud sense(const GroundTruth& gt, const Vec3& pose, const Vec3& heading,
                 const SensorModel& sensor) {
    PointCloud cloud;
    cloud.origin = pose;
    cloud.max_range = sensor.max_range;
    cloud.fov_solid_angle = sensor.fov_solid_angle();
    cloud.ray_solid_angle = sensor.ray_solid_angle();

    const int n_az = azimuth_rays(sensor);
    const double span = sensor.azimuth_span_rad();
    const double step = span / n_az;
    const double yaw = (heading.x == 0.0 && heading.y == 0.0) ? 0.0 : std::atan2(heading.y, heading.x);
    cloud.ray_ranges.reserve(3 * static_cast<std::size_t>(n_az));

    for (int ring = -1; ring <= 1; ++ring) {
        const double el = ring * sensor.ring_elevation_deg * kDeg;
        const double ce = std::cos(el), se = std::sin(el);
        for (int k = 0; k < n_az; ++k) {
            const double az = yaw - span / 2.0 + (k + 0.5) * step;
            const Vec3 dir{ce * std::cos(az), ce * std::sin(az), se};
            const auto hit = gt.raycast(pose, dir, sensor.max_range);
            if (hit) {
                cloud.points.push_back(pose + dir * *hit);
                cloud.ray_ranges.push_back(static_cast<float>(*hit));
            } else {
                cloud.free_endpoints.push_back(pose + dir * sensor.max_range);
                cloud.ray_ranges.push_back(static_cast<float>(sensor.max_range));
            }
        }
    }
    return cloud;
}

namespace {
struct CellKey {
    long long x, y, z;
    auto operator<=>(const CellKey&) const = default;
};

std::vector<Vec3> reduce_per_cell(const std::vector<Vec3>& pts, double p0, const Vec3& anchor, bool mean) {
    // insertion order is kept so output order is a pure function of input order
    std::map<CellKey, std::size_t> index;
    std::vector<Vec3> sums;
    std::vector<int> counts;
    for (const Vec3& p : pts) {
        const CellKey k{static_cast<long long>(std::floor((p.x - anchor.x) / p0)),
                        static_cast<long long>(std::floor((p.y - anchor.y) / p0)),
                        static_cast<long long>(std::floor((p.z - anchor.z) / p0))};
        auto [it, inserted] = index.try_emplace(k, sums.size());
        if (inserted) {
            sums.push_back(p);
            counts.push_back(1);
        } else if (mean) {
            sums[it->second] += p;
            ++counts[it->second];
        }
    }
    for (std::size_t i = 0; i < sums.size(); ++i)
        if (counts[i] > 1) sums[i] = sums[i] / counts[i];
    return sums;
}
}  // namespace

PointCloud downsample_cloud(const PointCloud& cloud, double p0, const Vec3& anchor) {
    PointCloud out = cloud;
    out.points = reduce_per_cell(cloud.points, p0, anchor, true);
    // a mean of free endpoints is a ray nobody cast (it can cut through an obstacle's
    // shadow), so free space keeps one real endpoint per cell instead
    out.free_endpoints = reduce_per_cell(cloud.free_endpoints, p0, anchor, false);
    return out;
}

IntegrationResult integrate(OccupancyTree& tree, const PointCloud& cloud,
                            const InsertionBudget& budget, std::span<const Vec3> reference) {
    IntegrationResult res;
    const int level = tree.level_for(budget.p0);
    const double p0 = tree.size_at(level);
    const double vox = p0 * p0 * p0;
    const auto max_voxels = static_cast<std::size_t>(std::floor(budget.v0 / vox + 1e-9));

    struct Ray {
        double key;
        std::size_t idx;
        bool hit;
    };
    std::vector<Ray> rays;
    rays.reserve(cloud.points.size() + cloud.free_endpoints.size());
    const Vec3 origin_arr[1] = {cloud.origin};
    const std::span<const Vec3> ref = reference.empty() ? std::span<const Vec3>(origin_arr) : reference;
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
        rays.push_back({polyline_distance(ref, cloud.points[i]), i, true});
    for (std::size_t i = 0; i < cloud.free_endpoints.size(); ++i)
        rays.push_back({polyline_distance(ref, cloud.free_endpoints[i]), i, false});
    std::sort(rays.begin(), rays.end(), [](const Ray& a, const Ray& b) {
        if (a.key != b.key) return a.key < b.key;
        if (a.hit != b.hit) return a.hit;
        return a.idx < b.idx;
    });
    res.rays_total = rays.size();
    if (max_voxels == 0) {
        res.truncated = !rays.empty();
        return res;
    }

    // touched voxels in first-touch order; value = occupied this scan
    std::unordered_map<std::uint64_t, std::size_t> seen;
    std::vector<std::pair<VoxelKey, bool>> touched;
    seen.reserve(std::min<std::size_t>(max_voxels, 1u << 16));

    auto touch = [&](const VoxelKey& k, bool occ) -> bool {
        auto it = seen.find(k.packed());
        if (it != seen.end()) {
            if (occ) touched[it->second].second = true;
            return true;
        }
        if (touched.size() >= max_voxels) return false;
        seen.emplace(k.packed(), touched.size());
        touched.push_back({k, occ});
        return true;
    };

    std::size_t swept = 0;
    for (const Ray& r : rays) {
        const Vec3 end = r.hit ? cloud.points[r.idx] : cloud.free_endpoints[r.idx];
        const Vec3 d = end - cloud.origin;
        const double len = d.norm();
        const Vec3 u = len > 0.0 ? d / len : Vec3{};
        bool have_prev = false;
        VoxelKey prev{};
        bool ok = true;
        for (double t = 0.0; t < len && ok; t += p0) {
            VoxelKey k;
            if (!tree.key_of(cloud.origin + u * t, k)) continue;
            k = k.at_level(level);
            if (have_prev && k == prev) continue;
            have_prev = true;
            prev = k;
            ++swept;
            ok = touch(k, false);
        }
        if (ok) {
            VoxelKey k;
            if (tree.key_of(end, k)) {
                k = k.at_level(level);
                if (!have_prev || !(k == prev)) ++swept;
                ok = touch(k, r.hit);
            }
        }
        if (!ok) {
            res.truncated = true;
            break;
        }
        ++res.rays_used;
    }

    for (const auto& [k, occ] : touched)
        if (!occ) tree.mark_free(k, level);
    for (const auto& [k, occ] : touched) {
        if (!occ) continue;
        if (tree.query_key(k, level) != Occupancy::Occupied) ++res.new_occupied;
        tree.mark_occupied(k, level);
    }

    res.voxels_touched = touched.size();
    res.integrated_volume = static_cast<double>(touched.size()) * vox;
    res.swept_volume = static_cast<double>(swept) * vox;
    return res;
}

void write_cloud_csv(std::ostream& os, const PointCloud& cloud) {
    os << "x,y,z\n" << std::setprecision(10);
    for (const Vec3& p : cloud.points) os << p.x << ',' << p.y << ',' << p.z << '\n';
}

}  // namespace roborun
