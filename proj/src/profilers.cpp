#include "roborun/profilers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

namespace roborun {

namespace {
struct Dsu {
    std::vector<int> parent;
    explicit Dsu(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

double dxy(const Vec3& a, const Vec3& b) { return std::hypot(a.x - b.x, a.y - b.y); }
}  // namespace

GapProfile profile_gaps(const PointCloud& cloud, const Vec3& pose, const Vec3& heading, double vox_min) {
    GapProfile out;
    const auto& pts = cloud.points;
    const int n = static_cast<int>(pts.size());
    if (n == 0) return out;
    const double link = 2.0 * vox_min;

    // bucket grid for the linkage pass
    std::map<std::pair<long, long>, std::vector<int>> grid;
    for (int i = 0; i < n; ++i)
        grid[{static_cast<long>(std::floor(pts[i].x / link)), static_cast<long>(std::floor(pts[i].y / link))}]
            .push_back(i);
    Dsu dsu(n);
    for (int i = 0; i < n; ++i) {
        const long cx = static_cast<long>(std::floor(pts[i].x / link));
        const long cy = static_cast<long>(std::floor(pts[i].y / link));
        for (long gx = cx - 1; gx <= cx + 1; ++gx)
            for (long gy = cy - 1; gy <= cy + 1; ++gy) {
                auto it = grid.find({gx, gy});
                if (it == grid.end()) continue;
                for (int j : it->second)
                    if (j > i && dxy(pts[i], pts[j]) <= link) dsu.unite(i, j);
            }
    }

    std::map<int, int> label;
    std::vector<std::vector<int>> clusters;
    std::vector<bool> forward;
    const Vec3 h{heading.x, heading.y, 0.0};
    for (int i = 0; i < n; ++i) {
        const int r = dsu.find(i);
        auto [it, inserted] = label.try_emplace(r, static_cast<int>(clusters.size()));
        if (inserted) {
            clusters.emplace_back();
            forward.push_back(false);
        }
        clusters[it->second].push_back(i);
        const Vec3 d{pts[i].x - pose.x, pts[i].y - pose.y, 0.0};
        if (d.dot(h) > 0.0 || h.norm() == 0.0) forward[it->second] = true;
    }

    std::vector<int> ids;
    for (int c = 0; c < static_cast<int>(clusters.size()); ++c)
        if (forward[c]) ids.push_back(c);
    out.clusters = static_cast<int>(ids.size());
    const int m = out.clusters;
    if (m < 2) return out;

    std::vector<double> w(static_cast<std::size_t>(m) * m, kInf);
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) {
            double best = kInf;
            for (int i : clusters[ids[a]])
                for (int j : clusters[ids[b]]) best = std::min(best, dxy(pts[i], pts[j]));
            w[a * m + b] = w[b * m + a] = best;
        }

    // Prim
    std::vector<bool> in(m, false);
    std::vector<double> key(m, kInf);
    key[0] = 0.0;
    double sum = 0.0, mn = kInf;
    for (int k = 0; k < m; ++k) {
        int u = -1;
        for (int v = 0; v < m; ++v)
            if (!in[v] && (u < 0 || key[v] < key[u])) u = v;
        in[u] = true;
        if (k > 0) {
            sum += key[u];
            mn = std::min(mn, key[u]);
        }
        for (int v = 0; v < m; ++v)
            if (!in[v]) key[v] = std::min(key[v], w[u * m + v]);
    }
    out.g_min = mn;
    out.g_avg = sum / (m - 1);
    return out;
}

DistanceProfile profile_distances(const OccupancyTree& tree, const Vec3& pose, const Trajectory& traj) {
    DistanceProfile out;
    out.d_obs = tree.nearest_occupied_distance(pose);
    if (traj.waypoints.empty()) return out;
    const double h = tree.vox_min() / 2.0;
    double acc = 0.0;
    const auto& w = traj.waypoints;
    if (tree.query_level(w.front().position, 0) != Occupancy::Free) return out;
    for (std::size_t i = 1; i < w.size(); ++i) {
        const Vec3& a = w[i - 1].position;
        const Vec3& b = w[i].position;
        const double seg = distance(a, b);
        for (double t = h; t < seg + h; t += h) {
            const double tt = std::min(t, seg);
            if (tree.query_level(a + (b - a) * (seg > 0.0 ? tt / seg : 0.0), 0) != Occupancy::Free) {
                out.d_unknown = acc + tt;
                return out;
            }
            if (tt >= seg) break;
        }
        acc += seg;
    }
    out.d_unknown = acc;
    return out;
}

VolumeProfile profile_volumes(const OccupancyTree& tree, const PointCloud& cloud) {
    VolumeProfile out;
    out.v_map = tree.known_volume();
    if (cloud.ray_ranges.empty()) {
        const double fov = cloud.fov_solid_angle > 0.0 ? cloud.fov_solid_angle : SensorModel{}.fov_solid_angle();
        const double r = cloud.max_range;
        out.v_sensor = fov * r * r * r / 3.0;
        return out;
    }
    double v = 0.0;
    for (float r : cloud.ray_ranges) v += static_cast<double>(r) * r * r;
    out.v_sensor = cloud.ray_solid_angle * v / 3.0;
    return out;
}

std::string snapshot_csv_header() {
    return "g_min,g_avg,d_obs,d_unknown,v_sensor,v_map,velocity,x,y,z,traj_length";
}

std::string snapshot_csv_row(const ProfileSnapshot& s) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g", s.g_min, s.g_avg,
                  s.d_obs, s.d_unknown, s.v_sensor, s.v_map, s.velocity, s.position.x, s.position.y,
                  s.position.z, s.trajectory.total_length());
    return buf;
}

}  // namespace roborun
