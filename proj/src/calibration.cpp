#include "roborun/calibration.hpp"
#include "roborun/mapping.hpp"
#include "roborun/planning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

namespace roborun {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// deep enough that a 9.6 m workload of ~70 voxels radius still fits
constexpr int kDepth = 13;
constexpr double kRangeVoxels = 60.0;

OccupancyTree centered_tree() {
    const double half = 0.3 * static_cast<double>(1u << kDepth) / 2.0;
    return OccupancyTree({-half, -half, -half}, 0.3, kDepth);
}

double perception(double p, double v) {
    const auto count = v / (p * p * p);
    const int rays = std::max(64, static_cast<int>(count / 25.0));
    PointCloud cloud;
    cloud.origin = {p / 2, p / 2, p / 2};
    const double r = kRangeVoxels * p;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < rays; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / rays;
        const double rho = std::sqrt(1.0 - z * z);
        const Vec3 d{rho * std::cos(golden * i), rho * std::sin(golden * i), z};
        (i % 4 == 0 ? cloud.points : cloud.free_endpoints).push_back(cloud.origin + d * r);
    }
    OccupancyTree tree = centered_tree();
    const auto t0 = Clock::now();
    integrate(tree, cloud, {p, v}, {});
    return seconds_since(t0);
}

double handoff_stage(double p, double v) {
    const auto count = v / (p * p * p);
    OccupancyTree tree = centered_tree();
    const int level = tree.level_for(p);
    const int side = static_cast<int>(std::ceil(std::cbrt(1.5 * count)));
    VoxelKey c0;
    tree.key_of({0, 0, 0}, c0);
    c0 = c0.at_level(level);
    int n = 0;
    for (int x = 0; x < side; ++x)
        for (int y = 0; y < side; ++y)
            for (int z = 0; z < side; ++z) {
                const VoxelKey k{c0.x + x - side / 2, c0.y + y - side / 2, c0.z + z - side / 2};
                if (++n % 7 == 0) tree.mark_occupied(k, level);
                else tree.mark_free(k, level);
            }
    const auto t0 = Clock::now();
    const PlannerView view = handoff(tree, p, v, {0, 0, 0});
    const double dt = seconds_since(t0);
    (void)view;
    return dt;
}

double planning_stage(double p, double v) {
    const auto count = v / (p * p * p);
    PlannerView view;
    view.tree = centered_tree();
    view.p1 = p;
    const int level = view.tree.level_for(p);
    const int side = static_cast<int>(std::ceil(std::sqrt(3.0 * count)));
    VoxelKey c0;
    const Vec3 start{p / 2, p / 2, p / 2};
    view.tree.key_of(start, c0);
    c0 = c0.at_level(level);
    for (int x = 0; x < side; ++x)
        for (int y = 0; y < side; ++y)
            view.tree.set_node({c0.x + x - side / 2, c0.y + y - side / 2, c0.z}, level, Occupancy::Free);
    PlannerConfig cfg;
    cfg.max_iterations = 1 << 30;
    const Vec3 goal{1e4, 0, start.z};
    const auto t0 = Clock::now();
    plan(view, view.tree.center_of(c0, level), goal, {p, v}, 7, cfg);
    return seconds_since(t0);
}

}  // namespace

std::array<StageExecutor, 3> real_executors() { return {perception, handoff_stage, planning_stage}; }

CalibrationResult calibrate(const std::array<StageExecutor, 3>& executors, const CalibrationConfig& cfg) {
    CalibrationResult res;
    double mse_sum = 0.0;
    std::size_t cells = 0;
    std::ostringstream diag;
    for (int stage = 0; stage < 3; ++stage) {
        std::vector<LatencySample> medians;
        for (double p : cfg.grid.precisions) {
            for (double count : cfg.grid.voxel_counts[static_cast<std::size_t>(stage)]) {
                const double v = count * p * p * p;
                std::vector<double> lat;
                for (int rep = 0; rep < cfg.grid.repetitions; ++rep) {
                    const double t = executors[static_cast<std::size_t>(stage)](p, v);
                    lat.push_back(t);
                    res.samples.push_back({stage, p, v, t});
                    res.sample_rep.push_back(rep);
                }
                std::nth_element(lat.begin(), lat.begin() + static_cast<long>(lat.size() / 2), lat.end());
                medians.push_back({stage, p, v, lat[lat.size() / 2]});
            }
        }
        StageFit fit = fit_stage(medians, cfg.fit_q3);
        const auto& w = medians[fit.worst];
        diag << stage_name(stage) << ": mse " << fit.mse << ", worst cell p=" << w.p << " v=" << w.v
             << " rel.err=" << fit.worst_error << '\n';
        fit.q[3] *= cfg.latency_scale;
        res.fits[static_cast<std::size_t>(stage)] = fit;
        res.model.q[static_cast<std::size_t>(stage)] = fit.q;
        res.model.stage_mse[static_cast<std::size_t>(stage)] = fit.mse;
        mse_sum += fit.mse * static_cast<double>(medians.size());
        cells += medians.size();
    }
    res.model.fit_mse = cells ? mse_sum / static_cast<double>(cells) : 0.0;
    if (!(res.model.fit_mse < cfg.mse_limit))
        throw CalibrationError("latency fit mse " + std::to_string(res.model.fit_mse) + " >= " +
                               std::to_string(cfg.mse_limit) + "\n" + diag.str());
    return res;
}

void write_calibration_csv(std::ostream& os, const CalibrationResult& r) {
    os << "stage,p,v,rep,latency_s\n" << std::setprecision(10);
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        const auto& s = r.samples[i];
        os << stage_name(s.stage) << ',' << s.p << ',' << s.v << ',' << r.sample_rep[i] << ',' << s.latency << '\n';
    }
}

}  // namespace roborun
