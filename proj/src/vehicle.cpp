#include "roborun/vehicle.hpp"

#include <algorithm>
#include <cmath>

namespace roborun {

double d_stop(double v) { return 0.055 * v * v + 0.36 * v + 0.20; }

VehicleState step(const VehicleState& state, const Trajectory& traj, double dt, std::vector<Vec3>* trace) {
    VehicleState s = state;
    if (traj.waypoints.size() < 2 || dt <= 0.0) return s;
    const double total = traj.total_length();
    if (total <= 0.0) return s;

    constexpr double kSub = 0.05;
    const int n = std::max(1, static_cast<int>(std::ceil(dt / kSub - 1e-9)));
    const double h = dt / n;
    const double a = s.a_max;
    for (int i = 0; i < n; ++i) {
        const double rem = total - s.arc;
        if (rem <= 1e-9) {
            s.arc = total;
            s.velocity = 0.0;
            break;
        }
        const double target = std::min({s.speed_limit, s.v_max, std::sqrt(2.0 * a * rem)});
        double v1;
        double disp;
        if (s.velocity < target) {
            const double t_acc = std::min(h, (target - s.velocity) / a);
            disp = s.velocity * t_acc + 0.5 * a * t_acc * t_acc + target * (h - t_acc);
            v1 = s.velocity + a * t_acc;
        } else {
            const double t_dec = std::min(h, (s.velocity - target) / a);
            disp = s.velocity * t_dec - 0.5 * a * t_dec * t_dec + target * (h - t_dec);
            v1 = s.velocity - a * t_dec;
        }
        s.arc += disp;
        s.velocity = v1;
        if (s.arc >= total - 1e-9) {
            s.arc = total;
            s.velocity = 0.0;
        }
        if (trace) trace->push_back(traj.point_at(s.arc));
        if (s.arc >= total) break;
    }
    const Vec3 before = s.position;
    s.position = traj.point_at(s.arc);
    const Vec3 d = s.position - before;
    if (d.norm() > 1e-9) s.heading = d.normalized();
    return s;
}

namespace {
// distance from p to the solid cylinder
double cylinder_distance(const Obstacle& o, const Vec3& p) {
    const double radial = std::max(0.0, std::hypot(p.x - o.center.x, p.y - o.center.y) - o.radius);
    const double vertical = std::max({0.0, o.center.z - p.z, p.z - (o.center.z + o.height)});
    return std::hypot(radial, vertical);
}
}  // namespace

bool check_collision(const GroundTruth& gt, const Vec3& a, const Vec3& b, double body_radius) {
    const double pad = body_radius + gt.grid_size();
    const Vec3 lo{std::min(a.x, b.x) - pad, std::min(a.y, b.y) - pad, 0.0};
    const Vec3 hi{std::max(a.x, b.x) + pad, std::max(a.y, b.y) + pad, 0.0};
    std::vector<std::size_t> cand;
    gt.candidates(lo, hi, cand);
    for (std::size_t idx : cand) {
        const Obstacle& o = gt.obstacles()[idx];
        const double zlo = std::min(a.z, b.z), zhi = std::max(a.z, b.z);
        double dmin;
        if (zlo >= o.center.z && zhi <= o.center.z + o.height) {
            // entirely within the pillar's height band: 2-D segment-to-axis distance
            const Vec3 a2{a.x, a.y, 0.0}, b2{b.x, b.y, 0.0}, c2{o.center.x, o.center.y, 0.0};
            dmin = std::max(0.0, point_segment_distance(c2, a2, b2) - o.radius);
        } else {
            // convex in the segment parameter; golden-section search
            double l = 0.0, r = 1.0;
            const double g = (std::sqrt(5.0) - 1.0) / 2.0;
            for (int it = 0; it < 100; ++it) {
                const double m1 = r - g * (r - l), m2 = l + g * (r - l);
                if (cylinder_distance(o, a + (b - a) * m1) < cylinder_distance(o, a + (b - a) * m2))
                    r = m2;
                else
                    l = m1;
            }
            dmin = cylinder_distance(o, a + (b - a) * ((l + r) / 2.0));
        }
        if (dmin < body_radius) return true;
    }
    return false;
}

double mission_energy(double flight_time, const EnergyModel& model) {
    return model.hover_power * flight_time;
}

}  // namespace roborun
