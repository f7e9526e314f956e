#include "roborun/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace roborun {

double Trajectory::total_length() const {
    double len = 0.0;
    for (std::size_t i = 1; i < waypoints.size(); ++i)
        len += distance(waypoints[i - 1].position, waypoints[i].position);
    return len;
}

std::vector<Vec3> Trajectory::positions() const {
    std::vector<Vec3> out;
    out.reserve(waypoints.size());
    for (const auto& w : waypoints) out.push_back(w.position);
    return out;
}

std::vector<double> Trajectory::arc_lengths() const {
    std::vector<double> s(waypoints.size(), 0.0);
    for (std::size_t i = 1; i < waypoints.size(); ++i)
        s[i] = s[i - 1] + distance(waypoints[i - 1].position, waypoints[i].position);
    return s;
}

Vec3 Trajectory::point_at(double s) const {
    if (waypoints.empty()) return {};
    if (s <= 0.0) return waypoints.front().position;
    double acc = 0.0;
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
        const Vec3& a = waypoints[i - 1].position;
        const Vec3& b = waypoints[i].position;
        const double seg = distance(a, b);
        if (acc + seg >= s && seg > 0.0) return a + (b - a) * ((s - acc) / seg);
        acc += seg;
    }
    return waypoints.back().position;
}

double Trajectory::project(const Vec3& p) const {
    if (waypoints.size() < 2) return 0.0;
    double best_d = kInf, best_s = 0.0, acc = 0.0;
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
        const Vec3& a = waypoints[i - 1].position;
        const Vec3& b = waypoints[i].position;
        const Vec3 ab = b - a;
        const double len2 = ab.dot(ab);
        const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        const double d = distance(p, a + ab * t);
        if (d < best_d - 1e-12) {
            best_d = d;
            best_s = acc + t * std::sqrt(len2);
        }
        acc += std::sqrt(len2);
    }
    return best_s;
}

Trajectory Trajectory::tail_from(double s) const {
    Trajectory out;
    out.reaches_goal = reaches_goal;
    if (waypoints.empty()) return out;
    const auto arcs = arc_lengths();
    s = std::clamp(s, 0.0, arcs.back());
    std::size_t i = 0;
    while (i < waypoints.size() && arcs[i] <= s + 1e-9) ++i;
    Waypoint first = i > 0 ? waypoints[i - 1] : waypoints.front();
    first.position = point_at(s);
    out.waypoints.push_back(first);
    for (; i < waypoints.size(); ++i) out.waypoints.push_back(waypoints[i]);
    return out;
}

Trajectory Trajectory::head_to(double s) const {
    Trajectory out;
    if (waypoints.empty()) return out;
    const auto arcs = arc_lengths();
    s = std::clamp(s, 0.0, arcs.back());
    for (std::size_t i = 0; i < waypoints.size() && arcs[i] < s - 1e-9; ++i)
        out.waypoints.push_back(waypoints[i]);
    Waypoint last = waypoints.back();
    last.position = point_at(s);
    if (out.waypoints.empty() || distance(out.waypoints.back().position, last.position) > 1e-9)
        out.waypoints.push_back(last);
    out.reaches_goal = reaches_goal && s >= arcs.back() - 1e-9;
    return out;
}

double polyline_distance(std::span<const Vec3> polyline, const Vec3& p) {
    if (polyline.empty()) return kInf;
    if (polyline.size() == 1) return distance(polyline.front(), p);
    double best = kInf;
    for (std::size_t i = 1; i < polyline.size(); ++i)
        best = std::min(best, point_segment_distance(p, polyline[i - 1], polyline[i]));
    return best;
}

Trajectory densify(const Trajectory& traj, double spacing) {
    Trajectory out;
    out.reaches_goal = traj.reaches_goal;
    if (traj.waypoints.empty()) return out;
    out.waypoints.push_back(traj.waypoints.front());
    for (std::size_t i = 1; i < traj.waypoints.size(); ++i) {
        const Waypoint& a = traj.waypoints[i - 1];
        const Waypoint& b = traj.waypoints[i];
        const double seg = distance(a.position, b.position);
        const int pieces = std::max(1, static_cast<int>(std::ceil(seg / spacing - 1e-9)));
        for (int k = 1; k < pieces; ++k) {
            const double t = static_cast<double>(k) / pieces;
            Waypoint w = b;
            w.position = a.position + (b.position - a.position) * t;
            out.waypoints.push_back(w);
        }
        out.waypoints.push_back(b);
    }
    return out;
}

void apply_trapezoidal_profile(Trajectory& traj, double v_start, double v_max, double a_max) {
    if (traj.waypoints.empty()) return;
    const auto arcs = traj.arc_lengths();
    const double total = arcs.back();
    v_start = std::clamp(v_start, 0.0, v_max);
    for (std::size_t i = 0; i < traj.waypoints.size(); ++i) {
        const double s = arcs[i];
        const double accel = std::sqrt(v_start * v_start + 2.0 * a_max * s);
        const double decel = std::sqrt(std::max(0.0, 2.0 * a_max * (total - s)));
        traj.waypoints[i].planned_velocity = std::min({v_max, accel, decel});
    }
    traj.waypoints.front().planned_velocity = std::min(v_start, traj.waypoints.front().planned_velocity);
    traj.waypoints.back().planned_velocity = 0.0;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t_index,x,y,z,v_planned,visibility_m\n" << std::setprecision(10);
    for (std::size_t i = 0; i < traj.waypoints.size(); ++i) {
        const auto& w = traj.waypoints[i];
        os << i << ',' << w.position.x << ',' << w.position.y << ',' << w.position.z << ','
           << w.planned_velocity << ',' << w.planned_visibility << '\n';
    }
}

}  // namespace roborun
