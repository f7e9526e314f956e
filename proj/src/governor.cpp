#include "roborun/governor.hpp"
#include "roborun/vehicle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace roborun {

double local_budget(double d, double v) {
    if (v <= 0.0) v = kHoverSpeed;
    return std::max(0.0, (d - d_stop(v)) / v);
}

double time_budget(std::span<const double> local_budgets, std::span<const double> flight_times) {
    if (local_budgets.empty()) return 0.0;
    double b_g = 0.0;
    double b_r = local_budgets[0];
    const std::size_t n = std::min(local_budgets.size() - 1, flight_times.size());
    for (std::size_t i = 1; i <= n; ++i) {
        b_r -= flight_times[i - 1];
        const double b_l = local_budgets[i];
        b_r = std::min(b_r, b_l);
        if (b_r <= 0.0) break;
        b_g += flight_times[i - 1];
    }
    return b_g;
}

double time_budget(const Trajectory& traj, const ProfileSnapshot& snapshot) {
    const auto& w = traj.waypoints;
    if (w.empty()) return 0.0;
    std::vector<double> budgets{local_budget(snapshot.d_unknown, snapshot.velocity)};
    std::vector<double> times;
    budgets.reserve(w.size());
    times.reserve(w.size());
    for (std::size_t i = 1; i < w.size(); ++i) {
        const double v_seg = std::max(kHoverSpeed, 0.5 * (w[i - 1].planned_velocity + w[i].planned_velocity));
        times.push_back(distance(w[i - 1].position, w[i].position) / v_seg);
        budgets.push_back(local_budget(w[i].planned_visibility, w[i].planned_velocity));
    }
    return time_budget(budgets, times);
}

const char* stage_name(int stage) {
    switch (stage) {
        case kPerception: return "perception";
        case kHandoff: return "handoff";
        case kPlanning: return "planning";
    }
    return "?";
}

double stage_rate(const LatencyModel& model, int stage, double p) {
    const auto& q = model.q.at(static_cast<std::size_t>(stage));
    const double ph = 1.0 / p;
    return (q[0] * ph * ph * ph + q[1] * ph * ph + q[2] * ph) * q[3];
}

double stage_latency(const LatencyModel& model, int stage, double p, double v) {
    return stage_rate(model, stage, p) * v;
}

void write_model(std::ostream& os, const LatencyModel& model) {
    os << std::setprecision(12);
    for (const auto& q : model.q) os << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << '\n';
    os << "mse " << model.fit_mse << '\n';
}

LatencyModel read_model(std::istream& is) {
    LatencyModel m;
    std::string line;
    int row = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        if (line.rfind("mse", 0) == 0) {
            std::string tag;
            ls >> tag >> m.fit_mse;
            continue;
        }
        if (row >= 3) throw std::runtime_error("model file: too many coefficient rows");
        auto& q = m.q[static_cast<std::size_t>(row)];
        if (!(ls >> q[0] >> q[1] >> q[2] >> q[3])) throw std::runtime_error("model file: bad row: " + line);
        ++row;
    }
    if (row != 3) throw std::runtime_error("model file: expected 3 coefficient rows");
    return m;
}

LatencyModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path.string() + " (run `roborun calibrate`)");
    return read_model(in);
}

void save_model(const std::filesystem::path& path, const LatencyModel& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_model(out, model);
}

StageFit fit_stage(std::span<const LatencySample> samples, double q3) {
    StageFit fit;
    const auto n = static_cast<Eigen::Index>(samples.size());
    if (n == 0) return fit;
    // relative residual: (a·c - y)/y  ->  rows a/y, target 1
    Eigen::MatrixXd A(n, 3);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& s = samples[static_cast<std::size_t>(r)];
        const double ph = 1.0 / s.p;
        const double base = q3 * s.v / s.latency;
        A(r, 0) = ph * ph * ph * base;
        A(r, 1) = ph * ph * base;
        A(r, 2) = ph * base;
    }
    const Eigen::VectorXd b = Eigen::VectorXd::Ones(n);

    // exact NNLS for three unknowns: best feasible least-squares solution over active sets
    Eigen::Vector3d best = Eigen::Vector3d::Zero();
    double best_res = b.squaredNorm();
    for (int mask = 1; mask < 8; ++mask) {
        std::vector<int> cols;
        for (int k = 0; k < 3; ++k)
            if (mask & (1 << k)) cols.push_back(k);
        Eigen::MatrixXd As(n, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) As.col(static_cast<Eigen::Index>(c)) = A.col(cols[c]);
        const Eigen::VectorXd x = As.colPivHouseholderQr().solve(b);
        if ((x.array() < 0.0).any()) continue;
        Eigen::Vector3d full = Eigen::Vector3d::Zero();
        for (std::size_t c = 0; c < cols.size(); ++c) full[cols[c]] = x[static_cast<Eigen::Index>(c)];
        const double res = (A * full - b).squaredNorm();
        if (res < best_res - 1e-15) {
            best_res = res;
            best = full;
        }
    }
    fit.q = {best[0], best[1], best[2], q3};
    const Eigen::VectorXd rel = A * best - b;
    fit.mse = rel.squaredNorm() / static_cast<double>(n);
    Eigen::Index worst = 0;
    rel.cwiseAbs().maxCoeff(&worst);
    fit.worst = static_cast<std::size_t>(worst);
    fit.worst_error = rel[worst];
    return fit;
}

double volume_bound(const ProfileSnapshot& s) { return std::min(s.v_sensor, s.v_map + s.v_sensor); }

double gap_floor(const ProfileSnapshot& s, const SolverConfig& cfg) {
    return s.g_min >= kGapSentinel ? cfg.open_space_floor : s.g_min;
}

namespace {

constexpr double kTol = 1e-9;

// t_k = min(w_k λ, cap_k) with Σ t_k = T; all caps when they cannot reach T.
std::vector<double> water_fill(const std::vector<double>& w, const std::vector<double>& cap, double T) {
    const std::size_t n = w.size();
    std::vector<double> t(n, 0.0);
    if (T <= 0.0) return t;
    double total_cap = 0.0;
    for (double c : cap) total_cap += c;
    if (total_cap <= T) return cap;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cap[a] / w[a] < cap[b] / w[b]; });
    double rem = T, wsum = 0.0;
    for (double x : w) wsum += x;
    std::size_t k = 0;
    for (; k < n; ++k) {
        const std::size_t i = order[k];
        const double lam = rem / wsum;
        if (w[i] * lam <= cap[i]) break;
        t[i] = cap[i];
        rem -= cap[i];
        wsum -= w[i];
    }
    const double lam = wsum > 0.0 ? rem / wsum : 0.0;
    for (; k < n; ++k) t[order[k]] = w[order[k]] * lam;
    return t;
}

struct Volumes {
    double v0 = 0, v1 = 0, v2 = 0;
    double latency = 0;
};

Volumes fill_volumes(double a0, double a1, double a2, double V01, double V2, double T) {
    Volumes out;
    if (T <= 0.0) return out;
    auto vol = [](double t, double a, double cap) { return a > 0.0 ? std::min(cap, t / a) : cap; };
    const double c0 = a0 * V01, c1 = a1 * V01, c2 = a2 * V2;
    auto t = water_fill({1.0, 1.0, 1.0}, {c0, c1, c2}, T);
    out.v0 = vol(t[0], a0, V01);
    out.v1 = vol(t[1], a1, V01);
    out.v2 = vol(t[2], a2, V2);
    if (out.v0 > out.v1) {
        // pool perception and handoff at a common volume (two shares of time)
        const auto tp = water_fill({2.0, 1.0}, {(a0 + a1) * V01, c2}, T);
        const double ap = a0 + a1;
        out.v0 = out.v1 = vol(tp[0], ap, V01);
        out.v2 = vol(tp[1], a2, V2);
    }
    out.latency = a0 * out.v0 + a1 * out.v1 + a2 * out.v2;
    if (out.latency > T) {
        // rounding guard for the hard deadline filter
        const double s = T / out.latency;
        out.v0 *= s;
        out.v1 *= s;
        out.v2 *= s;
        out.latency = a0 * out.v0 + a1 * out.v1 + a2 * out.v2;
    }
    return out;
}

}  // namespace

KnobPolicy solve(const ProfileSnapshot& snap, double deadline, const LatencyModel& model, const SolverConfig& cfg) {
    const double T = std::max(0.0, deadline);
    const double V01 = std::max(0.0, volume_bound(snap));
    const double V2 = cfg.v2_cap;
    const double hi0 = std::min(snap.g_avg, snap.d_obs);
    // no gap observed: the sentinel relaxes the upper bound only
    const double lo0 = gap_floor(snap, cfg);

    KnobPolicy best;
    best.deadline = deadline;
    best.budget_infeasible = deadline <= 0.0;
    bool found = false;
    double best_obj = kInf;

    auto consider = [&](double p0, double p1) {
        const Volumes v = fill_volumes(stage_rate(model, kPerception, p0), stage_rate(model, kHandoff, p1),
                                       stage_rate(model, kPlanning, p1), V01, V2, T);
        const double obj = (T - v.latency) * (T - v.latency);
        const double eps = 1e-12 * (1.0 + T * T);
        // enumeration order already prefers smaller p0, then smaller p1; each pair has
        // one water-filled volume set, so the Σv tie-break never triggers between pairs
        if (!found || obj < best_obj - eps) {
            found = true;
            best_obj = obj;
            best.p0 = p0;
            best.p1 = best.p2 = p1;
            best.v0 = v.v0;
            best.v1 = v.v1;
            best.v2 = v.v2;
            best.predicted_latency = v.latency;
            best.objective = obj;
        }
    };

    for (double p0 : cfg.precisions) {
        if (p0 < lo0 - kTol || p0 > hi0 + kTol) continue;
        for (double p1 : cfg.precisions) {
            if (p1 < p0) continue;
            consider(p0, p1);
        }
    }
    if (!found) {
        // no admissible perception precision: the finest level still under the clearance
        // bounds, so the vehicle never ends up inside a coarse Occupied cell
        double p = cfg.precisions.front();
        for (double c : cfg.precisions)
            if (c <= hi0 + kTol) p = c;
        consider(p, p);
        best.degraded = true;
    }
    return best;
}

std::vector<std::string> check_policy(const KnobPolicy& k, const ProfileSnapshot& s, const LatencyModel& model,
                                      const SolverConfig& cfg) {
    std::vector<std::string> bad;
    auto on_ladder = [&](double p) {
        return std::any_of(cfg.precisions.begin(), cfg.precisions.end(),
                           [&](double c) { return std::abs(c - p) <= kTol * c; });
    };
    if (!on_ladder(k.p0)) bad.push_back("p0 not on ladder");
    if (!on_ladder(k.p1)) bad.push_back("p1 not on ladder");
    if (!on_ladder(k.p2)) bad.push_back("p2 not on ladder");
    if (k.p1 != k.p2) bad.push_back("p1 != p2");
    if (k.p0 < gap_floor(s, cfg) - kTol) bad.push_back("p0 < g_min");
    if (k.p0 > k.p1 + kTol) bad.push_back("p0 > p1");
    if (k.p0 > s.g_avg + kTol) bad.push_back("p0 > g_avg");
    if (k.p0 > s.d_obs + kTol) bad.push_back("p0 > d_obs");
    if (k.v0 < 0.0 || k.v1 < 0.0 || k.v2 < 0.0) bad.push_back("negative volume");
    const double V = volume_bound(s);
    if (k.v0 > k.v1 * (1 + 1e-12) + 1e-12) bad.push_back("v0 > v1");
    if (k.v1 > V * (1 + 1e-12) + 1e-12) bad.push_back("v1 > min(v_sensor, v_map)");
    if (k.v2 > cfg.v2_cap * (1 + 1e-12)) bad.push_back("v2 > cap");
    const double lat = stage_latency(model, kPerception, k.p0, k.v0) + stage_latency(model, kHandoff, k.p1, k.v1) +
                       stage_latency(model, kPlanning, k.p2, k.v2);
    if (lat > std::max(0.0, k.deadline) * (1 + 1e-9) + 1e-12) bad.push_back("latency exceeds deadline");
    return bad;
}

}  // namespace roborun
