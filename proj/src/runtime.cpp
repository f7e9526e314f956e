#include "roborun/runtime.hpp"
#include "roborun/profilers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace roborun {

const char* mode_name(ModeKind k) { return k == ModeKind::Baseline ? "baseline" : "roborun"; }

ModeKind parse_mode(const std::string& s) {
    if (s == "baseline" || s == "Baseline") return ModeKind::Baseline;
    if (s == "roborun" || s == "RoboRun") return ModeKind::RoboRun;
    throw std::invalid_argument("unknown mode '" + s + "' (baseline|roborun)");
}

LatencySource parse_latency_source(const std::string& s) {
    if (s == "modeled") return LatencySource::Modeled;
    if (s == "measured") return LatencySource::Measured;
    throw std::invalid_argument("unknown latency source '" + s + "' (modeled|measured)");
}

KnobPolicy static_knobs() {
    KnobPolicy k;
    k.p0 = k.p1 = k.p2 = 0.3;
    k.v0 = 46000.0;
    k.v1 = k.v2 = 150000.0;
    return k;
}

RuntimeMode RuntimeMode::baseline(LatencySource src) {
    RuntimeMode m;
    m.kind = ModeKind::Baseline;
    m.static_policy = static_knobs();
    m.latency_source = src;
    m.v_max = 0.5;
    return m;
}

RuntimeMode RuntimeMode::roborun(LatencySource src) {
    RuntimeMode m;
    m.kind = ModeKind::RoboRun;
    m.static_policy = static_knobs();
    m.latency_source = src;
    m.v_max = 6.0;
    return m;
}

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// largest v in [0, v_max] with local_budget(d, v) >= latency
double command_speed(double d, double latency, double v_max) {
    if (local_budget(d, v_max) >= latency) return v_max;
    double lo = 0.0, hi = v_max;
    if (d <= d_stop(0.0)) return 0.0;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid > 0.0 && local_budget(d, mid) >= latency) lo = mid;
        else hi = mid;
    }
    return lo;
}

// true when an Occupied leaf lies under the body anywhere along the path
bool path_blocked(const OccupancyTree& tree, const Trajectory& traj, double body_radius) {
    const auto& w = traj.waypoints;
    const double step = tree.vox_min();
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        const Vec3& a = w[i].position;
        const Vec3& b = w[i + 1].position;
        const int n = std::max(1, static_cast<int>(std::ceil(distance(a, b) / step)));
        for (int k = 0; k <= n; ++k) {
            const Vec3 p = a + (b - a) * (static_cast<double>(k) / n);
            for (int r = 0; r < 9; ++r) {
                Vec3 q = p;
                if (r > 0) {
                    const double ang = (r - 1) * 3.14159265358979323846 / 4.0;
                    q.x += body_radius * std::cos(ang);
                    q.y += body_radius * std::sin(ang);
                }
                if (tree.query_level(q, 0) == Occupancy::Occupied) return true;
            }
        }
    }
    return false;
}

Trajectory concat(const Trajectory& head, const Trajectory& tail) {
    Trajectory out = head;
    out.reaches_goal = tail.reaches_goal;
    for (std::size_t i = 0; i < tail.waypoints.size(); ++i) {
        if (i == 0 && !out.waypoints.empty() &&
            distance(out.waypoints.back().position, tail.waypoints[0].position) < 1e-6)
            continue;
        out.waypoints.push_back(tail.waypoints[i]);
    }
    return out;
}

}  // namespace

MissionLog run_mission(const GroundTruth& gt, const RuntimeMode& mode, const LatencyModel& model,
                       std::uint64_t seed, const MissionConfig& cfg, GovernorCalls* calls) {
    MissionLog log;
    log.mode = mode_name(mode.kind);
    log.seed = seed;
    const bool roborun = mode.kind == ModeKind::RoboRun;
    const bool measured = mode.latency_source == LatencySource::Measured;
    const double overheads = cfg.point_cloud_overhead + cfg.runtime_reserve;
    const double static_deadline =
        mode.static_deadline > 0.0 ? mode.static_deadline : local_budget(cfg.sensor.max_range, mode.v_max);

    OccupancyTree tree = OccupancyTree::for_arena(gt.arena(), gt.start().z, 0.3, cfg.sensor.max_range + 10.0);
    PlannerConfig pcfg = cfg.planner;
    // plan with one map voxel of slack: ring samples only see voxel centres
    const double plan_radius = cfg.body_radius + cfg.clearance_margin;
    pcfg.body_radius = plan_radius;

    VehicleState veh;
    veh.position = gt.start();
    veh.v_max = mode.v_max;
    veh.a_max = cfg.a_max;
    veh.speed_limit = mode.v_max;
    {
        const Vec3 d = gt.goal() - gt.start();
        veh.heading = Vec3{d.x, d.y, 0.0}.normalized();
    }
    Trajectory traj;  // absolute; veh.arc measured from its first waypoint

    const double goal_dist = distance(gt.start(), gt.goal());
    const double time_cap = cfg.time_cap_factor * goal_dist / 0.5;
    double t = 0.0;
    MissionSummary& sum = log.summary;
    log.path.push_back(veh.position);
    double compute_total = 0.0, latency_total = 0.0;
    double hover_scale = 1.0;  // grows while hovering without a plan

    for (int k = 0;; ++k) {
        if (t >= time_cap) {
            sum.timed_out = true;
            break;
        }
        DecisionRecord rec;
        rec.index = k;
        rec.sim_time = t;
        rec.zone = gt.zone_of(veh.position);

        // 1. sense
        const PointCloud cloud = sense(gt, veh.position, veh.heading, cfg.sensor);

        // 2. profile
        Trajectory rem = traj.empty() ? Trajectory{} : traj.tail_from(veh.arc);
        ProfileSnapshot& snap = rec.snapshot;
        {
            const GapProfile g = profile_gaps(cloud, veh.position, veh.heading, tree.vox_min());
            snap.g_min = g.g_min;
            snap.g_avg = g.g_avg;
            const DistanceProfile d = profile_distances(tree, veh.position, rem);
            snap.d_obs = d.d_obs;
            snap.d_unknown = d.d_unknown;
            const VolumeProfile v = profile_volumes(tree, cloud);
            snap.v_sensor = v.v_sensor;
            snap.v_map = v.v_map;
            snap.velocity = veh.velocity;
            snap.position = veh.position;
        }
        annotate_visibility(rem, tree, tree.vox_min(), cfg.sensor.max_range);

        // 3. deadline and knobs
        KnobPolicy policy;
        if (roborun) {
            if (calls) ++calls->time_budget;
            double b = time_budget(rem, snap);
            rec.time_budget_raw = b;
            if (rem.size() < 2 || veh.velocity < 0.05) b = std::max(b, cfg.hover_deadline * hover_scale);
            rec.budget = b;
            rec.stage_budget = b - overheads;
            if (mode.pin_static) {
                policy = mode.static_policy;
                policy.deadline = rec.stage_budget;
            } else {
                if (calls) ++calls->solve;
                policy = solve(snap, rec.stage_budget, model);
                if (policy.budget_infeasible) {
                    // nothing fits: replan on a small local neighbourhood rather than on nothing
                    policy.v0 = policy.v1 = std::min(cfg.min_volume, volume_bound(snap));
                    policy.v2 = cfg.min_volume;
                    policy.predicted_latency = stage_latency(model, kPerception, policy.p0, policy.v0) +
                                               stage_latency(model, kHandoff, policy.p1, policy.v1) +
                                               stage_latency(model, kPlanning, policy.p2, policy.v2);
                }
            }
        } else {
            policy = mode.static_policy;
            rec.budget = static_deadline;
            rec.stage_budget = static_deadline - overheads;
            policy.deadline = rec.stage_budget;
        }
        rec.solver_feasible = !policy.degraded && !policy.budget_infeasible;

        // 4. stages
        double wall[3] = {0.0, 0.0, 0.0};
        auto t0 = Clock::now();
        const PointCloud ds = downsample_cloud(cloud, policy.p0, tree.origin());
        const auto ref = rem.positions();
        const IntegrationResult ir = integrate(tree, ds, {policy.p0, policy.v0}, ref);
        wall[0] = std::chrono::duration<double>(Clock::now() - t0).count();
        rec.used_v0 = ir.integrated_volume;
        rec.swept_v0 = ir.swept_volume;

        const double rem_len = rem.total_length();
        bool replan = rem.size() < 2 || rem_len < 1e-3 ||
                      (!rem.reaches_goal && rem_len < cfg.replan_horizon * cfg.sensor.max_range) ||
                      policy.budget_infeasible ||
                      (snap.d_unknown <= 0.0 && veh.velocity < 0.05);  // hovering against a wall of unknown
        if (!replan && ir.new_occupied > 0 && path_blocked(tree, rem, plan_radius)) replan = true;

        Trajectory fresh;
        double splice_arc = veh.arc;
        // (p1, v1 used, p2, v2 used) per planning attempt
        std::vector<std::array<double, 4>> attempts;
        if (replan) {
            rec.replanned = true;
            // plan from where the vehicle can be at most once this decision completes
            const double l_bound = stage_latency(model, kPerception, policy.p0, policy.v0) +
                                   stage_latency(model, kHandoff, policy.p1, policy.v1) +
                                   stage_latency(model, kPlanning, policy.p2, policy.v2) + overheads;
            Vec3 start = veh.position;
            double v_start = veh.velocity;
            if (traj.size() >= 2) {
                VehicleState probe = veh;
                probe.speed_limit = mode.v_max;
                probe = step(probe, traj, std::min(l_bound, 1e4));
                splice_arc = probe.arc;
                start = traj.point_at(splice_arc);
                v_start = probe.velocity;
            }
            double p_plan = policy.p2;
            double v1 = policy.v1, v2 = policy.v2;
            for (;;) {
                t0 = Clock::now();
                const PlannerView view = handoff(tree, p_plan, v1, veh.position);
                wall[1] += std::chrono::duration<double>(Clock::now() - t0).count();
                t0 = Clock::now();
                const PlanResult pr = plan(view, start, gt.goal(), {p_plan, v2}, mix(seed ^ mix(k)), pcfg);
                if (pr.status != PlanStatus::NoPath) {
                    fresh = smooth(pr.trajectory, view, p_plan, plan_radius, mode.v_max, cfg.a_max, v_start,
                                   cfg.waypoint_spacing);
                }
                wall[2] += std::chrono::duration<double>(Clock::now() - t0).count();
                attempts.push_back({p_plan, view.known_volume, p_plan, pr.explored_volume});
                rec.used_v1 += view.known_volume;
                rec.used_v2 += pr.explored_volume;
                rec.plan_status = pr.status;
                // a coarse view can swallow the vehicle's own cell; retry once at full resolution
                if (pr.status != PlanStatus::NoPath || p_plan <= tree.vox_min() + 1e-9) break;
                p_plan = tree.vox_min();
                if (!policy.budget_infeasible) {
                    // the retry only gets what the first attempt left of the stage budget
                    double spent = stage_latency(model, kPerception, policy.p0, rec.used_v0);
                    for (const auto& a : attempts)
                        spent += stage_latency(model, kHandoff, a[0], a[1]) + stage_latency(model, kPlanning, a[2], a[3]);
                    const double left = rec.stage_budget - spent;
                    const double need = stage_latency(model, kHandoff, p_plan, v1) + stage_latency(model, kPlanning, p_plan, v2);
                    if (left <= 0.0 || need <= 0.0) break;
                    const double f = std::min(1.0, left / need);
                    v1 *= f;
                    v2 *= f;
                }
                rec.escape = true;
            }
            ++sum.replans;
        }

        // 5. accounted latency
        if (measured) {
            for (int s = 0; s < 3; ++s) rec.stage_latency[static_cast<std::size_t>(s)] = wall[s] * cfg.measured_scale;
        } else {
            rec.stage_latency[0] = stage_latency(model, kPerception, policy.p0, rec.used_v0);
            for (const auto& a : attempts) {
                rec.stage_latency[1] += stage_latency(model, kHandoff, a[0], a[1]);
                rec.stage_latency[2] += stage_latency(model, kPlanning, a[2], a[3]);
            }
        }
        rec.point_cloud_latency = cfg.point_cloud_overhead;
        rec.runtime_overhead = cfg.runtime_reserve;
        const double compute = rec.stage_latency[0] + rec.stage_latency[1] + rec.stage_latency[2];
        rec.latency = compute + overheads;
        rec.policy = policy;
        rec.deadline_ok = safety_monitor(rec, veh) == SafetyVerdict::Ok;

        // 6. fly the current plan while the decision is computed
        double v_cmd = command_speed(snap.d_unknown, rec.latency, mode.v_max);
        if (!roborun && rec.latency > static_deadline) {
            v_cmd = 0.0;  // over its design budget: hold until the decision lands
            rec.stalled = true;
        }
        rec.v_cmd = v_cmd;
        veh.speed_limit = v_cmd;
        std::vector<Vec3> trace;
        const Vec3 before = veh.position;
        if (traj.size() >= 2) veh = step(veh, traj, rec.latency, &trace);
        Vec3 prev = before;
        for (const Vec3& p : trace) {
            sum.distance += distance(prev, p);
            if (!sum.collided && check_collision(gt, prev, p, cfg.body_radius)) {
                sum.collided = true;
            }
            prev = p;
        }
        t += rec.latency;
        compute_total += compute;
        latency_total += rec.latency;
        if (rec.replanned && rec.plan_status == PlanStatus::NoPath && veh.velocity < 0.05)
            hover_scale = std::min(hover_scale * 2.0, cfg.hover_escalation_max);
        else if (rec.replanned)
            hover_scale = 1.0;
        log.records.push_back(rec);
        log.path.push_back(veh.position);

        if (sum.collided) break;

        // 7. commit
        if (!fresh.empty() && fresh.size() >= 2) {
            if (traj.size() >= 2 && veh.arc <= splice_arc + 1e-9) {
                const Trajectory head = traj.tail_from(veh.arc).head_to(splice_arc - veh.arc);
                traj = head.size() >= 2 ? concat(head, fresh) : fresh;
            } else if (traj.size() < 2) {
                traj = fresh;
            } else {
                traj = Trajectory{};  // stale: vehicle already beyond the splice point
            }
            if (traj.size() >= 2) veh.arc = traj.project(veh.position);
        } else if (traj.size() >= 2 && veh.arc >= traj.total_length() - 1e-9) {
            traj = Trajectory{};
            veh.arc = 0.0;
        }
        if (traj.size() < 2) veh.velocity = 0.0;  // no plan to follow: hover in place
        if (traj.size() >= 2) {
            // drop the flown part so arc bookkeeping stays small
            traj = traj.tail_from(veh.arc);
            veh.arc = 0.0;
        }

        if (distance(veh.position, gt.goal()) <= gt.grid_size()) {
            sum.reached = true;
            break;
        }
    }

    sum.decisions = static_cast<int>(log.records.size());
    sum.flight_time = t;
    sum.avg_velocity = t > 0.0 ? sum.distance / t : 0.0;
    sum.energy = mission_energy(t);
    sum.mean_compute = sum.decisions ? compute_total / sum.decisions : 0.0;
    sum.mean_latency = sum.decisions ? latency_total / sum.decisions : 0.0;
    for (const auto& r : log.records) {
        if (r.solver_feasible) ++sum.feasible_decisions;
        if (!r.deadline_ok) ++sum.deadline_violations;
        if (r.solver_feasible && !r.deadline_ok) ++sum.feasible_violations;
    }
    return log;
}

SafetyVerdict safety_monitor(const DecisionRecord& record, const VehicleState&) {
    return record.latency <= record.budget ? SafetyVerdict::Ok : SafetyVerdict::Violation;
}

std::string mission_csv_header() {
    return "index,sim_time,zone,budget,stage_budget,time_budget_raw,lat_perception,lat_handoff,lat_planning,"
           "lat_point_cloud,lat_runtime,latency,p0,p1,p2,v0,v1,v2,used_v0,used_v1,used_v2,swept_v0,v_cmd,"
           "replanned,plan_status,degraded,budget_infeasible,deadline_ok,stalled,escape," +
           snapshot_csv_header();
}

void write_mission_csv(std::ostream& os, const MissionLog& log) {
    os << mission_csv_header() << '\n';
    char buf[1024];
    for (const auto& r : log.records) {
        const auto& k = r.policy;
        std::snprintf(buf, sizeof buf,
                      "%d,%.6f,%s,%.6f,%.6f,%.6f,%.6g,%.6g,%.6g,%.3f,%.3f,%.6f,%.2f,%.2f,%.2f,%.6g,%.6g,%.6g,%.6g,"
                      "%.6g,%.6g,%.6g,%.4f,%d,%s,%d,%d,%d,%d,%d,",
                      r.index, r.sim_time, zone_name(r.zone), r.budget, r.stage_budget, r.time_budget_raw,
                      r.stage_latency[0], r.stage_latency[1], r.stage_latency[2], r.point_cloud_latency,
                      r.runtime_overhead, r.latency, k.p0, k.p1, k.p2, k.v0, k.v1, k.v2, r.used_v0, r.used_v1,
                      r.used_v2, r.swept_v0, r.v_cmd, r.replanned ? 1 : 0, plan_status_name(r.plan_status),
                      k.degraded ? 1 : 0, k.budget_infeasible ? 1 : 0, r.deadline_ok ? 1 : 0, r.stalled ? 1 : 0, r.escape ? 1 : 0);
        os << buf << snapshot_csv_row(r.snapshot) << '\n';
    }
    const auto& s = log.summary;
    std::snprintf(buf, sizeof buf,
                  "# footer,flight_time_s=%.6f,distance_m=%.6f,avg_velocity=%.6f,energy_J=%.3f,collided=%d,"
                  "timed_out=%d,decisions=%d,replans=%d",
                  s.flight_time, s.distance, s.avg_velocity, s.energy, s.collided ? 1 : 0, s.timed_out ? 1 : 0,
                  s.decisions, s.replans);
    os << buf << '\n';
}

}  // namespace roborun
