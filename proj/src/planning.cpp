#include "roborun/planning.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace roborun {

const char* plan_status_name(PlanStatus s) {
    switch (s) {
        case PlanStatus::Goal: return "goal";
        case PlanStatus::Frontier: return "frontier";
        case PlanStatus::NoPath: return "nopath";
    }
    return "?";
}

PlannerView handoff(const OccupancyTree& tree, double p1, double v1, const Vec3& drone_pos) {
    PlannerView view;
    view.p1 = p1;
    view.v1 = v1;
    const int level = tree.level_for(p1);

    struct Item {
        OccupancyTree::NodeRef ref;
        double volume;
        double dist;
    };
    std::vector<Item> items;
    double total = 0.0;
    tree.visit_known_at_level(level, [&](const OccupancyTree::NodeRef& r) {
        if (r.state == Occupancy::Unknown) return;  // collapses to Unknown anyway
        const double s = tree.size_at(r.level);
        items.push_back({r, s * s * s, 0.0});
        total += s * s * s;
    });
    view.nodes_available = items.size();

    if (total <= v1) {
        view.tree = tree.collapsed_copy(level);
        view.known_volume = total;
        view.nodes_included = items.size();
        return view;
    }

    view.tree = OccupancyTree(tree.origin(), tree.vox_min(), tree.depth());
    auto dist_of = [&](const OccupancyTree::NodeRef& r) {
        const double h = tree.size_at(r.level) / 2.0;
        const Vec3 c = tree.center_of(r.key, r.level);
        return Aabb{{c.x - h, c.y - h, c.z - h}, {c.x + h, c.y + h, c.z + h}}.distance_to(drone_pos);
    };
    for (auto& it : items) it.dist = dist_of(it.ref);
    auto later = [](const Item& a, const Item& b) {
        if (a.dist != b.dist) return a.dist > b.dist;
        if (a.ref.level != b.ref.level) return a.ref.level > b.ref.level;
        return a.ref.key.packed() > b.ref.key.packed();
    };
    std::priority_queue<Item, std::vector<Item>, decltype(later)> queue(later, std::move(items));
    double acc = 0.0;
    while (!queue.empty()) {
        const Item it = queue.top();
        queue.pop();
        if (acc + it.volume > v1) {
            if (it.ref.level <= level) break;
            // a leaf coarser than p1 is handed over piecewise, nearest part first
            const int cl = it.ref.level - 1;
            const double s = tree.size_at(cl);
            for (std::uint32_t b = 0; b < 8; ++b) {
                const VoxelKey k{(it.ref.key.x << 1) | (b & 1u), (it.ref.key.y << 1) | ((b >> 1) & 1u),
                                 (it.ref.key.z << 1) | ((b >> 2) & 1u)};
                const OccupancyTree::NodeRef child{k, cl, it.ref.state};
                queue.push({child, s * s * s, dist_of(child)});
            }
            continue;
        }
        acc += it.volume;
        view.tree.set_node(it.ref.key, it.ref.level, it.ref.state);
        ++view.nodes_included;
    }
    view.known_volume = acc;
    return view;
}

namespace {

std::array<Vec3, 9> body_samples(const Vec3& p, double r) {
    std::array<Vec3, 9> out;
    out[0] = p;
    for (int k = 0; k < 8; ++k) {
        const double a = k * std::numbers::pi / 4.0;
        out[k + 1] = {p.x + r * std::cos(a), p.y + r * std::sin(a), p.z};
    }
    return out;
}

// Collision checker that accounts the union of voxels it touches.
class Monitor {
public:
    Monitor(const OccupancyTree& tree, int level, double body_radius, double v2, const Vec3& start)
        : tree_(tree), level_(level), r_(body_radius), start_(start) {
        const double s = tree.size_at(level);
        vox_ = s * s * s;
        cap_ = static_cast<std::size_t>(std::floor(v2 / vox_ + 1e-9));
    }

    // false when the point is blocked or the budget ran out (check exhausted())
    bool point(const Vec3& p) {
        const auto samples = body_samples(p, r_);
        for (const Vec3& q : samples) {
            VoxelKey k;
            if (!tree_.key_of(q, k)) return false;
            k = k.at_level(level_);
            if (!seen_.count(k.packed())) {
                if (seen_.size() >= cap_) {
                    exhausted_ = true;
                    return false;
                }
                seen_.insert(k.packed());
            }
            const Occupancy o = tree_.query_key(k, level_);
            if (o == Occupancy::Free) continue;
            // a vehicle already pressed against an obstacle may back away from it, as long
            // as its clearance does not shrink; Unknown is never entered
            if (o == Occupancy::Unknown || distance(p, start_) > start_relax()) return false;
            {
                if (&q == &samples[0]) return false;
                if (!escape_ready_) prepare_escape();
                // only motion that points away from every blocked side of the start
                for (const Vec3& u : blocked_)
                    if ((p - start_).dot(u) > 1e-9) return false;
                if (tree_.nearest_occupied_distance(p) < start_clearance_ - 1e-9) return false;
            }
        }
        return true;
    }

    bool segment(const Vec3& a, const Vec3& b) {
        const double step = tree_.size_at(level_) / 2.0;  // half a voxel so corners are not skipped
        const double len = distance(a, b);
        const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
        for (int i = 0; i <= n; ++i)
            if (!point(a + (b - a) * (static_cast<double>(i) / n))) return false;
        return true;
    }

    bool exhausted() const { return exhausted_; }

    void prepare_escape() {
        escape_ready_ = true;
        start_clearance_ = tree_.nearest_occupied_distance(start_);
        const auto ring = body_samples(start_, r_);
        for (std::size_t i = 1; i < ring.size(); ++i)
            if (tree_.query_level(ring[i], level_) == Occupancy::Occupied) blocked_.push_back(ring[i] - start_);
    }
    double start_relax() const { return r_ + tree_.size_at(level_); }
    double volume() const { return static_cast<double>(seen_.size()) * vox_; }

private:
    const OccupancyTree& tree_;
    int level_;
    double r_;
    Vec3 start_;
    bool escape_ready_ = false;
    double start_clearance_ = 0.0;
    std::vector<Vec3> blocked_;
    double vox_ = 0.0;
    std::size_t cap_ = 0;
    std::unordered_set<std::uint64_t> seen_;
    bool exhausted_ = false;
};

struct RrtNode {
    Vec3 pos;
    int parent;
    double cost;
};

// xy bucket grid over tree nodes (all nodes share one altitude)
class NodeGrid {
public:
    explicit NodeGrid(double cell) : cell_(cell) {}

    void insert(const Vec3& p, int idx) {
        const auto [cx, cy] = cell_of(p);
        cells_[pack(cx, cy)].push_back(idx);
        lo_x_ = std::min(lo_x_, cx);
        hi_x_ = std::max(hi_x_, cx);
        lo_y_ = std::min(lo_y_, cy);
        hi_y_ = std::max(hi_y_, cy);
    }

    int nearest(const std::vector<RrtNode>& nodes, const Vec3& q, double& best) const {
        const auto [cx, cy] = cell_of(q);
        int arg = -1;
        best = std::numeric_limits<double>::infinity();
        auto scan = [&](long x, long y) {
            const auto it = cells_.find(pack(x, y));
            if (it == cells_.end()) return;
            for (int i : it->second) {
                const double d = distance(nodes[static_cast<std::size_t>(i)].pos, q);
                if (d < best || (d == best && i < arg)) {
                    best = d;
                    arg = i;
                }
            }
        };
        auto gap = [](long c, long lo, long hi) { return c < lo ? lo - c : (c > hi ? c - hi : 0L); };
        // rings that miss the populated extent are skipped outright
        const long first = std::max(gap(cx, lo_x_, hi_x_), gap(cy, lo_y_, hi_y_));
        const long last = std::max({std::abs(cx - lo_x_), std::abs(cx - hi_x_), std::abs(cy - lo_y_),
                                    std::abs(cy - hi_y_)});
        for (long r = first; r <= last; ++r) {
            if (arg >= 0 && static_cast<double>(r - 1) * cell_ > best) break;
            const long x0 = std::max(cx - r, lo_x_), x1 = std::min(cx + r, hi_x_);
            const long y0 = std::max(cy - r, lo_y_), y1 = std::min(cy + r, hi_y_);
            if (r == 0) {
                scan(cx, cy);
                continue;
            }
            if (cy - r >= lo_y_)
                for (long x = x0; x <= x1; ++x) scan(x, cy - r);
            if (cy + r <= hi_y_)
                for (long x = x0; x <= x1; ++x) scan(x, cy + r);
            if (cx - r >= lo_x_)
                for (long y = std::max(y0, cy - r + 1); y <= std::min(y1, cy + r - 1); ++y) scan(cx - r, y);
            if (cx + r <= hi_x_)
                for (long y = std::max(y0, cy - r + 1); y <= std::min(y1, cy + r - 1); ++y) scan(cx + r, y);
        }
        return arg;
    }

    void within(const std::vector<RrtNode>& nodes, const Vec3& q, double radius, std::vector<int>& out) const {
        out.clear();
        const auto [cx, cy] = cell_of(q);
        const long r = static_cast<long>(std::ceil(radius / cell_));
        for (long x = cx - r; x <= cx + r; ++x)
            for (long y = cy - r; y <= cy + r; ++y) {
                const auto it = cells_.find(pack(x, y));
                if (it == cells_.end()) continue;
                for (int i : it->second)
                    if (distance(nodes[static_cast<std::size_t>(i)].pos, q) <= radius) out.push_back(i);
            }
        std::sort(out.begin(), out.end());
    }

private:
    std::pair<long, long> cell_of(const Vec3& p) const {
        return {static_cast<long>(std::floor(p.x / cell_)), static_cast<long>(std::floor(p.y / cell_))};
    }
    static std::uint64_t pack(long x, long y) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) |
               static_cast<std::uint32_t>(y);
    }

    double cell_;
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
    long lo_x_ = std::numeric_limits<long>::max(), hi_x_ = std::numeric_limits<long>::min();
    long lo_y_ = std::numeric_limits<long>::max(), hi_y_ = std::numeric_limits<long>::min();
};

Trajectory extract(const std::vector<RrtNode>& nodes, int idx) {
    std::vector<Vec3> pts;
    for (int i = idx; i >= 0; i = nodes[i].parent) pts.push_back(nodes[i].pos);
    std::reverse(pts.begin(), pts.end());
    Trajectory t;
    for (const Vec3& p : pts) t.waypoints.push_back({p, 0.0, 0.0});
    return t;
}

}  // namespace

bool body_free(const OccupancyTree& tree, const Vec3& p, int level, double body_radius) {
    for (const Vec3& q : body_samples(p, body_radius))
        if (tree.query_level(q, level) != Occupancy::Free) return false;
    return true;
}

bool segment_free(const OccupancyTree& tree, const Vec3& a, const Vec3& b, int level, double body_radius) {
    const double step = tree.size_at(level) / 2.0;
    const double len = distance(a, b);
    const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
    for (int i = 0; i <= n; ++i)
        if (!body_free(tree, a + (b - a) * (static_cast<double>(i) / n), level, body_radius)) return false;
    return true;
}

PlanResult plan(const PlannerView& view, const Vec3& start, const Vec3& goal_in, const PlanBudget& budget,
                std::uint64_t rng_seed, const PlannerConfig& cfg) {
    PlanResult res;
    const OccupancyTree& tree = view.tree;
    const int level = tree.level_for(budget.p2);
    Monitor mon(tree, level, cfg.body_radius, budget.v2, start);
    const double alt = start.z;
    const Vec3 goal{goal_in.x, goal_in.y, alt};

    auto finish = [&]() {
        res.explored_volume = mon.volume();
        res.budget_exhausted = mon.exhausted();
        return res;
    };
    if (!mon.point(start)) return finish();

    const Aabb known = tree.known_bounds();
    if (!(known.min.x <= known.max.x)) return finish();

    const double step = cfg.steer_factor * tree.size_at(level);
    const double gamma = cfg.gamma_factor * step;
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> ux(known.min.x, known.max.x);
    std::uniform_real_distribution<double> uy(known.min.y, known.max.y);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    std::vector<RrtNode> nodes{{start, -1, 0.0}};
    std::vector<std::vector<int>> children(1);
    NodeGrid grid(step);
    grid.insert(start, 0);
    int goal_idx = -1;
    int after_goal = 0;
    std::vector<int> near;

    for (int it = 0; it < cfg.max_iterations; ++it) {
        res.iterations = it + 1;
        if (goal_idx >= 0 && ++after_goal > cfg.refine_iterations) break;

        const Vec3 q = u01(rng) < cfg.goal_bias ? goal : Vec3{ux(rng), uy(rng), alt};
        double best = kInf;
        const int nearest = grid.nearest(nodes, q, best);
        if (best < 1e-9) continue;
        const Vec3 x_new = best <= step ? q : nodes[nearest].pos + (q - nodes[nearest].pos) * (step / best);

        if (!mon.segment(nodes[nearest].pos, x_new)) {
            if (mon.exhausted()) break;
            continue;
        }

        const double n = static_cast<double>(nodes.size());
        const double radius = std::min(step, gamma * std::cbrt(std::log(n + 1.0) / (n + 1.0)));
        grid.within(nodes, x_new, radius, near);

        int parent = nearest;
        double cost = nodes[nearest].cost + distance(nodes[nearest].pos, x_new);
        for (int i : near) {
            if (i == nearest) continue;
            const double c = nodes[i].cost + distance(nodes[i].pos, x_new);
            if (c < cost - 1e-12 && mon.segment(nodes[i].pos, x_new)) {
                parent = i;
                cost = c;
            }
            if (mon.exhausted()) break;
        }
        if (mon.exhausted()) break;
        const int idx = static_cast<int>(nodes.size());
        nodes.push_back({x_new, parent, cost});
        children.emplace_back();
        children[static_cast<std::size_t>(parent)].push_back(idx);
        grid.insert(x_new, idx);

        for (int i : near) {
            if (i == parent) continue;
            const double c = cost + distance(x_new, nodes[i].pos);
            if (c < nodes[i].cost - 1e-12 && mon.segment(x_new, nodes[i].pos)) {
                const double delta = nodes[i].cost - c;
                auto& siblings = children[static_cast<std::size_t>(nodes[i].parent)];
                siblings.erase(std::find(siblings.begin(), siblings.end(), i));
                nodes[i].parent = idx;
                children[static_cast<std::size_t>(idx)].push_back(i);
                // propagate the improvement to descendants
                std::vector<int> stack{i};
                nodes[i].cost = c;
                while (!stack.empty()) {
                    const int cur = stack.back();
                    stack.pop_back();
                    for (int j : children[static_cast<std::size_t>(cur)]) {
                        nodes[j].cost -= delta;
                        stack.push_back(j);
                    }
                }
            }
            if (mon.exhausted()) break;
        }
        if (mon.exhausted()) break;

        if (goal_idx < 0 && distance(x_new, goal) <= cfg.goal_tolerance) goal_idx = idx;
    }

    res.tree_nodes = nodes.size();
    if (goal_idx < 0) {
        // a node may have landed within tolerance through rewiring; pick the cheapest
        for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
            if (distance(nodes[i].pos, goal) <= cfg.goal_tolerance &&
                (goal_idx < 0 || nodes[i].cost < nodes[goal_idx].cost))
                goal_idx = i;
    } else {
        for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
            if (distance(nodes[i].pos, goal) <= cfg.goal_tolerance && nodes[i].cost < nodes[goal_idx].cost)
                goal_idx = i;
    }

    if (goal_idx >= 0) {
        res.status = PlanStatus::Goal;
        res.trajectory = extract(nodes, goal_idx);
        res.trajectory.reaches_goal = true;
        return finish();
    }

    int best_idx = 0;
    double best_d = distance(start, goal);
    for (int i = 1; i < static_cast<int>(nodes.size()); ++i) {
        const double d = distance(nodes[i].pos, goal);
        if (d < best_d - 1e-9) {
            best_d = d;
            best_idx = i;
        }
    }
    if (best_idx == 0) {
        // boxed in: nothing gets closer, so back out to the best node a few steps away
        best_d = kInf;
        for (int i = 1; i < static_cast<int>(nodes.size()); ++i) {
            const double d = distance(nodes[i].pos, goal);
            if (distance(nodes[i].pos, start) >= cfg.retreat_steps * step && d < best_d - 1e-9) {
                best_d = d;
                best_idx = i;
            }
        }
    }
    if (best_idx > 0) {
        res.status = PlanStatus::Frontier;
        res.trajectory = extract(nodes, best_idx);
    }
    return finish();
}

Trajectory smooth(const Trajectory& path, const PlannerView& view, double p2, double body_radius,
                  double v_max, double a_max, double v_start, double spacing) {
    Trajectory out;
    out.reaches_goal = path.reaches_goal;
    if (path.waypoints.empty()) return out;
    const int level = view.tree.level_for(p2);
    const auto& w = path.waypoints;
    std::size_t i = 0;
    out.waypoints.push_back(w.front());
    while (i + 1 < w.size()) {
        std::size_t j = w.size() - 1;
        while (j > i + 1 && !segment_free(view.tree, w[i].position, w[j].position, level, body_radius)) --j;
        out.waypoints.push_back(w[j]);
        i = j;
    }
    out = densify(out, spacing);
    apply_trapezoidal_profile(out, v_start, v_max, a_max);
    return out;
}

void annotate_visibility(Trajectory& traj, const OccupancyTree& tree, double p2, double max_range) {
    if (traj.waypoints.empty()) return;
    const int level = tree.level_for(p2);
    const double h = tree.size_at(level) / 2.0;
    const auto arcs = traj.arc_lengths();
    const double total = arcs.back();

    std::vector<double> blocked;  // ascending arc positions of non-Free samples
    for (std::size_t i = 0; i < traj.waypoints.size(); ++i) {
        const Vec3& a = traj.waypoints[i].position;
        const double seg = i + 1 < traj.waypoints.size() ? arcs[i + 1] - arcs[i] : 0.0;
        const Vec3 b = i + 1 < traj.waypoints.size() ? traj.waypoints[i + 1].position : a;
        for (double t = 0.0; t < seg || t == 0.0; t += h) {
            const Vec3 p = seg > 0.0 ? a + (b - a) * (t / seg) : a;
            if (tree.query_level(p, level) != Occupancy::Free) {
                blocked.push_back(arcs[i] + t);
                break;  // the first block per segment is enough for "next blocked" queries
            }
            if (seg == 0.0) break;
        }
    }
    for (std::size_t i = 0; i < traj.waypoints.size(); ++i) {
        const double s = arcs[i];
        auto it = std::lower_bound(blocked.begin(), blocked.end(), s - 1e-12);
        double vis = std::min(max_range, total - s);
        if (it != blocked.end()) vis = std::min(vis, *it - s);
        traj.waypoints[i].planned_visibility = std::max(0.0, vis);
    }
}

}  // namespace roborun
