#include "roborun/world.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace roborun {

namespace {

constexpr double kArenaMarginX = 10.0;
constexpr double kMinHalfWidth = 20.0;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform double in [0, 1) from a splitmix stream; stable across standard libraries.
class CellRng {
public:
    explicit CellRng(std::uint64_t seed) : state_(seed) {}
    double next() {
        state_ = splitmix64(state_);
        return static_cast<double>(state_ >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

long cell_index(double coord, double grid) { return std::lround(coord / grid); }

int offset_cells(const EnvSpec& spec) {
    const int from_spread = static_cast<int>(std::ceil(0.5 * spec.spread() / spec.grid_size_m));
    return std::max(3, from_spread);
}

}  // namespace

const char* zone_name(Zone z) {
    switch (z) {
        case Zone::A: return "A";
        case Zone::B: return "B";
        case Zone::C: return "C";
    }
    return "?";
}

GroundTruth::GroundTruth(std::vector<Obstacle> obstacles, Vec3 start, Vec3 goal, Aabb arena,
                         double grid_size)
    : obstacles_(std::move(obstacles)),
      start_(start),
      goal_(goal),
      arena_(arena),
      grid_size_(grid_size) {
    zone_boundaries = {start_.x, goal_.x};
    build_index();
}

Zone GroundTruth::zone_of(const Vec3& p) const {
    if (zone_boundaries.size() >= 2) {
        if (p.x < zone_boundaries[0]) return Zone::A;
        if (p.x > zone_boundaries[1]) return Zone::C;
    }
    return Zone::B;
}

long GroundTruth::bucket_x(double x) const {
    return std::clamp(static_cast<long>(std::floor((x - arena_.min.x) / bucket_size_)), 0L,
                      nbx_ - 1);
}

long GroundTruth::bucket_y(double y) const {
    return std::clamp(static_cast<long>(std::floor((y - arena_.min.y) / bucket_size_)), 0L,
                      nby_ - 1);
}

void GroundTruth::build_index() {
    double max_r = 0.0;
    for (const auto& o : obstacles_) max_r = std::max(max_r, o.radius);
    bucket_size_ = std::max({grid_size_, 2.0 * max_r, 0.5});
    const Vec3 ext = arena_.extent();
    nbx_ = std::max(1L, static_cast<long>(std::ceil(ext.x / bucket_size_)));
    nby_ = std::max(1L, static_cast<long>(std::ceil(ext.y / bucket_size_)));
    buckets_.assign(static_cast<std::size_t>(nbx_ * nby_), {});
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
        const auto& o = obstacles_[i];
        for (long bx = bucket_x(o.center.x - o.radius); bx <= bucket_x(o.center.x + o.radius); ++bx)
            for (long by = bucket_y(o.center.y - o.radius); by <= bucket_y(o.center.y + o.radius);
                 ++by)
                buckets_[static_cast<std::size_t>(by * nbx_ + bx)].push_back(
                    static_cast<std::uint32_t>(i));
    }
}

void GroundTruth::candidates(const Vec3& lo, const Vec3& hi, std::vector<std::size_t>& out) const {
    out.clear();
    if (obstacles_.empty()) return;
    const long x0 = bucket_x(std::min(lo.x, hi.x)), x1 = bucket_x(std::max(lo.x, hi.x));
    const long y0 = bucket_y(std::min(lo.y, hi.y)), y1 = bucket_y(std::max(lo.y, hi.y));
    for (long by = y0; by <= y1; ++by)
        for (long bx = x0; bx <= x1; ++bx)
            for (auto idx : buckets_[static_cast<std::size_t>(by * nbx_ + bx)]) out.push_back(idx);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
}

namespace {

// Smallest t in (0, t_max] where origin + t*dir enters the vertical cylinder.
std::optional<double> ray_cylinder(const Vec3& origin, const Vec3& dir, double t_max,
                                   const Obstacle& o) {
    const double ox = origin.x - o.center.x;
    const double oy = origin.y - o.center.y;
    const double a = dir.x * dir.x + dir.y * dir.y;
    const double c = ox * ox + oy * oy - o.radius * o.radius;
    if (a <= 0.0) return std::nullopt;
    const double b = ox * dir.x + oy * dir.y;
    const double disc = b * b - a * c;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    double t = (-b - sq) / a;
    if (c < 0.0) t = 0.0;  // origin already inside
    if (t < 0.0 || t > t_max) return std::nullopt;
    const double z = origin.z + t * dir.z;
    if (z < o.center.z || z > o.center.z + o.height) return std::nullopt;
    return t;
}

}  // namespace

std::optional<double> GroundTruth::raycast(const Vec3& origin, const Vec3& dir,
                                           double t_max) const {
    if (obstacles_.empty()) return std::nullopt;
    // Amanatides-Woo walk over the xy bucket grid.
    const double bs = bucket_size_;
    const double px = (origin.x - arena_.min.x) / bs;
    const double py = (origin.y - arena_.min.y) / bs;
    long cx = static_cast<long>(std::floor(px));
    long cy = static_cast<long>(std::floor(py));
    const int step_x = dir.x > 0 ? 1 : (dir.x < 0 ? -1 : 0);
    const int step_y = dir.y > 0 ? 1 : (dir.y < 0 ? -1 : 0);
    const double inv_x = dir.x != 0.0 ? bs / std::abs(dir.x) : kInf;
    const double inv_y = dir.y != 0.0 ? bs / std::abs(dir.y) : kInf;
    double t_next_x = step_x > 0   ? (std::floor(px) + 1.0 - px) * inv_x
                      : step_x < 0 ? (px - std::floor(px)) * inv_x
                                   : kInf;
    double t_next_y = step_y > 0   ? (std::floor(py) + 1.0 - py) * inv_y
                      : step_y < 0 ? (py - std::floor(py)) * inv_y
                                   : kInf;
    double t_cell = 0.0;
    std::optional<double> best;
    while (t_cell <= t_max) {
        if (cx >= 0 && cy >= 0 && cx < nbx_ && cy < nby_) {
            for (auto idx : buckets_[static_cast<std::size_t>(cy * nbx_ + cx)]) {
                if (auto t = ray_cylinder(origin, dir, t_max, obstacles_[idx])) {
                    if (!best || *t < *best) best = t;
                }
            }
            const double t_exit = std::min(t_next_x, t_next_y);
            if (best && *best <= t_exit) return best;
        } else {
            // Walked off the indexed area in a direction that cannot come back.
            const bool leaving_x = (cx < 0 && step_x <= 0) || (cx >= nbx_ && step_x >= 0);
            const bool leaving_y = (cy < 0 && step_y <= 0) || (cy >= nby_ && step_y >= 0);
            if (leaving_x || leaving_y) break;
        }
        if (t_next_x < t_next_y) {
            t_cell = t_next_x;
            t_next_x += inv_x;
            cx += step_x;
        } else {
            t_cell = t_next_y;
            t_next_y += inv_y;
            cy += step_y;
        }
    }
    return best;
}

Vec3 start_for(const EnvSpec& spec) { return {0.0, 0.0, spec.flight_altitude_m}; }

Vec3 goal_for(const EnvSpec& spec) {
    const double g = spec.grid_size_m;
    return {static_cast<double>(cell_index(spec.goal_distance(), g)) * g, 0.0,
            spec.flight_altitude_m};
}

std::vector<Vec3> centroids_for(const EnvSpec& spec) {
    if (!spec.centroid_positions.empty()) return spec.centroid_positions;
    const double off = offset_cells(spec) * spec.grid_size_m;
    const Vec3 s = start_for(spec);
    const Vec3 g = goal_for(spec);
    return {Vec3{s.x + off, 0.0, 0.0}, Vec3{g.x - off, 0.0, 0.0}};
}

Aabb arena_for(const EnvSpec& spec) {
    if (spec.arena_bounds) return *spec.arena_bounds;
    const Vec3 g = goal_for(spec);
    const double half_w = std::max(kMinHalfWidth, spec.spread() + 10.0);
    return Aabb{{-kArenaMarginX, -half_w, 0.0}, {g.x + kArenaMarginX, half_w, spec.arena_height_m}};
}

GroundTruth generate_environment(const EnvSpec& spec) {
    if (!(spec.obstacle_density >= 0.0) || spec.obstacle_density > 1.0)
        throw std::invalid_argument("obstacle density must lie in [0, 1]");
    if (!(spec.spread() > 0.0)) throw std::invalid_argument("spread must be positive");
    if (!(spec.goal_distance() > 0.0)) throw std::invalid_argument("goal distance must be positive");
    if (!(spec.grid_size_m > 0.0)) throw std::invalid_argument("grid size must be positive");

    const double g = spec.grid_size_m;
    const Aabb arena = arena_for(spec);
    const auto centroids = centroids_for(spec);
    const double spread = spec.spread();
    for (const auto& c : centroids) {
        if (c.x - spread < arena.min.x || c.x + spread > arena.max.x || c.y - spread < arena.min.y ||
            c.y + spread > arena.max.y)
            throw std::invalid_argument("spread exceeds arena bounds");
    }

    const Vec3 start = start_for(spec);
    const Vec3 goal = goal_for(spec);
    const double radius = spec.pillar_radius();
    const double sigma = spread / 2.0;

    auto reserved = [&](double cx, double cy) {
        for (const Vec3& p : {start, goal}) {
            const long di = std::labs(cell_index(cx, g) - cell_index(p.x, g));
            const long dj = std::labs(cell_index(cy, g) - cell_index(p.y, g));
            if (di <= 1 && dj <= 1) return true;
            if (std::hypot(cx - p.x, cy - p.y) - radius < spec.gap_size_m) return true;
        }
        return false;
    };

    std::vector<Obstacle> obstacles;
    CellRng rng(splitmix64(spec.seed));
    const long i0 = static_cast<long>(std::ceil(arena.min.x / g));
    const long i1 = static_cast<long>(std::floor(arena.max.x / g));
    const long j0 = static_cast<long>(std::ceil(arena.min.y / g));
    const long j1 = static_cast<long>(std::floor(arena.max.y / g));
    for (long j = j0; j <= j1; ++j) {
        for (long i = i0; i <= i1; ++i) {
            const double cx = static_cast<double>(i) * g;
            const double cy = static_cast<double>(j) * g;
            const double u = rng.next();  // drawn unconditionally so streams stay aligned
            double prob = 0.0;
            for (const auto& c : centroids) {
                const double d = std::hypot(cx - c.x, cy - c.y);
                if (d > spread) continue;
                prob = std::max(prob, spec.obstacle_density * std::exp(-d * d / (2.0 * sigma * sigma)));
            }
            if (prob <= 0.0 || u >= prob || reserved(cx, cy)) continue;
            if (cx - radius < arena.min.x || cx + radius > arena.max.x || cy - radius < arena.min.y ||
                cy + radius > arena.max.y)
                continue;
            obstacles.push_back(Obstacle{{cx, cy, arena.min.z}, radius, arena.extent().z});
        }
    }

    GroundTruth gt(std::move(obstacles), start, goal, arena, g);
    gt.centroids = centroids;
    gt.spread = spread;
    if (centroids.size() >= 2) {
        gt.zone_boundaries = {centroids.front().x + spread, centroids.back().x - spread};
        if (gt.zone_boundaries[0] > gt.zone_boundaries[1]) {
            const double mid = 0.5 * (gt.zone_boundaries[0] + gt.zone_boundaries[1]);
            gt.zone_boundaries = {mid, mid};
        }
    }

    std::vector<std::size_t> near;
    for (std::size_t i = 0; i < gt.obstacles().size(); ++i) {
        const auto& a = gt.obstacles()[i];
        const Vec3 reach{a.radius + g * 1.5, a.radius + g * 1.5, 0.0};
        gt.candidates(a.center - reach, a.center + reach, near);
        for (auto k : near) {
            if (k <= i) continue;
            const auto& b = gt.obstacles()[k];
            const double gap = std::hypot(a.center.x - b.center.x, a.center.y - b.center.y) -
                               a.radius - b.radius;
            gt.measured_min_gap = std::min(gt.measured_min_gap, gap);
        }
    }
    return gt;
}

std::vector<EnvSpec> suite_27(const EnvSpec& base, std::uint64_t seed) {
    static constexpr double kDensity[] = {0.3, 0.45, 0.6};
    static constexpr double kSpread[] = {40.0, 80.0, 120.0};
    static constexpr double kGoal[] = {600.0, 900.0, 1200.0};
    std::vector<EnvSpec> out;
    out.reserve(27);
    std::uint64_t index = 0;
    for (double density : kDensity) {
        for (double spread : kSpread) {
            for (double goal : kGoal) {
                EnvSpec s = base;
                s.obstacle_density = density;
                s.spread_m = spread;
                s.goal_distance_m = goal;
                s.centroid_positions.clear();
                s.arena_bounds.reset();
                s.seed = splitmix64(seed * 1000003ULL + index++);
                out.push_back(std::move(s));
            }
        }
    }
    return out;
}

double measure_density(const GroundTruth& gt, const Vec3& center, int window_cells) {
    const double g = gt.grid_size();
    const long ci = cell_index(center.x, g);
    const long cj = cell_index(center.y, g);
    std::map<std::pair<long, long>, bool> occupied;
    std::vector<std::size_t> near;
    const double reach = (window_cells + 1) * g;
    gt.candidates(center - Vec3{reach, reach, 0}, center + Vec3{reach, reach, 0}, near);
    for (auto k : near) {
        const auto& o = gt.obstacles()[k];
        occupied[{cell_index(o.center.x, g), cell_index(o.center.y, g)}] = true;
    }
    long total = 0, occ = 0;
    for (long dj = -window_cells; dj <= window_cells; ++dj)
        for (long di = -window_cells; di <= window_cells; ++di) {
            ++total;
            if (occupied.count({ci + di, cj + dj})) ++occ;
        }
    return total > 0 ? static_cast<double>(occ) / static_cast<double>(total) : 0.0;
}

void write_env_config(std::ostream& os, const EnvSpec& spec) {
    os << std::setprecision(17);
    os << "density=" << spec.obstacle_density << '\n'
       << "spread_m=" << spec.spread_m << '\n'
       << "goal_distance_m=" << spec.goal_distance_m << '\n'
       << "grid_size_m=" << spec.grid_size_m << '\n'
       << "gap_size_m=" << spec.gap_size_m << '\n'
       << "seed=" << spec.seed << '\n'
       << "scale=" << spec.scale << '\n';
}

EnvSpec read_env_config(std::istream& is) {
    EnvSpec spec;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        if (eq == std::string::npos) {
            if (!trim(line).empty())
                throw std::invalid_argument("env config line " + std::to_string(lineno) +
                                            ": expected key=value");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "density") spec.obstacle_density = std::stod(value);
            else if (key == "spread_m") spec.spread_m = std::stod(value);
            else if (key == "goal_distance_m") spec.goal_distance_m = std::stod(value);
            else if (key == "grid_size_m") spec.grid_size_m = std::stod(value);
            else if (key == "gap_size_m") spec.gap_size_m = std::stod(value);
            else if (key == "seed") spec.seed = std::stoull(value);
            else if (key == "scale") spec.scale = std::stod(value);
            else throw std::invalid_argument("unknown key '" + key + "'");
        } catch (const std::logic_error& e) {
            throw std::invalid_argument("env config line " + std::to_string(lineno) + ": " +
                                        e.what());
        }
    }
    return spec;
}

EnvSpec load_env_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open env config " + path.string());
    return read_env_config(in);
}

void write_obstacles_csv(std::ostream& os, const GroundTruth& gt) {
    os << "cx,cy,cz,r,h\n" << std::setprecision(10);
    for (const auto& o : gt.obstacles())
        os << o.center.x << ',' << o.center.y << ',' << o.center.z << ',' << o.radius << ','
           << o.height << '\n';
}

}  // namespace roborun
