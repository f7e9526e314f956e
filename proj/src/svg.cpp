#include "roborun/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace roborun {

namespace {

constexpr const char* kModeColor[] = {"#7f7f7f", "#d62728"};  // baseline, roborun
constexpr const char* kStageColor[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b"};
constexpr const char* kStageName[] = {"perception", "handoff", "planning", "point cloud", "runtime"};

const char* color_of(ModeKind m) { return kModeColor[m == ModeKind::RoboRun ? 1 : 0]; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// fixed formatting keeps output byte-stable
std::string n(double v) { return fmt("%.2f", v); }

void open_svg(std::ostream& os, int w, int h) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
       << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
}

void text(std::ostream& os, double x, double y, const std::string& s, const char* anchor = "start") {
    os << "<text x=\"" << n(x) << "\" y=\"" << n(y) << "\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
}

double nice_max(double v) {
    if (!(v > 0.0) || !std::isfinite(v)) return 1.0;
    const double e = std::pow(10.0, std::floor(std::log10(v)));
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
        if (m * e >= v) return m * e;
    return 10.0 * e;
}

// y axis with 5 ticks; returns nothing, draws into [x0, y0]..[x0, y1]
void y_axis(std::ostream& os, double x0, double y_top, double y_bot, double vmax, const std::string& label) {
    os << "<line x1=\"" << n(x0) << "\" y1=\"" << n(y_top) << "\" x2=\"" << n(x0) << "\" y2=\"" << n(y_bot)
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = vmax * i / 4.0;
        const double y = y_bot - (y_bot - y_top) * i / 4.0;
        os << "<line x1=\"" << n(x0 - 3) << "\" y1=\"" << n(y) << "\" x2=\"" << n(x0) << "\" y2=\"" << n(y)
           << "\" stroke=\"black\"/>\n";
        text(os, x0 - 5, y + 4, fmt("%.3g", v), "end");
    }
    text(os, x0, y_top - 8, label, "middle");
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
    return f;
}

}  // namespace

MissionTrace trace_of(const MissionLog& log, const GroundTruth& world) {
    MissionTrace t;
    for (const auto& r : log.records) {
        t.latency.push_back({r.stage_latency[0], r.stage_latency[1], r.stage_latency[2], r.point_cloud_latency,
                             r.runtime_overhead});
        t.budget.push_back(r.budget);
        t.p0.push_back(r.policy.p0);
        t.position.push_back(r.snapshot.position);
    }
    t.obstacles = world.obstacles();
    return t;
}

MissionTrace read_trace(std::istream& mission_csv, std::istream& obstacles_csv) {
    MissionTrace t;
    std::string line;
    if (!std::getline(mission_csv, line)) throw std::runtime_error("mission csv: empty");
    std::map<std::string, std::size_t> col;
    {
        const auto h = split(line);
        for (std::size_t i = 0; i < h.size(); ++i) col[h[i]] = i;
    }
    auto at = [&](const std::vector<std::string>& f, const char* name) {
        auto it = col.find(name);
        if (it == col.end() || it->second >= f.size()) throw std::runtime_error(std::string("mission csv: no ") + name);
        return std::strtod(f[it->second].c_str(), nullptr);
    };
    while (std::getline(mission_csv, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto f = split(line);
        t.latency.push_back({at(f, "lat_perception"), at(f, "lat_handoff"), at(f, "lat_planning"),
                             at(f, "lat_point_cloud"), at(f, "lat_runtime")});
        t.budget.push_back(at(f, "budget"));
        t.p0.push_back(at(f, "p0"));
        t.position.push_back({at(f, "x"), at(f, "y"), at(f, "z")});
    }
    if (std::getline(obstacles_csv, line)) {
        while (std::getline(obstacles_csv, line)) {
            const auto f = split(line);
            if (f.size() < 5) continue;
            Obstacle o;
            o.center = {std::strtod(f[0].c_str(), nullptr), std::strtod(f[1].c_str(), nullptr),
                        std::strtod(f[2].c_str(), nullptr)};
            o.radius = std::strtod(f[3].c_str(), nullptr);
            o.height = std::strtod(f[4].c_str(), nullptr);
            t.obstacles.push_back(o);
        }
    }
    return t;
}

void write_bars_svg(std::ostream& os, const SuiteReport& report) {
    struct Metric {
        const char* name;
        double ModeAggregate::*field;
    };
    const Metric metrics[] = {{"mission time (s)", &ModeAggregate::mission_time},
                              {"velocity (m/s)", &ModeAggregate::velocity},
                              {"energy (kJ)", &ModeAggregate::energy},
                              {"collision rate", &ModeAggregate::collision_rate}};
    const auto modes = report.modes();
    std::map<ModeKind, ModeAggregate> agg;
    for (ModeKind m : modes) agg[m] = report.aggregate(m);

    const int panel_w = 200, h = 280;
    open_svg(os, panel_w * 4 + 40, h);
    for (int i = 0; i < 4; ++i) {
        const double x0 = 60.0 + i * panel_w, y_top = 40.0, y_bot = h - 40.0;
        const double scale = metrics[i].field == &ModeAggregate::energy ? 1e-3 : 1.0;
        double vmax = 0.0;
        for (ModeKind m : modes) vmax = std::max(vmax, agg[m].*metrics[i].field * scale);
        if (metrics[i].field == &ModeAggregate::collision_rate) vmax = std::max(vmax, 0.2);
        vmax = nice_max(vmax);
        y_axis(os, x0, y_top, y_bot, vmax, metrics[i].name);
        const double bw = 40.0;
        for (std::size_t k = 0; k < modes.size(); ++k) {
            const double v = agg[modes[k]].*metrics[i].field * scale;
            const double bh = (y_bot - y_top) * v / vmax;
            const double x = x0 + 20.0 + k * (bw + 20.0);
            os << "<rect x=\"" << n(x) << "\" y=\"" << n(y_bot - bh) << "\" width=\"" << n(bw) << "\" height=\""
               << n(bh) << "\" fill=\"" << color_of(modes[k]) << "\"/>\n";
            text(os, x + bw / 2, y_bot - bh - 3, fmt("%.3g", v), "middle");
            text(os, x + bw / 2, y_bot + 14, mode_name(modes[k]), "middle");
        }
    }
    os << "</svg>\n";
}

void write_sensitivity_svg(std::ostream& os, const SensitivitySeries& s) {
    const int w = 420, h = 300;
    const double x0 = 70.0, x1 = w - 110.0, y_top = 40.0, y_bot = h - 50.0;
    double vmax = 0.0;
    for (const auto& [m, v] : s.mission_time)
        for (double t : v) vmax = std::max(vmax, t);
    vmax = nice_max(vmax);
    open_svg(os, w, h);
    y_axis(os, x0, y_top, y_bot, vmax, "mission time (s)");
    const std::size_t nl = s.levels.size();
    auto xat = [&](std::size_t i) { return nl > 1 ? x0 + 20.0 + (x1 - x0 - 40.0) * i / (nl - 1) : (x0 + x1) / 2; };
    os << "<line x1=\"" << n(x0) << "\" y1=\"" << n(y_bot) << "\" x2=\"" << n(x1) << "\" y2=\"" << n(y_bot)
       << "\" stroke=\"black\"/>\n";
    for (std::size_t i = 0; i < nl; ++i) text(os, xat(i), y_bot + 15, fmt("%g", s.levels[i]), "middle");
    text(os, (x0 + x1) / 2, y_bot + 32, knob_name(s.knob), "middle");
    int row = 0;
    for (const auto& [m, v] : s.mission_time) {
        os << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << color_of(m) << "\" points=\"";
        for (std::size_t i = 0; i < v.size() && i < nl; ++i)
            os << n(xat(i)) << ',' << n(y_bot - (y_bot - y_top) * v[i] / vmax) << ' ';
        os << "\"/>\n";
        for (std::size_t i = 0; i < v.size() && i < nl; ++i)
            os << "<circle cx=\"" << n(xat(i)) << "\" cy=\"" << n(y_bot - (y_bot - y_top) * v[i] / vmax)
               << "\" r=\"3\" fill=\"" << color_of(m) << "\"/>\n";
        const auto it = s.worst_ratio.find(m);
        text(os, x1 + 8, y_top + 15 + 18 * row, std::string(mode_name(m)) + " " +
                                                     fmt("%.2fx", it != s.worst_ratio.end() ? it->second : 1.0));
        ++row;
    }
    os << "</svg>\n";
}

void write_breakdown_svg(std::ostream& os, const MissionTrace& t) {
    const int w = 900, h = 320;
    const double x0 = 60.0, x1 = w - 130.0, y_top = 40.0, y_bot = h - 40.0;
    double vmax = 0.0;
    for (std::size_t i = 0; i < t.latency.size(); ++i) {
        double s = 0.0;
        for (double v : t.latency[i]) s += v;
        vmax = std::max({vmax, s, t.budget[i]});
    }
    vmax = nice_max(vmax);
    open_svg(os, w, h);
    y_axis(os, x0, y_top, y_bot, vmax, "latency (s)");
    const std::size_t nd = t.latency.size();
    const double bw = nd > 0 ? (x1 - x0) / nd : 1.0;
    for (std::size_t i = 0; i < nd; ++i) {
        double acc = 0.0;
        for (int k = 0; k < 5; ++k) {
            const double v = t.latency[i][static_cast<std::size_t>(k)];
            const double y = y_bot - (y_bot - y_top) * (acc + v) / vmax;
            const double bh = (y_bot - y_top) * v / vmax;
            os << "<rect x=\"" << n(x0 + i * bw) << "\" y=\"" << n(y) << "\" width=\"" << n(bw) << "\" height=\""
               << n(bh) << "\" fill=\"" << kStageColor[k] << "\"/>\n";
            acc += v;
        }
    }
    if (nd > 0) {
        os << "<polyline fill=\"none\" stroke=\"black\" stroke-dasharray=\"4,2\" points=\"";
        for (std::size_t i = 0; i < nd; ++i)
            os << n(x0 + (i + 0.5) * bw) << ',' << n(y_bot - (y_bot - y_top) * std::min(t.budget[i], vmax) / vmax) << ' ';
        os << "\"/>\n";
    }
    text(os, (x0 + x1) / 2, y_bot + 25, "decision", "middle");
    for (int k = 0; k < 5; ++k) {
        os << "<rect x=\"" << n(x1 + 10) << "\" y=\"" << n(y_top + 18 * k) << "\" width=\"10\" height=\"10\" fill=\""
           << kStageColor[k] << "\"/>\n";
        text(os, x1 + 25, y_top + 18 * k + 9, kStageName[k]);
    }
    text(os, x1 + 25, y_top + 18 * 5 + 9, "deadline (dashed)");
    os << "</svg>\n";
}

void write_trajectory_svg(std::ostream& os, const MissionTrace& t) {
    double lo_x = kInf, lo_y = kInf, hi_x = -kInf, hi_y = -kInf;
    auto grow = [&](double x, double y, double r) {
        lo_x = std::min(lo_x, x - r);
        lo_y = std::min(lo_y, y - r);
        hi_x = std::max(hi_x, x + r);
        hi_y = std::max(hi_y, y + r);
    };
    for (const Vec3& p : t.position) grow(p.x, p.y, 1.0);
    for (const Obstacle& o : t.obstacles) grow(o.center.x, o.center.y, o.radius);
    if (!(hi_x > lo_x)) lo_x = 0, hi_x = 1, lo_y = 0, hi_y = 1;
    const double w = 900.0, pad = 20.0;
    const double s = (w - 2 * pad - 120.0) / (hi_x - lo_x);
    const double h = (hi_y - lo_y) * s + 2 * pad;
    open_svg(os, static_cast<int>(w), static_cast<int>(std::ceil(h)));
    auto X = [&](double x) { return pad + (x - lo_x) * s; };
    auto Y = [&](double y) { return h - pad - (y - lo_y) * s; };
    for (const Obstacle& o : t.obstacles)
        os << "<circle cx=\"" << n(X(o.center.x)) << "\" cy=\"" << n(Y(o.center.y)) << "\" r=\""
           << n(std::max(0.5, o.radius * s)) << "\" fill=\"#bbbbbb\"/>\n";
    // heat: fine precision = hot
    auto heat = [](double p) {
        const double u = std::clamp(std::log2(std::max(p, 0.3) / 0.3) / 5.0, 0.0, 1.0);
        const int r = static_cast<int>(std::lround(255 * (1.0 - u)));
        const int b = static_cast<int>(std::lround(255 * u));
        char buf[16];
        std::snprintf(buf, sizeof buf, "#%02x30%02x", r, b);
        return std::string(buf);
    };
    for (std::size_t i = 1; i < t.position.size(); ++i)
        os << "<line x1=\"" << n(X(t.position[i - 1].x)) << "\" y1=\"" << n(Y(t.position[i - 1].y)) << "\" x2=\""
           << n(X(t.position[i].x)) << "\" y2=\"" << n(Y(t.position[i].y)) << "\" stroke-width=\"3\" stroke=\""
           << heat(t.p0[i - 1]) << "\"/>\n";
    const double lx = w - 110.0;
    int row = 0;
    for (double p : {0.3, 0.6, 1.2, 2.4, 4.8, 9.6}) {
        os << "<rect x=\"" << n(lx) << "\" y=\"" << n(pad + 16 * row) << "\" width=\"10\" height=\"10\" fill=\""
           << heat(p) << "\"/>\n";
        text(os, lx + 15, pad + 16 * row + 9, fmt("p0 %.1f m", p));
        ++row;
    }
    os << "</svg>\n";
}

void write_report_plots(const std::filesystem::path& dir) {
    SuiteReport report;
    {
        std::ifstream f(dir / "report.csv");
        if (!f) throw std::runtime_error("no report.csv in " + dir.string());
        report = read_report_csv(f);
    }
    {
        std::ofstream f(dir / "mission_metrics.svg");
        write_bars_svg(f, report);
    }
    for (Knob k : {Knob::Density, Knob::Spread, Knob::GoalDistance}) {
        std::ofstream f(dir / (std::string("sensitivity_") + knob_name(k) + ".svg"));
        write_sensitivity_svg(f, sensitivity(report, k));
    }
    std::ifstream m(dir / "representative_mission.csv"), o(dir / "representative_obstacles.csv");
    if (m && o) {
        const MissionTrace t = read_trace(m, o);
        std::ofstream b(dir / "latency_breakdown.svg");
        write_breakdown_svg(b, t);
        std::ofstream tr(dir / "trajectory_heatmap.svg");
        write_trajectory_svg(tr, t);
    }
}

}  // namespace roborun
