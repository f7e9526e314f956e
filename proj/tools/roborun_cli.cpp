#include "CLI11.hpp"

#include "roborun/bench.hpp"
#include "roborun/calibration.hpp"
#include "roborun/svg.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace roborun;
namespace fs = std::filesystem;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kInfra = 1;
constexpr int kThreshold = 2;

LatencyModel need_model(const fs::path& p) {
    if (!fs::exists(p))
        throw std::runtime_error("latency model " + p.string() +
                                 " not found; run `roborun calibrate --out " + p.string() + "` first");
    return load_model(p);
}

std::vector<ModeKind> parse_modes(const std::string& s) {
    std::vector<ModeKind> out;
    std::stringstream ss(s);
    for (std::string m; std::getline(ss, m, ',');)
        if (!m.empty()) out.push_back(parse_mode(m));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RoboRun desk-scale drone navigation simulator"};
    app.require_subcommand(1);
    std::string model_path = "models/latency_model.txt";
    app.add_option("--model", model_path, "latency model file");

    // gen
    auto* gen = app.add_subcommand("gen", "write the 27 suite environments (config + obstacles CSV)");
    std::string gen_out = "envs";
    double gen_scale = 0.1;
    std::uint64_t gen_seed = 1;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--scale", gen_scale, "distance scale");
    gen->add_option("--seed", gen_seed, "suite seed");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "fit the per-stage latency model on this machine");
    std::string cal_out = "models/latency_model.txt";
    std::string cal_csv;
    double cal_scale = 40.0;
    cal->add_option("--out", cal_out, "model file to write");
    cal->add_option("--csv", cal_csv, "also write the raw samples");
    cal->add_option("--latency-scale", cal_scale, "platform multiplier folded into q3");

    // run
    auto* run = app.add_subcommand("run", "fly one mission");
    std::string run_env, run_mode = "roborun", run_latency = "modeled", run_out;
    std::uint64_t run_seed = 1;
    run->add_option("--env", run_env, "env config file (default: mid-difficulty spec)");
    run->add_option("--mode", run_mode, "baseline|roborun");
    run->add_option("--seed", run_seed, "mission seed");
    run->add_option("--latency", run_latency, "modeled|measured");
    run->add_option("--out", run_out, "mission CSV (default: stdout summary only)");

    // suite
    auto* suite = app.add_subcommand("suite", "27 envs x modes x seeds");
    SuiteConfig scfg;
    std::string suite_modes = "baseline,roborun", suite_out = "out/suite", suite_latency = "modeled";
    bool suite_check = false;
    suite->add_option("--scale", scfg.scale, "distance scale");
    suite->add_option("--seeds", scfg.seeds_per_env, "seeds per env");
    suite->add_option("--modes", suite_modes, "comma list of baseline,roborun");
    suite->add_option("--jobs", scfg.parallelism, "worker threads (0 = all cores)");
    suite->add_option("--latency", suite_latency, "modeled|measured");
    suite->add_option("--out", suite_out, "output directory");
    suite->add_flag("--check", suite_check, "exit 2 when an acceptance threshold fails");

    // report
    auto* rep = app.add_subcommand("report", "regenerate SVG plots from a suite directory");
    std::string rep_in = "out/suite";
    rep->add_option("--in", rep_in, "suite output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            fs::create_directories(gen_out);
            EnvSpec base;
            base.scale = gen_scale;
            const auto specs = suite_27(base, gen_seed);
            for (std::size_t i = 0; i < specs.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "env_%02zu", i);
                std::ofstream c(fs::path(gen_out) / (std::string(name) + ".cfg"));
                write_env_config(c, specs[i]);
                std::ofstream o(fs::path(gen_out) / (std::string(name) + "_obstacles.csv"));
                write_obstacles_csv(o, generate_environment(specs[i]));
            }
            std::cout << "wrote " << specs.size() << " environments to " << gen_out << '\n';
            return kOk;
        }
        if (*cal) {
            CalibrationConfig cc;
            cc.latency_scale = cal_scale;
            const CalibrationResult r = calibrate(real_executors(), cc);
            if (fs::path(cal_out).has_parent_path()) fs::create_directories(fs::path(cal_out).parent_path());
            save_model(cal_out, r.model);
            if (!cal_csv.empty()) {
                std::ofstream f(cal_csv);
                write_calibration_csv(f, r);
            }
            std::printf("mse %.4f (perception %.4f, handoff %.4f, planning %.4f) -> %s\n", r.model.fit_mse,
                        r.model.stage_mse[0], r.model.stage_mse[1], r.model.stage_mse[2], cal_out.c_str());
            return kOk;
        }
        if (*run) {
            const LatencyModel model = need_model(model_path);
            EnvSpec spec;
            if (!run_env.empty()) spec = load_env_config(run_env);
            const GroundTruth gt = generate_environment(spec);
            const ModeKind kind = parse_mode(run_mode);
            const LatencySource src = parse_latency_source(run_latency);
            const RuntimeMode mode = kind == ModeKind::Baseline ? RuntimeMode::baseline(src) : RuntimeMode::roborun(src);
            const MissionLog log = run_mission(gt, mode, model, run_seed);
            if (!run_out.empty()) {
                std::ofstream f(run_out);
                write_mission_csv(f, log);
            }
            const auto& s = log.summary;
            std::printf("%s: time %.1f s, distance %.1f m, velocity %.2f m/s, energy %.0f J, reached %d, "
                        "collided %d, timed out %d, decisions %d\n",
                        log.mode.c_str(), s.flight_time, s.distance, s.avg_velocity, s.energy, s.reached,
                        s.collided, s.timed_out, s.decisions);
            return kOk;
        }
        if (*suite) {
            const LatencyModel model = need_model(model_path);
            scfg.modes = parse_modes(suite_modes);
            scfg.latency_source = parse_latency_source(suite_latency);
            scfg.output_dir = suite_out;
            const SuiteReport report = run_suite(scfg, model);
            std::ifstream s(fs::path(suite_out) / "summary.csv");
            std::cout << s.rdbuf();
            int failed = 0;
            for (const auto& r : report.rows) failed += r.failed ? 1 : 0;
            if (failed > 0) {
                std::fprintf(stderr, "%d missions failed\n", failed);
                return kInfra;
            }
            if (suite_check) {
                bool ok = true;
                for (const auto& c : suite_checks(report)) {
                    std::printf("%s %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
                    ok = ok && c.pass;
                }
                if (!ok) return kThreshold;
            }
            return kOk;
        }
        if (*rep) {
            write_report_plots(rep_in);
            std::cout << "plots written to " << rep_in << '\n';
            return kOk;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInfra;
    }
    return kOk;
}
