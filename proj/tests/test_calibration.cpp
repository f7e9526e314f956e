#include "doctest.h"

#include "roborun/calibration.hpp"

#include <random>
#include <sstream>

using namespace roborun;

namespace {
// (2 p̂² + p̂) · 0.5 v
double exact(double p, double v) {
    const double ph = 1.0 / p;
    return (2.0 * ph * ph + ph) * 0.5 * v;
}

CalibrationConfig synthetic_cfg() {
    CalibrationConfig c;
    c.fit_q3 = 0.5;
    c.latency_scale = 1.0;
    return c;
}
}  // namespace

TEST_CASE("exact model is recovered") {
    const StageExecutor e = exact;
    const auto r = calibrate({e, e, e}, synthetic_cfg());
    for (int s = 0; s < 3; ++s) {
        const auto& q = r.model.q[s];
        CHECK(std::abs(q[0] - 0.0) <= 1e-6);
        CHECK(std::abs(q[1] - 2.0) <= 1e-6);
        CHECK(std::abs(q[2] - 1.0) <= 1e-6);
        CHECK(q[3] == 0.5);
    }
    CHECK(r.model.fit_mse < 1e-12);
    // 3 stages x 6 precisions x 4 volumes x 5 repetitions
    CHECK(r.samples.size() == 360);
}

TEST_CASE("latency scale folds into q3 only") {
    const StageExecutor e = exact;
    auto cfg = synthetic_cfg();
    cfg.latency_scale = 40.0;
    const auto r = calibrate({e, e, e}, cfg);
    CHECK(r.model.q[0][3] == doctest::Approx(20.0));
    CHECK(stage_latency(r.model, 0, 0.6, 100.0) == doctest::Approx(40.0 * exact(0.6, 100.0)));
}

TEST_CASE("5% multiplicative noise stays under the fit bound") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.05);
    for (int trial = 0; trial < 20; ++trial) {
        const StageExecutor e = [&](double p, double v) { return exact(p, v) * (1.0 + n(rng)); };
        const auto r = calibrate({e, e, e}, synthetic_cfg());
        CHECK(r.model.fit_mse < 0.08);
    }
}

TEST_CASE("an executor the model cannot describe is rejected") {
    // latency grows with p instead of falling: no non-negative fit comes close
    const StageExecutor e = [](double p, double v) { return p * p * p * p * v * 1e-3 + 1e-9; };
    CHECK_THROWS_AS(calibrate({e, e, e}, synthetic_cfg()), CalibrationError);
}

TEST_CASE("calibration csv has one row per sample") {
    const StageExecutor e = exact;
    const auto r = calibrate({e, e, e}, synthetic_cfg());
    std::ostringstream os;
    write_calibration_csv(os, r);
    std::istringstream is(os.str());
    std::string line;
    int rows = 0;
    std::getline(is, line);
    CHECK(line == "stage,p,v,rep,latency_s");
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 360);
}
