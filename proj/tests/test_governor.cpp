#include "doctest.h"

#include "roborun/governor.hpp"
#include "roborun/vehicle.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

using namespace roborun;

namespace {

LatencyModel desk_model() {
    LatencyModel m;
    m.q[0] = {4.289e-07, 0, 0, 40};
    m.q[1] = {5.529e-07, 0, 4.43e-10, 40};
    m.q[2] = {1.599e-06, 2.33e-07, 0, 40};
    return m;
}

const std::vector<double> kLadder{0.3, 0.6, 1.2, 2.4, 4.8, 9.6};

// no observed gap (sentinel): p0 floor drops to 2.4
double lo(const ProfileSnapshot& s) { return s.g_min >= 9.6 ? 2.4 : s.g_min; }

// solver constraints written out again, independent of the library's checker
bool admissible(const KnobPolicy& k, const ProfileSnapshot& s, const LatencyModel& m, double cap, std::string& why) {
    auto on = [](double p) {
        for (double c : kLadder)
            if (std::abs(p - c) < 1e-12) return true;
        return false;
    };
    const double V = std::min(s.v_sensor, s.v_map + s.v_sensor);
    const double lat = stage_latency(m, 0, k.p0, k.v0) + stage_latency(m, 1, k.p1, k.v1) + stage_latency(m, 2, k.p2, k.v2);
    if (!on(k.p0) || !on(k.p1) || !on(k.p2)) why = "ladder";
    else if (k.p1 != k.p2) why = "p1 != p2";
    else if (!k.degraded && (k.p0 < lo(s) - 1e-9 || k.p0 > std::min({k.p1, s.g_avg, s.d_obs}) + 1e-9)) why = "p0 range";
    else if (k.degraded && k.p0 > std::max(0.3, std::min(s.g_avg, s.d_obs)) + 1e-9) why = "degraded p0";
    else if (k.v0 < 0 || k.v1 < 0 || k.v2 < 0) why = "negative";
    else if (k.v0 > k.v1 + 1e-9 * (1 + k.v1)) why = "v0 > v1";
    else if (k.v1 > V + 1e-9 * (1 + V)) why = "v1 > bound";
    else if (k.v2 > cap + 1e-9 * cap) why = "v2 > cap";
    else if (lat > std::max(0.0, k.deadline) * (1 + 1e-9) + 1e-12) why = "late";
    else return true;
    return false;
}

ProfileSnapshot random_snapshot(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ProfileSnapshot s;
    s.g_min = 0.1 + 5.0 * u(rng);
    s.g_avg = s.g_min + 6.0 * u(rng);
    s.d_obs = u(rng) < 0.2 ? kInf : 15.0 * u(rng);
    if (u(rng) < 0.2) s.g_min = s.g_avg = kGapSentinel;
    s.v_sensor = 50000.0 * u(rng);
    s.v_map = 200000.0 * u(rng);
    return s;
}

bool any_precision(const ProfileSnapshot& s) {
    for (double p : kLadder)
        if (p >= lo(s) - 1e-9 && p <= std::min(s.g_avg, s.d_obs) + 1e-9) return true;
    return false;
}

// brute force: 6 precisions x 8 volume levels per stage, hard deadline filter
double grid_optimum(const ProfileSnapshot& s, double T, const LatencyModel& m, double cap) {
    const double V = std::min(s.v_sensor, s.v_map + s.v_sensor);
    double best = kInf;
    for (double p0 : kLadder) {
        if (p0 < lo(s) - 1e-9 || p0 > std::min(s.g_avg, s.d_obs) + 1e-9) continue;
        for (double p1 : kLadder) {
            if (p1 < p0) continue;
            for (int i = 0; i < 8; ++i)
                for (int j = i; j < 8; ++j)
                    for (int k = 0; k < 8; ++k) {
                        const double v0 = V * i / 7.0, v1 = V * j / 7.0, v2 = cap * k / 7.0;
                        const double lat =
                            stage_latency(m, 0, p0, v0) + stage_latency(m, 1, p1, v1) + stage_latency(m, 2, p1, v2);
                        if (lat > T) continue;
                        best = std::min(best, (T - lat) * (T - lat));
                    }
        }
    }
    return best;
}

}  // namespace

TEST_CASE("local budget") {
    CHECK(local_budget(10.0, 2.0) == doctest::Approx(4.43));
    CHECK(local_budget(20.0, 4.0) == doctest::Approx(4.37));
    CHECK(local_budget(d_stop(3.0), 3.0) == 0.0);
    CHECK(local_budget(0.0, 3.0) == 0.0);
    // hovering: evaluated at 0.1 m/s
    CHECK(local_budget(5.0, 0.0) == doctest::Approx((5.0 - d_stop(0.1)) / 0.1));
}

TEST_CASE("time budget hand traces") {
    const std::vector<double> ft{1.0, 1.0};
    CHECK(time_budget(std::vector<double>{}, std::vector<double>{}) == 0.0);
    CHECK(time_budget(std::vector<double>{5.0, 4.0, 10.0}, ft) == 2.0);
    CHECK(time_budget(std::vector<double>{5.0, 0.5, 10.0}, ft) == 1.0);
    CHECK(time_budget(Trajectory{}, ProfileSnapshot{}) == 0.0);
}

TEST_CASE("time budget on a trajectory uses the planned state") {
    // W0: d_unknown 30 at 2 m/s; two 2 m segments at 2 m/s -> 1 s each
    ProfileSnapshot s;
    s.d_unknown = 30.0;
    s.velocity = 2.0;
    Trajectory t;
    for (int i = 0; i < 3; ++i) t.waypoints.push_back({{2.0 * i, 0, 0}, 2.0, 30.0 - 2.0 * i});
    CHECK(time_budget(t, s) == doctest::Approx(2.0));
    t.waypoints[2].planned_visibility = d_stop(2.0);  // b_l = 0 at W2
    CHECK(time_budget(t, s) == doctest::Approx(1.0));
}

TEST_CASE("time budget properties") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ub(0.0, 10.0), uf(0.05, 3.0);
    std::uniform_int_distribution<int> un(0, 12);
    for (int trial = 0; trial < 2000; ++trial) {
        const int n = un(rng);
        std::vector<double> b{ub(rng)}, f;
        for (int i = 0; i < n; ++i) {
            b.push_back(ub(rng));
            f.push_back(uf(rng));
        }
        const double bg = time_budget(b, f);
        // admitted prefix = the k segments whose sum is b_g
        double acc = 0.0;
        int k = 0;
        while (k < n && acc + f[k] <= bg + 1e-12) acc += f[k++];
        CHECK(acc == doctest::Approx(bg));
        CHECK(bg <= b[0] + 1e-12);
        double pre = 0.0;
        for (int i = 1; i <= k; ++i) {
            pre += f[i - 1];
            CHECK(bg <= b[i] + pre + 1e-12);
        }
        // one more waypoint adds at most its own flight time
        std::vector<double> b2 = b, f2 = f;
        b2.push_back(ub(rng));
        f2.push_back(uf(rng));
        CHECK(time_budget(b2, f2) <= bg + f2.back() + 1e-12);
    }
}

TEST_CASE("stage latency") {
    LatencyModel m;
    m.q[0] = {0, 0, 1, 1};
    m.q[1] = {1, 0, 0, 1};
    CHECK(stage_latency(m, 0, 0.5, 3.0) == doctest::Approx(6.0));
    CHECK(stage_latency(m, 1, 0.5, 2.0) == doctest::Approx(16.0));
    CHECK(stage_latency(m, 1, 0.5, 0.0) == 0.0);
    const auto d = desk_model();
    for (int st = 0; st < 3; ++st)
        for (std::size_t i = 1; i < kLadder.size(); ++i)
            CHECK(stage_latency(d, st, kLadder[i], 1000.0) <= stage_latency(d, st, kLadder[i - 1], 1000.0));
}

TEST_CASE("solve: zero deadline gives zero volumes") {
    ProfileSnapshot s;
    s.v_sensor = 30000.0;
    s.v_map = 50000.0;
    const auto k = solve(s, 0.0, desk_model());
    CHECK(k.v0 == 0.0);
    CHECK(k.v1 == 0.0);
    CHECK(k.v2 == 0.0);
    CHECK(k.objective == 0.0);
    CHECK(k.budget_infeasible);
}

TEST_CASE("solve: pinned precision") {
    ProfileSnapshot s;
    s.g_min = s.g_avg = s.d_obs = 0.3;
    s.v_sensor = 30000.0;
    s.v_map = 50000.0;
    const auto k = solve(s, 1.0, desk_model());
    CHECK(k.p0 == 0.3);
    CHECK(k.p1 == 0.3);
    CHECK(k.p2 == 0.3);
    CHECK_FALSE(k.degraded);
}

TEST_CASE("solve: open space with a huge deadline takes every volume") {
    ProfileSnapshot s;  // sentinels: no gap in view
    s.v_sensor = 30000.0;
    s.v_map = 50000.0;
    const auto m = desk_model();
    const double T = 1e6;
    const auto k = solve(s, T, m);
    // the finest knobs above the open-space floor come closest to filling the deadline
    CHECK(k.p0 == 2.4);
    CHECK(k.p2 == 2.4);
    CHECK(k.v0 == doctest::Approx(30000.0));
    CHECK(k.v1 == doctest::Approx(30000.0));
    CHECK(k.v2 == doctest::Approx(1e6));
    CHECK(k.objective > 0.0);
    CHECK(k.objective == doctest::Approx(grid_optimum(s, T, m, 1e6)));
}

TEST_CASE("solve: no admissible precision is degraded but still on time") {
    ProfileSnapshot s;
    s.g_min = 2.0;
    s.g_avg = 3.0;
    s.d_obs = 0.5;
    s.v_sensor = 30000.0;
    s.v_map = 50000.0;
    const auto k = solve(s, 0.5, desk_model());
    CHECK(k.degraded);
    CHECK(k.p0 <= 0.5);
    std::string why;
    CHECK_MESSAGE(admissible(k, s, desk_model(), 1e6, why), why);
}

TEST_CASE("solve output satisfies every constraint") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ud(0.0, 3.0);
    const auto m = desk_model();
    for (int i = 0; i < 1000; ++i) {
        const auto s = random_snapshot(rng);
        const auto k = solve(s, ud(rng), m);
        std::string why;
        CHECK_MESSAGE(admissible(k, s, m, 1e6, why), why);
        if (!k.degraded) CHECK(check_policy(k, s, m).empty());
        const double lat = stage_latency(m, 0, k.p0, k.v0) + stage_latency(m, 1, k.p1, k.v1) + stage_latency(m, 2, k.p2, k.v2);
        CHECK(k.predicted_latency == doctest::Approx(lat));
    }
}

TEST_CASE("solve matches or beats the brute-force grid") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> ud(0.0, 3.0);
    const auto m = desk_model();
    int compared = 0;
    while (compared < 200) {
        const auto s = random_snapshot(rng);
        if (!any_precision(s)) continue;
        const double T = ud(rng);
        const auto k = solve(s, T, m);
        REQUIRE_FALSE(k.degraded);
        CHECK(k.objective <= grid_optimum(s, T, m, 1e6) + 1e-9);
        ++compared;
    }
}

TEST_CASE("model file round trip") {
    LatencyModel m = desk_model();
    m.fit_mse = 0.035;
    std::stringstream ss;
    write_model(ss, m);
    const auto r = read_model(ss);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) CHECK(r.q[i][j] == doctest::Approx(m.q[i][j]).epsilon(1e-11));
    CHECK(r.fit_mse == doctest::Approx(0.035));

    std::stringstream bad("1 2 3 4\n");
    CHECK_THROWS(read_model(bad));
}
