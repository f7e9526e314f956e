#include "doctest.h"

#include "roborun/profilers.hpp"

#include <cmath>
#include <numbers>

using namespace roborun;

namespace {
OccupancyTree make_tree() { return OccupancyTree({-38.4, -38.4, -38.4}, 0.3, 8); }

// dense synthetic ring of hits around a pillar at z = 2
void ring(PointCloud& c, double x, double y, double r) {
    for (int k = 0; k < 360; ++k) {
        const double a = k * std::numbers::pi / 180.0;
        c.points.push_back({x + r * std::cos(a), y + r * std::sin(a), 2.0});
    }
}

Trajectory straight(const Vec3& a, const Vec3& b) {
    Trajectory t;
    t.waypoints.push_back({a, 0.0, 0.0});
    t.waypoints.push_back({b, 0.0, 0.0});
    return t;
}
}  // namespace

TEST_CASE("gap between two sensed pillars") {
    const Aabb arena{{-30, -30, 0}, {30, 30, 10}};
    // centres 7 m apart, radius 0.5: 6 m of free space between them
    GroundTruth gt({{{10.0, -3.5, 0.0}, 0.5, 10.0}, {{10.0, 3.5, 0.0}, 0.5, 10.0}}, {0, 0, 2}, {20, 0, 2},
                   arena, 2.0);
    const auto cloud = sense(gt, {0, 0, 2}, {1, 0, 0});
    const auto g = profile_gaps(cloud, {0, 0, 2}, {1, 0, 0});
    CHECK(g.clusters == 2);
    CHECK(std::abs(g.g_min - 6.0) <= 0.6);
    CHECK(g.g_avg == g.g_min);
}

TEST_CASE("gap sentinel with fewer than two obstacles") {
    PointCloud c;
    CHECK(profile_gaps(c, {0, 0, 2}, {1, 0, 0}).g_min == kGapSentinel);
    ring(c, 10.0, 0.0, 0.5);
    const auto g = profile_gaps(c, {0, 0, 2}, {1, 0, 0});
    CHECK(g.clusters == 1);
    CHECK(g.g_min == kGapSentinel);
    CHECK(g.g_avg == kGapSentinel);
}

TEST_CASE("gaps follow adjacent pillars only") {
    PointCloud c;
    ring(c, 10.0, -7.0, 0.5);
    ring(c, 10.0, -2.0, 0.5);
    ring(c, 10.0, 7.0, 0.5);
    const auto g = profile_gaps(c, {0, 0, 2}, {1, 0, 0});
    CHECK(g.clusters == 3);
    CHECK(g.g_min == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(g.g_avg == doctest::Approx(6.0).epsilon(1e-6));

    // a pillar behind the drone is ignored
    ring(c, -10.0, 0.0, 0.5);
    CHECK(profile_gaps(c, {0, 0, 2}, {1, 0, 0}).clusters == 3);
}

TEST_CASE("distances on a fresh tree") {
    const auto t = make_tree();
    const auto d = profile_distances(t, {0, 0, 0.15}, straight({0, 0, 0.15}, {10, 0, 0.15}));
    CHECK(d.d_obs == kInf);
    CHECK(d.d_unknown == 0.0);
}

TEST_CASE("d_obs to a single occupied voxel") {
    auto t = make_tree();
    VoxelKey k;
    REQUIRE(t.key_of({0.1, 0.1, 0.1}, k));
    t.mark_occupied(k, 0);
    const Vec3 c = t.center_of(k, 0);
    const auto d = profile_distances(t, c + Vec3{5.0, 0.0, 0.0}, Trajectory{});
    CHECK(d.d_obs == doctest::Approx(4.85));
}

TEST_CASE("d_unknown along a known-free trajectory") {
    auto t = make_tree();
    for (double x = 0.6; x < 36.0; x += 1.2) {
        VoxelKey k;
        REQUIRE(t.key_of({x, 0.6, 0.6}, k));
        t.mark_free(k.at_level(2), 2);
    }
    // free slab ends at x = 36; a 30 m trajectory stays inside
    auto d = profile_distances(t, {1, 0.6, 0.6}, straight({1, 0.6, 0.6}, {31, 0.6, 0.6}));
    CHECK(d.d_unknown == doctest::Approx(30.0));
    d = profile_distances(t, {30, 0.6, 0.6}, straight({30, 0.6, 0.6}, {40, 0.6, 0.6}));
    CHECK(d.d_unknown == doctest::Approx(6.0).epsilon(0.03));
}

TEST_CASE("v_map counts known leaf volume") {
    auto t = make_tree();
    const int k = 5;
    for (int i = 0; i < k; ++i) {
        VoxelKey key;
        REQUIRE(t.key_of({0.3 + 0.6 * 2 * i, 0.3, 0.3}, key));
        t.mark_free(key.at_level(1), 1);
    }
    const double s = 0.6;
    PointCloud empty_cloud;
    CHECK(profile_volumes(t, empty_cloud).v_map == doctest::Approx(k * s * s * s));
}

TEST_CASE("v_sensor of an unobstructed scan is the frustum volume") {
    const Aabb arena{{-30, -30, 0}, {30, 30, 10}};
    GroundTruth empty({}, {0, 0, 2}, {20, 0, 2}, arena, 2.0);
    SensorModel sm;
    const auto cloud = sense(empty, {0, 0, 2}, {1, 0, 0}, sm);
    // full azimuth, band of half-height 1.5 ring spacings
    const double band = 2.0 * std::sin(1.5 * sm.ring_elevation_deg * std::numbers::pi / 180.0);
    const double expect = 2.0 * std::numbers::pi * band * std::pow(sm.max_range, 3) / 3.0;
    CHECK(profile_volumes(make_tree(), cloud).v_sensor == doctest::Approx(expect).epsilon(1e-6));
    CHECK(profile_volumes(make_tree(), PointCloud{}).v_sensor == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("profilers leave the map untouched") {
    auto t = make_tree();
    VoxelKey k;
    REQUIRE(t.key_of({2, 0, 0}, k));
    t.mark_occupied(k, 0);
    const auto h = t.hash();
    PointCloud c;
    ring(c, 10.0, 0.0, 0.5);
    profile_distances(t, {0, 0, 0}, straight({0, 0, 0}, {5, 0, 0}));
    profile_volumes(t, c);
    profile_gaps(c, {0, 0, 0}, {1, 0, 0});
    CHECK(t.hash() == h);
}
