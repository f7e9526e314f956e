#include "doctest.h"

#include "roborun/mapping.hpp"
#include "roborun/octree.hpp"
#include "roborun/planning.hpp"

#include <cmath>

using namespace roborun;

namespace {

// root 76.8 m centred on the origin; finest voxels are aligned to multiples of 0.3
OccupancyTree make_tree() { return OccupancyTree({-38.4, -38.4, -38.4}, 0.3, 8); }

PointCloud single_ray(const Vec3& origin, const Vec3& end) {
    PointCloud c;
    c.origin = origin;
    c.points = {end};
    c.ray_ranges = {static_cast<float>(distance(origin, end))};
    return c;
}

GroundTruth one_pillar(const Vec3& c) {
    return GroundTruth({{c, 0.5, 10.0}}, {0, 0, 2}, {30, 0, 2}, Aabb{{-40, -40, 0}, {40, 40, 10}}, 2.0);
}

}  // namespace

TEST_CASE("fresh tree is Unknown everywhere") {
    const auto t = make_tree();
    for (double x : {-30.0, 0.0, 0.1, 17.3})
        for (double p : {0.3, 1.2, 9.6}) CHECK(t.query({x, 1.0, 2.0}, p) == Occupancy::Unknown);
    CHECK(t.known_volume() == 0.0);
}

TEST_CASE("occupancy dominates the coarser read") {
    auto t = make_tree();
    VoxelKey k;
    REQUIRE(t.key_of({0.1, 0.1, 0.1}, k));
    t.mark_occupied(k, 0);
    CHECK(t.query({0.1, 0.1, 0.1}, 0.3) == Occupancy::Occupied);
    CHECK(t.query({0.1, 0.1, 0.1}, 0.6) == Occupancy::Occupied);
    CHECK(t.query({0.4, 0.4, 0.4}, 0.6) == Occupancy::Occupied);  // same 0.6 parent
    CHECK(t.query({0.4, 0.4, 0.4}, 0.3) == Occupancy::Unknown);
}

TEST_CASE("eight free children read Free at the parent") {
    auto t = make_tree();
    VoxelKey k;
    REQUIRE(t.key_of({0.0, 0.0, 0.0}, k));
    const VoxelKey parent = k.at_level(1);
    for (int b = 0; b < 8; ++b)
        t.mark_free({(parent.x << 1) | (b & 1u), (parent.y << 1) | ((b >> 1) & 1u), (parent.z << 1) | ((b >> 2) & 1u)}, 0);
    CHECK(t.query_key(parent, 1) == Occupancy::Free);
    CHECK(t.known_volume() == doctest::Approx(0.6 * 0.6 * 0.6));
}

TEST_CASE("free rays never clear observed occupancy") {
    auto t = make_tree();
    VoxelKey k;
    REQUIRE(t.key_of({0.1, 0.1, 0.1}, k));
    t.mark_occupied(k, 0);
    t.mark_free(k, 0);
    CHECK(t.query_key(k, 0) == Occupancy::Occupied);
}

TEST_CASE("splitting a coarse Occupied leaf leaves inherited children a free ray may clear") {
    auto t = make_tree();
    VoxelKey k;
    REQUIRE(t.key_of({0.1, 0.1, 0.1}, k));
    t.mark_occupied(k.at_level(2), 2);  // 1.2 m block
    // a fine free observation carves its own voxel
    t.mark_free(k, 0);
    CHECK(t.query_key(k, 0) == Occupancy::Free);
    // a sibling still reads Occupied until it is observed
    VoxelKey s;
    REQUIRE(t.key_of({0.7, 0.1, 0.1}, s));
    CHECK(t.query_key(s, 0) == Occupancy::Occupied);
    t.mark_free(s, 0);
    CHECK(t.query_key(s, 0) == Occupancy::Free);
    // once observed Occupied at its own size it sticks
    VoxelKey o;
    REQUIRE(t.key_of({1.0, 1.0, 0.1}, o));
    t.mark_occupied(o, 0);
    t.mark_free(o, 0);
    CHECK(t.query_key(o, 0) == Occupancy::Occupied);
}

TEST_CASE("voxel-count law: halving precision on a solid cube is 8x the leaves") {
    for (int level = 1; level <= 3; ++level) {
        auto coarse = make_tree();
        auto fine = make_tree();
        const double side = 2.4;  // multiple of every size used
        auto fill = [&](OccupancyTree& t, int l) {
            const double s = t.size_at(l);
            const int n = static_cast<int>(std::lround(side / s));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int m = 0; m < n; ++m) {
                        VoxelKey k;
                        REQUIRE(t.key_of({(i + 0.5) * s, (j + 0.5) * s, (m + 0.5) * s}, k));
                        t.mark_occupied(k.at_level(l), l);
                    }
        };
        fill(coarse, level);
        fill(fine, level - 1);
        CHECK(fine.leaf_count(Occupancy::Occupied) == 8 * coarse.leaf_count(Occupancy::Occupied));
        CHECK(fine.known_volume() == doctest::Approx(coarse.known_volume()));
    }
}

TEST_CASE("downsample keeps one mean point per cell") {
    PointCloud c;
    c.points = {{0.1, 0.1, 0.1}, {0.3, 0.2, 0.4}};
    auto d = downsample_cloud(c, 0.5);
    REQUIRE(d.points.size() == 1);
    CHECK(d.points[0].x == doctest::Approx(0.2));
    CHECK(d.points[0].y == doctest::Approx(0.15));
    CHECK(d.points[0].z == doctest::Approx(0.25));

    // every point in its own cell: identity
    c.points = {{0.1, 0.1, 0.1}, {1.3, 0.2, 0.4}, {-2.0, 5.0, 1.0}};
    d = downsample_cloud(c, 0.3);
    REQUIRE(d.points.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(distance(d.points[i], c.points[i]) == 0.0);

    // corners of a cube of side 2*p0 land in 8 distinct cells
    c.points.clear();
    for (int b = 0; b < 8; ++b) c.points.push_back({(b & 1) * 1.0, ((b >> 1) & 1) * 1.0, ((b >> 2) & 1) * 1.0});
    CHECK(downsample_cloud(c, 0.5).points.size() == 8);
}

TEST_CASE("downsample cells follow the anchor") {
    PointCloud c;
    c.points = {{0.05, 0.0, 0.0}, {0.25, 0.0, 0.0}};
    CHECK(downsample_cloud(c, 0.3).points.size() == 1);
    CHECK(downsample_cloud(c, 0.3, {0.1, 0.0, 0.0}).points.size() == 2);
}

TEST_CASE("downsampled free endpoints are real ray endpoints") {
    PointCloud c;
    c.free_endpoints = {{20.0, 0.1, 2.0}, {20.0, 1.0, 2.0}};
    const auto d = downsample_cloud(c, 2.4);
    REQUIRE(d.free_endpoints.size() == 1);
    CHECK(distance(d.free_endpoints[0], c.free_endpoints[0]) == 0.0);
}

TEST_CASE("sense: empty world and analytic pillar hits") {
    const Aabb arena{{-40, -40, 0}, {40, 40, 10}};
    GroundTruth empty({}, {0, 0, 2}, {30, 0, 2}, arena, 2.0);
    CHECK(sense(empty, {0, 0, 2}, {1, 0, 0}).points.empty());

    const auto gt = one_pillar({5.5, 0.0, 0.0});
    SensorModel s;
    const auto cloud = sense(gt, {0, 0, 2}, {1, 0, 0}, s);
    REQUIRE_FALSE(cloud.points.empty());
    double nearest = kInf;
    for (const Vec3& p : cloud.points) {
        // every hit lies on the pillar surface
        CHECK(std::hypot(p.x - 5.5, p.y) == doctest::Approx(0.5).epsilon(1e-9));
        nearest = std::min(nearest, std::hypot(p.x, p.y));
    }
    // the nearest face is 5 m away; the closest ray misses dead-centre by under half a step
    const double half_step = 5.0 * std::tan(0.5 * s.azimuth_step_deg * 3.14159265358979 / 180.0);
    CHECK(nearest >= 5.0 - 1e-9);
    CHECK(nearest <= 5.0 + half_step);

    SensorModel forward;
    forward.frusta = 1;
    CHECK(sense(one_pillar({-5.5, 0.0, 0.0}), {0, 0, 2}, {1, 0, 0}, forward).points.empty());
}

TEST_CASE("integrate: one ray of 3 m") {
    auto t = make_tree();
    const Vec3 o{0.15, 0.15, 0.15}, e{3.15, 0.15, 0.15};
    const auto r = integrate(t, single_ray(o, e), {0.3, 1e6}, {});
    // independent traversal count along +x: cells floor((x + 38.4) / 0.3) from start to end
    const long first = static_cast<long>(std::floor((o.x + 38.4) / 0.3));
    const long last = static_cast<long>(std::floor((e.x + 38.4) / 0.3));
    CHECK(r.voxels_touched == static_cast<std::size_t>(last - first + 1));
    CHECK(r.voxels_touched == 11);
    CHECK(t.query(e, 0.3) == Occupancy::Occupied);
    for (double x = 0.15; x < 3.0; x += 0.3) CHECK(t.query({x, 0.15, 0.15}, 0.3) == Occupancy::Free);
    CHECK(r.integrated_volume == doctest::Approx(11 * 0.027));
}

TEST_CASE("integrate: zero budget leaves the tree alone") {
    auto t = make_tree();
    const auto before = t.hash();
    const auto r = integrate(t, single_ray({0, 0, 0}, {3, 0, 0}), {0.3, 0.0}, {});
    CHECK(r.integrated_volume == 0.0);
    CHECK(t.hash() == before);
}

TEST_CASE("integrate never exceeds v0 and doubles with it") {
    const auto gt = one_pillar({6.0, 0.0, 0.0});
    const auto cloud = sense(gt, {0, 0, 2}, {1, 0, 0});
    const double vox = 0.027;
    for (double v : {3.0, 10.0, 40.0}) {
        auto a = make_tree();
        auto b = make_tree();
        const auto ra = integrate(a, cloud, {0.3, v}, {});
        const auto rb = integrate(b, cloud, {0.3, 2 * v}, {});
        CHECK(ra.integrated_volume <= v + 1e-12);
        CHECK(rb.integrated_volume <= 2 * v + 1e-12);
        REQUIRE(rb.truncated);
        const double ratio_err = std::abs(static_cast<double>(rb.voxels_touched) - 2.0 * ra.voxels_touched);
        CHECK(ratio_err <= 1.0);
        CHECK(ra.voxels_touched == static_cast<std::size_t>(std::floor(v / vox + 1e-9)));
    }
}

TEST_CASE("the static perception budget admits a full scan") {
    EnvSpec s;
    s.seed = 3;
    const auto gt = generate_environment(s);
    auto t = OccupancyTree::for_arena(gt.arena(), gt.start().z, 0.3, 30.0);
    const auto cloud = sense(gt, gt.start(), {1, 0, 0});
    const auto r = integrate(t, cloud, {0.3, 46000.0}, {});
    CHECK_FALSE(r.truncated);
    CHECK(r.rays_used == r.rays_total);
}

TEST_CASE("handoff: empty, identity and inflation") {
    auto t = make_tree();
    const auto gt = one_pillar({4.0, 0.0, 0.0});
    integrate(t, sense(gt, {0.15, 0.15, 0.15}, {1, 0, 0}), {0.3, 1e6}, {});

    const auto none = handoff(t, 0.3, 0.0, {0, 0, 0});
    CHECK(none.known_volume == 0.0);
    CHECK(none.tree.query({1.0, 0.15, 0.15}, 0.3) == Occupancy::Unknown);

    const auto all = handoff(t, 0.3, kInf, {0, 0, 0});
    for (double x = -10.0; x <= 10.0; x += 0.3)
        for (double y = -3.0; y <= 3.0; y += 0.3)
            CHECK(all.tree.query({x, y, 0.15}, 0.3) == t.query({x, y, 0.15}, 0.3));

    auto one = make_tree();
    VoxelKey k;
    REQUIRE(one.key_of({0.1, 0.1, 0.1}, k));
    one.mark_occupied(k, 0);
    const auto v = handoff(one, 0.6, kInf, {0, 0, 0});
    CHECK(v.tree.query({0.4, 0.4, 0.4}, 0.6) == Occupancy::Occupied);
    CHECK(v.tree.query({0.4, 0.4, 0.4}, 0.3) == Occupancy::Occupied);  // no leaf finer than p1
}
