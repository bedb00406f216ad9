#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "carm/errors.hpp"
#include "carm/wgrid.hpp"
#include "oracle/oracle.hpp"
#include "support.hpp"

using namespace carm;

namespace {

BoundingBox cube_box(std::int64_t nx, std::int64_t ny, std::int64_t nz, double d = 0.01) {
    return {Vec3::Zero(), Vec3(nx * d, ny * d, nz * d), d};
}

double oracle_cost(const BoundingBox& box, const Spheres& obs, Connectivity conn, const CubeId& s, const CubeId& t) {
    const auto fs = flat_cube_id(s, box);
    const auto ft = flat_cube_id(t, box);
    const auto g = oracle::materialize_cube_graph(box, obs, conn, fs, ft);
    return oracle::dijkstra_reference(g, fs)[ft];
}

void expect_well_formed(const CubePath& p, const CubeGraph& g, const CubeId& s, const CubeId& t) {
    ASSERT_FALSE(p.cubes.empty());
    EXPECT_EQ(p.cubes.front(), s);
    EXPECT_EQ(p.cubes.back(), t);
    for (std::size_t i = 0; i < p.cubes.size(); ++i) {
        EXPECT_TRUE(in_bounds(p.cubes[i], g.box()));
        if (i > 0 && i + 1 < p.cubes.size()) EXPECT_FALSE(g.blocked(p.cubes[i]));
        if (i > 0) {
            const auto& a = p.cubes[i - 1];
            const auto& b = p.cubes[i];
            EXPECT_LE(std::max({std::abs(a.ix - b.ix), std::abs(a.iy - b.iy), std::abs(a.iz - b.iz)}), 1);
        }
    }
    auto sorted = p.cubes;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end()) << "repeated cube";
    EXPECT_DOUBLE_EQ(p.length, g.path_length(p.cubes));
}

}  // namespace

TEST(BoundingBox, CountsAndChecks) {
    const BoundingBox desk{Vec3::Zero(), Vec3(0.82, 0.82, 0.74), 0.01};
    EXPECT_EQ(desk.counts(), (std::array<std::int64_t, 3>{82, 82, 74}));
    EXPECT_EQ(desk.cube_count(), 82u * 82u * 74u);
    EXPECT_EQ((BoundingBox{Vec3::Zero(), Vec3(0.025, 0.01, 0.01), 0.01}.counts()[0]), 3);
    EXPECT_THROW((BoundingBox{Vec3::Zero(), Vec3(0.0, 1.0, 1.0), 0.01}.check()), std::invalid_argument);
    EXPECT_THROW((BoundingBox{Vec3::Zero(), Vec3::Ones(), 0.0}.check()), std::invalid_argument);
}

TEST(CubeOf, Examples) {
    const BoundingBox desk{Vec3::Zero(), Vec3(0.82, 0.82, 0.74), 0.01};
    EXPECT_EQ(cube_of(Vec3(0.005, 0.005, 0.005), desk), (CubeId{0, 0, 0}));
    EXPECT_EQ(cube_of(Vec3(0.01, 0.005, 0.005), desk), (CubeId{1, 0, 0}));
    EXPECT_THROW(cube_of(Vec3(0.825, 0.0, 0.0), desk), OutOfBounds);
    EXPECT_THROW(cube_of(Vec3(-1e-12, 0.0, 0.0), desk), OutOfBounds);
    EXPECT_EQ(try_cube_of(Vec3(0.82, 0.1, 0.1), desk), std::nullopt);
}

TEST(CubeOf, FlatIdRoundTrip) {
    const BoundingBox box = cube_box(4, 5, 6);
    std::uint64_t expect = 0;
    for (std::int64_t x = 0; x < 4; ++x)
        for (std::int64_t y = 0; y < 5; ++y)
            for (std::int64_t z = 0; z < 6; ++z) {
                const CubeId q{x, y, z};
                EXPECT_EQ(flat_cube_id(q, box), expect++);
                EXPECT_EQ(cube_from_flat(flat_cube_id(q, box), box), q);
                EXPECT_EQ(cube_of(cube_center(q, box), box), q);
            }
}

TEST(CubeBlocked, Examples) {
    const BoundingBox box = cube_box(10, 10, 10);
    const CubeId q{4, 4, 4};
    const Vec3 c = cube_center(q, box);
    EXPECT_TRUE(cube_blocked(q, {{c, 1e-9}}, box));
    EXPECT_FALSE(cube_blocked(q, {{c + Vec3(0.1, 0, 0), 0.1 - std::sqrt(3.0) * 0.01 - 1e-9}}, box));
    // Tangent to the +x face, on a unit grid so the distances are exact.
    const BoundingBox unit = cube_box(10, 10, 10, 1.0);
    EXPECT_TRUE(cube_blocked(q, {{Vec3(7.0, 4.5, 4.5), 2.0}}, unit));
    EXPECT_FALSE(cube_blocked(q, {{Vec3(7.0 + 1e-9, 4.5, 4.5), 2.0}}, unit));
    EXPECT_FALSE(cube_blocked(q, {}, box));
}

TEST(Neighbors, InteriorCornerAndEnclosed) {
    const BoundingBox box = cube_box(5, 5, 5);
    const auto inner = neighbors({2, 2, 2}, box, {});
    ASSERT_EQ(inner.size(), 26u);
    int faces = 0, edges = 0, corners = 0;
    for (const auto& [n, w] : inner) {
        if (std::abs(w - 0.01) < 1e-15) ++faces;
        else if (std::abs(w - 0.01 * std::sqrt(2.0)) < 1e-15) ++edges;
        else if (std::abs(w - 0.01 * std::sqrt(3.0)) < 1e-15) ++corners;
    }
    EXPECT_EQ(faces, 6);
    EXPECT_EQ(edges, 12);
    EXPECT_EQ(corners, 8);
    EXPECT_EQ(neighbors({0, 0, 0}, box, {}).size(), 7u);
    EXPECT_EQ(neighbors({2, 2, 2}, box, {}, Connectivity::face6).size(), 6u);
    EXPECT_EQ(neighbors({0, 0, 0}, box, {}, Connectivity::face6).size(), 3u);

    // A shell that clips every neighbor but leaves the center cube's own status irrelevant.
    Spheres shell;
    for (const auto& [n, w] : inner) shell.push_back({cube_center(n, box), 0.001});
    EXPECT_TRUE(neighbors({2, 2, 2}, box, shell).empty());
}

TEST(ShortestCubePath, SameCube) {
    const BoundingBox box = cube_box(5, 5, 5);
    const CubePath p = shortest_cube_path({1, 2, 3}, {1, 2, 3}, box, {});
    ASSERT_EQ(p.cubes.size(), 1u);
    EXPECT_EQ(p.length, 0.0);
}

TEST(ShortestCubePath, StraightCorridor) {
    const BoundingBox box = cube_box(10, 3, 3);
    const CubePath p = shortest_cube_path({1, 1, 1}, {6, 1, 1}, box, {});
    EXPECT_EQ(p.cubes.size(), 6u);
    EXPECT_NEAR(p.length, 0.05, 1e-15);
    for (std::size_t i = 0; i < p.cubes.size(); ++i) EXPECT_EQ(p.cubes[i], (CubeId{1 + std::int64_t(i), 1, 1}));
}

TEST(ShortestCubePath, WallWithGap) {
    const BoundingBox box = cube_box(10, 10, 1);
    Spheres wall;
    for (std::int64_t y = 0; y < 10; ++y)
        if (y != 7) wall.push_back({cube_center({5, y, 0}, box), 0.001});
    const CubeGraph g(box, wall);
    const CubeId s{1, 1, 0}, t{8, 2, 0};
    const CubePath p = g.shortest_path(s, t);
    expect_well_formed(p, g, s, t);
    EXPECT_TRUE(std::find(p.cubes.begin(), p.cubes.end(), CubeId{5, 7, 0}) != p.cubes.end());
    EXPECT_DOUBLE_EQ(p.length, oracle_cost(box, wall, Connectivity::full26, s, t));
}

TEST(ShortestCubePath, SealedTarget) {
    const BoundingBox box = cube_box(7, 7, 7);
    const CubeId t{3, 3, 3};
    Spheres shell;
    for (const auto& [n, w] : neighbors(t, box, {})) shell.push_back({cube_center(n, box), 0.001});
    EXPECT_THROW(shortest_cube_path({0, 0, 0}, t, box, shell), NoCubePath);
    EXPECT_THROW(alternate_cube_paths({0, 0, 0}, t, box, shell, 3), NoCubePath);
}

TEST(ShortestCubePath, BlockedEndpointsArePassable) {
    const BoundingBox box = cube_box(6, 6, 1);
    const CubeId s{0, 0, 0}, t{5, 5, 0};
    const Spheres on_ends{{cube_center(s, box), 0.001}, {cube_center(t, box), 0.001}};
    const CubePath p = shortest_cube_path(s, t, box, on_ends);
    EXPECT_NEAR(p.length, 5 * 0.01 * std::sqrt(2.0), 1e-15);
}

TEST(ShortestCubePath, MatchesOracleOnRandomGrids) {
    std::mt19937_64 rng(31);
    for (int n = 0; n < 40; ++n) {
        std::uniform_int_distribution<std::int64_t> dim(2, 12);
        const BoundingBox box = cube_box(dim(rng), dim(rng), dim(rng));
        const auto c = box.counts();
        Spheres obs;
        const int count = std::uniform_int_distribution<int>(0, 4)(rng);
        for (int k = 0; k < count; ++k)
            obs.push_back({Vec3(carm::testing::uniform(rng, 0, box.extent.x()),
                                carm::testing::uniform(rng, 0, box.extent.y()),
                                carm::testing::uniform(rng, 0, box.extent.z())),
                           carm::testing::uniform(rng, 0.005, 0.04)});
        const auto pick = [&](std::int64_t m) { return std::uniform_int_distribution<std::int64_t>(0, m - 1)(rng); };
        const CubeId s{pick(c[0]), pick(c[1]), pick(c[2])};
        const CubeId t{pick(c[0]), pick(c[1]), pick(c[2])};
        for (Connectivity conn : {Connectivity::full26, Connectivity::face6}) {
            const double ref = oracle_cost(box, obs, conn, s, t);
            const CubeGraph g(box, obs, conn);
            if (std::isinf(ref)) {
                EXPECT_THROW(g.shortest_path(s, t), NoCubePath);
                continue;
            }
            const CubePath p = g.shortest_path(s, t);
            expect_well_formed(p, g, s, t);
            EXPECT_EQ(p.length, ref);
            EXPECT_GE(p.length + 1e-12, (cube_center(s, box) - cube_center(t, box)).norm());
            EXPECT_NEAR(g.shortest_path(t, s).length, p.length, 1e-15);
        }
    }
}

TEST(AlternatePaths, FirstIsShortest) {
    const BoundingBox box = cube_box(6, 6, 2);
    const auto one = alternate_cube_paths({0, 0, 0}, {5, 3, 1}, box, {}, 1);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].cubes, shortest_cube_path({0, 0, 0}, {5, 3, 1}, box, {}).cubes);
}

TEST(AlternatePaths, MatchSimplePathEnumeration) {
    // Every simple path on a 3x3x1 slab, corner to corner.
    const BoundingBox box = cube_box(3, 3, 1);
    const CubeGraph g(box, {});
    const CubeId s{0, 0, 0}, t{2, 2, 0};
    std::vector<double> all;
    std::vector<bool> seen(9, false);
    std::vector<CubeId> stack{s};
    seen[flat_cube_id(s, box)] = true;
    std::function<void(double)> dfs = [&](double cost) {
        const CubeId q = stack.back();
        if (q == t) {
            all.push_back(cost);
            return;
        }
        for (const auto& [n, w] : neighbors(q, box, {})) {
            const auto f = flat_cube_id(n, box);
            if (seen[f]) continue;
            seen[f] = true;
            stack.push_back(n);
            dfs(cost + w);
            stack.pop_back();
            seen[f] = false;
        }
    };
    dfs(0.0);
    std::sort(all.begin(), all.end());

    const auto k2 = alternate_cube_paths(s, t, box, {}, 2);
    ASSERT_EQ(k2.size(), 2u);
    EXPECT_LE(k2[0].length, k2[1].length);

    CubePathEnumerator e(g, s, t);
    std::vector<double> got;
    std::vector<std::vector<CubeId>> paths;
    while (auto p = e.next()) {
        expect_well_formed(*p, g, s, t);
        got.push_back(p->length);
        paths.push_back(p->cubes);
    }
    ASSERT_EQ(got.size(), all.size());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_NEAR(got[i], all[i], 1e-12) << i;
    // Equal-length paths may differ in the last bit from summation order.
    for (std::size_t i = 1; i < got.size(); ++i) EXPECT_LE(got[i - 1], got[i] + 1e-15) << i;
    std::sort(paths.begin(), paths.end());
    EXPECT_EQ(std::adjacent_find(paths.begin(), paths.end()), paths.end());
}

TEST(AlternatePaths, LazyOnLargeGrid) {
    const BoundingBox box = cube_box(80, 80, 70);
    const Spheres obs{{Vec3(0.4, 0.4, 0.35), 0.15}};
    const auto paths = alternate_cube_paths({2, 2, 2}, {77, 77, 67}, box, obs, 4);
    ASSERT_EQ(paths.size(), 4u);
    for (std::size_t i = 1; i < paths.size(); ++i) EXPECT_LE(paths[i - 1].length, paths[i].length + 1e-12);
}
