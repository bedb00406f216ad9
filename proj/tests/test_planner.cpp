#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "carm/errors.hpp"
#include "carm/planner.hpp"
#include "oracle/oracle.hpp"
#include "plan_check.hpp"
#include "support.hpp"

using namespace carm;

namespace {

class PlannerTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() { cache_ = new Cache(carm::testing::small_cache(5, 0.2)); }
    static void TearDownTestSuite() {
        delete cache_;
        cache_ = nullptr;
    }

    static const Cache& cache() { return *cache_; }
    static ConfigSpace space() { return ConfigSpace(cache_->tables); }

    static Layer layer(std::vector<ConfigId> ids, std::vector<double> costs = {}) {
        Layer l;
        l.config_ids = std::move(ids);
        l.costs = costs.empty() ? std::vector<double>(l.config_ids.size(), kUnreached) : std::move(costs);
        l.preds.assign(l.config_ids.size(), kNoPred);
        return l;
    }

    static ConfigId center_config() {
        const auto c = *cache_->tables[0].find(2, 2);
        return space().compose({{c, c, c}});
    }

    static inline Cache* cache_ = nullptr;
};

}  // namespace

TEST_F(PlannerTest, EdgeWeightExamples) {
    const ConfigSpace cs = space();
    const ConfigId c = center_config();
    EXPECT_EQ(edge_weight(c, c, cs), 0.0);
    std::array<ConfigId, 12> nb{};
    const int n = cs.neighbors(c, nb);
    ASSERT_EQ(n, 12);
    for (int k = 0; k < n; ++k) {
        EXPECT_EQ(edge_weight(c, nb[k], cs), edge_weight(nb[k], c, cs));
        EXPECT_NEAR(edge_weight(c, nb[k], cs),
                    orientation_distance(orientation_vector(cs.joints(c), cs.geometry()),
                                         orientation_vector(cs.joints(nb[k]), cs.geometry())),
                    1e-15);
    }
}

TEST_F(PlannerTest, RelaxSinglePredecessor) {
    const ConfigSpace cs = space();
    const ConfigId u = center_config();
    std::array<ConfigId, 12> nb{};
    cs.neighbors(u, nb);
    // A second candidate two lattice steps away is never adjacent to u.
    std::array<ConfigId, 12> nb2{};
    const int n2 = cs.neighbors(nb[0], nb2);
    ConfigId far = nb[0];
    for (int k = 0; k < n2; ++k)
        if (nb2[k] != u && !adjacent(u, nb2[k], cache().tables)) far = nb2[k];
    ASSERT_NE(far, nb[0]);

    const Layer prev = layer({u}, {0.0});
    Layer next = layer(nb[0] < far ? std::vector<ConfigId>{nb[0], far} : std::vector<ConfigId>{far, nb[0]});
    ASSERT_TRUE(relax_boundary(prev, next, cs));
    const std::size_t hit = next.config_ids[0] == nb[0] ? 0 : 1;
    EXPECT_EQ(next.costs[hit], edge_weight(u, nb[0], cs));
    EXPECT_EQ(next.preds[hit], 0u);
    EXPECT_EQ(next.costs[1 - hit], kUnreached);
    EXPECT_EQ(next.preds[1 - hit], kNoPred);
}

TEST_F(PlannerTest, RelaxTakesMinimum) {
    const ConfigSpace cs = space();
    const ConfigId v = center_config();
    std::array<ConfigId, 12> nb{};
    cs.neighbors(v, nb);
    ConfigId a = std::min(nb[0], nb[1]), b = std::max(nb[0], nb[1]);
    const double wa = edge_weight(a, v, cs), wb = edge_weight(b, v, cs);
    // Totals 10.7 through a and 10.6 through b.
    Layer prev = layer({a, b}, {10.7 - wa, 10.6 - wb});
    ASSERT_GE(prev.costs[0], 0.0);
    ASSERT_GE(prev.costs[1], 0.0);
    Layer next = layer({v});
    ASSERT_TRUE(relax_boundary(prev, next, cs));
    EXPECT_NEAR(next.costs[0], 10.6, 1e-14);
    EXPECT_EQ(next.preds[0], 1u);
}

TEST_F(PlannerTest, RelaxTieGoesToLowestId) {
    const ConfigSpace cs = space();
    const ConfigId v = center_config();
    std::array<ConfigId, 12> nb{};
    const int n = cs.neighbors(v, nb);
    std::vector<ConfigId> us(nb.begin(), nb.begin() + n);
    std::sort(us.begin(), us.end());
    // Choose costs so that every candidate total is exactly 1.0.
    std::vector<double> costs;
    for (ConfigId u : us) {
        const double w = edge_weight(u, v, cs);
        double c = 1.0 - w;
        while (c + w > 1.0) c = std::nextafter(c, 0.0);
        while (c + w < 1.0) c = std::nextafter(c, 2.0);
        costs.push_back(c);
    }
    std::vector<std::uint32_t> exact;
    for (std::size_t k = 0; k < us.size(); ++k)
        if (costs[k] + edge_weight(us[k], v, cs) == 1.0) exact.push_back(static_cast<std::uint32_t>(k));
    ASSERT_GE(exact.size(), 2u);
    for (std::size_t k = 0; k < us.size(); ++k)
        if (costs[k] + edge_weight(us[k], v, cs) != 1.0) costs[k] = 5.0;
    for (unsigned w : {1u, 3u}) {
        Layer next = layer({v});
        relax_boundary(layer(us, costs), next, cs, w);
        EXPECT_EQ(next.costs[0], 1.0);
        EXPECT_EQ(next.preds[0], exact.front());
    }
}

TEST_F(PlannerTest, RelaxDisconnected) {
    const ConfigId u = center_config();
    Layer next = layer({u});
    EXPECT_FALSE(relax_boundary(layer({u}, {0.0}), next, space()));
    EXPECT_EQ(next.costs[0], kUnreached);
    // Unreached members of prev do not propagate.
    std::array<ConfigId, 12> nb{};
    space().neighbors(u, nb);
    Layer next2 = layer({nb[0]});
    EXPECT_FALSE(relax_boundary(layer({u}, {kUnreached}), next2, space()));
}

TEST_F(PlannerTest, RelaxMatchesExplicitGraph) {
    const ConfigSpace cs = space();
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<ConfigId> pick(0, cs.size() - 1);
    for (int n = 0; n < 20; ++n) {
        std::vector<Layer> layers;
        layers.push_back(layer({pick(rng)}, {0.0}));
        for (int i = 1; i < 3; ++i) {
            // Neighbors of the previous layer plus random members.
            std::vector<ConfigId> ids;
            std::array<ConfigId, 12> nb{};
            for (ConfigId u : layers.back().config_ids) {
                const int k = cs.neighbors(u, nb);
                ids.insert(ids.end(), nb.begin(), nb.begin() + k);
            }
            for (int k = 0; k < 30; ++k) ids.push_back(pick(rng));
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            layers.push_back(layer(ids));
        }
        std::vector<Layer> relaxed = layers;
        for (std::size_t i = 1; i < relaxed.size(); ++i) relax_boundary(relaxed[i - 1], relaxed[i], cs);

        const auto lg = oracle::materialize_layered(layers, cache().tables);
        const auto dist = oracle::dijkstra_reference(lg.graph, 0);
        for (std::size_t k = 0; k < dist.size(); ++k)
            EXPECT_EQ(relaxed[lg.layer_of[k]].costs[k - lg.layer_begin[lg.layer_of[k]]], dist[k]);
    }
}

TEST_F(PlannerTest, RelaxIsWorkerCountIndependent) {
    const ConfigSpace cs = space();
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<ConfigId> pick(0, cs.size() - 1);
    for (int n = 0; n < 10; ++n) {
        std::vector<ConfigId> p, q;
        for (int k = 0; k < 600; ++k) p.push_back(pick(rng));
        for (int k = 0; k < 600; ++k) q.push_back(pick(rng));
        for (auto* v : {&p, &q}) {
            std::sort(v->begin(), v->end());
            v->erase(std::unique(v->begin(), v->end()), v->end());
        }
        std::vector<double> costs;
        for (std::size_t k = 0; k < p.size(); ++k) costs.push_back(k % 7 == 0 ? kUnreached : 0.25 * (k % 3));
        const Layer prev = layer(p, costs);
        Layer one = layer(q);
        relax_boundary(prev, one, cs, 1);
        for (unsigned w : {2u, 4u, 8u}) {
            Layer many = layer(q);
            relax_boundary(prev, many, cs, w);
            EXPECT_EQ(std::memcmp(many.costs.data(), one.costs.data(), one.costs.size() * sizeof(double)), 0);
            EXPECT_EQ(many.preds, one.preds);
        }
    }
}

TEST_F(PlannerTest, BuildLayersWithoutObstaclesAreBuckets) {
    const ConfigSpace cs = space();
    PlanQuery q;
    q.start = cs.joints(center_config());
    const Vec3 tip = cs.tip_transform(center_config()).position;
    const CubeId s = cube_of(tip, cache().buckets.box);
    q.target = cube_center(s, cache().buckets.box);
    CubePath path{{s}, 0.0};
    for (const auto& [n, w] : neighbors(s, cache().buckets.box, {})) {
        if (cache().buckets.bucket(flat_cube_id(n, cache().buckets.box)).empty()) continue;
        path.cubes.push_back(n);
        break;
    }
    ASSERT_EQ(path.cubes.size(), 2u);
    const auto layers = build_layers(path, cache(), q);
    ASSERT_EQ(layers.size(), 2u);
    EXPECT_EQ(layers[0].config_ids, std::vector<ConfigId>{center_config()});
    EXPECT_EQ(layers[0].costs, std::vector<double>{0.0});
    const auto bucket = cache().buckets.bucket(flat_cube_id(path.cubes[1], cache().buckets.box));
    EXPECT_EQ(layers[1].config_ids, std::vector<ConfigId>(bucket.begin(), bucket.end()));
    for (double c : layers[1].costs) EXPECT_EQ(c, kUnreached);
}

TEST_F(PlannerTest, BuildLayersPurgeMatchesBruteForce) {
    const ConfigSpace cs = space();
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<ConfigId> pick(0, cs.size() - 1);
    const BoundingBox& box = cache().buckets.box;
    int checked = 0;
    for (int n = 0; n < 60 && checked < 15; ++n) {
        PlanQuery q;
        q.start = cs.joints(pick(rng));
        q.target = to_vec(cache().buckets.tips[pick(rng)]);
        for (int k = 0; k < 3; ++k)
            q.obstacles.push_back({box.origin + Vec3(carm::testing::uniform(rng, 0, box.extent.x()),
                                                     carm::testing::uniform(rng, 0, box.extent.y()),
                                                     carm::testing::uniform(rng, 0, box.extent.z())),
                                   carm::testing::uniform(rng, 0.02, 0.12)});
        if (CollisionChecker(cache().tables, 10).collides(cs.find(q.start).value(), q.obstacles)) continue;
        const CubeId s = cube_of(cs.tip_transform(*cs.find(q.start)).position, box);
        const CubeId t = cube_of(std::get<Vec3>(q.target), box);
        CubePath path;
        try {
            path = shortest_cube_path(s, t, box, q.obstacles);
        } catch (const NoCubePath&) {
            continue;
        }
        const auto ref = oracle::brute_force_layers(path, cache(), q);
        std::size_t first_empty = ref.size();
        for (std::size_t i = 0; i < ref.size(); ++i)
            if (ref[i].config_ids.empty()) {
                first_empty = i;
                break;
            }
        if (first_empty < ref.size()) {
            try {
                (void)build_layers(path, cache(), q);
                ADD_FAILURE() << "expected EmptyLayer(" << first_empty << ")";
            } catch (const EmptyLayer& e) {
                EXPECT_EQ(e.index(), first_empty);
            }
        } else {
            const auto got = build_layers(path, cache(), q);
            ASSERT_EQ(got.size(), ref.size());
            for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].config_ids, ref[i].config_ids) << i;
        }
        ++checked;
    }
    EXPECT_GE(checked, 10);
}

TEST_F(PlannerTest, EngulfedCubeGivesEmptyLayer) {
    const ConfigSpace cs = space();
    const ConfigId start = center_config();
    const BoundingBox& box = cache().buckets.box;
    const CubeId s = cube_of(cs.tip_transform(start).position, box);
    // Target a populated cube away from the start and swallow it whole.
    for (std::uint64_t f = 0; f < cache().buckets.cube_count(); ++f) {
        const CubeId t = cube_from_flat(f, box);
        if (cache().buckets.bucket(f).empty() || std::abs(t.ix - s.ix) + std::abs(t.iy - s.iy) + std::abs(t.iz - s.iz) < 2)
            continue;
        PlanQuery q;
        q.start = cs.joints(start);
        q.target = cube_center(t, box);
        q.obstacles = {{cube_center(t, box), 0.5 * box.cube_dim}};
        if (CollisionChecker(cache().tables, 10).collides(start, q.obstacles)) continue;
        const CubePath path = shortest_cube_path(s, t, box, q.obstacles);
        // Every arm reaching t has its tip inside the sphere unless it sits in a corner.
        q.obstacles[0].radius = std::sqrt(3.0) * 0.5 * box.cube_dim;
        if (CollisionChecker(cache().tables, 10).collides(start, q.obstacles)) continue;
        try {
            (void)build_layers(path, cache(), q);
            ADD_FAILURE() << "no EmptyLayer";
        } catch (const EmptyLayer& e) {
            EXPECT_EQ(e.index(), path.cubes.size() - 1);
        }
        return;
    }
    FAIL() << "no suitable target cube";
}

TEST_F(PlannerTest, StartCubeIsTargetCube) {
    const ConfigSpace cs = space();
    PlanQuery q;
    q.start = cs.joints(center_config());
    q.target = cs.tip_transform(center_config()).position;
    const PlanResult r = plan(q, cache());
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.success->config_path, std::vector<ConfigId>{center_config()});
    EXPECT_EQ(r.success->total_cost, 0.0);
    EXPECT_EQ(r.success->cube_path_used.cubes.size(), 1u);
    EXPECT_TRUE(validate_path(*r.success, q, cache()).all_passed());
}

TEST_F(PlannerTest, InvalidInputs) {
    const ConfigSpace cs = space();
    PlanQuery q;
    q.start = cs.joints(center_config());
    q.start.sections[0].l1 = 0.011;
    q.target = Vec3(0, 0, 0.4);
    EXPECT_THROW(plan(q, cache()), InvalidStart);

    q.start = cs.joints(center_config());
    q.target = Vec3(10, 10, 10);
    EXPECT_THROW(plan(q, cache()), InvalidQuery);

    q.target = cs.tip_transform(center_config()).position;
    q.obstacles = {{q.target.index() == 0 ? std::get<Vec3>(q.target) : Vec3::Zero(), 0.05}};
    EXPECT_THROW(plan(q, cache()), InvalidStart);

    q.obstacles.clear();
    ArmJointConfig off = cs.joints(center_config());
    off.sections[2].l2 = 0.013;
    q.target = off;
    EXPECT_THROW(plan(q, cache()), InvalidQuery);
}

TEST_F(PlannerTest, RandomQueriesAgreeWithOracle) {
    const ConfigSpace cs = space();
    const BoundingBox& box = cache().buckets.box;
    const CollisionChecker checker(cache().tables, 10);
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<ConfigId> pick(0, cs.size() - 1);
    int successes = 0, runs = 0;
    while (runs < 40) {
        PlanQuery q;
        const ConfigId s = pick(rng);
        const ConfigId t = pick(rng);
        q.start = cs.joints(s);
        if (runs % 3 == 2) q.target = cs.joints(t);
        else q.target = to_vec(cache().buckets.tips[t]);
        if (runs % 2 == 1) {
            const int count = 2 + static_cast<int>(rng() % 2);
            for (int k = 0; k < count; ++k)
                q.obstacles.push_back({box.origin + Vec3(carm::testing::uniform(rng, 0, box.extent.x()),
                                                         carm::testing::uniform(rng, 0, box.extent.y()),
                                                         carm::testing::uniform(rng, 0, box.extent.z())),
                                       carm::testing::uniform(rng, 0.02, 0.12)});
            if (checker.collides(s, q.obstacles) || checker.collides(t, q.obstacles)) continue;
        }
        ++runs;
        carm::testing::ObservedLayers seen;
        PlannerOptions opt;
        const PlanResult r = plan(q, cache(), opt, seen.observer());
        EXPECT_EQ(carm::testing::certify_run(r, seen, q, cache(), opt), "") << "run " << runs;
        if (r.ok()) {
            ++successes;
            const auto report = validate_path(*r.success, q, cache());
            for (const auto& c : report.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
        } else {
            EXPECT_LE(r.attempts.size(), static_cast<std::size_t>(q.retry_budget) + 1);
        }
        for (std::size_t a = 1; a < r.attempts.size(); ++a)
            if (r.attempts[a].cube_path && r.attempts[a - 1].cube_path)
                EXPECT_LE(r.attempts[a - 1].cube_path->length, r.attempts[a].cube_path->length + 1e-12);
    }
    EXPECT_GE(successes, 5);
}

TEST_F(PlannerTest, ShellAroundTargetIsNoPath) {
    const ConfigSpace cs = space();
    const BoundingBox& box = cache().buckets.box;
    const CollisionChecker checker(cache().tables, 10);
    const Vec3 target = cs.tip_transform(0).position;
    const CubeId t = cube_of(target, box);
    Spheres shell;
    for (const auto& [n, w] : neighbors(t, box, {})) shell.push_back({cube_center(n, box), 0.01});
    for (ConfigId s = 0; s < cs.size(); ++s) {
        if (checker.collides(s, shell)) continue;
        const CubeId sc = cube_of(cs.tip_transform(s).position, box);
        if (std::max({std::abs(sc.ix - t.ix), std::abs(sc.iy - t.iy), std::abs(sc.iz - t.iz)}) <= 1) continue;
        PlanQuery q;
        q.start = cs.joints(s);
        q.target = target;
        q.obstacles = shell;
        const PlanResult r = plan(q, cache());
        ASSERT_FALSE(r.ok());
        for (const auto& a : r.attempts) {
            ASSERT_TRUE(a.failure);
            EXPECT_TRUE(a.failure->kind == AttemptFailure::Kind::no_cube_path ||
                        a.failure->kind == AttemptFailure::Kind::empty_layer);
        }
        return;
    }
    FAIL() << "no free start outside the shell";
}

TEST_F(PlannerTest, ValidationCatchesTampering) {
    const ConfigSpace cs = space();
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<ConfigId> pick(0, cs.size() - 1);
    for (int n = 0; n < 200; ++n) {
        PlanQuery q;
        q.start = cs.joints(pick(rng));
        q.target = to_vec(cache().buckets.tips[pick(rng)]);
        const PlanResult r = plan(q, cache());
        if (!r.ok() || r.success->config_path.size() < 3) continue;
        ASSERT_TRUE(validate_path(*r.success, q, cache()).all_passed());

        const auto check = [](const ValidationReport& rep, const std::string& name) {
            for (const auto& c : rep.checks)
                if (c.name == name) return c.passed;
            ADD_FAILURE() << "no check " << name;
            return true;
        };
        PlanSuccess bent = *r.success;
        bent.joint_path[1].sections[1].l1 += 0.003;
        EXPECT_FALSE(check(validate_path(bent, q, cache()), "adjacency"));

        PlanSuccess pricey = *r.success;
        pricey.total_cost += 1.0;
        EXPECT_FALSE(check(validate_path(pricey, q, cache()), "cost"));

        PlanSuccess cut = *r.success;
        cut.joint_path.erase(cut.joint_path.begin() + 1);
        EXPECT_FALSE(check(validate_path(cut, q, cache()), "adjacency"));

        PlanQuery blocked = q;
        blocked.obstacles = {{cs.tip_transform(r.success->config_path[1]).position, 1e-3}};
        EXPECT_FALSE(check(validate_path(*r.success, blocked, cache()), "collision_free"));

        PlanQuery moved = q;
        moved.target = std::get<Vec3>(q.target) + Vec3(1.0, 0, 0);
        EXPECT_FALSE(check(validate_path(*r.success, moved, cache()), "terminal"));
        return;
    }
    FAIL() << "no multi-step success found";
}

TEST_F(PlannerTest, PlanIsWorkerCountIndependent) {
    const ConfigSpace cs = space();
    std::mt19937_64 rng(19);
    std::uniform_int_distribution<ConfigId> pick(0, cs.size() - 1);
    for (int n = 0; n < 10; ++n) {
        PlanQuery q;
        q.start = cs.joints(pick(rng));
        q.target = to_vec(cache().buckets.tips[pick(rng)]);
        PlannerOptions one, many;
        many.workers = 4;
        const PlanResult a = plan(q, cache(), one);
        const PlanResult b = plan(q, cache(), many);
        ASSERT_EQ(a.ok(), b.ok());
        ASSERT_EQ(a.attempts.size(), b.attempts.size());
        if (a.ok()) {
            EXPECT_EQ(a.success->config_path, b.success->config_path);
            EXPECT_EQ(a.success->total_cost, b.success->total_cost);
        }
    }
}
