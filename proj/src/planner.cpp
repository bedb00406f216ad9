#include "carm/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "carm/parallel.hpp"

namespace carm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::string to_string(AttemptFailure::Kind k) {
    switch (k) {
        case AttemptFailure::Kind::no_cube_path: return "NoCubePath";
        case AttemptFailure::Kind::empty_layer: return "EmptyLayer";
        case AttemptFailure::Kind::disconnected_boundary: return "DisconnectedBoundary";
    }
    return "?";
}

std::optional<AttemptFailure::Kind> failure_kind_from_string(const std::string& s) {
    for (auto k : {AttemptFailure::Kind::no_cube_path, AttemptFailure::Kind::empty_layer,
                   AttemptFailure::Kind::disconnected_boundary})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

double edge_weight(ConfigId u, ConfigId v, const ConfigSpace& space) {
    return orientation_distance(space.orientation(u), space.orientation(v));
}

// ---------------------------------------------------------------------------

CollisionChecker::CollisionChecker(const ArmTables& tables, int samples_per_section)
    : space_(tables), per_section_(samples_per_section) {
    if (samples_per_section < 2) throw std::invalid_argument("samples_per_section >= 2");
    for (int i = 0; i < kSections; ++i) {
        const auto& table = tables[i];
        local_[i].reserve(table.size() * static_cast<std::size_t>(per_section_));
        for (const SectionSample& s : table.samples()) {
            for (int k = 1; k <= per_section_; ++k) {
                const ArcFraction xi(k == per_section_ ? 1.0 : static_cast<double>(k) / per_section_);
                local_[i].push_back(section_transform(s.curve, table.geometry(), xi).position);
            }
        }
    }
}

void CollisionChecker::points(ConfigId id, std::vector<Vec3>& out) const {
    out.clear();
    const SampleTriple t = space_.decompose(id);
    RigidTransform base;
    for (int i = 0; i < kSections; ++i) {
        const auto first = local_[i].begin() + static_cast<std::ptrdiff_t>(t.s[i]) * per_section_;
        for (auto it = first; it != first + per_section_; ++it) out.push_back(base.apply(*it));
        base = base * space_.tables()[i][t.s[i]].tip;
    }
}

bool CollisionChecker::collides(ConfigId id, const Spheres& obstacles, double inflation) const {
    if (obstacles.empty()) return false;
    const SampleTriple t = space_.decompose(id);
    RigidTransform base;
    for (int i = 0; i < kSections; ++i) {
        const auto first = local_[i].begin() + static_cast<std::ptrdiff_t>(t.s[i]) * per_section_;
        for (auto it = first; it != first + per_section_; ++it) {
            const Vec3 p = base.apply(*it);
            for (const Sphere& s : obstacles) {
                const double r = s.radius + inflation;
                if ((p - s.center).squaredNorm() <= r * r) return true;
            }
        }
        base = base * space_.tables()[i][t.s[i]].tip;
    }
    return false;
}

// ---------------------------------------------------------------------------

bool relax_boundary(const Layer& prev, Layer& next, const ConfigSpace& space, unsigned workers) {
    next.costs.assign(next.size(), kUnreached);
    next.preds.assign(next.size(), kNoPred);
    parallel_for(next.size(), workers, [&](std::size_t begin, std::size_t end) {
        std::array<ConfigId, 4 * kSections> nbrs{};
        for (std::size_t k = begin; k < end; ++k) {
            const ConfigId v = next.config_ids[k];
            const int n = space.neighbors(v, nbrs);
            double best = kUnreached;
            std::uint32_t best_u = kNoPred;
            for (int j = 0; j < n; ++j) {
                const auto it = std::lower_bound(prev.config_ids.begin(), prev.config_ids.end(), nbrs[j]);
                if (it == prev.config_ids.end() || *it != nbrs[j]) continue;
                const auto ui = static_cast<std::uint32_t>(it - prev.config_ids.begin());
                if (prev.costs[ui] == kUnreached) continue;
                const double cand = prev.costs[ui] + edge_weight(nbrs[j], v, space);
                if (cand < best || (cand == best && ui < best_u)) {
                    best = cand;
                    best_u = ui;
                }
            }
            next.costs[k] = best;
            next.preds[k] = best_u;
        }
    });
    return std::any_of(next.costs.begin(), next.costs.end(), [](double c) { return c != kUnreached; });
}

// ---------------------------------------------------------------------------

namespace {

struct ResolvedQuery {
    ConfigId start = 0;
    CubeId start_cube;
    CubeId target_cube;
    std::optional<ConfigId> target_config;
};

ResolvedQuery resolve(const PlanQuery& query, const Cache& cache, const ConfigSpace& space,
                      const CollisionChecker& checker, double inflation) {
    ResolvedQuery r;
    const auto start = space.find(query.start);
    if (!start) throw InvalidStart("start configuration is not a lattice sample of the cache");
    if (checker.collides(*start, query.obstacles, inflation))
        throw InvalidStart("start configuration collides with an obstacle");
    const auto start_cube = try_cube_of(to_vec(cache.buckets.tips[*start]), cache.buckets.box);
    if (!start_cube) throw InvalidStart("start tip lies outside the bounding box");
    r.start = *start;
    r.start_cube = *start_cube;

    if (const Vec3* p = std::get_if<Vec3>(&query.target)) {
        const auto q = try_cube_of(*p, cache.buckets.box);
        if (!q) throw InvalidQuery("target point lies outside the bounding box");
        r.target_cube = *q;
    } else {
        const auto t = space.find(std::get<ArmJointConfig>(query.target));
        if (!t) throw InvalidQuery("target configuration is not a lattice sample of the cache");
        if (checker.collides(*t, query.obstacles, inflation))
            throw InvalidQuery("target configuration collides with an obstacle");
        const auto q = try_cube_of(to_vec(cache.buckets.tips[*t]), cache.buckets.box);
        if (!q) throw InvalidQuery("target tip lies outside the bounding box");
        r.target_config = *t;
        r.target_cube = *q;
    }
    return r;
}

// Surviving members of one bucket, as a mask over the bucket's order.
std::vector<bool> purge_mask(std::span<const ConfigId> bucket, const PlanQuery& query,
                             const CollisionChecker& checker, const PlannerOptions& options,
                             std::optional<ConfigId> only) {
    std::vector<char> keep(bucket.size(), 0);
    parallel_for(bucket.size(), options.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            if (only && bucket[k] != *only) continue;
            keep[k] = !checker.collides(bucket[k], query.obstacles, options.obstacle_inflation);
        }
    });
    return {keep.begin(), keep.end()};
}

std::vector<ConfigId> apply_mask(std::span<const ConfigId> bucket, const std::vector<bool>& mask) {
    std::vector<ConfigId> out;
    for (std::size_t k = 0; k < bucket.size(); ++k)
        if (mask[k]) out.push_back(bucket[k]);
    return out;
}

Layer start_layer(const ResolvedQuery& r) {
    Layer l;
    l.cube = r.start_cube;
    l.config_ids = {r.start};
    l.costs = {0.0};
    l.preds = {kNoPred};
    return l;
}

}  // namespace

std::vector<Layer> build_layers(const CubePath& path, const Cache& cache, const PlanQuery& query,
                                const PlannerOptions& options) {
    const ConfigSpace space(cache.tables);
    const CollisionChecker checker(cache.tables, options.samples_per_section);
    const ResolvedQuery r = resolve(query, cache, space, checker, options.obstacle_inflation);
    if (path.cubes.empty() || path.cubes.front() != r.start_cube)
        throw InvalidQuery("cube path does not start at the start cube");

    std::vector<Layer> layers;
    layers.push_back(start_layer(r));
    const std::size_t last = path.cubes.size() - 1;
    if (last == 0 && r.target_config && *r.target_config != r.start) throw EmptyLayer(0);
    for (std::size_t i = 1; i <= last; ++i) {
        const auto bucket = cache.buckets.bucket(flat_cube_id(path.cubes[i], cache.buckets.box));
        const auto only = i == last ? r.target_config : std::nullopt;
        Layer l;
        l.cube = path.cubes[i];
        l.config_ids = apply_mask(bucket, purge_mask(bucket, query, checker, options, only));
        if (l.config_ids.empty()) throw EmptyLayer(i);
        l.costs.assign(l.size(), kUnreached);
        l.preds.assign(l.size(), kNoPred);
        layers.push_back(std::move(l));
    }
    return layers;
}

PlanResult plan(const PlanQuery& query, const Cache& cache, const PlannerOptions& options,
                const LayerObserver& observer) {
    if (query.retry_budget < 0) throw InvalidQuery("retry_budget >= 0");
    const ConfigSpace space(cache.tables);
    const CollisionChecker checker(cache.tables, options.samples_per_section);
    const ResolvedQuery r = resolve(query, cache, space, checker, options.obstacle_inflation);
    const BoundingBox& box = cache.buckets.box;

    PlanResult result;
    auto t0 = Clock::now();
    const CubeGraph graph(box, query.obstacles, options.connectivity);
    CubePathEnumerator paths(graph, r.start_cube, r.target_cube);
    result.times.cube_path += seconds_since(t0);

    for (int attempt = 0; attempt <= query.retry_budget; ++attempt) {
        t0 = Clock::now();
        std::optional<CubePath> path;
        try {
            path = paths.next();
        } catch (const NoCubePath&) {
            result.times.cube_path += seconds_since(t0);
            result.attempts.push_back({std::nullopt, AttemptFailure{AttemptFailure::Kind::no_cube_path, 0}});
            break;
        }
        result.times.cube_path += seconds_since(t0);
        if (!path) break;

        const auto fail = [&](AttemptFailure::Kind kind, std::size_t index) {
            result.attempts.push_back({*path, AttemptFailure{kind, index}});
        };
        const auto index = static_cast<std::size_t>(attempt);
        const std::size_t last = path->cubes.size() - 1;

        // Streaming: only the previous and current layer are held in full;
        // earlier layers keep their purge mask and predecessor indices.
        struct Retained {
            std::uint64_t cube = 0;
            std::vector<bool> mask;
            std::vector<std::uint32_t> preds;
        };
        std::vector<Retained> retained(last + 1);
        Layer prev = start_layer(r);
        if (observer) observer(index, 0, prev);
        if (last == 0 && r.target_config && *r.target_config != r.start) {
            fail(AttemptFailure::Kind::empty_layer, 0);
            continue;
        }

        bool failed = false;
        for (std::size_t i = 1; i <= last; ++i) {
            t0 = Clock::now();
            Layer next;
            next.cube = path->cubes[i];
            retained[i].cube = flat_cube_id(next.cube, box);
            const auto bucket = cache.buckets.bucket(retained[i].cube);
            retained[i].mask = purge_mask(bucket, query, checker, options,
                                          i == last ? r.target_config : std::nullopt);
            next.config_ids = apply_mask(bucket, retained[i].mask);
            result.times.layers += seconds_since(t0);
            if (next.config_ids.empty()) {
                fail(AttemptFailure::Kind::empty_layer, i);
                failed = true;
                break;
            }
            t0 = Clock::now();
            const bool reached = relax_boundary(prev, next, space, options.workers);
            result.times.relaxation += seconds_since(t0);
            if (observer) observer(index, i, next);
            if (!reached) {
                fail(AttemptFailure::Kind::disconnected_boundary, i);
                failed = true;
                break;
            }
            retained[i].preds = next.preds;
            prev = std::move(next);
        }
        if (failed) continue;

        std::size_t best = 0;
        for (std::size_t k = 1; k < prev.size(); ++k)
            if (prev.costs[k] < prev.costs[best]) best = k;  // ascending ids: first minimum is lowest id

        PlanSuccess s;
        s.total_cost = prev.costs[best];
        s.cube_path_used = *path;
        std::vector<ConfigId> reversed;
        std::uint32_t idx = static_cast<std::uint32_t>(best);
        for (std::size_t i = last; i >= 1; --i) {
            const auto ids = apply_mask(cache.buckets.bucket(retained[i].cube), retained[i].mask);
            reversed.push_back(ids[idx]);
            idx = retained[i].preds[idx];
        }
        reversed.push_back(r.start);
        s.config_path.assign(reversed.rbegin(), reversed.rend());
        for (ConfigId id : s.config_path) {
            s.joint_path.push_back(space.joints(id));
            s.tip_polyline.push_back(space.tip_transform(id).position);
        }
        result.attempts.push_back({*path, std::nullopt});
        result.success = std::move(s);
        return result;
    }
    return result;
}

// ---------------------------------------------------------------------------

bool ValidationReport::all_passed() const {
    return !checks.empty() &&
           std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
}

ValidationReport validate_path(const PlanSuccess& res, const PlanQuery& query, const Cache& cache,
                               const PlannerOptions& options) {
    ValidationReport report;
    const ArmGeometry geoms = ConfigSpace(cache.tables).geometry();
    const auto add = [&](std::string name, bool ok, std::string detail) {
        report.checks.push_back({std::move(name), ok, std::move(detail)});
    };
    const auto& path = res.joint_path;
    if (path.empty()) {
        add("nonempty", false, "empty joint path");
        return report;
    }

    add("start", path.front() == query.start, path.front() == query.start ? "" : "first waypoint is not the query start");

    // Lattice coordinates straight from joint values.
    bool adj_ok = true;
    std::string adj_detail;
    std::vector<std::array<std::int64_t, 2 * kSections>> coords;
    for (std::size_t k = 0; k < path.size() && adj_ok; ++k) {
        std::array<std::int64_t, 2 * kSections> c{};
        for (int i = 0; i < kSections; ++i) {
            const auto& table = cache.tables[i];
            const auto a = table.grid().index_of(path[k].sections[i].l1);
            const auto b = table.grid().index_of(path[k].sections[i].l2);
            if (!a || !b || !table.find(*a, *b)) {
                adj_ok = false;
                adj_detail = "waypoint " + std::to_string(k) + " is off the sampled lattice";
                break;
            }
            c[2 * i] = *a;
            c[2 * i + 1] = *b;
        }
        coords.push_back(c);
    }
    for (std::size_t k = 1; k < coords.size() && adj_ok; ++k) {
        int moved = 0;
        bool unit = true;
        for (std::size_t d = 0; d < coords[k].size(); ++d) {
            const auto diff = coords[k][d] - coords[k - 1][d];
            if (diff != 0) ++moved;
            if (diff > 1 || diff < -1) unit = false;
        }
        if (moved != 1 || !unit) {
            adj_ok = false;
            adj_detail = "waypoints " + std::to_string(k - 1) + " and " + std::to_string(k) + " are not adjacent";
        }
    }
    add("adjacency", adj_ok, adj_detail);

    bool free_ok = true;
    std::string free_detail;
    for (std::size_t k = 0; k < path.size() && free_ok; ++k) {
        for (const Vec3& p : skeleton_points(path[k], geoms, options.samples_per_section)) {
            for (const Sphere& s : query.obstacles) {
                const double rad = s.radius + options.obstacle_inflation;
                if ((p - s.center).squaredNorm() <= rad * rad) {
                    free_ok = false;
                    free_detail = "waypoint " + std::to_string(k) + " intersects an obstacle";
                }
            }
        }
    }
    add("collision_free", free_ok, free_detail);

    double sum = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k)
        sum += orientation_distance(orientation_vector(path[k - 1], geoms), orientation_vector(path[k], geoms));
    const bool cost_ok = std::abs(sum - res.total_cost) <= 1e-9 * std::max(1.0, std::abs(sum));
    {
        std::ostringstream os;
        os.precision(17);
        os << "resummed " << sum << " vs reported " << res.total_cost;
        add("cost", cost_ok, os.str());
    }

    const Vec3 tip = arm_transform(path.back(), geoms, ArcFraction::tip()).position;
    if (const Vec3* t = std::get_if<Vec3>(&query.target)) {
        // Float32 tip storage can move a tip ~1e-8 m across a cube face.
        const double tol = std::numbers::sqrt3 * cache.buckets.box.cube_dim + 1e-6;
        const double dist = (tip - *t).norm();
        std::ostringstream os;
        os << "tip-target distance " << dist << " m, tolerance " << tol << " m";
        add("terminal", dist <= tol, os.str());
    } else {
        const bool same = path.back() == std::get<ArmJointConfig>(query.target);
        add("terminal", same, same ? "" : "last waypoint is not the target configuration");
    }

    bool poly_ok = res.tip_polyline.size() == path.size();
    for (std::size_t k = 0; k < path.size() && poly_ok; ++k)
        poly_ok = (arm_transform(path[k], geoms, ArcFraction::tip()).position - res.tip_polyline[k]).norm() <= 1e-9;
    add("polyline", poly_ok, poly_ok ? "" : "tip polyline does not match the waypoints");
    return report;
}

}  // namespace carm
