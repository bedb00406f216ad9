#include "carm/wgrid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "carm/errors.hpp"

namespace carm {

namespace {

constexpr std::uint64_t kNone = std::numeric_limits<std::uint64_t>::max();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::int64_t axis_count(double extent, double d) {
    const double r = extent / d;
    const double n = std::round(r);
    if (std::abs(r - n) <= 1e-9 * std::max(1.0, n)) return static_cast<std::int64_t>(n);
    return static_cast<std::int64_t>(std::ceil(r));
}

using QueueEntry = std::pair<double, std::uint64_t>;
using MinQueue = std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>>;

}  // namespace

void BoundingBox::check() const {
    for (int a = 0; a < 3; ++a) {
        if (!(extent[a] > 0.0)) throw std::invalid_argument("extent > 0");
        if (!std::isfinite(origin[a])) throw std::invalid_argument("origin finite");
    }
    if (!(cube_dim > 0.0)) throw std::invalid_argument("cube_dim > 0");
}

std::array<std::int64_t, 3> BoundingBox::counts() const {
    return {axis_count(extent.x(), cube_dim), axis_count(extent.y(), cube_dim),
            axis_count(extent.z(), cube_dim)};
}

std::uint64_t BoundingBox::cube_count() const {
    const auto c = counts();
    return static_cast<std::uint64_t>(c[0] * c[1] * c[2]);
}

BoundingBox BoundingBox::covering(std::span<const Vec3> points, double cube_dim) {
    if (points.empty()) throw std::invalid_argument("covering box of no points");
    if (!(cube_dim > 0.0)) throw std::invalid_argument("cube_dim > 0");
    Vec3 lo = points.front();
    Vec3 hi = points.front();
    for (const Vec3& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    BoundingBox box;
    box.origin = lo;
    box.cube_dim = cube_dim;
    for (int a = 0; a < 3; ++a) {
        const double n = std::floor((hi[a] - lo[a]) / cube_dim) + 1.0;
        box.extent[a] = n * cube_dim;
    }
    return box;
}

std::uint64_t flat_cube_id(const CubeId& q, const BoundingBox& box) {
    const auto c = box.counts();
    return static_cast<std::uint64_t>((q.ix * c[1] + q.iy) * c[2] + q.iz);
}

CubeId cube_from_flat(std::uint64_t flat, const BoundingBox& box) {
    const auto c = box.counts();
    const auto f = static_cast<std::int64_t>(flat);
    return {f / (c[1] * c[2]), (f / c[2]) % c[1], f % c[2]};
}

bool in_bounds(const CubeId& q, const BoundingBox& box) {
    const auto c = box.counts();
    return q.ix >= 0 && q.iy >= 0 && q.iz >= 0 && q.ix < c[0] && q.iy < c[1] && q.iz < c[2];
}

Vec3 cube_center(const CubeId& q, const BoundingBox& box) {
    return box.origin + box.cube_dim * Vec3(q.ix + 0.5, q.iy + 0.5, q.iz + 0.5);
}

std::optional<CubeId> try_cube_of(const Vec3& p, const BoundingBox& box) noexcept {
    const Vec3 rel = (p - box.origin) / box.cube_dim;
    if (!rel.allFinite() || (rel.array() < 0.0).any()) return std::nullopt;
    const CubeId q{static_cast<std::int64_t>(std::floor(rel.x())),
                   static_cast<std::int64_t>(std::floor(rel.y())),
                   static_cast<std::int64_t>(std::floor(rel.z()))};
    if (!in_bounds(q, box)) return std::nullopt;
    return q;
}

CubeId cube_of(const Vec3& p, const BoundingBox& box) {
    if (auto q = try_cube_of(p, box)) return *q;
    throw OutOfBounds("point (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) + ", " +
                      std::to_string(p.z()) + ") outside bounding box");
}

bool cube_blocked(const CubeId& q, const Spheres& obstacles, const BoundingBox& box) {
    const Vec3 lo = box.origin + box.cube_dim * Vec3(q.ix, q.iy, q.iz);
    const Vec3 hi = lo + Vec3::Constant(box.cube_dim);
    return std::any_of(obstacles.begin(), obstacles.end(), [&](const Sphere& s) {
        const Vec3 closest = s.center.cwiseMax(lo).cwiseMin(hi);
        return (closest - s.center).squaredNorm() <= s.radius * s.radius;
    });
}

std::vector<std::pair<CubeId, double>> neighbors(const CubeId& q, const BoundingBox& box,
                                                 const Spheres& obstacles, Connectivity conn) {
    std::vector<std::pair<CubeId, double>> out;
    for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dz = -1; dz <= 1; ++dz) {
                const int moved = (dx != 0) + (dy != 0) + (dz != 0);
                if (moved == 0 || (conn == Connectivity::face6 && moved != 1)) continue;
                const CubeId n{q.ix + dx, q.iy + dy, q.iz + dz};
                if (!in_bounds(n, box) || cube_blocked(n, obstacles, box)) continue;
                out.emplace_back(n, box.cube_dim * std::sqrt(static_cast<double>(moved)));
            }
    return out;
}

// ---------------------------------------------------------------------------

CubeGraph::CubeGraph(BoundingBox box, Spheres obstacles, Connectivity conn)
    : box_(std::move(box)), obstacles_(std::move(obstacles)), conn_(conn), counts_(box_.counts()) {
    box_.check();
    const std::uint64_t n = box_.cube_count();
    blocked_.assign(n, false);
    if (!obstacles_.empty()) {
        // Only cubes inside each sphere's bounding cell range can touch it.
        for (const Sphere& s : obstacles_) {
            std::array<std::int64_t, 3> lo{}, hi{};
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::max<std::int64_t>(
                    0, static_cast<std::int64_t>(std::floor((s.center[a] - s.radius - box_.origin[a]) / box_.cube_dim)) - 1);
                hi[a] = std::min<std::int64_t>(
                    counts_[a] - 1,
                    static_cast<std::int64_t>(std::floor((s.center[a] + s.radius - box_.origin[a]) / box_.cube_dim)) + 1);
            }
            const Spheres one{s};
            for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
                for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
                    for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
                        const CubeId q{x, y, z};
                        if (cube_blocked(q, one, box_)) blocked_[flat_cube_id(q, box_)] = true;
                    }
        }
    }
    for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dz = -1; dz <= 1; ++dz) {
                const int moved = (dx != 0) + (dy != 0) + (dz != 0);
                if (moved == 0 || (conn_ == Connectivity::face6 && moved != 1)) continue;
                offsets_.push_back({dx, dy, dz});
                offset_weights_.push_back(box_.cube_dim * std::sqrt(static_cast<double>(moved)));
            }
}

double CubeGraph::path_length(std::span<const CubeId> cubes) const {
    double total = 0.0;
    for (std::size_t i = 1; i < cubes.size(); ++i) {
        const int moved = (cubes[i].ix != cubes[i - 1].ix) + (cubes[i].iy != cubes[i - 1].iy) +
                          (cubes[i].iz != cubes[i - 1].iz);
        total += box_.cube_dim * std::sqrt(static_cast<double>(moved));
    }
    return total;
}

double CubeGraph::ordering_length(const std::vector<std::uint64_t>& nodes) const {
    std::array<double, 4> steps{};
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const CubeId a = cube_from_flat(nodes[i - 1], box_);
        const CubeId b = cube_from_flat(nodes[i], box_);
        steps[(a.ix != b.ix) + (a.iy != b.iy) + (a.iz != b.iz)] += 1.0;
    }
    return box_.cube_dim * (steps[1] + steps[2] * std::numbers::sqrt2 + steps[3] * std::numbers::sqrt3);
}

CubePath CubeGraph::to_path(const std::vector<std::uint64_t>& nodes) const {
    CubePath p;
    p.cubes.reserve(nodes.size());
    for (std::uint64_t f : nodes) p.cubes.push_back(cube_from_flat(f, box_));
    p.length = path_length(p.cubes);
    return p;
}

CubePath CubeGraph::shortest_path(const CubeId& s, const CubeId& t) const {
    if (!in_bounds(s, box_) || !in_bounds(t, box_)) throw NoCubePath("endpoint outside the cube grid");
    const std::uint64_t src = flat_cube_id(s, box_);
    const std::uint64_t dst = flat_cube_id(t, box_);
    const std::uint64_t n = box_.cube_count();

    std::vector<double> dist(n, kInf);
    std::vector<std::uint64_t> pred(n, kNone);
    std::vector<bool> done(n, false);
    MinQueue queue;
    dist[src] = 0.0;
    queue.emplace(0.0, src);
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (done[u]) continue;
        done[u] = true;
        if (u == dst) break;
        for_each_neighbor(u, [&](std::uint64_t v, double w) {
            if (done[v] || (blocked_[v] && v != dst)) return;
            const double nd = d + w;
            if (nd < dist[v]) {
                dist[v] = nd;
                pred[v] = u;
                queue.emplace(nd, v);
            } else if (nd == dist[v] && u < pred[v]) {
                pred[v] = u;
            }
        });
    }
    if (!done[dst]) throw NoCubePath("target cube unreachable in the cubes graph");

    std::vector<std::uint64_t> nodes;
    for (std::uint64_t v = dst; v != kNone; v = pred[v]) nodes.push_back(v);
    std::reverse(nodes.begin(), nodes.end());
    CubePath p = to_path(nodes);
    p.length = dist[dst];
    return p;
}

double CubeGraph::heuristic(std::uint64_t a, std::uint64_t b) const {
    const CubeId qa = cube_from_flat(a, box_);
    const CubeId qb = cube_from_flat(b, box_);
    std::array<double, 3> d{std::abs(static_cast<double>(qa.ix - qb.ix)),
                            std::abs(static_cast<double>(qa.iy - qb.iy)),
                            std::abs(static_cast<double>(qa.iz - qb.iz))};
    std::sort(d.begin(), d.end());
    double h = 0.0;
    if (conn_ == Connectivity::face6) {
        h = d[0] + d[1] + d[2];
    } else {
        h = std::numbers::sqrt3 * d[0] + std::numbers::sqrt2 * (d[1] - d[0]) + (d[2] - d[1]);
    }
    // Shrunk slightly so rounding never makes the heuristic inconsistent.
    return h * box_.cube_dim * (1.0 - 1e-9);
}

std::optional<CubeGraph::Search> CubeGraph::astar(
    std::uint64_t s, std::uint64_t t, const std::vector<std::uint64_t>& banned_nodes,
    const std::set<std::pair<std::uint64_t, std::uint64_t>>& banned_edges) const {
    struct Node {
        double g = kInf;
        std::uint64_t pred = kNone;
        bool closed = false;
    };
    std::unordered_map<std::uint64_t, Node> nodes;
    for (std::uint64_t b : banned_nodes) nodes[b].closed = true;
    if (nodes[s].closed || nodes[t].closed) return std::nullopt;

    MinQueue open;
    nodes[s].g = 0.0;
    open.emplace(heuristic(s, t), s);
    while (!open.empty()) {
        const std::uint64_t u = open.top().second;
        open.pop();
        Node& nu = nodes[u];
        if (nu.closed) continue;
        nu.closed = true;
        if (u == t) break;
        const double gu = nu.g;
        for_each_neighbor(u, [&](std::uint64_t v, double w) {
            if (blocked_[v] && v != t) return;
            if (u == s && banned_edges.contains({u, v})) return;
            Node& nv = nodes[v];
            if (nv.closed) return;
            const double ng = gu + w;
            if (ng < nv.g || (ng == nv.g && u < nv.pred)) {
                const bool improved = ng < nv.g;
                nv.g = ng;
                nv.pred = u;
                if (improved) open.emplace(ng + heuristic(v, t), v);
            }
        });
    }
    auto it = nodes.find(t);
    if (it == nodes.end() || !it->second.closed || it->second.g == kInf) return std::nullopt;
    Search out;
    out.cost = it->second.g;
    for (std::uint64_t v = t; v != kNone; v = nodes[v].pred) out.nodes.push_back(v);
    std::reverse(out.nodes.begin(), out.nodes.end());
    return out;
}

// ---------------------------------------------------------------------------

CubePathEnumerator::CubePathEnumerator(const CubeGraph& graph, const CubeId& s, const CubeId& t)
    : graph_(graph), s_(0), t_(0) {
    if (!in_bounds(s, graph.box()) || !in_bounds(t, graph.box()))
        throw NoCubePath("endpoint outside the cube grid");
    s_ = flat_cube_id(s, graph.box());
    t_ = flat_cube_id(t, graph.box());
}

std::optional<CubePath> CubePathEnumerator::next() {
    if (accepted_.empty()) {
        CubePath first = graph_.shortest_path(cube_from_flat(s_, graph_.box()),
                                              cube_from_flat(t_, graph_.box()));
        std::vector<std::uint64_t> nodes;
        for (const CubeId& q : first.cubes) nodes.push_back(flat_cube_id(q, graph_.box()));
        accepted_.push_back(std::move(nodes));
        return first;
    }
    if (exhausted_) return std::nullopt;

    const std::vector<std::uint64_t> prev = accepted_.back();
    for (std::size_t i = 0; i + 1 < prev.size(); ++i) {
        const std::uint64_t spur = prev[i];
        std::set<std::pair<std::uint64_t, std::uint64_t>> banned_edges;
        for (const auto& p : accepted_) {
            if (p.size() > i + 1 && std::equal(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(i) + 1, prev.begin()))
                banned_edges.insert({p[i], p[i + 1]});
        }
        const std::vector<std::uint64_t> banned_nodes(prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(i));
        auto spur_path = graph_.astar(spur, t_, banned_nodes, banned_edges);
        if (!spur_path) continue;

        Candidate c;
        c.nodes.assign(prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(i));
        c.nodes.insert(c.nodes.end(), spur_path->nodes.begin(), spur_path->nodes.end());
        if (std::find(accepted_.begin(), accepted_.end(), c.nodes) != accepted_.end()) continue;
        c.cost = graph_.ordering_length(c.nodes);
        candidates_.insert(std::move(c));
    }
    if (candidates_.empty()) {
        exhausted_ = true;
        return std::nullopt;
    }
    Candidate best = *candidates_.begin();
    candidates_.erase(candidates_.begin());
    accepted_.push_back(best.nodes);
    return graph_.to_path(best.nodes);
}

CubePath shortest_cube_path(const CubeId& s, const CubeId& t, const BoundingBox& box,
                            const Spheres& obstacles, Connectivity conn) {
    return CubeGraph(box, obstacles, conn).shortest_path(s, t);
}

std::vector<CubePath> alternate_cube_paths(const CubeId& s, const CubeId& t, const BoundingBox& box,
                                           const Spheres& obstacles, int k, Connectivity conn) {
    if (k < 1) throw std::invalid_argument("k >= 1");
    const CubeGraph graph(box, obstacles, conn);
    CubePathEnumerator paths(graph, s, t);
    std::vector<CubePath> out;
    while (static_cast<int>(out.size()) < k) {
        auto p = paths.next();
        if (!p) break;
        out.push_back(std::move(*p));
    }
    return out;
}

}  // namespace carm
