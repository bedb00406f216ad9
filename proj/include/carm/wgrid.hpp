#pragma once

// Workspace voxelization, spherical obstacles and cube-path routing.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "carm/kinematics.hpp"

namespace carm {

struct BoundingBox {
    Vec3 origin = Vec3::Zero();
    Vec3 extent = Vec3::Ones();
    double cube_dim = 0.01;

    /// Throws std::invalid_argument naming the first broken invariant.
    void check() const;

    /// ceil(extent / cube_dim) per axis; extents that are an integer number
    /// of cubes up to rounding noise are not rounded up an extra cell.
    std::array<std::int64_t, 3> counts() const;
    std::uint64_t cube_count() const;

    /// Smallest box with cells of `cube_dim` anchored at the componentwise
    /// minimum of `points` that contains all of them (half-open cells).
    static BoundingBox covering(std::span<const Vec3> points, double cube_dim);

    friend bool operator==(const BoundingBox& a, const BoundingBox& b) {
        return a.origin == b.origin && a.extent == b.extent && a.cube_dim == b.cube_dim;
    }
};

struct CubeId {
    std::int64_t ix = 0;
    std::int64_t iy = 0;
    std::int64_t iz = 0;

    friend bool operator==(const CubeId&, const CubeId&) = default;
    friend auto operator<=>(const CubeId&, const CubeId&) = default;
};

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 0.0;

    bool contains(const Vec3& p) const noexcept {
        return (p - center).squaredNorm() <= radius * radius;
    }
};

using Spheres = std::vector<Sphere>;

struct CubePath {
    std::vector<CubeId> cubes;
    double length = 0.0;  // meters, sum of center-to-center steps in order
};

enum class Connectivity { face6 = 6, full26 = 26 };

/// Row-major flat index, ix outermost.
std::uint64_t flat_cube_id(const CubeId& q, const BoundingBox& box);
CubeId cube_from_flat(std::uint64_t flat, const BoundingBox& box);

bool in_bounds(const CubeId& q, const BoundingBox& box);

Vec3 cube_center(const CubeId& q, const BoundingBox& box);

/// Cells are half-open: lower faces belong to the cell. Throws OutOfBounds.
CubeId cube_of(const Vec3& p, const BoundingBox& box);

/// Same, without throwing.
std::optional<CubeId> try_cube_of(const Vec3& p, const BoundingBox& box) noexcept;

/// Closed axis-aligned box / sphere intersection against every obstacle.
bool cube_blocked(const CubeId& q, const Spheres& obstacles, const BoundingBox& box);

/// In-bounds, unblocked cubes that differ from `q` by at most one per axis,
/// with center-to-center weights cube_dim * sqrt(#differing axes).
std::vector<std::pair<CubeId, double>> neighbors(const CubeId& q, const BoundingBox& box,
                                                 const Spheres& obstacles,
                                                 Connectivity conn = Connectivity::full26);

/// The implicit cubes graph with the blocked set precomputed. Endpoints of a
/// query are always passable so a start or target tip sitting in a cube that
/// merely touches an obstacle can still be routed; interior cubes of a path
/// are never blocked.
class CubeGraph {
public:
    CubeGraph(BoundingBox box, Spheres obstacles, Connectivity conn = Connectivity::full26);

    const BoundingBox& box() const noexcept { return box_; }
    const Spheres& obstacles() const noexcept { return obstacles_; }
    Connectivity connectivity() const noexcept { return conn_; }
    bool blocked(std::uint64_t flat) const { return blocked_[flat]; }
    bool blocked(const CubeId& q) const { return blocked_[flat_cube_id(q, box_)]; }

    /// Dijkstra from `s` to `t`; ties on tentative cost keep the lower
    /// predecessor id, and the queue pops (cost, id) ascending. Throws NoCubePath.
    CubePath shortest_path(const CubeId& s, const CubeId& t) const;

    /// Sum of step weights along `cubes` in order.
    double path_length(std::span<const CubeId> cubes) const;

    template <typename F>
    void for_each_neighbor(std::uint64_t flat, F&& f) const;

private:
    friend class CubePathEnumerator;

    struct Search {
        std::vector<std::uint64_t> nodes;  // s ... t, flat ids
        double cost = 0.0;
    };
    // A* with the exact free-space distance as heuristic; for spur searches.
    std::optional<Search> astar(std::uint64_t s, std::uint64_t t,
                                const std::vector<std::uint64_t>& banned_nodes,
                                const std::set<std::pair<std::uint64_t, std::uint64_t>>& banned_edges) const;
    double heuristic(std::uint64_t a, std::uint64_t b) const;
    CubePath to_path(const std::vector<std::uint64_t>& nodes) const;
    // Length from step-type counts; independent of summation order so equal
    // paths compare equal when ranking alternates.
    double ordering_length(const std::vector<std::uint64_t>& nodes) const;

    BoundingBox box_;
    Spheres obstacles_;
    Connectivity conn_;
    std::array<std::int64_t, 3> counts_;
    std::vector<bool> blocked_;
    std::vector<std::array<int, 3>> offsets_;
    std::vector<double> offset_weights_;
};

/// Yen-style enumeration of loopless cube paths in nondecreasing length. The
/// first path is exactly CubeGraph::shortest_path; later ones are produced on
/// demand so a caller that stops early pays only for what it used.
class CubePathEnumerator {
public:
    CubePathEnumerator(const CubeGraph& graph, const CubeId& s, const CubeId& t);

    /// Next path, or nullopt when no further loopless path exists. The first
    /// call throws NoCubePath if `t` is unreachable.
    std::optional<CubePath> next();

private:
    struct Candidate {
        double cost;
        std::vector<std::uint64_t> nodes;
        bool operator<(const Candidate& o) const {
            return cost != o.cost ? cost < o.cost : nodes < o.nodes;
        }
    };

    const CubeGraph& graph_;
    std::uint64_t s_;
    std::uint64_t t_;
    std::vector<std::vector<std::uint64_t>> accepted_;
    std::set<Candidate> candidates_;
    bool exhausted_ = false;
};

CubePath shortest_cube_path(const CubeId& s, const CubeId& t, const BoundingBox& box,
                            const Spheres& obstacles, Connectivity conn = Connectivity::full26);

/// Up to k loopless paths, nondecreasing length. Throws NoCubePath if none.
std::vector<CubePath> alternate_cube_paths(const CubeId& s, const CubeId& t, const BoundingBox& box,
                                           const Spheres& obstacles, int k,
                                           Connectivity conn = Connectivity::full26);

// ---------------------------------------------------------------------------

template <typename F>
void CubeGraph::for_each_neighbor(std::uint64_t flat, F&& f) const {
    const CubeId q = cube_from_flat(flat, box_);
    for (std::size_t k = 0; k < offsets_.size(); ++k) {
        const CubeId n{q.ix + offsets_[k][0], q.iy + offsets_[k][1], q.iz + offsets_[k][2]};
        if (n.ix < 0 || n.iy < 0 || n.iz < 0 || n.ix >= counts_[0] || n.iy >= counts_[1] ||
            n.iz >= counts_[2])
            continue;
        f(flat_cube_id(n, box_), offset_weights_[k]);
    }
}

}  // namespace carm
