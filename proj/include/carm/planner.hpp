#pragma once

// Layered shortest-path planning over a cube path: each cube on the path
// contributes one layer of configurations, edges join adjacent
// configurations in consecutive layers, and one relaxation pass per
// boundary yields exact shortest distances from the start.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "carm/cspace.hpp"
#include "carm/errors.hpp"
#include "carm/kinematics.hpp"
#include "carm/wgrid.hpp"

namespace carm {

inline constexpr double kUnreached = std::numeric_limits<double>::infinity();
inline constexpr std::uint32_t kNoPred = std::numeric_limits<std::uint32_t>::max();

struct Layer {
    CubeId cube;
    std::vector<ConfigId> config_ids;  // ascending
    std::vector<double> costs;         // kUnreached where not reached
    std::vector<std::uint32_t> preds;  // index into the previous layer, kNoPred if none

    std::size_t size() const noexcept { return config_ids.size(); }
};

struct PlanQuery {
    ArmJointConfig start;
    std::variant<Vec3, ArmJointConfig> target;
    Spheres obstacles;
    int retry_budget = 8;

    bool target_is_point() const noexcept { return std::holds_alternative<Vec3>(target); }
};

struct PlannerOptions {
    int samples_per_section = 10;
    unsigned workers = 1;
    Connectivity connectivity = Connectivity::full26;
    /// Added to every obstacle radius for the configuration purge. Zero keeps
    /// the plain 30-point test.
    double obstacle_inflation = 0.0;
};

struct AttemptFailure {
    enum class Kind { no_cube_path, empty_layer, disconnected_boundary };
    Kind kind = Kind::no_cube_path;
    std::size_t index = 0;  // layer index for empty_layer / disconnected_boundary
};

std::string to_string(AttemptFailure::Kind k);
std::optional<AttemptFailure::Kind> failure_kind_from_string(const std::string& s);

struct Attempt {
    std::optional<CubePath> cube_path;       // absent when no cube path existed
    std::optional<AttemptFailure> failure;   // absent for the successful attempt
};

struct PlanSuccess {
    std::vector<ConfigId> config_path;
    std::vector<ArmJointConfig> joint_path;
    std::vector<Vec3> tip_polyline;
    double total_cost = 0.0;  // radians
    CubePath cube_path_used;
};

struct PhaseTimes {
    double cache = 0.0;
    double cube_path = 0.0;
    double layers = 0.0;
    double relaxation = 0.0;
};

struct PlanResult {
    std::optional<PlanSuccess> success;
    std::vector<Attempt> attempts;
    PhaseTimes times;

    bool ok() const noexcept { return success.has_value(); }
};

/// Norm of the orientation difference of two configurations, theta wrapped.
double edge_weight(ConfigId u, ConfigId v, const ConfigSpace& space);

/// World-frame skeleton points of every configuration, evaluated from
/// per-sample local points so purging a bucket costs one rigid transform per
/// point.
class CollisionChecker {
public:
    CollisionChecker(const ArmTables& tables, int samples_per_section);

    int samples_per_section() const noexcept { return per_section_; }
    void points(ConfigId id, std::vector<Vec3>& out) const;
    bool collides(ConfigId id, const Spheres& obstacles, double inflation = 0.0) const;

private:
    ConfigSpace space_;
    int per_section_;
    std::array<std::vector<Vec3>, kSections> local_;  // sample-major, per_section_ per sample
};

class EmptyLayer : public Error {
public:
    explicit EmptyLayer(std::size_t index)
        : Error("layer " + std::to_string(index) + " is empty"), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Layer 0 is the start alone at cost 0; layer i > 0 is the bucket of
/// path[i] minus colliding configurations, intersected with the target when
/// the target is a configuration. Costs other than layer 0 start unreached.
/// Throws EmptyLayer, InvalidStart.
std::vector<Layer> build_layers(const CubePath& path, const Cache& cache, const PlanQuery& query,
                                const PlannerOptions& options = {});

/// Relaxes every edge between `prev` and `next`. For each v in next the cost
/// is the minimum of cost(u) + edge_weight(u, v) over adjacent u in prev,
/// ties to the lowest u. Work is split over the members of `next`. Returns
/// false when no member of `next` is reached (disconnected boundary).
bool relax_boundary(const Layer& prev, Layer& next, const ConfigSpace& space, unsigned workers = 1);

/// Called with (attempt, layer index, layer) once each layer's costs are final.
using LayerObserver = std::function<void(std::size_t, std::size_t, const Layer&)>;

/// Throws InvalidStart or InvalidQuery for bad input; every other outcome is
/// a PlanResult (Success or NoPath with one reason per attempted cube path).
PlanResult plan(const PlanQuery& query, const Cache& cache, const PlannerOptions& options = {},
                const LayerObserver& observer = {});

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool all_passed() const;
};

/// Re-derives everything from joint values with fresh kinematics: start
/// match, lattice adjacency, collision freedom, cost re-summation (1e-9) and
/// terminal tolerance (sqrt(3) * cube_dim).
ValidationReport validate_path(const PlanSuccess& res, const PlanQuery& query, const Cache& cache,
                               const PlannerOptions& options = {});

}  // namespace carm
