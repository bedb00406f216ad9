#pragma once

// Scene files, run records, result emitters and the randomized scenario
// generator. Scene and record text is JSON; units are meters and radians.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "carm/cspace.hpp"
#include "carm/planner.hpp"

namespace carm {

struct Scene {
    ArmGeometry geometry{};
    GridSpec grid{};
    EllipseCoefficients ellipse{};
    ValidityFilter validity = ValidityFilter::ellipse;
    std::optional<BoundingBox> box;  // nullopt: cover all tips with cubes of cube_dim
    double cube_dim = 0.01;
    Connectivity connectivity = Connectivity::full26;
    Spheres obstacles;
    PlanQuery query;
    std::optional<std::uint64_t> seed;

    PlannerOptions planner_options(unsigned workers = 1) const;
};

/// Parses and validates. Throws SchemaError (unknown key, wrong type,
/// missing field) or InvariantError (a domain rule such as "radius > 0").
Scene parse_scene(std::string_view text);

/// Canonical JSON text; parse_scene(scene_to_json(s)) reproduces `s`.
std::string scene_to_json(const Scene& s);

/// Hex FNV-1a of the scene bytes.
std::string scene_digest(std::string_view scene_text);

/// Conventional cache location for the scene's lattice and geometry:
/// <dir>/steps<N>_<digest>.carm
std::filesystem::path default_cache_path(const Scene& s, const std::filesystem::path& dir = "carm_cache");

/// Loads `path` (building and saving it first when missing) and rebuckets in
/// memory if the scene's box differs from the stored one. Throws
/// InvariantError when the file's lattice or geometry disagrees with the scene.
Cache prepare_cache(const Scene& s, const std::filesystem::path& path, unsigned workers = 1);

/// Box the scene resolves to for a cache with these tips.
BoundingBox resolve_box(const Scene& s, std::span<const TipF> tips);

enum class ObstacleMode { none, present };

struct RadiusRange {
    double min = 0.03;
    double max = 0.25;
};

/// Start and target drawn uniformly from all configurations (target stored
/// as its tip point); with obstacles, 2 or 3 spheres with equal probability,
/// centers uniform in the box, radii uniform in `radii`. Draws whose start or
/// target collides are redrawn. Deterministic for a fixed seed.
std::vector<Scene> gen_random_scenarios(std::size_t n, ObstacleMode mode, std::uint64_t seed,
                                        const Cache& cache, const Scene& base,
                                        RadiusRange radii = {});

struct RunRecord {
    std::string scene_digest;
    std::string outcome;  // "Success" or "NoPath"
    std::vector<AttemptFailure> reasons;
    std::optional<double> total_cost;
    std::size_t cube_path_length = 0;  // cubes in the path used (or first attempted)
    PhaseTimes durations;
    std::size_t config_path_length = 0;

    friend bool operator==(const RunRecord& a, const RunRecord& b) {
        return a.scene_digest == b.scene_digest && a.outcome == b.outcome && a.total_cost == b.total_cost &&
               a.cube_path_length == b.cube_path_length && a.config_path_length == b.config_path_length &&
               a.durations.cache == b.durations.cache && a.durations.cube_path == b.durations.cube_path &&
               a.durations.layers == b.durations.layers && a.durations.relaxation == b.durations.relaxation &&
               a.reasons.size() == b.reasons.size() &&
               std::equal(a.reasons.begin(), a.reasons.end(), b.reasons.begin(),
                          [](const AttemptFailure& x, const AttemptFailure& y) {
                              return x.kind == y.kind && x.index == y.index;
                          });
    }
};

RunRecord make_run_record(std::string_view scene_text, const PlanResult& res);

enum class OutputFormat { table, machine, polyline };

std::optional<OutputFormat> output_format_from_string(std::string_view s);

/// table: human summary. machine: one JSON object holding the record fields
/// plus the config/joint/tip paths. polyline: CSV, one row per waypoint
/// (index, x, y, z, cumulative_cost, then skeleton points sk<k>_x/y/z).
std::string emit_result(const PlanResult& res, const RunRecord& record, OutputFormat format,
                        const ArmGeometry& geoms, int samples_per_section = 10);

/// Reads the record fields back from machine output.
RunRecord parse_run_record(std::string_view machine_text);

/// Reads the success payload (config ids, joints, tips, cost) back from
/// machine output; nullopt for a NoPath record.
std::optional<PlanSuccess> parse_machine_success(std::string_view machine_text);

}  // namespace carm
