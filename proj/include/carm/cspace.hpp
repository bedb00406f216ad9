#pragma once

// Discretized configuration space: per-section lattice tables, full-arm tip
// enumeration, cube bucketing and the on-disk cache.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "carm/kinematics.hpp"
#include "carm/wgrid.hpp"

namespace carm {

/// Uniform lattice over [min, max] with `steps` points, both ends included.
/// The same spec is used for l1 and l2 of every section.
struct GridSpec {
    double min = -0.04;
    double max = 0.04;
    std::uint32_t steps = 13;

    void check() const;
    double value(std::uint32_t i) const noexcept {
        return min + (max - min) * static_cast<double>(i) / static_cast<double>(steps - 1);
    }
    /// Lattice index of `v` if it lies within 1e-9 m of a lattice point.
    std::optional<std::uint32_t> index_of(double v) const noexcept;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

enum class ValidityFilter { ellipse, exact_bend };

struct SectionSample {
    std::uint32_t grid_index_a = 0;
    std::uint32_t grid_index_b = 0;
    JointPair joints;
    CurveParams curve;
    RigidTransform tip;  // xi = 1, joint offsets applied

    friend bool operator==(const SectionSample&, const SectionSample&) = default;
};

class SectionSampleTable {
public:
    SectionSampleTable() = default;
    SectionSampleTable(SectionGeometry geometry, GridSpec grid, std::vector<SectionSample> samples);

    const SectionGeometry& geometry() const noexcept { return geometry_; }
    const GridSpec& grid() const noexcept { return grid_; }
    std::span<const SectionSample> samples() const noexcept { return samples_; }
    std::size_t size() const noexcept { return samples_.size(); }
    const SectionSample& operator[](std::size_t i) const { return samples_[i]; }

    /// Sample index at lattice position (a, b), if that point survived the filter.
    std::optional<std::uint32_t> find(std::int64_t a, std::int64_t b) const noexcept;

    friend bool operator==(const SectionSampleTable& x, const SectionSampleTable& y) {
        return x.geometry_ == y.geometry_ && x.grid_ == y.grid_ && x.samples_ == y.samples_;
    }

private:
    SectionGeometry geometry_;
    GridSpec grid_;
    std::vector<SectionSample> samples_;
    std::vector<std::int32_t> lookup_;  // steps * steps, -1 where filtered out
};

/// Throws EmptyTable when no lattice point passes.
SectionSampleTable enumerate_section_samples(const GridSpec& grid, const SectionGeometry& g,
                                             const EllipseCoefficients& e,
                                             ValidityFilter filter = ValidityFilter::ellipse);

using ArmTables = std::array<SectionSampleTable, kSections>;

ArmTables enumerate_arm_tables(const GridSpec& grid, const ArmGeometry& geoms,
                               const EllipseCoefficients& e,
                               ValidityFilter filter = ValidityFilter::ellipse);

/// Flat configuration id: ((s1 * n2) + s2) * n3 + s3.
using ConfigId = std::uint64_t;

struct SampleTriple {
    std::array<std::uint32_t, kSections> s{};
    friend bool operator==(const SampleTriple&, const SampleTriple&) = default;
};

/// Grid indices (a, b) of all three sections, base first.
using GridCoords = std::array<std::int64_t, 2 * kSections>;

/// Read-only view that maps flat ids to samples, joints and neighbors.
class ConfigSpace {
public:
    explicit ConfigSpace(const ArmTables& tables);

    const ArmTables& tables() const noexcept { return *tables_; }
    std::uint64_t size() const noexcept { return n_[0] * n_[1] * n_[2]; }
    bool valid(ConfigId id) const noexcept { return id < size(); }

    SampleTriple decompose(ConfigId id) const noexcept;
    ConfigId compose(const SampleTriple& t) const noexcept;

    ArmJointConfig joints(ConfigId id) const;
    GridCoords coords(ConfigId id) const;
    OrientationVector orientation(ConfigId id) const;
    /// Tip transform composed from the precomputed section tips.
    RigidTransform tip_transform(ConfigId id) const;
    ArmGeometry geometry() const;

    /// The id whose joints sit on the lattice, if every section pair is a
    /// surviving sample.
    std::optional<ConfigId> find(const ArmJointConfig& c) const;

    /// Configs one lattice step away in exactly one DoF; at most 12.
    /// Returns the count written into `out`.
    int neighbors(ConfigId id, std::array<ConfigId, 4 * kSections>& out) const;

private:
    const ArmTables* tables_;
    std::array<std::uint64_t, kSections> n_{};
};

/// Six grid indices differ in exactly one coordinate, by exactly one.
bool adjacent(ConfigId a, ConfigId b, const ArmTables& tables);

/// Tip of every configuration in flat id order.
std::vector<Vec3> enumerate_tips(const ArmTables& tables, unsigned workers = 1);

using TipF = std::array<float, 3>;

inline Vec3 to_vec(const TipF& t) { return {t[0], t[1], t[2]}; }

/// Configurations bucketed by the cube containing their tip, CSR layout.
struct CubeBuckets {
    BoundingBox box;
    std::vector<std::uint64_t> offsets;  // cube_count + 1, monotone
    std::vector<ConfigId> ids;           // ascending within each bucket
    std::vector<TipF> tips;              // per config, flat id order

    std::uint64_t cube_count() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::uint64_t config_count() const noexcept { return tips.size(); }
    std::uint64_t dropped() const noexcept { return config_count() - ids.size(); }

    std::span<const ConfigId> bucket(std::uint64_t flat_cube) const {
        return {ids.data() + offsets[flat_cube], ids.data() + offsets[flat_cube + 1]};
    }

    friend bool operator==(const CubeBuckets& a, const CubeBuckets& b) {
        return a.box == b.box && a.offsets == b.offsets && a.ids == b.ids && a.tips == b.tips;
    }
};

/// Tips are rounded to float first; bucketing uses the rounded values so a
/// reloaded cache reproduces the same membership. Tips outside `box` are
/// dropped and counted.
CubeBuckets build_buckets(std::span<const Vec3> tips, const BoundingBox& box, unsigned workers = 1);

/// Same from already rounded tips.
CubeBuckets build_buckets(std::vector<TipF> tips, const BoundingBox& box, unsigned workers = 1);

/// Float tips for every configuration, computed in parallel slices.
std::vector<TipF> enumerate_tips_f32(const ArmTables& tables, unsigned workers = 1);

/// Box covering the given float tips with cells of `cube_dim`.
BoundingBox covering_box(std::span<const TipF> tips, double cube_dim);

struct Cache {
    ArmTables tables;
    CubeBuckets buckets;

    friend bool operator==(const Cache&, const Cache&) = default;
};

/// Enumerates tips and buckets them; `box` defaults to the covering box.
Cache build_cache(const GridSpec& grid, const ArmGeometry& geoms, const EllipseCoefficients& e,
                  double cube_dim, std::optional<BoundingBox> box = std::nullopt,
                  ValidityFilter filter = ValidityFilter::ellipse, unsigned workers = 1);

inline constexpr std::uint32_t kCacheVersion = 1;

/// Little-endian binary; see docs/cache_format.md. Throws CacheError(io).
void save_cache(const Cache& cache, const std::filesystem::path& path);

/// Throws CacheError with bad_magic, version_mismatch, truncated, corrupt or io.
Cache load_cache(const std::filesystem::path& path);

/// In-memory variants used by the file functions.
std::vector<std::uint8_t> serialize_cache(const Cache& cache);
Cache deserialize_cache(std::span<const std::uint8_t> bytes);

}  // namespace carm
