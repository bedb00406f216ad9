#include "carm/cspace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "carm/errors.hpp"
#include "carm/parallel.hpp"

namespace carm {

void GridSpec::check() const {
    if (!(min < max)) throw std::invalid_argument("grid min < max");
    if (steps < 2) throw std::invalid_argument("grid steps >= 2");
}

std::optional<std::uint32_t> GridSpec::index_of(double v) const noexcept {
    if (!std::isfinite(v) || steps < 2) return std::nullopt;
    const double pos = (v - min) / (max - min) * static_cast<double>(steps - 1);
    const double r = std::round(pos);
    if (r < 0.0 || r > static_cast<double>(steps - 1)) return std::nullopt;
    const auto i = static_cast<std::uint32_t>(r);
    if (std::abs(value(i) - v) > 1e-9) return std::nullopt;
    return i;
}

SectionSampleTable::SectionSampleTable(SectionGeometry geometry, GridSpec grid,
                                       std::vector<SectionSample> samples)
    : geometry_(geometry), grid_(grid), samples_(std::move(samples)) {
    const std::size_t steps = grid_.steps;
    lookup_.assign(steps * steps, -1);
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto& s = samples_[i];
        if (s.grid_index_a >= steps || s.grid_index_b >= steps)
            throw std::invalid_argument("sample grid index outside the lattice");
        if (i > 0) {
            const auto& p = samples_[i - 1];
            if (std::pair(p.grid_index_a, p.grid_index_b) >= std::pair(s.grid_index_a, s.grid_index_b))
                throw std::invalid_argument("samples not strictly sorted by grid index");
        }
        lookup_[s.grid_index_a * steps + s.grid_index_b] = static_cast<std::int32_t>(i);
    }
}

std::optional<std::uint32_t> SectionSampleTable::find(std::int64_t a, std::int64_t b) const noexcept {
    const auto steps = static_cast<std::int64_t>(grid_.steps);
    if (a < 0 || b < 0 || a >= steps || b >= steps) return std::nullopt;
    const std::int32_t i = lookup_[static_cast<std::size_t>(a * steps + b)];
    if (i < 0) return std::nullopt;
    return static_cast<std::uint32_t>(i);
}

SectionSampleTable enumerate_section_samples(const GridSpec& grid, const SectionGeometry& g,
                                             const EllipseCoefficients& e, ValidityFilter filter) {
    grid.check();
    g.check();
    std::vector<SectionSample> samples;
    for (std::uint32_t a = 0; a < grid.steps; ++a) {
        for (std::uint32_t b = 0; b < grid.steps; ++b) {
            const JointPair j{grid.value(a), grid.value(b)};
            const bool ok = filter == ValidityFilter::ellipse ? is_valid_actuation(j, e)
                                                              : exact_bend_valid(j, g);
            if (!ok) continue;
            SectionSample s;
            s.grid_index_a = a;
            s.grid_index_b = b;
            s.joints = j;
            s.curve = curve_params(j, g);
            s.tip = section_transform(s.curve, g, ArcFraction::tip());
            samples.push_back(s);
        }
    }
    if (samples.empty())
        throw EmptyTable("no lattice point of a " + std::to_string(grid.steps) + "-step grid is valid");
    return SectionSampleTable(g, grid, std::move(samples));
}

ArmTables enumerate_arm_tables(const GridSpec& grid, const ArmGeometry& geoms,
                               const EllipseCoefficients& e, ValidityFilter filter) {
    ArmTables t;
    for (int i = 0; i < kSections; ++i) t[i] = enumerate_section_samples(grid, geoms[i], e, filter);
    return t;
}

// ---------------------------------------------------------------------------

ConfigSpace::ConfigSpace(const ArmTables& tables) : tables_(&tables) {
    for (int i = 0; i < kSections; ++i) n_[i] = tables[i].size();
}

SampleTriple ConfigSpace::decompose(ConfigId id) const noexcept {
    SampleTriple t;
    t.s[2] = static_cast<std::uint32_t>(id % n_[2]);
    id /= n_[2];
    t.s[1] = static_cast<std::uint32_t>(id % n_[1]);
    t.s[0] = static_cast<std::uint32_t>(id / n_[1]);
    return t;
}

ConfigId ConfigSpace::compose(const SampleTriple& t) const noexcept {
    return (t.s[0] * n_[1] + t.s[1]) * n_[2] + t.s[2];
}

ArmJointConfig ConfigSpace::joints(ConfigId id) const {
    const SampleTriple t = decompose(id);
    ArmJointConfig c;
    for (int i = 0; i < kSections; ++i) c.sections[i] = (*tables_)[i][t.s[i]].joints;
    return c;
}

GridCoords ConfigSpace::coords(ConfigId id) const {
    const SampleTriple t = decompose(id);
    GridCoords g{};
    for (int i = 0; i < kSections; ++i) {
        const auto& s = (*tables_)[i][t.s[i]];
        g[2 * i] = s.grid_index_a;
        g[2 * i + 1] = s.grid_index_b;
    }
    return g;
}

OrientationVector ConfigSpace::orientation(ConfigId id) const {
    const SampleTriple t = decompose(id);
    OrientationVector v{};
    for (int i = 0; i < kSections; ++i) {
        const auto& c = (*tables_)[i][t.s[i]].curve;
        v[2 * i] = c.theta;
        v[2 * i + 1] = c.phi;
    }
    return v;
}

RigidTransform ConfigSpace::tip_transform(ConfigId id) const {
    const SampleTriple t = decompose(id);
    RigidTransform acc;
    for (int i = 0; i < kSections; ++i) acc = acc * (*tables_)[i][t.s[i]].tip;
    return acc;
}

ArmGeometry ConfigSpace::geometry() const {
    ArmGeometry g;
    for (int i = 0; i < kSections; ++i) g[i] = (*tables_)[i].geometry();
    return g;
}

std::optional<ConfigId> ConfigSpace::find(const ArmJointConfig& c) const {
    SampleTriple t;
    for (int i = 0; i < kSections; ++i) {
        const GridSpec& grid = (*tables_)[i].grid();
        const auto a = grid.index_of(c.sections[i].l1);
        const auto b = grid.index_of(c.sections[i].l2);
        if (!a || !b) return std::nullopt;
        const auto s = (*tables_)[i].find(*a, *b);
        if (!s) return std::nullopt;
        t.s[i] = *s;
    }
    return compose(t);
}

int ConfigSpace::neighbors(ConfigId id, std::array<ConfigId, 4 * kSections>& out) const {
    const SampleTriple t = decompose(id);
    int count = 0;
    for (int i = 0; i < kSections; ++i) {
        const auto& table = (*tables_)[i];
        const std::int64_t a = table[t.s[i]].grid_index_a;
        const std::int64_t b = table[t.s[i]].grid_index_b;
        const std::array<std::pair<std::int64_t, std::int64_t>, 4> probes{
            {{a - 1, b}, {a + 1, b}, {a, b - 1}, {a, b + 1}}};
        for (const auto& [pa, pb] : probes) {
            if (const auto s = table.find(pa, pb)) {
                SampleTriple n = t;
                n.s[i] = *s;
                out[count++] = compose(n);
            }
        }
    }
    return count;
}

bool adjacent(ConfigId a, ConfigId b, const ArmTables& tables) {
    const ConfigSpace space(tables);
    const GridCoords ga = space.coords(a);
    const GridCoords gb = space.coords(b);
    int differing = 0;
    for (std::size_t k = 0; k < ga.size(); ++k) {
        const std::int64_t d = ga[k] - gb[k];
        if (d == 0) continue;
        if (d != 1 && d != -1) return false;
        ++differing;
    }
    return differing == 1;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Emit>
void for_each_tip(const ArmTables& tables, unsigned workers, Emit&& emit) {
    const ConfigSpace space(tables);
    const std::size_t n1 = tables[0].size();
    const std::size_t n2 = tables[1].size();
    const std::size_t n3 = tables[2].size();
    std::vector<RigidTransform> base_mid(n1 * n2);
    for (std::size_t a = 0; a < n1; ++a)
        for (std::size_t b = 0; b < n2; ++b) base_mid[a * n2 + b] = tables[0][a].tip * tables[1][b].tip;
    parallel_for(space.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t id = begin; id < end; ++id) {
            const RigidTransform& bm = base_mid[id / n3];
            emit(id, RigidTransform(bm * tables[2][id % n3].tip).position);
        }
    });
}

}  // namespace

std::vector<Vec3> enumerate_tips(const ArmTables& tables, unsigned workers) {
    std::vector<Vec3> tips(ConfigSpace(tables).size());
    for_each_tip(tables, workers, [&](std::size_t id, const Vec3& p) { tips[id] = p; });
    return tips;
}

std::vector<TipF> enumerate_tips_f32(const ArmTables& tables, unsigned workers) {
    std::vector<TipF> tips(ConfigSpace(tables).size());
    for_each_tip(tables, workers, [&](std::size_t id, const Vec3& p) {
        tips[id] = {static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z())};
    });
    return tips;
}

CubeBuckets build_buckets(std::span<const Vec3> tips, const BoundingBox& box, unsigned workers) {
    std::vector<TipF> rounded(tips.size());
    for (std::size_t i = 0; i < tips.size(); ++i)
        rounded[i] = {static_cast<float>(tips[i].x()), static_cast<float>(tips[i].y()),
                      static_cast<float>(tips[i].z())};
    return build_buckets(std::move(rounded), box, workers);
}

CubeBuckets build_buckets(std::vector<TipF> tips, const BoundingBox& box, unsigned workers) {
    box.check();
    constexpr std::uint64_t kDropped = ~std::uint64_t{0};
    const std::uint64_t cubes = box.cube_count();
    std::vector<std::uint64_t> cube(tips.size());
    parallel_for(tips.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto q = try_cube_of(to_vec(tips[i]), box);
            cube[i] = q ? flat_cube_id(*q, box) : kDropped;
        }
    });

    CubeBuckets out;
    out.box = box;
    out.offsets.assign(cubes + 1, 0);
    for (std::uint64_t c : cube)
        if (c != kDropped) ++out.offsets[c + 1];
    for (std::uint64_t c = 0; c < cubes; ++c) out.offsets[c + 1] += out.offsets[c];
    out.ids.resize(out.offsets[cubes]);
    std::vector<std::uint64_t> cursor(out.offsets.begin(), out.offsets.end() - 1);
    for (std::size_t i = 0; i < cube.size(); ++i)
        if (cube[i] != kDropped) out.ids[cursor[cube[i]]++] = i;
    out.tips = std::move(tips);
    return out;
}

BoundingBox covering_box(std::span<const TipF> tips, double cube_dim) {
    std::vector<Vec3> pts;
    pts.reserve(tips.size());
    for (const TipF& t : tips) pts.push_back(to_vec(t));
    return BoundingBox::covering(pts, cube_dim);
}

Cache build_cache(const GridSpec& grid, const ArmGeometry& geoms, const EllipseCoefficients& e,
                  double cube_dim, std::optional<BoundingBox> box, ValidityFilter filter,
                  unsigned workers) {
    Cache cache;
    cache.tables = enumerate_arm_tables(grid, geoms, e, filter);
    std::vector<TipF> tips = enumerate_tips_f32(cache.tables, workers);
    const BoundingBox b = box ? *box : covering_box(tips, cube_dim);
    cache.buckets = build_buckets(std::move(tips), b, workers);
    return cache;
}

}  // namespace carm
