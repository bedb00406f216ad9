// Binary cache layout (little-endian):
//   "CARM" u32 version u32 steps f64 min f64 max
//   3 x geometry {f64 L, r, sigma, gamma, phi_max}
//   3 x u32 sample count
//   per table, per sample: u32 a, u32 b, f64 l1, l2, f64 theta, phi, lambda,
//                          f64 rotation (row-major 9), f64 position (3)
//   u64 cube count, u64 config count
//   u64 offsets[cube count + 1], u64 ids[offsets.back()], f32 tips[3 * config count]
//   trailer: "BOX1" f64 origin[3] f64 extent[3] f64 cube_dim u64 fnv1a64(all preceding bytes)

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "carm/cspace.hpp"
#include "carm/digest.hpp"
#include "carm/errors.hpp"

namespace carm {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace {

constexpr std::array<char, 4> kMagic{'C', 'A', 'R', 'M'};
constexpr std::array<char, 4> kBoxTag{'B', 'O', 'X', '1'};

class Writer {
public:
    void tag(const std::array<char, 4>& t) {
        for (char c : t) bytes_.push_back(static_cast<std::uint8_t>(c));
    }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

    std::array<char, 4> tag() {
        need(4);
        std::array<char, 4> t{};
        for (auto& c : t) c = static_cast<char>(bytes_[pos_++]);
        return t;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get(4))); }
    double f64() { return std::bit_cast<double>(get(8)); }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    /// Throws truncated unless `count` items of `width` bytes remain.
    void need_items(std::uint64_t count, std::uint64_t width) const {
        if (count > remaining() / width) throw CacheError(CacheErrorKind::truncated, "cache truncated");
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw CacheError(CacheErrorKind::truncated, "cache truncated");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

[[noreturn]] void corrupt(const std::string& what) {
    throw CacheError(CacheErrorKind::corrupt, "cache corrupt: " + what);
}

}  // namespace

std::vector<std::uint8_t> serialize_cache(const Cache& cache) {
    const GridSpec& grid = cache.tables[0].grid();
    Writer w;
    w.tag(kMagic);
    w.u32(kCacheVersion);
    w.u32(grid.steps);
    w.f64(grid.min);
    w.f64(grid.max);
    for (const auto& t : cache.tables) {
        const SectionGeometry& g = t.geometry();
        w.f64(g.backbone_length);
        w.f64(g.offset_radius);
        w.f64(g.joint_shift);
        w.f64(g.joint_twist);
        w.f64(g.max_bend);
    }
    for (const auto& t : cache.tables) w.u32(static_cast<std::uint32_t>(t.size()));
    for (const auto& t : cache.tables) {
        for (const SectionSample& s : t.samples()) {
            w.u32(s.grid_index_a);
            w.u32(s.grid_index_b);
            w.f64(s.joints.l1);
            w.f64(s.joints.l2);
            w.f64(s.curve.theta);
            w.f64(s.curve.phi);
            w.f64(s.curve.lambda);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) w.f64(s.tip.rotation(r, c));
            for (int k = 0; k < 3; ++k) w.f64(s.tip.position[k]);
        }
    }
    const CubeBuckets& b = cache.buckets;
    w.u64(b.cube_count());
    w.u64(b.config_count());
    for (std::uint64_t o : b.offsets) w.u64(o);
    for (ConfigId id : b.ids) w.u64(id);
    for (const TipF& tip : b.tips)
        for (float v : tip) w.f32(v);
    w.tag(kBoxTag);
    for (int k = 0; k < 3; ++k) w.f64(b.box.origin[k]);
    for (int k = 0; k < 3; ++k) w.f64(b.box.extent[k]);
    w.f64(b.box.cube_dim);
    w.u64(fnv1a64(w.bytes()));
    return std::move(w.bytes());
}

Cache deserialize_cache(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    if (r.tag() != kMagic) throw CacheError(CacheErrorKind::bad_magic, "not a cache file (bad magic)");
    if (const std::uint32_t v = r.u32(); v != kCacheVersion)
        throw CacheError(CacheErrorKind::version_mismatch,
                         "cache version " + std::to_string(v) + ", expected " + std::to_string(kCacheVersion));

    GridSpec grid;
    grid.steps = r.u32();
    grid.min = r.f64();
    grid.max = r.f64();
    if (!(grid.steps >= 2 && grid.steps <= 65536 && std::isfinite(grid.min) && std::isfinite(grid.max) &&
          grid.min < grid.max))
        corrupt("grid spec");

    ArmGeometry geoms;
    for (auto& g : geoms) {
        g.backbone_length = r.f64();
        g.offset_radius = r.f64();
        g.joint_shift = r.f64();
        g.joint_twist = r.f64();
        g.max_bend = r.f64();
        g.actuation_min = grid.min;
        g.actuation_max = grid.max;
    }
    std::array<std::uint32_t, kSections> counts{};
    for (auto& n : counts) n = r.u32();

    constexpr std::uint64_t kSampleBytes = 2 * 4 + 19 * 8;
    std::array<std::vector<SectionSample>, kSections> samples;
    for (int i = 0; i < kSections; ++i) {
        r.need_items(counts[i], kSampleBytes);
        samples[i].resize(counts[i]);
        for (SectionSample& s : samples[i]) {
            s.grid_index_a = r.u32();
            s.grid_index_b = r.u32();
            s.joints.l1 = r.f64();
            s.joints.l2 = r.f64();
            s.curve.theta = r.f64();
            s.curve.phi = r.f64();
            s.curve.lambda = r.f64();
            for (int row = 0; row < 3; ++row)
                for (int c = 0; c < 3; ++c) s.tip.rotation(row, c) = r.f64();
            for (int k = 0; k < 3; ++k) s.tip.position[k] = r.f64();
        }
    }

    CubeBuckets b;
    const std::uint64_t cube_count = r.u64();
    const std::uint64_t config_count = r.u64();
    if (cube_count == std::numeric_limits<std::uint64_t>::max()) corrupt("cube count");
    r.need_items(cube_count + 1, 8);
    b.offsets.resize(cube_count + 1);
    for (auto& o : b.offsets) o = r.u64();
    if (b.offsets.front() != 0 || !std::is_sorted(b.offsets.begin(), b.offsets.end()) ||
        b.offsets.back() > config_count)
        corrupt("bucket offsets");
    r.need_items(b.offsets.back(), 8);
    b.ids.resize(b.offsets.back());
    for (auto& id : b.ids) id = r.u64();
    r.need_items(config_count, 12);
    b.tips.resize(config_count);
    for (TipF& tip : b.tips)
        for (float& v : tip) v = r.f32();

    if (r.tag() != kBoxTag) corrupt("missing box trailer");
    for (int k = 0; k < 3; ++k) b.box.origin[k] = r.f64();
    for (int k = 0; k < 3; ++k) b.box.extent[k] = r.f64();
    b.box.cube_dim = r.f64();
    const std::size_t hashed = r.pos();
    const std::uint64_t checksum = r.u64();
    if (r.remaining() != 0) corrupt("trailing bytes");
    if (checksum != fnv1a64(bytes.first(hashed))) corrupt("checksum mismatch");

    // Checksum passed; the structural checks below still guard against a
    // writer bug producing an inconsistent file.
    Cache cache;
    try {
        for (int i = 0; i < kSections; ++i) {
            geoms[i].check();
            cache.tables[i] = SectionSampleTable(geoms[i], grid, std::move(samples[i]));
        }
        b.box.check();
    } catch (const std::invalid_argument& e) {
        corrupt(e.what());
    }
    for (int i = 0; i < kSections; ++i)
        if (cache.tables[i].size() == 0) corrupt("empty sample table");
    if (b.box.cube_count() != cube_count) corrupt("cube count does not match box");
    const ConfigSpace space(cache.tables);
    if (space.size() != config_count) corrupt("config count does not match tables");
    for (std::uint64_t c = 0; c < cube_count; ++c) {
        for (std::uint64_t k = b.offsets[c]; k < b.offsets[c + 1]; ++k) {
            const ConfigId id = b.ids[k];
            if (id >= config_count || (k > b.offsets[c] && b.ids[k - 1] >= id)) corrupt("bucket ids");
            const auto q = try_cube_of(to_vec(b.tips[id]), b.box);
            if (!q || flat_cube_id(*q, b.box) != c) corrupt("bucket membership");
        }
    }
    const auto inside = std::count_if(b.tips.begin(), b.tips.end(), [&](const TipF& t) {
        return try_cube_of(to_vec(t), b.box).has_value();
    });
    if (static_cast<std::uint64_t>(inside) != b.ids.size()) corrupt("bucket coverage");
    cache.buckets = std::move(b);
    return cache;
}

void save_cache(const Cache& cache, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = serialize_cache(cache);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CacheError(CacheErrorKind::io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CacheError(CacheErrorKind::io, "write failed for " + path.string());
}

Cache load_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CacheError(CacheErrorKind::io, "cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_cache(bytes);
}

}  // namespace carm
