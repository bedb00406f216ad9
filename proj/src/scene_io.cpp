#include "carm/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <locale>
#include <random>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "carm/digest.hpp"
#include "carm/errors.hpp"

namespace carm {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// An object whose keys must all come from `allowed`; unknown keys are
// reported before any missing or malformed field.
class Fields {
public:
    Fields(const json& obj, std::string path, std::initializer_list<std::string_view> allowed)
        : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw SchemaError(path_.empty() ? "<root>" : path_, "expected an object");
        for (const auto& [key, value] : obj_.items())
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                throw SchemaError(sub(key), "unknown field");
    }
    const json* get(const std::string& key) {
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }
    const json& require(const std::string& key) {
        const json* j = get(key);
        if (!j) throw SchemaError(sub(key), "missing required field");
        return *j;
    }
    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& obj_;
    std::string path_;
};

std::string idx(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw InvariantError(path, "finite");
    return v;
}

std::int64_t integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
    return j.get<std::int64_t>();
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) throw SchemaError(path, "expected a string");
    return j.get<std::string>();
}

const json& array_of(const json& j, const std::string& path, std::size_t n) {
    if (!j.is_array()) throw SchemaError(path, "expected an array");
    if (n != 0 && j.size() != n) throw SchemaError(path, "expected " + std::to_string(n) + " elements");
    return j;
}

Vec3 vec3(const json& j, const std::string& path) {
    array_of(j, path, 3);
    return {number(j[0], idx(path, 0)), number(j[1], idx(path, 1)), number(j[2], idx(path, 2))};
}

JointPair joint_pair(const json& j, const std::string& path) {
    array_of(j, path, 2);
    return {number(j[0], idx(path, 0)), number(j[1], idx(path, 1))};
}

ArmJointConfig arm_config(const json& j, const std::string& path) {
    array_of(j, path, kSections);
    ArmJointConfig c;
    for (std::size_t i = 0; i < kSections; ++i) c.sections[i] = joint_pair(j[i], idx(path, i));
    return c;
}

SectionGeometry section_geometry(const json& j, const std::string& path) {
    Fields f(j, path, {"length", "radius", "joint_shift", "joint_twist", "actuation_min", "actuation_max",
                       "max_bend", "twist_convention"});
    SectionGeometry g;
    g.backbone_length = number(f.require("length"), f.sub("length"));
    g.offset_radius = number(f.require("radius"), f.sub("radius"));
    if (const json* v = f.get("joint_shift")) g.joint_shift = number(*v, f.sub("joint_shift"));
    if (const json* v = f.get("joint_twist")) g.joint_twist = number(*v, f.sub("joint_twist"));
    if (const json* v = f.get("actuation_min")) g.actuation_min = number(*v, f.sub("actuation_min"));
    if (const json* v = f.get("actuation_max")) g.actuation_max = number(*v, f.sub("actuation_max"));
    if (const json* v = f.get("max_bend")) g.max_bend = number(*v, f.sub("max_bend"));
    if (const json* v = f.get("twist_convention")) {
        const std::string s = text(*v, f.sub("twist_convention"));
        if (s == "untwist") g.twist = TwistConvention::untwist;
        else if (s == "leading_repeat") g.twist = TwistConvention::leading_repeat;
        else throw SchemaError(f.sub("twist_convention"), "expected \"untwist\" or \"leading_repeat\"");
    }
    try {
        g.check();
    } catch (const std::invalid_argument& e) {
        throw InvariantError(path, e.what());
    }
    return g;
}

ojson vec_json(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

ojson config_json(const ArmJointConfig& c) {
    ojson a = ojson::array();
    for (const auto& p : c.sections) a.push_back(ojson::array({p.l1, p.l2}));
    return a;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << v;
    return os.str();
}

// Uniform double in [0, 1) from the top 53 bits; the same on every platform.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

}  // namespace

PlannerOptions Scene::planner_options(unsigned workers) const {
    PlannerOptions o;
    o.workers = workers;
    o.connectivity = connectivity;
    return o;
}

Scene parse_scene(std::string_view text_in) {
    json root;
    try {
        root = json::parse(text_in);
    } catch (const json::parse_error& e) {
        throw SchemaError("<root>", std::string("not valid JSON: ") + e.what());
    }
    Fields f(root, "", {"geometry", "grid", "ellipse", "validity", "cube_dim", "box", "connectivity", "obstacles",
                       "query", "seed"});
    Scene s;

    const json& geo = f.require("geometry");
    if (geo.is_array()) {
        array_of(geo, "geometry", kSections);
        for (std::size_t i = 0; i < kSections; ++i) s.geometry[i] = section_geometry(geo[i], idx("geometry", i));
    } else {
        const SectionGeometry g = section_geometry(geo, "geometry");
        s.geometry = {g, g, g};
    }

    if (const json* g = f.get("grid")) {
        Fields gf(*g, "grid", {"min", "max", "steps"});
        if (const json* v = gf.get("min")) s.grid.min = number(*v, "grid.min");
        if (const json* v = gf.get("max")) s.grid.max = number(*v, "grid.max");
        if (const json* v = gf.get("steps")) {
            const std::int64_t steps = integer(*v, "grid.steps");
            if (steps < 2 || steps > 4096) throw InvariantError("grid.steps", "2 <= steps <= 4096");
            s.grid.steps = static_cast<std::uint32_t>(steps);
        }
        if (!(s.grid.min < s.grid.max)) throw InvariantError("grid", "min < max");
    }
    for (std::size_t i = 0; i < kSections; ++i) {
        if (s.grid.min < s.geometry[i].actuation_min || s.grid.max > s.geometry[i].actuation_max)
            throw InvariantError(idx("geometry", i), "grid range within [actuation_min, actuation_max]");
    }

    if (const json* e = f.get("ellipse")) {
        Fields ef(*e, "ellipse", {"a", "b", "c", "d", "e", "f"});
        for (auto [key, field] : {std::pair{"a", &s.ellipse.a}, {"b", &s.ellipse.b}, {"c", &s.ellipse.c},
                                  {"d", &s.ellipse.d}, {"e", &s.ellipse.e}, {"f", &s.ellipse.f}})
            if (const json* v = ef.get(key)) *field = number(*v, ef.sub(key));
        if (!s.ellipse.bounded()) throw InvariantError("ellipse", "quadratic form negative definite");
    }

    if (const json* v = f.get("validity")) {
        const std::string m = text(*v, "validity");
        if (m == "ellipse") s.validity = ValidityFilter::ellipse;
        else if (m == "exact_bend") s.validity = ValidityFilter::exact_bend;
        else throw SchemaError("validity", "expected \"ellipse\" or \"exact_bend\"");
    }

    if (const json* v = f.get("cube_dim")) {
        s.cube_dim = number(*v, "cube_dim");
        if (!(s.cube_dim > 0.0)) throw InvariantError("cube_dim", "cube_dim > 0");
    }
    if (const json* b = f.get("box")) {
        if (b->is_string()) {
            if (b->get<std::string>() != "auto") throw SchemaError("box", "expected \"auto\" or an object");
        } else {
            Fields bf(*b, "box", {"origin", "extent", "cube_dim"});
            BoundingBox box;
            box.origin = vec3(bf.require("origin"), "box.origin");
            box.extent = vec3(bf.require("extent"), "box.extent");
            box.cube_dim = number(bf.require("cube_dim"), "box.cube_dim");
            if (!(box.extent.array() > 0.0).all()) throw InvariantError("box.extent", "extent > 0");
            if (!(box.cube_dim > 0.0)) throw InvariantError("box.cube_dim", "cube_dim > 0");
            s.box = box;
            s.cube_dim = box.cube_dim;
        }
    }
    if (const json* v = f.get("connectivity")) {
        const std::int64_t c = integer(*v, "connectivity");
        if (c == 6) s.connectivity = Connectivity::face6;
        else if (c == 26) s.connectivity = Connectivity::full26;
        else throw InvariantError("connectivity", "connectivity is 6 or 26");
    }

    if (const json* obs = f.get("obstacles")) {
        array_of(*obs, "obstacles", 0);
        for (std::size_t i = 0; i < obs->size(); ++i) {
            const std::string p = idx("obstacles", i);
            Fields of((*obs)[i], p, {"center", "radius"});
            Sphere sp;
            sp.center = vec3(of.require("center"), p + ".center");
            sp.radius = number(of.require("radius"), p + ".radius");
            if (!(sp.radius > 0.0)) throw InvariantError(p + ".radius", "radius > 0");
            s.obstacles.push_back(sp);
        }
    }

    {
        Fields qf(f.require("query"), "query", {"start", "target_point", "target_config", "retry_budget"});
        s.query.start = arm_config(qf.require("start"), "query.start");
        const json* tp = qf.get("target_point");
        const json* tc = qf.get("target_config");
        if ((tp != nullptr) == (tc != nullptr))
            throw SchemaError("query", "exactly one of target_point or target_config is required");
        if (tp) s.query.target = vec3(*tp, "query.target_point");
        else s.query.target = arm_config(*tc, "query.target_config");
        if (const json* v = qf.get("retry_budget")) {
            const std::int64_t r = integer(*v, "query.retry_budget");
            if (r < 0) throw InvariantError("query.retry_budget", "retry_budget >= 0");
            s.query.retry_budget = static_cast<int>(r);
        }
        const auto within = [&](const ArmJointConfig& c, const std::string& path) {
            for (std::size_t i = 0; i < kSections; ++i) {
                const auto& g = s.geometry[i];
                for (double l : {c.sections[i].l1, c.sections[i].l2})
                    if (l < g.actuation_min || l > g.actuation_max)
                        throw InvariantError(idx(path, i), "actuation_min <= l <= actuation_max");
            }
        };
        within(s.query.start, "query.start");
        if (tc) within(std::get<ArmJointConfig>(s.query.target), "query.target_config");
    }
    s.query.obstacles = s.obstacles;

    if (const json* v = f.get("seed")) {
        if (!v->is_number_unsigned()) throw SchemaError("seed", "expected a non-negative integer");
        s.seed = v->get<std::uint64_t>();
    }
    return s;
}

std::string scene_to_json(const Scene& s) {
    ojson root;
    ojson geo = ojson::array();
    for (const auto& g : s.geometry) {
        geo.push_back({{"length", g.backbone_length},
                       {"radius", g.offset_radius},
                       {"joint_shift", g.joint_shift},
                       {"joint_twist", g.joint_twist},
                       {"actuation_min", g.actuation_min},
                       {"actuation_max", g.actuation_max},
                       {"max_bend", g.max_bend},
                       {"twist_convention", g.twist == TwistConvention::untwist ? "untwist" : "leading_repeat"}});
    }
    root["geometry"] = geo;
    root["grid"] = {{"min", s.grid.min}, {"max", s.grid.max}, {"steps", s.grid.steps}};
    root["ellipse"] = {{"a", s.ellipse.a}, {"b", s.ellipse.b}, {"c", s.ellipse.c},
                       {"d", s.ellipse.d}, {"e", s.ellipse.e}, {"f", s.ellipse.f}};
    root["validity"] = s.validity == ValidityFilter::ellipse ? "ellipse" : "exact_bend";
    if (s.box) {
        root["box"] = {{"origin", vec_json(s.box->origin)},
                       {"extent", vec_json(s.box->extent)},
                       {"cube_dim", s.box->cube_dim}};
    } else {
        root["box"] = "auto";
        root["cube_dim"] = s.cube_dim;
    }
    root["connectivity"] = static_cast<int>(s.connectivity);
    ojson obs = ojson::array();
    for (const Sphere& sp : s.obstacles) obs.push_back({{"center", vec_json(sp.center)}, {"radius", sp.radius}});
    root["obstacles"] = obs;
    ojson q;
    q["start"] = config_json(s.query.start);
    if (const Vec3* p = std::get_if<Vec3>(&s.query.target)) q["target_point"] = vec_json(*p);
    else q["target_config"] = config_json(std::get<ArmJointConfig>(s.query.target));
    q["retry_budget"] = s.query.retry_budget;
    root["query"] = q;
    if (s.seed) root["seed"] = *s.seed;
    return root.dump(2) + "\n";
}

std::string scene_digest(std::string_view scene_text) { return hex64(fnv1a64(scene_text)); }

std::filesystem::path default_cache_path(const Scene& s, const std::filesystem::path& dir) {
    // Only what determines the tables goes into the key.
    Scene key;
    key.geometry = s.geometry;
    key.grid = s.grid;
    key.ellipse = s.ellipse;
    key.validity = s.validity;
    json j = json::parse(scene_to_json(key));
    j.erase("box");
    j.erase("cube_dim");
    j.erase("obstacles");
    j.erase("query");
    j.erase("connectivity");
    return dir / ("steps" + std::to_string(s.grid.steps) + "_" + hex64(fnv1a64(j.dump())).substr(0, 12) + ".carm");
}

BoundingBox resolve_box(const Scene& s, std::span<const TipF> tips) {
    return s.box ? *s.box : covering_box(tips, s.cube_dim);
}

Cache prepare_cache(const Scene& s, const std::filesystem::path& path, unsigned workers) {
    Cache cache;
    if (std::filesystem::exists(path)) {
        cache = load_cache(path);
        for (int i = 0; i < kSections; ++i) {
            const SectionGeometry& g = cache.tables[i].geometry();
            const SectionGeometry& want = s.geometry[i];
            if (cache.tables[i].grid() != s.grid)
                throw InvariantError("grid", "cache lattice matches the scene");
            if (g.backbone_length != want.backbone_length || g.offset_radius != want.offset_radius ||
                g.joint_shift != want.joint_shift || g.joint_twist != want.joint_twist || g.max_bend != want.max_bend)
                throw InvariantError("geometry", "cache geometry matches the scene");
        }
    } else {
        cache = build_cache(s.grid, s.geometry, s.ellipse, s.cube_dim, s.box, s.validity, workers);
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        save_cache(cache, path);
    }
    const BoundingBox box = resolve_box(s, cache.buckets.tips);
    if (!(box == cache.buckets.box)) cache.buckets = build_buckets(std::move(cache.buckets.tips), box, workers);
    return cache;
}

std::vector<Scene> gen_random_scenarios(std::size_t n, ObstacleMode mode, std::uint64_t seed,
                                        const Cache& cache, const Scene& base, RadiusRange radii) {
    const ConfigSpace space(cache.tables);
    const CollisionChecker checker(cache.tables, 10);
    const BoundingBox& box = cache.buckets.box;
    const ArmGeometry geoms = space.geometry();
    std::mt19937_64 rng(seed);
    const auto pick = [&] {
        return std::min<ConfigId>(space.size() - 1, static_cast<ConfigId>(uniform01(rng) * static_cast<double>(space.size())));
    };

    std::vector<Scene> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (int tries = 0;; ++tries) {
            if (tries > 100000) throw Error("could not draw a collision-free scenario");
            const ConfigId start = pick();
            const ConfigId target = pick();
            Spheres obstacles;
            if (mode == ObstacleMode::present) {
                const int count = uniform01(rng) < 0.5 ? 2 : 3;
                for (int i = 0; i < count; ++i) {
                    Sphere sp;
                    for (int a = 0; a < 3; ++a) sp.center[a] = box.origin[a] + uniform01(rng) * box.extent[a];
                    sp.radius = radii.min + uniform01(rng) * (radii.max - radii.min);
                    obstacles.push_back(sp);
                }
            }
            if (!try_cube_of(to_vec(cache.buckets.tips[start]), box) ||
                !try_cube_of(to_vec(cache.buckets.tips[target]), box))
                continue;
            if (checker.collides(start, obstacles) || checker.collides(target, obstacles)) continue;

            Scene s = base;
            s.geometry = geoms;
            s.grid = cache.tables[0].grid();
            s.box = box;
            s.cube_dim = box.cube_dim;
            s.obstacles = obstacles;
            s.query.start = space.joints(start);
            s.query.target = arm_transform(space.joints(target), geoms, ArcFraction::tip()).position;
            s.query.obstacles = obstacles;
            s.seed = seed;
            out.push_back(std::move(s));
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

RunRecord make_run_record(std::string_view scene_text, const PlanResult& res) {
    RunRecord r;
    r.scene_digest = scene_digest(scene_text);
    r.outcome = res.ok() ? "Success" : "NoPath";
    for (const Attempt& a : res.attempts)
        if (a.failure) r.reasons.push_back(*a.failure);
    r.durations = res.times;
    if (res.ok()) {
        r.total_cost = res.success->total_cost;
        r.cube_path_length = res.success->cube_path_used.cubes.size();
        r.config_path_length = res.success->config_path.size();
    } else if (!res.attempts.empty() && res.attempts.front().cube_path) {
        r.cube_path_length = res.attempts.front().cube_path->cubes.size();
    }
    return r;
}

std::optional<OutputFormat> output_format_from_string(std::string_view s) {
    if (s == "table") return OutputFormat::table;
    if (s == "machine") return OutputFormat::machine;
    if (s == "polyline") return OutputFormat::polyline;
    return std::nullopt;
}

std::string emit_result(const PlanResult& res, const RunRecord& record, OutputFormat format,
                        const ArmGeometry& geoms, int samples_per_section) {
    switch (format) {
        case OutputFormat::machine: {
            ojson j;
            j["scene_digest"] = record.scene_digest;
            j["outcome"] = record.outcome;
            ojson reasons = ojson::array();
            for (const auto& f : record.reasons) reasons.push_back({{"reason", to_string(f.kind)}, {"index", f.index}});
            j["reasons"] = reasons;
            j["total_cost"] = record.total_cost ? ojson(*record.total_cost) : ojson(nullptr);
            j["cube_path_length"] = record.cube_path_length;
            j["durations"] = {{"cache", record.durations.cache},
                              {"cube_path", record.durations.cube_path},
                              {"layers", record.durations.layers},
                              {"relaxation", record.durations.relaxation}};
            j["config_path_length"] = record.config_path_length;
            ojson attempts = ojson::array();
            for (const Attempt& a : res.attempts) {
                ojson e;
                e["cube_path_cubes"] = a.cube_path ? a.cube_path->cubes.size() : 0;
                e["cube_path_length_m"] = a.cube_path ? a.cube_path->length : 0.0;
                e["result"] = a.failure ? to_string(a.failure->kind) : "Success";
                if (a.failure) e["index"] = a.failure->index;
                attempts.push_back(e);
            }
            j["attempts"] = attempts;
            if (res.ok()) {
                const PlanSuccess& s = *res.success;
                j["config_path"] = s.config_path;
                ojson joints = ojson::array();
                for (const auto& c : s.joint_path) joints.push_back(config_json(c));
                j["joint_path"] = joints;
                ojson tips = ojson::array();
                for (const Vec3& p : s.tip_polyline) tips.push_back(vec_json(p));
                j["tip_polyline"] = tips;
                ojson cubes = ojson::array();
                for (const CubeId& q : s.cube_path_used.cubes) cubes.push_back({q.ix, q.iy, q.iz});
                j["cube_path"] = cubes;
                j["cube_path_length_m"] = s.cube_path_used.length;
            }
            return j.dump() + "\n";
        }
        case OutputFormat::polyline: {
            std::ostringstream os;
            os << "index,x,y,z,cumulative_cost";
            const int points = kSections * samples_per_section;
            for (int k = 0; k < points; ++k) os << ",sk" << k << "_x,sk" << k << "_y,sk" << k << "_z";
            os << '\n';
            if (!res.ok()) return os.str();
            const PlanSuccess& s = *res.success;
            double cumulative = 0.0;
            for (std::size_t i = 0; i < s.joint_path.size(); ++i) {
                if (i > 0)
                    cumulative += orientation_distance(orientation_vector(s.joint_path[i - 1], geoms),
                                                       orientation_vector(s.joint_path[i], geoms));
                const Vec3& p = s.tip_polyline[i];
                os << i << ',' << fmt_double(p.x()) << ',' << fmt_double(p.y()) << ',' << fmt_double(p.z()) << ','
                   << fmt_double(cumulative);
                for (const Vec3& q : skeleton_points(s.joint_path[i], geoms, samples_per_section))
                    os << ',' << fmt_double(q.x()) << ',' << fmt_double(q.y()) << ',' << fmt_double(q.z());
                os << '\n';
            }
            return os.str();
        }
        case OutputFormat::table:
            break;
    }

    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << "scene         " << record.scene_digest << '\n';
    os << "outcome       " << record.outcome << '\n';
    if (record.total_cost) os << "total cost    " << *record.total_cost << " rad\n";
    os << "config path   " << record.config_path_length << " waypoints\n";
    os << "cube path     " << record.cube_path_length << " cubes\n";
    os << "attempts      " << res.attempts.size() << '\n';
    for (std::size_t i = 0; i < res.attempts.size(); ++i) {
        const Attempt& a = res.attempts[i];
        os << "  #" << i << "  ";
        if (a.cube_path) os << a.cube_path->cubes.size() << " cubes  ";
        if (!a.failure) os << "Success";
        else if (a.failure->kind == AttemptFailure::Kind::no_cube_path) os << "NoCubePath";
        else os << to_string(a.failure->kind) << '(' << a.failure->index << ')';
        os << '\n';
    }
    os << "timings (s)   cache " << record.durations.cache << "  cube_path " << record.durations.cube_path
       << "  layers " << record.durations.layers << "  relaxation " << record.durations.relaxation << '\n';
    return os.str();
}

RunRecord parse_run_record(std::string_view machine_text) {
    const json j = json::parse(machine_text);
    RunRecord r;
    r.scene_digest = j.at("scene_digest").get<std::string>();
    r.outcome = j.at("outcome").get<std::string>();
    for (const json& e : j.at("reasons")) {
        const auto kind = failure_kind_from_string(e.at("reason").get<std::string>());
        if (!kind) throw SchemaError("reasons", "unknown reason");
        r.reasons.push_back({*kind, e.at("index").get<std::size_t>()});
    }
    if (!j.at("total_cost").is_null()) r.total_cost = j.at("total_cost").get<double>();
    r.cube_path_length = j.at("cube_path_length").get<std::size_t>();
    const json& d = j.at("durations");
    r.durations = {d.at("cache").get<double>(), d.at("cube_path").get<double>(), d.at("layers").get<double>(),
                   d.at("relaxation").get<double>()};
    r.config_path_length = j.at("config_path_length").get<std::size_t>();
    return r;
}

std::optional<PlanSuccess> parse_machine_success(std::string_view machine_text) {
    const json j = json::parse(machine_text);
    if (j.at("outcome").get<std::string>() != "Success") return std::nullopt;
    PlanSuccess s;
    s.total_cost = j.at("total_cost").get<double>();
    s.config_path = j.at("config_path").get<std::vector<ConfigId>>();
    for (std::size_t i = 0; i < j.at("joint_path").size(); ++i)
        s.joint_path.push_back(arm_config(j.at("joint_path")[i], idx("joint_path", i)));
    for (std::size_t i = 0; i < j.at("tip_polyline").size(); ++i)
        s.tip_polyline.push_back(vec3(j.at("tip_polyline")[i], idx("tip_polyline", i)));
    for (const json& q : j.at("cube_path"))
        s.cube_path_used.cubes.push_back({q.at(0).get<std::int64_t>(), q.at(1).get<std::int64_t>(), q.at(2).get<std::int64_t>()});
    s.cube_path_used.length = j.at("cube_path_length_m").get<double>();
    return s;
}

}  // namespace carm
