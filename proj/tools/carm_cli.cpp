// carm: cache building, planning, scenario generation and batch runs.
// Exit codes: 0 Success, 1 validation failure, 2 NoPath, 3 input error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "carm/errors.hpp"
#include "carm/scene_io.hpp"

namespace fs = std::filesystem;
using namespace carm;

namespace {

constexpr int kExitSuccess = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNoPath = 2;
constexpr int kExitInput = 3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out || !(out << text)) throw std::runtime_error("cannot write " + p.string());
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty()) std::cout << text << std::flush;
    else write_file(out, text);
}

struct Common {
    std::string cache;
    std::string scene;
    std::string out;
    std::string format = "table";
    unsigned steps = 0;
    double cube_dim = 0.0;
    int retries = -1;
    unsigned workers = 1;
    std::uint64_t seed = 1;
    std::size_t n = 10;
    std::string mode = "present";
};

Scene default_scene() {
    Scene s;
    s.query.target = Vec3(0.0, 0.0, 0.45);
    return s;
}

// Scene from --scene (or defaults) with command line overrides applied.
Scene load_scene(const Common& o, std::string* text = nullptr) {
    Scene s = default_scene();
    if (!o.scene.empty()) {
        const std::string t = read_file(o.scene);
        s = parse_scene(t);
        if (text) *text = t;
    } else if (text) {
        *text = scene_to_json(s);
    }
    if (o.steps) {
        if (o.steps < 2) throw InvariantError("steps", "steps >= 2");
        s.grid.steps = o.steps;
    }
    if (o.cube_dim > 0.0) {
        s.cube_dim = o.cube_dim;
        if (s.box) s.box->cube_dim = o.cube_dim;
    }
    if (o.retries >= 0) s.query.retry_budget = o.retries;
    return s;
}

Cache open_cache(const Scene& s, const Common& o) {
    const fs::path path = o.cache.empty() ? default_cache_path(s) : fs::path(o.cache);
    return prepare_cache(s, path, o.workers);
}

OutputFormat parse_format(const std::string& f) {
    const auto fmt = output_format_from_string(f);
    if (!fmt) throw SchemaError("format", "unknown format '" + f + "'");
    return *fmt;
}

ObstacleMode parse_mode(const std::string& m) {
    if (m == "none") return ObstacleMode::none;
    if (m == "present") return ObstacleMode::present;
    throw SchemaError("mode", "unknown mode '" + m + "'");
}

int cmd_build_cache(const Common& o) {
    const Scene s = load_scene(o);
    const fs::path path = o.cache.empty() ? default_cache_path(s) : fs::path(o.cache);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto t0 = Clock::now();
    const Cache c = build_cache(s.grid, s.geometry, s.ellipse, s.cube_dim, s.box, s.validity, o.workers);
    save_cache(c, path);
    const auto counts = c.buckets.box.counts();
    std::printf("cache %s\n", path.string().c_str());
    std::printf("samples per section %zu, configurations %llu, dropped %llu\n", c.tables[0].size(),
                static_cast<unsigned long long>(c.buckets.config_count()),
                static_cast<unsigned long long>(c.buckets.dropped()));
    std::printf("cubes %lld x %lld x %lld at %.4f m, built in %.2f s\n", static_cast<long long>(counts[0]),
                static_cast<long long>(counts[1]), static_cast<long long>(counts[2]), c.buckets.box.cube_dim,
                seconds_since(t0));
    return kExitSuccess;
}

int cmd_plan(const Common& o) {
    if (o.scene.empty()) throw SchemaError("scene", "--scene is required");
    std::string text;
    const Scene s = load_scene(o, &text);
    const OutputFormat fmt = parse_format(o.format);
    const auto t0 = Clock::now();
    const Cache cache = open_cache(s, o);
    const double cache_time = seconds_since(t0);
    PlanResult res = plan(s.query, cache, s.planner_options(o.workers));
    res.times.cache = cache_time;
    const RunRecord rec = make_run_record(text, res);
    emit(emit_result(res, rec, fmt, s.geometry), o.out);
    return res.ok() ? kExitSuccess : kExitNoPath;
}

int cmd_gen_scenarios(const Common& o) {
    if (o.out.empty()) throw SchemaError("out", "--out directory is required");
    const Scene base = load_scene(o);
    const Cache cache = open_cache(base, o);
    const auto scenes = gen_random_scenarios(o.n, parse_mode(o.mode), o.seed, cache, base);
    fs::create_directories(o.out);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04zu.json", i);
        write_file(fs::path(o.out) / name, scene_to_json(scenes[i]) + "\n");
    }
    std::printf("wrote %zu scenes to %s\n", scenes.size(), o.out.c_str());
    return kExitSuccess;
}

struct SuiteEntry {
    std::string name;
    std::string text;
    Scene scene;
};

std::vector<SuiteEntry> suite_scenes(const Common& o, const std::string& dir, const Cache* cache,
                                     const Scene& base) {
    std::vector<SuiteEntry> out;
    if (!dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::string text = read_file(f);
            Scene s = parse_scene(text);
            if (o.retries >= 0) s.query.retry_budget = o.retries;
            out.push_back({f.stem().string(), std::move(text), std::move(s)});
        }
        return out;
    }
    const auto scenes = gen_random_scenarios(o.n, parse_mode(o.mode), o.seed, *cache, base);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04zu", i);
        out.push_back({name, scene_to_json(scenes[i]), scenes[i]});
    }
    return out;
}

int cmd_run_suite(const Common& o, const std::string& dir) {
    const Scene base = load_scene(o);
    const OutputFormat fmt = parse_format(o.format);
    const auto t0 = Clock::now();
    const Cache shared = open_cache(base, o);
    const double cache_time = seconds_since(t0);
    const auto entries = suite_scenes(o, dir, &shared, base);

    std::size_t successes = 0;
    double plan_total = 0.0, plan_max = 0.0;
    std::map<std::string, std::size_t> reasons;
    nlohmann::json runs = nlohmann::json::array();
    for (const SuiteEntry& e : entries) {
        // Scenes with their own box need a rebucketed view of the lattice.
        const bool same = e.scene.grid == base.grid && e.scene.geometry == base.geometry &&
                          e.scene.validity == base.validity &&
                          (e.scene.box ? *e.scene.box == shared.buckets.box : e.scene.cube_dim == base.cube_dim);
        const Cache own = same ? Cache{} : prepare_cache(e.scene, o.cache.empty() ? default_cache_path(e.scene)
                                                                                   : fs::path(o.cache));
        const Cache& cache = same ? shared : own;
        const auto p0 = Clock::now();
        const PlanResult res = plan(e.scene.query, cache, e.scene.planner_options(o.workers));
        const double took = seconds_since(p0);
        plan_total += took;
        plan_max = std::max(plan_max, took);
        successes += res.ok();
        if (!res.ok() && !res.attempts.empty()) ++reasons[to_string(res.attempts.back().failure->kind)];
        const RunRecord rec = make_run_record(e.text, res);
        if (!o.out.empty())
            write_file(fs::path(o.out) / (e.name + ".result.json"),
                       emit_result(res, rec, OutputFormat::machine, e.scene.geometry));
        runs.push_back({{"scene", e.name}, {"outcome", rec.outcome}, {"seconds", took}});
    }

    const std::size_t n = entries.size();
    const double rate = n ? static_cast<double>(successes) / static_cast<double>(n) : 0.0;
    const double mean = n ? plan_total / static_cast<double>(n) : 0.0;
    if (fmt == OutputFormat::machine) {
        nlohmann::json j{{"scenes", n},          {"successes", successes}, {"success_rate", rate},
                         {"mean_plan_seconds", mean}, {"max_plan_seconds", plan_max},
                         {"cache_seconds", cache_time}, {"last_reasons", reasons},
                         {"runs", runs}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::printf("scenes        %zu\n", n);
        std::printf("success rate  %.2f%% (%zu)\n", 100.0 * rate, successes);
        std::printf("plan time     mean %.3f s, max %.3f s\n", mean, plan_max);
        std::printf("cache         %.3f s\n", cache_time);
        for (const auto& [k, v] : reasons) std::printf("NoPath %-20s %zu\n", k.c_str(), v);
    }
    return kExitSuccess;
}

int cmd_validate(const Common& o, const std::string& result) {
    if (o.scene.empty() || result.empty())
        throw SchemaError("validate", "--scene and --result are required");
    const Scene s = load_scene(o);
    const auto success = parse_machine_success(read_file(result));
    if (!success) {
        std::printf("record is NoPath, nothing to validate\n");
        return kExitNoPath;
    }
    const Cache cache = open_cache(s, o);
    const ValidationReport rep = validate_path(*success, s.query, cache, s.planner_options(o.workers));
    for (const auto& c : rep.checks)
        std::printf("%-16s %s %s\n", c.name.c_str(), c.passed ? "pass" : "FAIL", c.detail.c_str());
    return rep.all_passed() ? kExitSuccess : kExitInvalid;
}

int cmd_bench(const Common& o) {
    const Scene base = load_scene(o);
    const auto t0 = Clock::now();
    const Cache cache = build_cache(base.grid, base.geometry, base.ellipse, base.cube_dim, base.box, base.validity,
                                    o.workers);
    const double build = seconds_since(t0);
    const auto scenes = gen_random_scenarios(o.n, parse_mode(o.mode), o.seed, cache, base);
    PhaseTimes sum;
    std::size_t successes = 0;
    for (const Scene& s : scenes) {
        const PlanResult r = plan(s.query, cache, s.planner_options(o.workers));
        sum.cube_path += r.times.cube_path;
        sum.layers += r.times.layers;
        sum.relaxation += r.times.relaxation;
        successes += r.ok();
    }
    const double n = std::max<std::size_t>(scenes.size(), 1);
    std::printf("steps %u, cube_dim %.4f, configurations %llu, workers %u\n", base.grid.steps, base.cube_dim,
                static_cast<unsigned long long>(cache.buckets.config_count()), o.workers);
    std::printf("cache build   %.3f s\n", build);
    std::printf("plans         %zu (%zu Success)\n", scenes.size(), successes);
    std::printf("cube path     %.4f s mean\n", sum.cube_path / n);
    std::printf("layers        %.4f s mean\n", sum.layers / n);
    std::printf("relaxation    %.4f s mean\n", sum.relaxation / n);
    return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuum arm path planner"};
    app.require_subcommand(1);
    Common o;
    std::string scene_dir, result;

    const auto add_cache = [&](CLI::App* c) {
        c->add_option("--cache", o.cache, "Cache file (default: carm_cache/steps<N>_<digest>.carm)");
        c->add_option("--steps", o.steps, "Samples per actuator axis");
        c->add_option("--cube-dim", o.cube_dim, "Cube edge length in meters");
        c->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
    };
    const auto add_gen = [&](CLI::App* c) {
        c->add_option("--n", o.n, "Number of scenarios");
        c->add_option("--mode", o.mode, "Obstacles: none or present");
        c->add_option("--seed", o.seed, "Generator seed");
    };

    auto* build = app.add_subcommand("build-cache", "Enumerate configurations and save the cache");
    add_cache(build);
    build->add_option("--scene", o.scene, "Scene whose lattice and geometry to use");

    auto* plan_cmd = app.add_subcommand("plan", "Plan one scene");
    add_cache(plan_cmd);
    plan_cmd->add_option("--scene", o.scene, "Scene file")->required();
    plan_cmd->add_option("--retries", o.retries, "Alternate cube paths to try");
    plan_cmd->add_option("--format", o.format, "table, machine or polyline");
    plan_cmd->add_option("--out", o.out, "Write output here instead of stdout");

    auto* gen = app.add_subcommand("gen-scenarios", "Write random scenes");
    add_cache(gen);
    add_gen(gen);
    gen->add_option("--scene", o.scene, "Base scene");
    gen->add_option("--out", o.out, "Output directory")->required();

    auto* suite = app.add_subcommand("run-suite", "Plan a batch and aggregate rates and times");
    add_cache(suite);
    add_gen(suite);
    suite->add_option("--scene", o.scene, "Base scene for generated scenarios");
    suite->add_option("--scenes", scene_dir, "Directory of scene files instead of generating");
    suite->add_option("--retries", o.retries, "Alternate cube paths to try");
    suite->add_option("--format", o.format, "table or machine");
    suite->add_option("--out", o.out, "Directory for per-scene machine records");

    auto* val = app.add_subcommand("validate", "Re-check a machine result against its scene");
    add_cache(val);
    val->add_option("--scene", o.scene, "Scene file")->required();
    val->add_option("--result", result, "Machine output of plan")->required();

    auto* bench = app.add_subcommand("bench", "Time cache building and random plans");
    add_cache(bench);
    add_gen(bench);
    bench->add_option("--scene", o.scene, "Base scene");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*build) return cmd_build_cache(o);
        if (*plan_cmd) return cmd_plan(o);
        if (*gen) return cmd_gen_scenarios(o);
        if (*suite) return cmd_run_suite(o, scene_dir);
        if (*val) return cmd_validate(o, result);
        if (*bench) return cmd_bench(o);
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
    } catch (const InvariantError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
    } catch (const CacheError& e) {
        std::cerr << "cache error: " << e.what() << "\n";
    } catch (const InvalidStart& e) {
        std::cerr << "invalid start: " << e.what() << "\n";
    } catch (const InvalidQuery& e) {
        std::cerr << "invalid query: " << e.what() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
    }
    return kExitInput;
}
