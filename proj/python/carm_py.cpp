#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "carm/errors.hpp"
#include "carm/scene_io.hpp"

namespace py = pybind11;
using namespace carm;

namespace {

ArmJointConfig to_config(const std::array<std::array<double, 2>, kSections>& c) {
    ArmJointConfig out;
    for (int i = 0; i < kSections; ++i) out.sections[i] = {c[i][0], c[i][1]};
    return out;
}

Scene default_scene() {
    Scene s;
    s.query.target = Vec3(0.0, 0.0, 0.45);
    return s;
}

// The cache rebucketed to the scene's box when the two differ.
Cache for_scene(const Scene& s, const Cache& cache) {
    const BoundingBox box = resolve_box(s, cache.buckets.tips);
    if (box == cache.buckets.box) return cache;
    Cache c = cache;
    c.buckets = build_buckets(c.buckets.tips, box);
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Continuum arm kinematics and layered path planning.";

    static py::exception<Error> base_error(m, "CarmError");
    static py::exception<SchemaError> schema_error(m, "SchemaError", base_error.ptr());
    static py::exception<InvariantError> invariant_error(m, "InvariantError", base_error.ptr());
    static py::exception<CacheError> cache_error(m, "CacheError", base_error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const SchemaError& e) {
            py::set_error(schema_error, e.what());
        } catch (const InvariantError& e) {
            py::set_error(invariant_error, e.what());
        } catch (const CacheError& e) {
            py::set_error(cache_error, e.what());
        } catch (const Error& e) {
            py::set_error(base_error, e.what());
        }
    });

    m.def("third_actuator", [](double l1, double l2) { return third_actuator({l1, l2}); }, py::arg("l1"),
          py::arg("l2"));
    m.def(
        "curve_params",
        [](double l1, double l2, double length, double radius) {
            SectionGeometry g;
            g.backbone_length = length;
            g.offset_radius = radius;
            const CurveParams c = curve_params({l1, l2}, g);
            return py::make_tuple(c.theta, c.phi, c.lambda);
        },
        py::arg("l1"), py::arg("l2"), py::arg("length") = 0.15, py::arg("radius") = 0.0125,
        "(theta, phi, lambda); lambda is inf for a straight section.");
    m.def("is_valid_actuation", [](double l1, double l2) { return is_valid_actuation({l1, l2}, EllipseCoefficients{}); },
          py::arg("l1"), py::arg("l2"));
    m.def(
        "tip_position",
        [](const std::array<std::array<double, 2>, kSections>& c) {
            return arm_transform(to_config(c), default_scene().geometry, ArcFraction::tip()).position;
        },
        py::arg("config"), "Tip of the default arm for ((l11, l12), (l21, l22), (l31, l32)).");
    m.def(
        "skeleton_points",
        [](const std::array<std::array<double, 2>, kSections>& c, int samples) {
            return skeleton_points(to_config(c), default_scene().geometry, samples);
        },
        py::arg("config"), py::arg("samples_per_section") = 10);

    py::class_<Cache>(m, "Cache")
        .def_static(
            "build",
            [](std::uint32_t steps, double cube_dim, unsigned workers) {
                const Scene s = default_scene();
                GridSpec grid = s.grid;
                grid.steps = steps;
                py::gil_scoped_release release;
                return build_cache(grid, s.geometry, s.ellipse, cube_dim, std::nullopt, ValidityFilter::ellipse,
                                   workers);
            },
            py::arg("steps") = 13, py::arg("cube_dim") = 0.01, py::arg("workers") = 1)
        .def_static("load", [](const std::string& path) { return load_cache(path); }, py::arg("path"))
        .def("save", [](const Cache& c, const std::string& path) { save_cache(c, path); }, py::arg("path"))
        .def_property_readonly("samples_per_section", [](const Cache& c) { return c.tables[0].size(); })
        .def_property_readonly("config_count", [](const Cache& c) { return c.buckets.config_count(); })
        .def_property_readonly("cube_count", [](const Cache& c) { return c.buckets.cube_count(); })
        .def_property_readonly("cube_dim", [](const Cache& c) { return c.buckets.box.cube_dim; });

    m.def(
        "plan_machine",
        [](const std::string& scene_text, const Cache& cache, unsigned workers) {
            const Scene s = parse_scene(scene_text);
            const Cache c = for_scene(s, cache);
            PlanResult res;
            {
                py::gil_scoped_release release;
                res = plan(s.query, c, s.planner_options(workers));
            }
            return emit_result(res, make_run_record(scene_text, res), OutputFormat::machine, s.geometry);
        },
        py::arg("scene"), py::arg("cache"), py::arg("workers") = 1, "Machine record of one plan, as JSON text.");
    m.def(
        "validate_machine",
        [](const std::string& scene_text, const std::string& machine_text, const Cache& cache) {
            const Scene s = parse_scene(scene_text);
            const auto success = parse_machine_success(machine_text);
            if (!success) throw InvariantError("outcome", "record is a Success");
            const ValidationReport rep = validate_path(*success, s.query, for_scene(s, cache), s.planner_options());
            std::vector<std::tuple<std::string, bool, std::string>> out;
            for (const auto& c : rep.checks) out.emplace_back(c.name, c.passed, c.detail);
            return out;
        },
        py::arg("scene"), py::arg("record"), py::arg("cache"));
    m.def(
        "gen_scenarios",
        [](std::size_t n, const std::string& mode, std::uint64_t seed, const Cache& cache) {
            if (mode != "none" && mode != "present") throw SchemaError("mode", "none or present");
            const auto scenes = gen_random_scenarios(n, mode == "none" ? ObstacleMode::none : ObstacleMode::present,
                                                     seed, cache, default_scene());
            std::vector<std::string> out;
            for (const Scene& s : scenes) out.push_back(scene_to_json(s));
            return out;
        },
        py::arg("n"), py::arg("mode") = "present", py::arg("seed") = 1, py::arg("cache"));
}
