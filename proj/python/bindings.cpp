#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "meshprof/analysis.hpp"
#include "meshprof/builder.hpp"
#include "meshprof/error.hpp"
#include "meshprof/export.hpp"
#include "meshprof/mesh.hpp"
#include "meshprof/sources.hpp"
#include "meshprof/version.hpp"

namespace py = pybind11;
using namespace meshprof;
using nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

GridPoint point(const IndexVec& index) { return GridPoint{index}; }

std::optional<View> view_of(const std::optional<std::pair<double, double>>& v) {
  if (!v) return std::nullopt;
  return View{v->first, v->second};
}

BuildConfig make_config(const std::vector<double>& threshold, const std::string& policy, std::uint64_t seed,
                        unsigned jobs, std::uint64_t min_samples) {
  BuildConfig c;
  c.threshold = threshold;
  c.policy = parse_policy(policy);
  c.seed = seed;
  c.jobs = jobs;
  c.min_samples = min_samples;
  return c;
}

py::tuple build_result(const BuildResult& r) {
  return py::make_tuple(r.subdivision, to_py(to_json(r.report, true)));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = kVersion;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ProfileError>(m, "ProfileError", PyExc_RuntimeError);

  py::class_<GridDomain>(m, "GridDomain")
      .def(py::init<IndexVec>(), py::arg("extents"))
      .def(py::init<IndexVec, std::vector<double>, std::vector<double>>(), py::arg("extents"), py::arg("origin"),
           py::arg("cell_size"))
      .def_property_readonly("extents", &GridDomain::extents)
      .def_property_readonly("origin", &GridDomain::origin)
      .def_property_readonly("cell_size", &GridDomain::cell_size)
      .def_property_readonly("cell_count", &GridDomain::cell_count)
      .def("world", [](const GridDomain& d, const IndexVec& p) { return d.world(point(p)); })
      .def("__eq__", [](const GridDomain& a, const GridDomain& b) { return a == b; })
      .def("__repr__", [](const GridDomain& d) { return "GridDomain(" + json(d).dump() + ")"; });

  py::class_<Subdivision>(m, "Subdivision")
      .def_static("constant", &Subdivision::constant, py::arg("domain"), py::arg("value"))
      .def_static("load", &load_subdivision, py::arg("path"))
      .def_static("loads", [](const std::string& text) { return subdivision_from_json(json::parse(text)); })
      .def("dumps", [](const Subdivision& s) { return dump(s); })
      .def("save", [](const Subdivision& s, const std::string& path) { save_subdivision(s, path); })
      .def_property_readonly("domain", &Subdivision::domain)
      .def_property_readonly("arity", &Subdivision::arity)
      .def_property_readonly("metadata", [](const Subdivision& s) { return to_py(s.metadata()); })
      .def("evaluate", [](const Subdivision& s, const IndexVec& p) { return s.evaluate(point(p)); }, py::arg("point"))
      .def("leaf_count", &Subdivision::leaf_count)
      .def("depth", &Subdivision::depth)
      .def("min_max", &Subdivision::min_max)
      .def("leaves",
           [](const Subdivision& s) {
             py::list out;
             for (const auto& l : s.leaves())
               out.append(py::make_tuple(l.box.lo, l.box.hi, l.data.value, l.depth));
             return out;
           })
      .def("__eq__", [](const Subdivision& a, const Subdivision& b) { return a == b; });

  m.def(
      "build_fixture",
      [](const std::string& fixture, const IndexVec& extents, const std::vector<double>& threshold,
         const std::string& policy, std::uint64_t seed, unsigned jobs, std::uint64_t min_samples) {
        const ProfileSource src = fixture_source(fixture, extents);
        BuildConfig c = make_config(threshold, policy, seed, jobs, min_samples);
        if (c.threshold.size() == 1) c.threshold.assign(src.profile.arity, c.threshold.front());
        py::gil_scoped_release release;
        return build(src.profile, src.domain, c);
      },
      py::arg("fixture"), py::arg("extents"), py::arg("threshold"), py::arg("policy") = "diameter:0.5",
      py::arg("seed") = 0, py::arg("jobs") = 1, py::arg("min_samples") = 2);

  m.def(
      "build_function",
      [](const std::function<std::vector<double>(const IndexVec&)>& fn, const GridDomain& domain, std::size_t arity,
         const std::vector<double>& threshold, const std::string& policy, std::uint64_t seed,
         std::uint64_t min_samples) {
        ProfileFunction f{arity, [fn](const GridPoint& p) { return fn(p.index); }, true, false};
        return build(f, domain, make_config(threshold, policy, seed, 1, min_samples));
      },
      py::arg("fn"), py::arg("domain"), py::arg("arity"), py::arg("threshold"), py::arg("policy") = "diameter:0.5",
      py::arg("seed") = 0, py::arg("min_samples") = 2);

  py::class_<BuildResult>(m, "BuildResult")
      .def_property_readonly("subdivision", [](const BuildResult& r) { return r.subdivision; })
      .def_property_readonly("report", [](const BuildResult& r) { return to_py(to_json(r.report, true)); })
      .def("__iter__", [](const BuildResult& r) { return py::iter(build_result(r)); })
      .def("__len__", [](const BuildResult&) { return 2; })
      .def("__getitem__", [](const BuildResult& r, py::ssize_t i) -> py::object {
        if (i < 0) i += 2;
        if (i < 0 || i > 1) throw py::index_error();
        return build_result(r)[static_cast<std::size_t>(i)];
      });

  m.def("combine", [](const Subdivision& a, const Subdivision& b, const std::string& op) {
    return combine(a, b, parse_combine_op(op));
  }, py::arg("a"), py::arg("b"), py::arg("op") = "subtract");
  m.def("reduce_max", &reduce_max);
  m.def(
      "weighted_average",
      [](const Subdivision& s, const py::object& dist) {
        return weighted_average(s, dist.is_none() ? Distribution::uniform() : distribution_from_json(from_py(dist)));
      },
      py::arg("sub"), py::arg("distribution") = py::none());
  m.def(
      "cost_estimate",
      [](const std::vector<Subdivision>& counts, const py::object& model, const std::string& combinator) {
        CostModel cm = model.is_none() ? default_render_cost_model() : cost_model_from_json(from_py(model));
        if (combinator == "parallel") cm.combinator = Combinator::Parallel;
        else if (combinator == "sequential") cm.combinator = Combinator::Sequential;
        else if (!combinator.empty()) throw ValidationError("unknown combinator '" + combinator + "'");
        return cost_estimate(counts, cm);
      },
      py::arg("counts"), py::arg("model") = py::none(), py::arg("combinator") = "");
  m.def(
      "select",
      [](const std::vector<Subdivision>& c, const IndexVec& p, const std::optional<std::pair<double, double>>& view) {
        return select(c, point(p), view_of(view));
      },
      py::arg("candidates"), py::arg("point"), py::arg("view") = py::none());
  m.def("selection_map", [](const std::vector<Subdivision>& c) { return selection_map(c); });
  m.def("view_weights", [](double dir, double fov) { return view_weights(View{dir, fov}); }, py::arg("direction"),
        py::arg("fov"));
  m.def(
      "evaluate_view",
      [](const Subdivision& s, const IndexVec& p, double dir, double fov) { return evaluate_view(s, point(p), View{dir, fov}); },
      py::arg("sub"), py::arg("point"), py::arg("direction"), py::arg("fov"));
  m.def(
      "parameter_sweep",
      [](const std::vector<std::pair<double, Subdivision>>& builds, const py::object& dist) {
        const auto r = parameter_sweep(builds, dist.is_none() ? Distribution::uniform() : distribution_from_json(from_py(dist)));
        return py::make_tuple(r.best_parameter, r.table);
      },
      py::arg("builds"), py::arg("distribution") = py::none());
  m.def(
      "parameter_profile",
      [](const Subdivision& s, std::size_t axis) {
        const auto p = parameter_profile(s, axis);
        py::dict out;
        out["input_extents"] = p.input_extents;
        out["best"] = p.best;
        out["best_value"] = p.best_value;
        return out;
      },
      py::arg("sub"), py::arg("parameter_axis"));
  m.def(
      "error_vs_fixture",
      [](const Subdivision& s, const std::string& fixture) {
        const auto src = fixture_source(fixture, s.domain().extents());
        const auto e = error_vs_oracle(s, src.profile);
        py::dict out;
        out["mean_abs_error"] = e.mean_abs_error;
        out["max_abs_error"] = e.max_abs_error;
        out["rms_error"] = e.rms_error;
        out["mean_value"] = e.mean_value;
        out["exact_mean"] = e.exact_mean;
        out["cells"] = e.cells;
        return out;
      },
      py::arg("sub"), py::arg("fixture"));
  m.def(
      "render_slice",
      [](const Subdivision& s, const std::string& slice, const std::string& palette, std::size_t component) {
        const auto img = render_slice(s, Slice::parse(slice), parse_palette(palette), component);
        return py::make_tuple(py::bytes(img.bytes), to_py(img.sidecar));
      },
      py::arg("sub"), py::arg("slice") = "", py::arg("palette") = "gray", py::arg("component") = 0);
  m.def("leaves_csv", &leaves_csv);
}
