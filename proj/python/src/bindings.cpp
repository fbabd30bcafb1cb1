#include "dichlab/io.hpp"
#include "dichlab/planted.hpp"
#include "dichlab/robustness.hpp"
#include "dichlab/scenario.hpp"
#include "dichlab/splitting.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace dichlab;

namespace {

// JSON crosses the boundary as text; the Python layer turns it into dicts.
std::string text(const Json& j) { return j.dump(); }
Json parse(const std::string& s) { return Json::parse(s); }

NuSequence nu_or_uniform(const GrowthRate& rate, const std::optional<std::string>& nu) {
  return nu ? nu_from_json(parse(*nu), rate) : make_uniform_nu(rate);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Numerical lab for (mu, nu)-dichotomies";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<AnalysisError> analysis_error(m, "AnalysisError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error((e.path() + ": " + e.what()).c_str());
    } catch (const AnalysisError& e) {
      analysis_error(e.what());
    }
  });

  m.def("library_version", &library_version);
  m.def("config_schema", [] { return text(config_schema()); });
  m.def("report_schema", [] { return text(report_schema()); });
  m.def("validate", [](const std::string& instance, const std::string& schema) {
    return validate(parse(instance), parse(schema));
  });

  py::class_<GrowthRate>(m, "GrowthRate")
      .def_static("from_json", [](const std::string& s) { return rate_from_json(parse(s)); })
      .def("to_json", [](const GrowthRate& r) { return text(rate_to_json(r)); })
      .def("log_mu", &GrowthRate::log_mu)
      .def_property_readonly("window", [](const GrowthRate& r) {
        return std::make_pair(r.window().first, r.window().last);
      });

  py::class_<LinearSystem>(m, "LinearSystem")
      .def_static("from_json", [](const std::string& s) { return system_from_json(parse(s)); })
      .def_static("from_dense", [](const std::string& domain, int first, const std::vector<Matrix>& steps) {
        const Window w{first, first + static_cast<int>(steps.size())};
        return LinearSystem::from_dense(domain_from_string(domain), w, steps);
      })
      .def("to_json", [](const LinearSystem& s) { return text(system_to_json(s)); })
      .def("dense_step", &LinearSystem::dense_step)
      .def_property_readonly("dim", &LinearSystem::dim)
      .def_property_readonly("window", [](const LinearSystem& s) {
        return std::make_pair(s.window().first, s.window().last);
      });

  py::class_<ProjectionFamily>(m, "ProjectionFamily")
      .def(py::init<int, std::vector<Matrix>>(), py::arg("first"), py::arg("projections"))
      .def_static("from_json", [](const std::string& s) { return projections_from_json(parse(s)); })
      .def("to_json", [](const ProjectionFamily& p) { return text(projections_to_json(p)); })
      .def("at", &ProjectionFamily::at)
      .def_property_readonly("stable_rank", &ProjectionFamily::stable_rank);

  py::class_<PlantedModel>(m, "PlantedModel")
      .def_readonly("system", &PlantedModel::system)
      .def_readonly("projections", &PlantedModel::true_projections)
      .def_property_readonly("certificate", [](const PlantedModel& pm) { return text(to_json(pm.true_certificate)); })
      .def("to_json", [](const PlantedModel& pm) { return text(planted_to_json(pm)); });

  m.def("paper_example", &paper_example_model, py::arg("n_max"));
  m.def(
      "planted_model",
      [](const GrowthRate& rate, double lambda_s, double lambda_u, int d_s, int d_u, double cond,
         std::uint64_t seed, const std::optional<std::string>& nu) {
        return make_planted_model(rate, nu_or_uniform(rate, nu), lambda_s, lambda_u, d_s, d_u, cond, seed);
      },
      py::arg("rate"), py::arg("lambda_s"), py::arg("lambda_u"), py::arg("d_s"), py::arg("d_u"),
      py::arg("cond"), py::arg("seed"), py::arg("nu") = std::nullopt);

  m.def(
      "verify_dichotomy",
      [](const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate, double D, double lambda,
         const std::optional<std::string>& nu) {
        return text(to_json(verify_dichotomy(sys, proj, rate, nu_or_uniform(rate, nu), D, lambda)));
      },
      py::arg("system"), py::arg("projections"), py::arg("rate"), py::arg("D"), py::arg("lambda_"),
      py::arg("nu") = std::nullopt);
  m.def(
      "fit_certificate",
      [](const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate,
         const std::optional<std::string>& nu) {
        return text(to_json(fit_certificate(sys, proj, rate, nu_or_uniform(rate, nu))));
      },
      py::arg("system"), py::arg("projections"), py::arg("rate"), py::arg("nu") = std::nullopt);
  m.def(
      "characterize",
      [](const LinearSystem& sys, const GrowthRate& rate, const std::optional<std::string>& nu) {
        return text(to_json(characterize(sys, rate, nu_or_uniform(rate, nu))));
      },
      py::arg("system"), py::arg("rate"), py::arg("nu") = std::nullopt);
  m.def(
      "operator_norm",
      [](const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate, double beta,
         const std::optional<std::string>& nu) {
        return text(to_json(operator_norm_T(sys, proj, rate, nu_or_uniform(rate, nu), beta)));
      },
      py::arg("system"), py::arg("projections"), py::arg("rate"), py::arg("beta"), py::arg("nu") = std::nullopt);
  m.def(
      "smallness_margin",
      [](const LinearSystem& sys, const ProjectionFamily& proj, const GrowthRate& rate, double c, double beta,
         std::uint64_t seed, const std::optional<std::string>& nu) {
        const PerturbationSpec spec = make_perturbation_spec(sys.window(), c, seed, beta, 0.5);
        return text(to_json(smallness_margin(sys, proj, rate, nu_or_uniform(rate, nu), spec)));
      },
      py::arg("system"), py::arg("projections"), py::arg("rate"), py::arg("c"), py::arg("beta") = 0.0,
      py::arg("seed") = 0, py::arg("nu") = std::nullopt);
  m.def("counterexample", [](int n_max) { return counterexample_table(run_counterexample(n_max)).str(); },
        py::arg("n_max"));

  m.def(
      "run_scenario",
      [](const std::string& config, const std::optional<std::string>& scenario,
         const std::optional<std::uint64_t>& seed, int threads, const std::string& base_dir) {
        RunOptions opt;
        opt.scenario = scenario;
        opt.seed = seed;
        opt.threads = threads;
        opt.base_dir = base_dir;
        RunOutput out;
        {
          py::gil_scoped_release release;
          out = run_scenario(parse(config), opt);
        }
        py::dict tables;
        for (const auto& [name, table] : out.tables) tables[py::str(name)] = table.str();
        return py::make_tuple(text(out.report), tables, out.exit_code);
      },
      py::arg("config"), py::arg("scenario") = std::nullopt, py::arg("seed") = std::nullopt,
      py::arg("threads") = 1, py::arg("base_dir") = ".");
}
