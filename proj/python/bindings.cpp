#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "copolicy/config.hpp"
#include "copolicy/errors.hpp"
#include "copolicy/figures.hpp"
#include "copolicy/metrics.hpp"
#include "copolicy/panel.hpp"
#include "copolicy/runner.hpp"
#include "copolicy/service.hpp"

namespace py = pybind11;
using namespace copolicy;

namespace {

py::dict metrics_dict(const MetricSummary& m) {
  py::dict d;
  d["n_reps"] = m.n_reps;
  d["truth"] = m.truth;
  d["bias"] = m.bias;
  d["std_bias"] = m.std_bias;
  d["rel_bias_pct"] = m.rel_bias_pct;
  d["var_model"] = m.var_model;
  d["var_empirical"] = m.var_empirical;
  d["rmse"] = m.rmse;
  d["type1"] = m.type1_rate;
  d["typeS"] = m.typeS_rate;
  d["coverage"] = m.coverage;
  return d;
}

py::dict row_dict(const ResultRow& r) {
  py::dict d;
  d["scenario_id"] = r.scenario_id;
  d["effect1"] = r.effect1;
  d["effect2"] = r.effect2;
  d["gap"] = r.gap;
  d["k"] = r.k;
  d["phase_in"] = r.phase_in;
  d["ordering"] = r.ordering;
  d["model"] = r.model;
  d["spec"] = r.spec;
  d["policy"] = r.policy;
  d["n_reps"] = r.n_reps;
  for (const char* name : metric_names()) d[name] = r.metric(name);
  d["fail_rate"] = r.fail_rate;
  d["master_seed"] = r.master_seed;
  return d;
}

template <class E, class Parse>
E parse_enum(const std::string& s, Parse parse, const char* what) {
  if (auto v = parse(s)) return *v;
  throw py::value_error("unknown " + std::string(what) + " '" + s + "'");
}

// Runs one scenario and returns {"primary": metrics, "secondary": metrics}.
py::dict run_one(double pct1, double pct2, const std::string& gap, std::size_t n_treated, const std::string& phase_in,
                 const std::string& ordering, const std::string& model, const std::string& specification,
                 std::size_t reps, std::uint64_t seed, std::size_t workers) {
  PolicyScenario s;
  s.pct1 = pct1;
  s.pct2 = pct2;
  auto g = GapCondition::from_label(gap);
  if (!g) throw py::value_error("unknown gap condition '" + gap + "'");
  s.gap = *g;
  s.n_treated = n_treated;
  s.phase_in = parse_enum<PhaseIn>(phase_in, parse_phase_in, "phase_in");
  s.ordering = parse_enum<Ordering>(ordering, parse_ordering, "ordering");
  s.model.model_class = parse_enum<ModelClass>(model, parse_model_class, "model");
  s.model.specification = parse_enum<Specification>(specification, parse_specification, "specification");
  s.n_reps = reps;

  ScenarioResult result;
  {
    py::gil_scoped_release release;
    const auto panel = std::make_shared<const Panel>(synth_panel({}));
    auto ctx = make_context(panel, seed, workers);
    ctx.retain_cap = 0;
    result = run_scenario(ctx, s);
  }
  py::dict out;
  for (const auto& p : result.policies) out[py::str(p.policy)] = metrics_dict(p.summary);
  return out;
}

std::vector<ScenarioResult> run_config_text(const std::string& text) {
  py::gil_scoped_release release;
  const auto config = parse_run_config(nlohmann::json::parse(text));
  const auto panel = materialize_panel(config.panel);
  validate_against_panel(config, *panel);
  auto ctx = make_context(panel, config.master_seed, config.workers);
  ctx.retain_cap = 0;
  ctx.abort_fail_rate = config.abort_fail_rate;
  return run_grid(ctx, config.grid);
}

// Runs a config given as JSON text and returns tidy result rows.
py::list run_config_json(const std::string& text) {
  const auto results = run_config_text(text);
  py::list rows;
  for (const auto& r : result_rows(results)) rows.append(row_dict(r));
  return rows;
}

// Same run, rendered as the results CSV the command-line tool writes.
std::string run_config_csv(const std::string& text) {
  const auto results = run_config_text(text);
  std::ostringstream out;
  write_results_csv(results, out);
  return out.str();
}

py::dict synth_columns(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  const Panel p = synth_panel(c);
  py::list unit, year, rate, cov, pop;
  for (const auto& r : p.rows()) {
    unit.append(r.unit_id);
    year.append(r.year);
    rate.append(r.outcome_rate);
    cov.append(r.covariate);
    pop.append(r.population);
  }
  py::dict d;
  d["unit"] = unit;
  d["year"] = year;
  d["outcome_rate"] = rate;
  d["covariate"] = cov;
  d["population"] = pop;
  return d;
}

py::list figure_points(const std::string& results_csv, const std::string& figure) {
  std::istringstream in(results_csv);
  const auto rows = read_results_csv(in);
  py::list out;
  for (const auto& p : build_figure(rows, figure)) {
    py::dict d;
    d["figure"] = p.figure;
    d["metric"] = p.metric;
    d["policy"] = p.policy;
    d["facet"] = p.facet;
    d["x"] = p.x;
    d["value"] = p.value;
    out.append(d);
  }
  return out;
}

std::string classify(double value, const std::string& regime) {
  BiasRegime r;
  if (regime == "null") {
    r = BiasRegime::null;
  } else if (regime == "non_null") {
    r = BiasRegime::non_null;
  } else {
    throw py::value_error("regime must be 'null' or 'non_null'");
  }
  return std::string(to_string(classify_bias(value, r)));
}

}  // namespace

PYBIND11_MODULE(_copolicy, m) {
  m.doc() = "Monte Carlo laboratory for co-occurring policy bias";
  m.attr("__version__") = COPOLICY_VERSION;

  auto error = py::register_exception<Error>(m, "CopolicyError", PyExc_RuntimeError);
  py::register_exception<InvalidConfig>(m, "InvalidConfig", error.ptr());

  m.def("run_scenario", &run_one, py::arg("pct1") = -0.10, py::arg("pct2") = -0.10, py::arg("gap") = "C1",
        py::arg("n_treated") = 30, py::arg("phase_in") = "instantaneous", py::arg("ordering") = "random",
        py::arg("model") = "AR", py::arg("specification") = "correct", py::arg("reps") = 1000,
        py::arg("seed") = 42, py::arg("workers") = 1,
        "Simulate one scenario on the default synthetic panel; returns metrics per reported policy.");
  m.def("run_config_json", &run_config_json, py::arg("config"),
        "Run a configuration document (JSON text) and return tidy result rows.");
  m.def("run_config_csv", &run_config_csv, py::arg("config"), "Run a configuration document and return results CSV text.");
  m.def("synth_panel", &synth_columns, py::arg("seed") = SynthConfig{}.seed,
        "Synthetic null panel as a dict of columns.");
  m.def("figure_points", &figure_points, py::arg("results_csv"), py::arg("figure"),
        "Tidy points of a figure from results CSV text.");
  m.def("classify_bias", &classify, py::arg("value"), py::arg("regime") = "non_null");
  m.def("thresholds_json", [] { return thresholds_json(); });
}
