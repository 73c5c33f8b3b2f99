#include "copolicy/figures.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "copolicy/errors.hpp"
#include "text_util.hpp"

namespace copolicy {

namespace {

constexpr std::array<const char*, 10> kMetricNames = {"bias",          "std_bias", "rel_bias_pct", "var_model",
                                                      "var_empirical", "rmse",     "type1",        "typeS",
                                                      "coverage",      "fail_rate"};
constexpr std::array<const char*, 5> kFigureIds = {"1", "2", "3", "A1", "A2"};
constexpr std::array<const char*, 6> kFigureMetrics = {"rel_bias_pct", "var_model", "rmse",
                                                       "type1",        "typeS",     "coverage"};

constexpr std::array<std::pair<double, double>, 7> kNonNullEffects = {{{0.0, -0.15},
                                                                       {-0.15, 0.0},
                                                                       {-0.10, -0.10},
                                                                       {-0.15, -0.05},
                                                                       {-0.05, -0.15},
                                                                       {-0.10, -0.20},
                                                                       {-0.20, -0.10}}};

bool same(double a, double b) { return std::abs(a - b) < 1e-9; }

std::string percent(double p) { return detail::format_double(std::round(p * 1000.0) / 10.0) + "%"; }

struct Cell {
  double e1, e2;
  std::string gap;
  std::string ordering;
  std::string model;
  std::string spec;
  std::string facet;
  std::string x;

  bool matches(const ResultRow& r) const {
    return same(r.effect1, e1) && same(r.effect2, e2) && r.gap == gap && r.k == 30 &&
           r.phase_in == "instantaneous" && r.ordering == ordering && r.model == model && r.spec == spec;
  }

  std::string describe() const {
    return "effects=(" + percent(e1) + "," + percent(e2) + ") gap=" + gap + " k=30 phase_in=instantaneous ordering=" +
           ordering + " model=" + model + " spec=" + spec;
  }
};

std::vector<Cell> figure_cells(std::string_view figure) {
  std::vector<Cell> cells;
  auto gap_series = [&](const char* model, const char* spec) {
    for (const char* gap : {"C1", "C2", "C3", "C4"}) cells.push_back({-0.10, -0.10, gap, "random", model, spec, "", gap});
  };
  if (figure == "1") {
    gap_series("AR", "correct");
  } else if (figure == "2") {
    gap_series("AR", "misspecified");
  } else if (figure == "A1") {
    gap_series("DID", "correct");
  } else if (figure == "A2") {
    gap_series("DID", "misspecified");
  } else if (figure == "3") {
    for (const char* ordering : {"random", "primary_first"}) {
      for (const auto& [e1, e2] : kNonNullEffects) {
        cells.push_back({e1, e2, "C1", ordering, "AR", "correct", ordering, percent(e1) + "/" + percent(e2)});
      }
    }
  } else {
    std::string known;
    for (const char* id : kFigureIds) known += known.empty() ? id : std::string(", ") + id;
    throw UnknownFigure("unknown figure '" + std::string(figure) + "', expected one of " + known);
  }
  return cells;
}

}  // namespace

std::optional<double> ResultRow::metric(std::string_view name) const {
  if (name == "bias") return bias;
  if (name == "std_bias") return std_bias;
  if (name == "rel_bias_pct") return rel_bias_pct;
  if (name == "var_model") return var_model;
  if (name == "var_empirical") return var_empirical;
  if (name == "rmse") return rmse;
  if (name == "type1") return type1;
  if (name == "typeS") return typeS;
  if (name == "coverage") return coverage;
  if (name == "fail_rate") return fail_rate;
  throw InvalidValue("unknown metric '" + std::string(name) + "'");
}

std::span<const char* const> metric_names() { return kMetricNames; }
std::span<const char* const> figure_ids() { return kFigureIds; }
std::span<const char* const> figure_metrics() { return kFigureMetrics; }

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line).empty()) throw ParseError("empty results file: missing header");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& name : detail::split_csv_line(kResultsHeader)) {
    if (!col.count(name)) throw ParseError("results file lacks column '" + name + "'");
  }

  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) {
      throw ParseError("results line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(f.size()));
    }
    auto fail = [&](const std::string& name) -> ParseError {
      return ParseError("results line " + std::to_string(line_no) + ": bad value in column '" + name + "'");
    };
    auto num = [&](const char* name) {
      auto v = detail::parse_double(f[col[name]]);
      if (!v) throw fail(name);
      return *v;
    };
    auto opt = [&](const char* name) -> std::optional<double> {
      const auto s = detail::trim(f[col[name]]);
      if (s.empty()) return std::nullopt;
      auto v = detail::parse_double(s);
      if (!v) throw fail(name);
      return v;
    };
    auto uint = [&](const char* name) {
      auto v = detail::parse_int(f[col[name]]);
      if (!v || *v < 0) throw fail(name);
      return static_cast<std::uint64_t>(*v);
    };
    ResultRow r;
    r.scenario_id = uint("scenario_id");
    r.effect1 = num("effect1");
    r.effect2 = num("effect2");
    r.gap = f[col["gap"]];
    r.k = uint("k");
    r.phase_in = f[col["phase_in"]];
    r.ordering = f[col["ordering"]];
    r.model = f[col["model"]];
    r.spec = f[col["spec"]];
    r.policy = f[col["policy"]];
    r.n_reps = uint("n_reps");
    r.bias = num("bias");
    r.std_bias = opt("std_bias");
    r.rel_bias_pct = opt("rel_bias_pct");
    r.var_model = num("var_model");
    r.var_empirical = num("var_empirical");
    r.rmse = num("rmse");
    r.type1 = opt("type1");
    r.typeS = opt("typeS");
    r.coverage = num("coverage");
    r.fail_rate = num("fail_rate");
    // Seeds may exceed the signed range.
    const std::string seed(detail::trim(f[col["master_seed"]]));
    try {
      std::size_t used = 0;
      r.master_seed = std::stoull(seed, &used);
      if (used != seed.size()) throw fail("master_seed");
    } catch (const std::logic_error&) {
      throw fail("master_seed");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> load_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open results file " + path.string());
  return read_results_csv(in);
}

std::vector<ResultRow> result_rows(std::span<const ScenarioResult> results) {
  std::vector<ResultRow> rows;
  for (std::size_t id = 0; id < results.size(); ++id) {
    const auto& res = results[id];
    const auto& s = res.scenario;
    for (const auto& pm : res.policies) {
      const auto& m = pm.summary;
      ResultRow r;
      r.scenario_id = id;
      r.effect1 = s.pct1;
      r.effect2 = s.pct2;
      r.gap = s.gap.label;
      r.k = s.n_treated;
      r.phase_in = to_string(s.phase_in);
      r.ordering = to_string(s.ordering);
      r.model = to_string(s.model.model_class);
      r.spec = to_string(s.model.specification);
      r.policy = pm.policy;
      r.n_reps = m.n_reps;
      r.bias = m.bias;
      r.std_bias = m.std_bias;
      r.rel_bias_pct = m.rel_bias_pct;
      r.var_model = m.var_model;
      r.var_empirical = m.var_empirical;
      r.rmse = m.rmse;
      r.type1 = m.type1_rate;
      r.typeS = m.typeS_rate;
      r.coverage = m.coverage;
      r.fail_rate = res.fail_rate;
      r.master_seed = res.master_seed;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

std::vector<FigurePoint> build_figure(std::span<const ResultRow> rows, std::string_view figure) {
  const auto cells = figure_cells(figure);
  std::vector<std::string> missing;
  std::vector<FigurePoint> points;
  for (const auto& metric : kFigureMetrics) {
    for (const char* policy : {"primary", "secondary"}) {
      for (const auto& cell : cells) {
        const ResultRow* found = nullptr;
        bool any_policy = false;
        for (const auto& r : rows) {
          if (!cell.matches(r)) continue;
          any_policy = true;
          if (r.policy == policy) {
            found = &r;
            break;
          }
        }
        if (!any_policy) {
          if (metric == kFigureMetrics.front() && std::string_view(policy) == "primary") {
            missing.push_back(cell.describe());
          }
          continue;
        }
        // Misspecified models report the primary policy only.
        if (!found) continue;
        points.push_back({std::string(figure), metric, policy, cell.facet, cell.x, found->metric(metric)});
      }
    }
  }
  if (!missing.empty()) throw MissingCells(std::move(missing));
  return points;
}

void write_figure_csv(std::span<const FigurePoint> points, std::ostream& out) {
  out << "figure,metric,policy,facet,x,value\n";
  for (const auto& p : points) {
    out << p.figure << ',' << p.metric << ',' << p.policy << ',' << p.facet << ',' << p.x << ','
        << detail::format_optional(p.value) << '\n';
  }
}

std::vector<std::filesystem::path> write_figure_panels(std::span<const FigurePoint> points,
                                                       const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::map<std::string, std::vector<FigurePoint>> by_panel;
  std::vector<std::string> order;
  for (const auto& p : points) {
    const std::string name = "fig" + p.figure + "_" + p.metric + ".csv";
    if (!by_panel.count(name)) order.push_back(name);
    by_panel[name].push_back(p);
  }
  std::vector<std::filesystem::path> paths;
  for (const auto& name : order) {
    const auto path = out_dir / name;
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_figure_csv(by_panel[name], out);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace copolicy
