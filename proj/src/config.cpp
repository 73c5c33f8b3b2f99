#include "copolicy/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "copolicy/errors.hpp"
#include "text_util.hpp"

namespace copolicy {

using nlohmann::json;

namespace {

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [key, value] : *t) out[std::string(key.str())] = toml_to_json(value);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& value : *a) out.push_back(toml_to_json(value));
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  std::ostringstream where;
  where << node.source().begin;
  throw ParseError("unsupported TOML value (dates and times are not accepted) at " + where.str());
}

// Walks the document, collecting every problem instead of stopping at the first.
class Reader {
 public:
  void issue(std::string field, std::string message) { issues_.push_back({std::move(field), std::move(message)}); }

  // Reports keys of `obj` not listed in `allowed`. Returns false if `obj` is not a table.
  bool table(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
      issue(path, "must be a table");
      return false;
    }
    for (const auto& [key, value] : obj.items()) {
      const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
      if (!known) issue(join(path, key), "unknown key");
    }
    return true;
  }

  std::optional<double> number(const json& v, const std::string& path) {
    if (!v.is_number()) {
      issue(path, "must be a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<std::uint64_t> count(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      if (v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
      issue(path, "must be a nonnegative integer");
      return std::nullopt;
    }
    issue(path, "must be an integer");
    return std::nullopt;
  }

  std::optional<std::string> string(const json& v, const std::string& path) {
    if (!v.is_string()) {
      issue(path, "must be a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  // A factor given as one value or a list of values.
  template <typename T, typename Fn>
  std::optional<std::vector<T>> factor(const json& v, const std::string& path, Fn&& one) {
    std::vector<T> out;
    const auto before = issues_.size();
    if (v.is_array()) {
      if (v.empty()) issue(path, "must not be empty");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (auto x = one(v[i], path)) out.push_back(std::move(*x));
      }
    } else if (auto x = one(v, path)) {
      out.push_back(std::move(*x));
    }
    if (issues_.size() != before) return std::nullopt;
    return out;
  }

  template <typename E, typename Parse>
  auto enum_factor(const json& v, const std::string& path, Parse parse, const char* choices) {
    return factor<E>(v, path, [&](const json& x, const std::string& p) -> std::optional<E> {
      auto s = string(x, p);
      if (!s) return std::nullopt;
      auto parsed = parse(*s);
      if (!parsed) issue(p, "unknown value '" + *s + "', expected one of " + choices);
      return parsed;
    });
  }

  void finish() {
    if (!issues_.empty()) throw InvalidConfig(std::move(issues_));
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  std::vector<FieldIssue> issues_;
};

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base_dir) {
  return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
}

void read_synth(Reader& r, const json& obj, SynthConfig& c) {
  const std::string path = "panel.synth";
  if (!r.table(obj, path,
               {"n_units", "n_years", "first_year", "base_rate", "trend_per_year", "unit_sd", "unit_trend_sd",
                "ar1_coef", "noise_sd", "noise_pop_exponent", "covariate_mean", "covariate_sd",
                "population_log_mean", "population_log_sd", "seed"})) {
    return;
  }
  auto size = [&](const char* key, std::size_t& out) {
    if (obj.contains(key)) {
      if (auto v = r.count(obj[key], path + "." + key)) out = *v;
    }
  };
  auto real = [&](const char* key, double& out) {
    if (obj.contains(key)) {
      if (auto v = r.number(obj[key], path + "." + key)) out = *v;
    }
  };
  size("n_units", c.n_units);
  size("n_years", c.n_years);
  if (obj.contains("first_year")) {
    if (auto v = r.count(obj["first_year"], path + ".first_year")) c.first_year = static_cast<int>(std::min<std::uint64_t>(*v, 1u << 30));
  }
  real("base_rate", c.base_rate);
  real("trend_per_year", c.trend_per_year);
  real("unit_sd", c.unit_sd);
  real("unit_trend_sd", c.unit_trend_sd);
  real("ar1_coef", c.ar1_coef);
  real("noise_sd", c.noise_sd);
  real("noise_pop_exponent", c.noise_pop_exponent);
  real("covariate_mean", c.covariate_mean);
  real("covariate_sd", c.covariate_sd);
  real("population_log_mean", c.population_log_mean);
  real("population_log_sd", c.population_log_sd);
  if (obj.contains("seed")) {
    if (auto v = r.count(obj["seed"], path + ".seed")) c.seed = *v;
  }
  try {
    validate(c);
  } catch (const InvalidConfig& e) {
    for (const auto& issue : e.issues()) r.issue(path + "." + issue.field, issue.message);
  }
}

void read_panel(Reader& r, const json& obj, const std::filesystem::path& base_dir, PanelSource& p) {
  if (!r.table(obj, "panel", {"source", "path", "columns", "synth"})) return;
  if (obj.contains("source")) {
    if (auto s = r.string(obj["source"], "panel.source")) {
      if (*s == "synth") {
        p.kind = PanelSource::Kind::synth;
      } else if (*s == "csv") {
        p.kind = PanelSource::Kind::csv;
      } else {
        r.issue("panel.source", "unknown value '" + *s + "', expected synth or csv");
      }
    }
  } else if (obj.contains("path")) {
    p.kind = PanelSource::Kind::csv;
  }
  if (obj.contains("path")) {
    if (auto s = r.string(obj["path"], "panel.path")) p.csv_path = resolve(*s, base_dir);
  }
  if (p.kind == PanelSource::Kind::csv && p.csv_path.empty()) r.issue("panel.path", "required when source = \"csv\"");
  if (obj.contains("columns")) {
    const auto& cols = obj["columns"];
    if (r.table(cols, "panel.columns", {"unit", "year", "outcome_rate", "covariate", "population"})) {
      auto col = [&](const char* key, std::string& out) {
        if (cols.contains(key)) {
          if (auto s = r.string(cols[key], std::string("panel.columns.") + key)) out = *s;
        }
      };
      col("unit", p.columns.unit);
      col("year", p.columns.year);
      col("outcome_rate", p.columns.outcome_rate);
      col("covariate", p.columns.covariate);
      col("population", p.columns.population);
    }
  }
  if (obj.contains("synth")) read_synth(r, obj["synth"], p.synth);
}

std::optional<std::pair<double, double>> read_effect_pair(Reader& r, const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    r.issue(path, "each effect must be a pair [primary, secondary] of proportions, e.g. [-0.1, -0.1]");
    return std::nullopt;
  }
  return std::pair{v[0].get<double>(), v[1].get<double>()};
}

std::optional<GapCondition> read_gap(Reader& r, const json& v, const std::string& path) {
  if (v.is_string()) {
    auto gap = GapCondition::from_label(v.get<std::string>());
    if (!gap) r.issue(path, "unknown gap condition '" + v.get<std::string>() + "', expected C0-C4 or {low, high}");
    return gap;
  }
  if (v.is_object()) {
    if (!r.table(v, path, {"label", "low", "high"})) return std::nullopt;
    if (!v.contains("low") || !v.contains("high")) {
      r.issue(path, "custom gaps need both low and high");
      return std::nullopt;
    }
    auto low = r.number(v["low"], path + ".low");
    auto high = r.number(v["high"], path + ".high");
    if (!low || !high) return std::nullopt;
    GapCondition gap;
    gap.gap_low = *low;
    gap.gap_high = *high;
    gap.label = detail::format_double(*low) + "-" + detail::format_double(*high);
    if (v.contains("label")) {
      if (auto s = r.string(v["label"], path + ".label")) {
        if (s->empty() || s->find_first_of(",\"\r\n") != std::string::npos) {
          r.issue(path + ".label", "must be nonempty and free of commas, quotes and line breaks");
        }
        gap.label = *s;
      }
    }
    if (!(gap.gap_low >= 0.0 && gap.gap_high >= gap.gap_low)) {
      r.issue(path, "require 0 <= low <= high");
      return std::nullopt;
    }
    return gap;
  }
  r.issue(path, "must be a label such as \"C1\" or a table {low, high}");
  return std::nullopt;
}

void read_grid(Reader& r, const json& obj, GridSpec& g) {
  if (!r.table(obj, "grid",
               {"effects", "gaps", "n_treated", "phase_in", "ordering", "model", "specification"})) {
    return;
  }
  if (obj.contains("effects")) {
    const auto& v = obj["effects"];
    // A bare pair [a, b] is one effect; anything else is a list of pairs.
    const bool single = v.is_array() && v.size() == 2 && v[0].is_number();
    if (single) {
      if (auto e = read_effect_pair(r, v, "grid.effects")) g.effects = {*e};
    } else if (v.is_array() && !v.empty()) {
      std::vector<std::pair<double, double>> effects;
      bool ok = true;
      for (const auto& e : v) {
        auto pair = read_effect_pair(r, e, "grid.effects");
        ok = ok && pair.has_value();
        if (pair) effects.push_back(*pair);
      }
      if (ok) g.effects = std::move(effects);
    } else {
      r.issue("grid.effects", "must be a pair or a nonempty list of pairs");
    }
  }
  if (obj.contains("gaps")) {
    auto gaps = r.factor<GapCondition>(obj["gaps"], "grid.gaps",
                                       [&](const json& v, const std::string& p) { return read_gap(r, v, p); });
    if (gaps) g.gaps = std::move(*gaps);
  }
  if (obj.contains("n_treated")) {
    auto ks = r.factor<std::size_t>(obj["n_treated"], "grid.n_treated",
                                    [&](const json& v, const std::string& p) -> std::optional<std::size_t> {
                                      auto k = r.count(v, p);
                                      if (k && *k == 0) {
                                        r.issue(p, "must be >= 1");
                                        return std::nullopt;
                                      }
                                      return k;
                                    });
    if (ks) g.n_treated = std::move(*ks);
  }
  if (obj.contains("phase_in")) {
    if (auto v = r.enum_factor<PhaseIn>(obj["phase_in"], "grid.phase_in", parse_phase_in,
                                        "instantaneous, linear_3yr")) {
      g.phase_ins = std::move(*v);
    }
  }
  if (obj.contains("ordering")) {
    if (auto v = r.enum_factor<Ordering>(obj["ordering"], "grid.ordering", parse_ordering, "random, primary_first")) {
      g.orderings = std::move(*v);
    }
  }
  if (obj.contains("model")) {
    if (auto v = r.enum_factor<ModelClass>(obj["model"], "grid.model", parse_model_class, "AR, DID")) {
      g.models = std::move(*v);
    }
  }
  if (obj.contains("specification")) {
    if (auto v = r.enum_factor<Specification>(obj["specification"], "grid.specification", parse_specification,
                                              "correct, misspecified")) {
      g.specifications = std::move(*v);
    }
  }
}

void read_run(Reader& r, const json& obj, RunConfig& c) {
  if (!r.table(obj, "run",
               {"reps", "seed", "workers", "scale_mode", "weighting", "se_type", "alpha", "retain_cap",
                "abort_fail_rate"})) {
    return;
  }
  if (obj.contains("reps")) {
    if (auto v = r.count(obj["reps"], "run.reps")) {
      if (*v < 2) r.issue("run.reps", "must be >= 2");
      c.grid.n_reps = *v;
    }
  }
  if (obj.contains("seed")) {
    if (auto v = r.count(obj["seed"], "run.seed")) c.master_seed = *v;
  }
  if (obj.contains("workers")) {
    if (auto v = r.count(obj["workers"], "run.workers")) {
      if (*v < 1) r.issue("run.workers", "must be >= 1");
      c.workers = *v;
    }
  }
  auto single_enum = [&](const char* key, auto parse, auto& out, const char* choices) {
    if (!obj.contains(key)) return;
    const std::string path = std::string("run.") + key;
    if (auto s = r.string(obj[key], path)) {
      if (auto v = parse(*s)) {
        out = *v;
      } else {
        r.issue(path, "unknown value '" + *s + "', expected one of " + choices);
      }
    }
  };
  single_enum("scale_mode", parse_scale_mode, c.grid.scale_mode, "grand_mean, unit_mean");
  single_enum("weighting", parse_weighting, c.grid.weighting, "population, unweighted");
  single_enum("se_type", parse_se_type, c.grid.se_type, "cluster_robust, iid");
  if (obj.contains("alpha")) {
    if (auto v = r.number(obj["alpha"], "run.alpha")) {
      if (!(*v > 0.0 && *v < 1.0)) r.issue("run.alpha", "must lie in (0, 1)");
      c.grid.alpha = *v;
    }
  }
  if (obj.contains("retain_cap")) {
    if (auto v = r.count(obj["retain_cap"], "run.retain_cap")) c.retain_cap = *v;
  }
  if (obj.contains("abort_fail_rate")) {
    if (auto v = r.number(obj["abort_fail_rate"], "run.abort_fail_rate")) {
      if (!(*v >= 0.0 && *v <= 1.0)) r.issue("run.abort_fail_rate", "must lie in [0, 1]");
      c.abort_fail_rate = *v;
    }
  }
}

void read_output(Reader& r, const json& obj, OutputPaths& o) {
  if (!r.table(obj, "output", {"results", "replications", "manifest"})) return;
  if (obj.contains("results")) {
    if (auto s = r.string(obj["results"], "output.results")) o.results = *s;
  }
  if (obj.contains("replications")) {
    if (auto s = r.string(obj["replications"], "output.replications")) o.replications = *s;
  }
  if (obj.contains("manifest")) {
    if (auto s = r.string(obj["manifest"], "output.manifest")) o.manifest = *s;
  }
}

// Field names reported by validate_scenario, mapped to config paths.
std::string config_field(const std::string& field) {
  if (field == "reps" || field == "alpha" || field == "scale_mode") return "run." + field;
  return "grid." + field;
}

}  // namespace

json parse_toml_document(std::string_view text, std::string_view source_name) {
  try {
    return toml_to_json(toml::parse(text, source_name));
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source_name << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
        << e.description();
    throw ParseError(msg.str());
  }
}

json load_config_document(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (path.extension() == ".toml") return parse_toml_document(text, path.string());
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
  Reader r;
  RunConfig c;
  if (r.table(doc, "", {"panel", "grid", "run", "output"})) {
    if (doc.contains("panel")) read_panel(r, doc["panel"], base_dir, c.panel);
    if (doc.contains("grid")) read_grid(r, doc["grid"], c.grid);
    if (doc.contains("run")) read_run(r, doc["run"], c);
    if (doc.contains("output")) read_output(r, doc["output"], c.output);
  }
  r.finish();
  return c;
}

json to_json(const RunConfig& c) {
  json panel;
  if (c.panel.kind == PanelSource::Kind::csv) {
    panel["source"] = "csv";
    panel["path"] = c.panel.csv_path.generic_string();
    panel["columns"] = {{"unit", c.panel.columns.unit},
                        {"year", c.panel.columns.year},
                        {"outcome_rate", c.panel.columns.outcome_rate},
                        {"covariate", c.panel.columns.covariate},
                        {"population", c.panel.columns.population}};
  } else {
    const auto& s = c.panel.synth;
    panel["source"] = "synth";
    panel["synth"] = {{"n_units", s.n_units},
                      {"n_years", s.n_years},
                      {"first_year", s.first_year},
                      {"base_rate", s.base_rate},
                      {"trend_per_year", s.trend_per_year},
                      {"unit_sd", s.unit_sd},
                      {"unit_trend_sd", s.unit_trend_sd},
                      {"ar1_coef", s.ar1_coef},
                      {"noise_sd", s.noise_sd},
                      {"noise_pop_exponent", s.noise_pop_exponent},
                      {"covariate_mean", s.covariate_mean},
                      {"covariate_sd", s.covariate_sd},
                      {"population_log_mean", s.population_log_mean},
                      {"population_log_sd", s.population_log_sd},
                      {"seed", s.seed}};
  }

  const auto& g = c.grid;
  json grid;
  grid["effects"] = json::array();
  for (const auto& [a, b] : g.effects) grid["effects"].push_back({a, b});
  grid["gaps"] = json::array();
  for (const auto& gap : g.gaps) {
    grid["gaps"].push_back({{"label", gap.label}, {"low", gap.gap_low}, {"high", gap.gap_high}});
  }
  grid["n_treated"] = g.n_treated;
  auto names = [](const auto& values) {
    json out = json::array();
    for (const auto& v : values) out.push_back(std::string(to_string(v)));
    return out;
  };
  grid["phase_in"] = names(g.phase_ins);
  grid["ordering"] = names(g.orderings);
  grid["model"] = names(g.models);
  grid["specification"] = names(g.specifications);

  json run = {{"reps", g.n_reps},
              {"seed", c.master_seed},
              {"workers", c.workers},
              {"scale_mode", std::string(to_string(g.scale_mode))},
              {"weighting", std::string(to_string(g.weighting))},
              {"se_type", std::string(to_string(g.se_type))},
              {"alpha", g.alpha},
              {"retain_cap", c.retain_cap},
              {"abort_fail_rate", c.abort_fail_rate}};

  json output = {{"results", c.output.results.generic_string()}};
  if (c.output.replications) output["replications"] = c.output.replications->generic_string();
  if (c.output.manifest) output["manifest"] = c.output.manifest->generic_string();

  return {{"panel", panel}, {"grid", grid}, {"run", run}, {"output", output}};
}

std::shared_ptr<const Panel> materialize_panel(const PanelSource& source) {
  if (source.kind == PanelSource::Kind::csv) return std::make_shared<const Panel>(load_panel(source.csv_path, source.columns));
  return std::make_shared<const Panel>(synth_panel(source.synth));
}

void validate_against_panel(const RunConfig& config, const Panel& panel) {
  std::vector<FieldIssue> issues;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& s : expand_grid(config.grid)) {
    try {
      validate_scenario(s, panel);
    } catch (const InvalidConfig& e) {
      for (const auto& issue : e.issues()) {
        auto field = config_field(issue.field);
        if (seen.emplace(field, issue.message).second) issues.push_back({std::move(field), issue.message});
      }
    }
  }
  if (!issues.empty()) throw InvalidConfig(std::move(issues));
}

json make_manifest(const RunConfig& config, const Panel& panel, std::size_t n_scenarios) {
  const auto summary = panel_summary(panel);
  return {{"artifact", "copolicy"},
          {"version", COPOLICY_VERSION},
          {"config", to_json(config)},
          {"master_seed", config.master_seed},
          {"n_scenarios", n_scenarios},
          {"panel",
           {{"digest", detail::hex64(panel.digest())},
            {"n_units", panel.n_units()},
            {"n_years", panel.n_years()},
            {"first_year", panel.first_year()},
            {"last_year", panel.last_year()},
            {"grand_mean", summary.grand_mean},
            {"outcome_sd", summary.outcome_sd}}},
          {"std_bias_scale", "sample SD of the null panel outcome over all unit-years"},
          {"effect_scale", std::string(to_string(config.grid.scale_mode))},
          {"results_columns", kResultsHeader}};
}

std::size_t default_workers() {
  if (const char* env = std::getenv("COPOLICY_WORKERS")) {
    if (auto v = detail::parse_int(env); v && *v >= 1) return static_cast<std::size_t>(*v);
  }
  return 1;
}

}  // namespace copolicy
