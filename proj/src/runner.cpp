#include "copolicy/runner.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <ostream>

#include "copolicy/errors.hpp"
#include "copolicy/parallel.hpp"
#include "copolicy/rng.hpp"
#include "text_util.hpp"

namespace copolicy {

namespace {

constexpr std::size_t kFailureSamples = 5;

struct SimulatedData {
  ExposureMatrix exposures;
  TreatedPanel treated;
  RateEffects truth;
};

SimulatedData simulate(const RunContext& ctx, const PolicyScenario& s, std::uint64_t key, std::size_t rep) {
  const Panel& panel = *ctx.panel;
  Rng rng = make_stream(ctx.master_seed, key, rep);
  const auto treated = assign_treated(panel.n_units(), s.n_treated, rng);
  const YearWindow window{panel.first_year(), panel.last_year()};
  std::vector<EnactmentPair> pairs;
  pairs.reserve(treated.size());
  for (std::size_t j = 0; j < treated.size(); ++j) pairs.push_back(sample_enactments(s.gap, s.ordering, window, rng));

  const auto years = panel.years();
  auto exposures = build_exposures(panel.n_units(), years, treated, pairs, s.phase_in);
  const EffectSpec effects{s.pct1, s.pct2, s.scale_mode};
  auto treated_panel = apply_effects(ctx.panel, ctx.summary, exposures, effects);
  return {std::move(exposures), std::move(treated_panel), true_effect_on_rate(effects, ctx.summary.grand_mean)};
}

ReplicationOutcome fit_one(const SimulatedData& data, const ModelSpec& model) {
  ReplicationOutcome out;
  try {
    const FitResult fit = fit_policy_model(data.treated, data.exposures, model);
    auto record = [](const CoefInference& c, double truth) {
      return ReplicationRecord{c.estimate, c.se, c.ci_low, c.ci_high, c.p_value, truth};
    };
    out.records.push_back(record(fit.alpha1, data.truth.te1));
    if (fit.alpha2) out.records.push_back(record(*fit.alpha2, data.truth.te2));
  } catch (const Error& e) {
    out.records.clear();
    out.failure = e.what();
  }
  return out;
}

std::string scenario_label(const PolicyScenario& s) {
  return "effects=(" + detail::format_double(s.pct1) + "," + detail::format_double(s.pct2) + ") gap=" + s.gap.label +
         " k=" + std::to_string(s.n_treated) + " phase_in=" + std::string(to_string(s.phase_in)) +
         " ordering=" + std::string(to_string(s.ordering)) + " model=" + std::string(to_string(s.model.model_class)) +
         " spec=" + std::string(to_string(s.model.specification));
}

ScenarioResult summarize_scenario(const RunContext& ctx, const PolicyScenario& s, std::uint64_t key,
                                  std::vector<ReplicationOutcome>& outcomes, double seconds) {
  ScenarioResult result;
  result.scenario = s;
  result.master_seed = ctx.master_seed;
  result.stream_key = key;
  result.runtime_seconds = seconds;

  const std::size_t n_policies = s.model.specification == Specification::correct ? 2 : 1;
  std::vector<std::vector<ReplicationRecord>> by_policy(n_policies);
  result.retained.resize(n_policies);
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    auto& o = outcomes[r];
    if (o.failure) {
      ++result.n_failed;
      if (result.failure_samples.size() < kFailureSamples) {
        result.failure_samples.push_back("rep " + std::to_string(r) + ": " + *o.failure);
      }
      continue;
    }
    for (std::size_t p = 0; p < n_policies; ++p) by_policy[p].push_back(o.records[p]);
    if (r < ctx.retain_cap) {
      result.retained_reps.push_back(r);
      for (std::size_t p = 0; p < n_policies; ++p) result.retained[p].push_back(o.records[p]);
    }
  }
  result.fail_rate = outcomes.empty() ? 0.0 : static_cast<double>(result.n_failed) / static_cast<double>(outcomes.size());
  const std::size_t n_ok = outcomes.size() - result.n_failed;
  if (result.fail_rate > ctx.abort_fail_rate || n_ok < 2) {
    std::string msg = "scenario " + scenario_label(s) + ": " + std::to_string(result.n_failed) + " of " +
                      std::to_string(outcomes.size()) + " replications failed";
    if (n_ok < 2) msg += ", too few left to summarize";
    if (!result.failure_samples.empty()) msg += " (first: " + result.failure_samples.front() + ")";
    throw AbortThreshold(msg);
  }

  for (std::size_t p = 0; p < n_policies; ++p) {
    const double truth = by_policy[p].empty() ? 0.0 : by_policy[p].front().truth;
    PolicyMetrics pm;
    pm.policy = p == 0 ? "primary" : "secondary";
    pm.summary = summarize(by_policy[p], truth == 0.0, ctx.summary.outcome_sd, s.model.alpha);
    result.policies.push_back(std::move(pm));
  }
  return result;
}

}  // namespace

std::uint64_t data_key(const PolicyScenario& s) {
  detail::Fnv1a h;
  h.update("pct1=" + detail::format_double(s.pct1));
  h.update(";pct2=" + detail::format_double(s.pct2));
  h.update(";gap=" + detail::format_double(s.gap.gap_low) + "," + detail::format_double(s.gap.gap_high));
  h.update(";k=" + std::to_string(s.n_treated));
  h.update(";phase_in=" + std::string(to_string(s.phase_in)));
  h.update(";ordering=" + std::string(to_string(s.ordering)));
  h.update(";scale=" + std::string(to_string(s.scale_mode)));
  return h.value();
}

RunContext make_context(std::shared_ptr<const Panel> panel, std::uint64_t master_seed, std::size_t workers) {
  RunContext ctx;
  ctx.summary = panel_summary(*panel);
  ctx.panel = std::move(panel);
  ctx.master_seed = master_seed;
  ctx.workers = workers == 0 ? 1 : workers;
  return ctx;
}

void validate_scenario(const PolicyScenario& s, const Panel& panel) {
  std::vector<FieldIssue> issues;
  auto in_unit = [](double v) { return std::isfinite(v) && v >= -1.0 && v <= 1.0; };
  if (!in_unit(s.pct1) || !in_unit(s.pct2)) issues.push_back({"effects", "effect proportions must lie in [-1, 1]"});
  if (s.n_treated == 0 || s.n_treated > panel.n_units()) {
    issues.push_back({"n_treated", "must be between 1 and the panel's " + std::to_string(panel.n_units()) + " units, got " +
                                       std::to_string(s.n_treated)});
  }
  if (s.n_reps < 1) issues.push_back({"reps", "must be >= 1"});
  if (!(s.model.alpha > 0.0 && s.model.alpha < 1.0)) issues.push_back({"alpha", "must lie in (0, 1)"});
  if (s.scale_mode != ScaleMode::grand_mean) {
    issues.push_back({"scale_mode",
                      "simulations need one true effect per scenario; unit_mean effects depend on the treated set, "
                      "use grand_mean"});
  }
  if (!std::isfinite(s.gap.gap_low) || !std::isfinite(s.gap.gap_high) || s.gap.gap_low < 0.0 ||
      s.gap.gap_high < s.gap.gap_low) {
    issues.push_back({"gaps", "require 0 <= low <= high"});
  } else if (!(panel.last_year() - s.gap.gap_high - 1.0 > panel.first_year() + 2.0)) {
    issues.push_back({"gaps", "panel years " + std::to_string(panel.first_year()) + "-" +
                                  std::to_string(panel.last_year()) + " are too short for gap " + s.gap.label});
  }
  if (s.model.model_class == ModelClass::ar && panel.n_years() < 3) {
    issues.push_back({"model", "the AR model needs at least three years"});
  }
  if (!issues.empty()) throw InvalidConfig(std::move(issues));
}

ReplicationOutcome run_replication(const RunContext& ctx, const PolicyScenario& scenario, std::size_t rep) {
  const auto data = simulate(ctx, scenario, data_key(scenario), rep);
  return fit_one(data, scenario.model);
}

ScenarioResult run_scenario(const RunContext& ctx, const PolicyScenario& scenario) {
  return std::move(run_scenarios(ctx, std::span(&scenario, 1)).front());
}

std::vector<ScenarioResult> run_scenarios(const RunContext& ctx, std::span<const PolicyScenario> scenarios) {
  if (!ctx.panel) throw InvalidConfig("panel", "no panel supplied");
  for (const auto& s : scenarios) validate_scenario(s, *ctx.panel);

  // Group scenarios by data key, keeping first-appearance order.
  std::vector<std::uint64_t> keys;
  std::map<std::uint64_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto key = data_key(scenarios[i]);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) keys.push_back(key);
    it->second.push_back(i);
  }

  std::vector<std::optional<ScenarioResult>> results(scenarios.size());
  for (const auto key : keys) {
    const auto& members = groups[key];
    std::size_t max_reps = 0;
    for (auto i : members) max_reps = std::max(max_reps, scenarios[i].n_reps);

    std::vector<std::vector<ReplicationOutcome>> outcomes(members.size());
    for (std::size_t m = 0; m < members.size(); ++m) outcomes[m].resize(scenarios[members[m]].n_reps);

    const auto start = std::chrono::steady_clock::now();
    const PolicyScenario& data_scenario = scenarios[members.front()];
    parallel_for(max_reps, ctx.workers, [&](std::size_t rep) {
      if (ctx.cancel && ctx.cancel->load()) throw Cancelled("run cancelled");
      const auto data = simulate(ctx, data_scenario, key, rep);
      for (std::size_t m = 0; m < members.size(); ++m) {
        const auto& s = scenarios[members[m]];
        if (rep >= s.n_reps) continue;
        outcomes[m][rep] = fit_one(data, s.model);
        if (ctx.progress) ctx.progress->fetch_add(1);
      }
    });
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / static_cast<double>(members.size());
    for (std::size_t m = 0; m < members.size(); ++m) {
      results[members[m]] = summarize_scenario(ctx, scenarios[members[m]], key, outcomes[m], seconds);
    }
  }

  std::vector<ScenarioResult> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

GridSpec GridSpec::full_design() {
  GridSpec g;
  g.effects = {{0.0, 0.0},     {0.0, -0.15},   {-0.15, 0.0},  {-0.10, -0.10},
               {-0.15, -0.05}, {-0.05, -0.15}, {-0.10, -0.20}, {-0.20, -0.10}};
  g.gaps = {GapCondition::standard(1), GapCondition::standard(2), GapCondition::standard(3), GapCondition::standard(4)};
  g.n_treated = {5, 30};
  g.phase_ins = {PhaseIn::instantaneous, PhaseIn::linear_3yr};
  g.orderings = {Ordering::random, Ordering::primary_first};
  g.models = {ModelClass::ar, ModelClass::did};
  g.specifications = {Specification::correct, Specification::misspecified};
  return g;
}

std::vector<PolicyScenario> expand_grid(const GridSpec& g) {
  if (g.effects.empty() || g.gaps.empty() || g.n_treated.empty() || g.phase_ins.empty() || g.orderings.empty() ||
      g.models.empty() || g.specifications.empty()) {
    throw InvalidConfig("grid", "every factor list must be nonempty");
  }
  std::vector<PolicyScenario> out;
  for (const auto& [e1, e2] : g.effects)
    for (const auto& gap : g.gaps)
      for (const auto k : g.n_treated)
        for (const auto phase : g.phase_ins)
          for (const auto ordering : g.orderings)
            for (const auto model : g.models)
              for (const auto spec : g.specifications) {
                PolicyScenario s;
                s.pct1 = e1;
                s.pct2 = e2;
                s.gap = gap;
                s.n_treated = k;
                s.phase_in = phase;
                s.ordering = ordering;
                s.model.model_class = model;
                s.model.specification = spec;
                s.model.weighting = g.weighting;
                s.model.se_type = g.se_type;
                s.model.alpha = g.alpha;
                s.n_reps = g.n_reps;
                s.scale_mode = g.scale_mode;
                out.push_back(std::move(s));
              }
  return out;
}

std::vector<ScenarioResult> run_grid(const RunContext& ctx, const GridSpec& grid) {
  const auto scenarios = expand_grid(grid);
  return run_scenarios(ctx, scenarios);
}

void write_results_csv(std::span<const ScenarioResult> results, std::ostream& out) {
  using detail::format_double;
  using detail::format_optional;
  out << kResultsHeader << '\n';
  for (std::size_t id = 0; id < results.size(); ++id) {
    const auto& r = results[id];
    const auto& s = r.scenario;
    for (const auto& pm : r.policies) {
      const auto& m = pm.summary;
      out << id << ',' << format_double(s.pct1) << ',' << format_double(s.pct2) << ',' << s.gap.label << ','
          << s.n_treated << ',' << to_string(s.phase_in) << ',' << to_string(s.ordering) << ','
          << to_string(s.model.model_class) << ',' << to_string(s.model.specification) << ',' << pm.policy << ','
          << m.n_reps << ',' << format_double(m.bias) << ',' << format_optional(m.std_bias) << ','
          << format_optional(m.rel_bias_pct) << ',' << format_double(m.var_model) << ','
          << format_double(m.var_empirical) << ',' << format_double(m.rmse) << ',' << format_optional(m.type1_rate)
          << ',' << format_optional(m.typeS_rate) << ',' << format_double(m.coverage) << ','
          << format_double(r.fail_rate) << ',' << r.master_seed << '\n';
    }
  }
}

void write_replications_csv(std::span<const ScenarioResult> results, std::ostream& out) {
  using detail::format_double;
  out << "scenario_id,rep,policy,estimate,se,ci_low,ci_high,p_value,truth\n";
  for (std::size_t id = 0; id < results.size(); ++id) {
    const auto& r = results[id];
    for (std::size_t j = 0; j < r.retained_reps.size(); ++j) {
      for (std::size_t p = 0; p < r.retained.size(); ++p) {
        const auto& rec = r.retained[p][j];
        out << id << ',' << r.retained_reps[j] << ',' << (p == 0 ? "primary" : "secondary") << ','
            << format_double(rec.estimate) << ',' << format_double(rec.se) << ',' << format_double(rec.ci_low) << ','
            << format_double(rec.ci_high) << ',' << format_double(rec.p_value) << ',' << format_double(rec.truth)
            << '\n';
      }
    }
  }
}

}  // namespace copolicy
