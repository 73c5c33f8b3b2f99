#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "copolicy/estimators.hpp"
#include "copolicy/metrics.hpp"
#include "copolicy/outcome.hpp"
#include "copolicy/panel.hpp"
#include "copolicy/policy.hpp"

namespace copolicy {

/// One cell of the factorial design: how data are generated plus which model
/// is fit to them.
struct PolicyScenario {
  double pct1 = -0.10;
  double pct2 = -0.10;
  GapCondition gap = GapCondition::standard(1);
  std::size_t n_treated = 30;
  PhaseIn phase_in = PhaseIn::instantaneous;
  Ordering ordering = Ordering::random;
  ModelSpec model;
  std::size_t n_reps = 5000;
  ScaleMode scale_mode = ScaleMode::grand_mean;

  bool operator==(const PolicyScenario&) const = default;
};

/// Key of the data-generating part of a scenario (everything except the
/// model and the replication count). Scenarios with equal keys see identical
/// simulated datasets, so estimators are compared on common random numbers.
std::uint64_t data_key(const PolicyScenario& scenario);

/// Shared, read-only inputs of a run.
struct RunContext {
  std::shared_ptr<const Panel> panel;
  PanelSummary summary;
  std::uint64_t master_seed = 42;
  std::size_t workers = 1;
  /// Replication records are kept for replications below this index.
  std::size_t retain_cap = 5000;
  /// Scenarios whose failure fraction exceeds this throw AbortThreshold.
  double abort_fail_rate = 0.05;
  /// Incremented once per finished scenario-replication, if set.
  std::atomic<std::size_t>* progress = nullptr;
  /// When set and true, pending replications are skipped and the run throws
  /// Cancelled.
  const std::atomic<bool>* cancel = nullptr;
};

RunContext make_context(std::shared_ptr<const Panel> panel, std::uint64_t master_seed, std::size_t workers = 1);

/// Checks a scenario against the panel before anything runs; throws
/// InvalidConfig naming the field (n_treated, gap, effects, n_reps, ...).
void validate_scenario(const PolicyScenario& scenario, const Panel& panel);

/// Result of one replication for one model: one record per reported policy
/// (primary first), or a failure message.
struct ReplicationOutcome {
  std::vector<ReplicationRecord> records;
  std::optional<std::string> failure;
};

/// assign_treated -> sample_enactments -> code_exposure -> apply_effects ->
/// fit_policy_model -> records. Estimation failures are reported in the
/// outcome rather than thrown.
ReplicationOutcome run_replication(const RunContext& ctx, const PolicyScenario& scenario, std::size_t rep);

struct PolicyMetrics {
  /// "primary" or "secondary".
  std::string policy;
  MetricSummary summary;
};

struct ScenarioResult {
  PolicyScenario scenario;
  std::uint64_t master_seed = 0;
  std::uint64_t stream_key = 0;
  std::vector<PolicyMetrics> policies;
  std::size_t n_failed = 0;
  double fail_rate = 0.0;
  /// First few failure messages.
  std::vector<std::string> failure_samples;
  /// Per policy, records of the retained replications (index-aligned with
  /// `retained_reps`).
  std::vector<std::vector<ReplicationRecord>> retained;
  std::vector<std::size_t> retained_reps;
  double runtime_seconds = 0.0;
};

ScenarioResult run_scenario(const RunContext& ctx, const PolicyScenario& scenario);

/// Factor lists; run_grid fits every combination.
struct GridSpec {
  std::vector<std::pair<double, double>> effects;
  std::vector<GapCondition> gaps;
  std::vector<std::size_t> n_treated;
  std::vector<PhaseIn> phase_ins;
  std::vector<Ordering> orderings;
  std::vector<ModelClass> models;
  std::vector<Specification> specifications;
  std::size_t n_reps = 5000;
  ScaleMode scale_mode = ScaleMode::grand_mean;
  Weighting weighting = Weighting::population;
  SeType se_type = SeType::cluster_robust;
  double alpha = 0.05;

  /// 8 effect pairs x 4 gaps x {5, 30} x 2 phase-ins x 2 orderings, each fit
  /// by AR/DID x correct/misspecified.
  static GridSpec full_design();

  bool operator==(const GridSpec&) const = default;
};

/// Cartesian product in the order effects, gaps, n_treated, phase_in,
/// ordering, model, specification (last varies fastest).
std::vector<PolicyScenario> expand_grid(const GridSpec& grid);

/// Runs every scenario. Scenarios that share a data key are simulated once
/// per replication and fit by each of their models.
std::vector<ScenarioResult> run_scenarios(const RunContext& ctx, std::span<const PolicyScenario> scenarios);
std::vector<ScenarioResult> run_grid(const RunContext& ctx, const GridSpec& grid);

/// Long-format summary table, one row per scenario and reported policy.
void write_results_csv(std::span<const ScenarioResult> results, std::ostream& out);
/// Retained replication records, one row per scenario, replication and policy.
void write_replications_csv(std::span<const ScenarioResult> results, std::ostream& out);

inline constexpr const char* kResultsHeader =
    "scenario_id,effect1,effect2,gap,k,phase_in,ordering,model,spec,policy,n_reps,bias,std_bias,rel_bias_pct,"
    "var_model,var_empirical,rmse,type1,typeS,coverage,fail_rate,master_seed";

}  // namespace copolicy
