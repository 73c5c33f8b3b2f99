#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

namespace copolicy {

/// One replication's estimate of one policy coefficient.
struct ReplicationRecord {
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  /// Rate-scale true effect.
  double truth = 0.0;

  bool operator==(const ReplicationRecord&) const = default;
};

/// Performance of one estimator for one policy over a scenario's replications.
///
/// `std_bias` and `type1_rate` are only defined when the truth is null;
/// `rel_bias_pct` and `typeS_rate` only when it is not.
struct MetricSummary {
  std::size_t n_reps = 0;
  double truth = 0.0;
  double bias = 0.0;
  std::optional<double> std_bias;
  std::optional<double> rel_bias_pct;
  /// Mean of squared standard errors.
  double var_model = 0.0;
  /// Sample variance (n - 1) of the point estimates.
  double var_empirical = 0.0;
  double rmse = 0.0;
  std::optional<double> type1_rate;
  std::optional<double> typeS_rate;
  double coverage = 0.0;
};

/// Aggregates replication records that share one truth.
///
///   bias         = mean(est) - truth
///   rel_bias_pct = 100 (mean(est) - truth) / truth       (non-null)
///   std_bias     = bias / sd_scale                       (null)
///   rmse         = sqrt(mean((est - truth)^2))
///   type1        = #(p < alpha) / n                      (null)
///   typeS        = #(CI entirely on the opposite side of 0 from truth) / n   (non-null)
///   coverage     = #(ci_low <= truth <= ci_high) / n
///
/// Throws EmptyInput for fewer than two records, MixedTruths when truths
/// differ, InvalidValue when sd_scale <= 0 for a null truth.
MetricSummary summarize(std::span<const ReplicationRecord> records, bool truth_is_null, double sd_scale,
                        double alpha = 0.05);

enum class BiasRegime { null, non_null };
enum class BiasLabel { none, small, moderate, large };

std::string_view to_string(BiasLabel label);

/// Band edges: non-null |rel bias| 5/10/20 percent; null |std bias| 0.2/0.4.
/// A value on an edge belongs to the higher band. In the null regime an
/// exactly zero bias is `none` and anything below 0.2 is `small`.
BiasLabel classify_bias(double value, BiasRegime regime);

}  // namespace copolicy
