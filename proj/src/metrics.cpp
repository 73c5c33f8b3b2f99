#include "copolicy/metrics.hpp"

#include <cmath>

#include "copolicy/errors.hpp"

namespace copolicy {

MetricSummary summarize(std::span<const ReplicationRecord> records, bool truth_is_null, double sd_scale,
                        double alpha) {
  if (records.size() < 2) throw EmptyInput("at least two replication records are required");
  const double truth = records.front().truth;
  for (const auto& r : records) {
    if (r.truth != truth) throw MixedTruths("replication records carry different true effects");
  }
  if (truth_is_null && !(sd_scale > 0.0)) throw InvalidValue("sd_scale must be positive for null summaries");

  const auto n = records.size();
  const auto nd = static_cast<double>(n);
  // Errors rather than raw estimates, so estimates equal to the truth give
  // exactly zero bias.
  double sum_err = 0.0;
  double sum_se2 = 0.0;
  std::size_t rejected = 0;
  std::size_t wrong_sign = 0;
  std::size_t covered = 0;
  for (const auto& r : records) {
    sum_err += r.estimate - truth;
    sum_se2 += r.se * r.se;
    if (r.p_value < alpha) ++rejected;
    if ((truth < 0.0 && r.ci_low > 0.0) || (truth > 0.0 && r.ci_high < 0.0)) ++wrong_sign;
    if (r.ci_low <= truth && truth <= r.ci_high) ++covered;
  }
  const double bias = sum_err / nd;

  // Squared errors are accumulated around the mean so that
  // rmse^2 = var_empirical (n-1)/n + bias^2 holds to rounding.
  double ss_mean = 0.0;
  for (const auto& r : records) {
    const double d = (r.estimate - truth) - bias;
    ss_mean += d * d;
  }

  MetricSummary s;
  s.n_reps = n;
  s.truth = truth;
  s.bias = bias;
  s.var_model = sum_se2 / nd;
  s.var_empirical = ss_mean / (nd - 1.0);
  s.rmse = std::sqrt(ss_mean / nd + s.bias * s.bias);
  s.coverage = static_cast<double>(covered) / nd;
  if (truth_is_null) {
    s.std_bias = s.bias / sd_scale;
    s.type1_rate = static_cast<double>(rejected) / nd;
  } else {
    s.rel_bias_pct = 100.0 * bias / truth;
    s.typeS_rate = static_cast<double>(wrong_sign) / nd;
  }
  return s;
}

std::string_view to_string(BiasLabel label) {
  switch (label) {
    case BiasLabel::none:
      return "none";
    case BiasLabel::small:
      return "small";
    case BiasLabel::moderate:
      return "moderate";
    case BiasLabel::large:
      return "large";
  }
  return "none";
}

BiasLabel classify_bias(double value, BiasRegime regime) {
  const double v = std::abs(value);
  if (regime == BiasRegime::non_null) {
    if (v >= 20.0) return BiasLabel::large;
    if (v >= 10.0) return BiasLabel::moderate;
    if (v >= 5.0) return BiasLabel::small;
    return BiasLabel::none;
  }
  if (v >= 0.4) return BiasLabel::large;
  if (v >= 0.2) return BiasLabel::moderate;
  if (v > 0.0) return BiasLabel::small;
  return BiasLabel::none;
}

}  // namespace copolicy
