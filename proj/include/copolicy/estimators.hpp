#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "copolicy/outcome.hpp"
#include "copolicy/policy.hpp"

namespace copolicy {

enum class ModelClass { ar, did };
enum class Specification { correct, misspecified };
enum class Weighting { population, unweighted };
enum class SeType { cluster_robust, iid };

std::string_view to_string(ModelClass m);
std::string_view to_string(Specification s);
std::string_view to_string(Weighting w);
std::string_view to_string(SeType s);
std::optional<ModelClass> parse_model_class(std::string_view s);
std::optional<Specification> parse_specification(std::string_view s);
std::optional<Weighting> parse_weighting(std::string_view s);
std::optional<SeType> parse_se_type(std::string_view s);

/// Which regression is fit. AR models use change-coded policy terms, DID
/// models use level-coded ones; the misspecified variant drops the
/// co-occurring policy column.
struct ModelSpec {
  ModelClass model_class = ModelClass::ar;
  Specification specification = Specification::correct;
  Weighting weighting = Weighting::population;
  SeType se_type = SeType::cluster_robust;
  double alpha = 0.05;

  bool operator==(const ModelSpec&) const = default;
};

enum class ColumnRole { policy1, policy2, covariate, lag, year_fe, unit_fe, intercept };

struct DesignMatrix {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<ColumnRole> roles;
  Eigen::VectorXd weights;
  /// Cluster index per row, in [0, n_clusters).
  std::vector<int> clusters;
  int n_clusters = 0;
  /// Panel year of each row.
  std::vector<int> row_years;

  std::optional<Eigen::Index> column(ColumnRole role) const;
  std::vector<Eigen::Index> columns(ColumnRole role) const;
};

/// Design for one model.
///
/// AR: rows for years 2..T (the first year has no lag); columns are the
/// change-coded policy term(s), covariate, lagged y*, year dummies without the
/// first sample year, intercept.
/// DID: rows for all years; level-coded policy term(s), covariate, unit dummies
/// without the first unit, year dummies without the first year, intercept.
/// Throws TooFewYears when the panel is too short for the model.
DesignMatrix build_design(const TreatedPanel& panel, const ExposureMatrix& exposures, const ModelSpec& spec);

struct WlsSolution {
  Eigen::VectorXd coef;
  /// (X' W X)^{-1}
  Eigen::MatrixXd bread;
  /// y - X b (unweighted)
  Eigen::VectorXd residuals;
  double rcond = 0.0;
};

/// Reciprocal-condition threshold below which a design is rank deficient.
inline constexpr double kRankTolerance = 1e-10;

/// Weighted least squares through a column-pivoted Householder QR of
/// sqrt(W) X. Throws RankDeficient when |R_kk| / |R_11| < kRankTolerance,
/// and InvalidValue for nonpositive weights.
WlsSolution fit_wls(const DesignMatrix& design);

/// Cluster-robust sandwich covariance
///   G/(G-1) * (N-1)/(N-K) * B (sum_g s_g s_g') B,  s_g = sum_{i in g} w_i e_i x_i.
/// Throws TooFewClusters for fewer than two clusters.
Eigen::MatrixXd cluster_robust_cov(const DesignMatrix& design, const Eigen::VectorXd& residuals,
                                   const Eigen::MatrixXd& bread);

/// Model-based covariance s^2 B with s^2 = sum w e^2 / (N - K).
Eigen::MatrixXd iid_cov(const DesignMatrix& design, const Eigen::VectorXd& residuals, const Eigen::MatrixXd& bread);

struct CoefInference {
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
};

/// Two-sided t inference for one coefficient.
CoefInference t_inference(double estimate, double variance, double df, double alpha);

struct FitResult {
  CoefInference alpha1;
  std::optional<CoefInference> alpha2;
  double beta_hat = 0.0;
  std::optional<double> gamma_hat;
  double intercept = 0.0;
  /// One entry per year in the estimation sample; the reference year is 0.
  Eigen::VectorXd year_effects;
  /// DID only: one entry per unit; the reference unit is 0.
  std::optional<Eigen::VectorXd> unit_effects;
  Eigen::MatrixXd cov;
  Eigen::VectorXd residuals;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  double df = 0.0;
};

/// build_design + fit_wls + covariance + t inference. Cluster-robust fits use
/// df = n_clusters - 1, iid fits df = N - K.
FitResult fit_policy_model(const TreatedPanel& panel, const ExposureMatrix& exposures, const ModelSpec& spec);

}  // namespace copolicy
