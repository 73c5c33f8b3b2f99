#include "copolicy/estimators.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>

#include "copolicy/errors.hpp"

namespace copolicy {

std::string_view to_string(ModelClass m) { return m == ModelClass::ar ? "AR" : "DID"; }
std::string_view to_string(Specification s) { return s == Specification::correct ? "correct" : "misspecified"; }
std::string_view to_string(Weighting w) { return w == Weighting::population ? "population" : "unweighted"; }
std::string_view to_string(SeType s) { return s == SeType::cluster_robust ? "cluster_robust" : "iid"; }

std::optional<ModelClass> parse_model_class(std::string_view s) {
  if (s == "AR" || s == "ar") return ModelClass::ar;
  if (s == "DID" || s == "did") return ModelClass::did;
  return std::nullopt;
}

std::optional<Specification> parse_specification(std::string_view s) {
  if (s == "correct") return Specification::correct;
  if (s == "misspecified") return Specification::misspecified;
  return std::nullopt;
}

std::optional<Weighting> parse_weighting(std::string_view s) {
  if (s == "population") return Weighting::population;
  if (s == "unweighted") return Weighting::unweighted;
  return std::nullopt;
}

std::optional<SeType> parse_se_type(std::string_view s) {
  if (s == "cluster_robust") return SeType::cluster_robust;
  if (s == "iid") return SeType::iid;
  return std::nullopt;
}

std::optional<Eigen::Index> DesignMatrix::column(ColumnRole role) const {
  for (std::size_t j = 0; j < roles.size(); ++j) {
    if (roles[j] == role) return static_cast<Eigen::Index>(j);
  }
  return std::nullopt;
}

std::vector<Eigen::Index> DesignMatrix::columns(ColumnRole role) const {
  std::vector<Eigen::Index> out;
  for (std::size_t j = 0; j < roles.size(); ++j) {
    if (roles[j] == role) out.push_back(static_cast<Eigen::Index>(j));
  }
  return out;
}

DesignMatrix build_design(const TreatedPanel& treated, const ExposureMatrix& exposures, const ModelSpec& spec) {
  if (!treated.panel) throw MissingExposure("treated panel has no base panel");
  const Panel& panel = *treated.panel;
  const std::size_t n_units = panel.n_units();
  const std::size_t n_years = panel.n_years();
  if (exposures.n_units() != n_units || exposures.n_years() != n_years) {
    throw MissingExposure("exposure matrix does not match the panel");
  }
  if (n_years < 2) throw TooFewYears("at least two years are required");

  const bool ar = spec.model_class == ModelClass::ar;
  const bool both = spec.specification == Specification::correct;
  const std::size_t first_t = ar ? 1 : 0;
  const std::size_t sample_years = n_years - first_t;

  DesignMatrix d;
  d.roles.push_back(ColumnRole::policy1);
  if (both) d.roles.push_back(ColumnRole::policy2);
  d.roles.push_back(ColumnRole::covariate);
  if (ar) d.roles.push_back(ColumnRole::lag);
  const std::size_t unit_fe_start = d.roles.size();
  if (!ar) d.roles.insert(d.roles.end(), n_units - 1, ColumnRole::unit_fe);
  const std::size_t year_fe_start = d.roles.size();
  d.roles.insert(d.roles.end(), sample_years - 1, ColumnRole::year_fe);
  d.roles.push_back(ColumnRole::intercept);

  const auto n_rows = static_cast<Eigen::Index>(n_units * sample_years);
  const auto n_cols = static_cast<Eigen::Index>(d.roles.size());
  d.y.resize(n_rows);
  d.x = Eigen::MatrixXd::Zero(n_rows, n_cols);
  d.weights.resize(n_rows);
  d.clusters.resize(static_cast<std::size_t>(n_rows));
  d.row_years.resize(static_cast<std::size_t>(n_rows));
  d.n_clusters = static_cast<int>(n_units);

  Eigen::Index r = 0;
  for (std::size_t i = 0; i < n_units; ++i) {
    for (std::size_t t = first_t; t < n_years; ++t, ++r) {
      const auto& row = panel.at(i, t);
      d.y(r) = treated.y(i, t);
      Eigen::Index c = 0;
      d.x(r, c++) = ar ? exposures.da1(i, t) : exposures.a1(i, t);
      if (both) d.x(r, c++) = ar ? exposures.da2(i, t) : exposures.a2(i, t);
      d.x(r, c++) = row.covariate;
      if (ar) d.x(r, c++) = treated.y(i, t - 1);
      if (!ar && i > 0) d.x(r, static_cast<Eigen::Index>(unit_fe_start + i - 1)) = 1.0;
      if (t > first_t) d.x(r, static_cast<Eigen::Index>(year_fe_start + t - first_t - 1)) = 1.0;
      d.x(r, n_cols - 1) = 1.0;
      d.weights(r) = spec.weighting == Weighting::population ? row.population : 1.0;
      d.clusters[static_cast<std::size_t>(r)] = static_cast<int>(i);
      d.row_years[static_cast<std::size_t>(r)] = row.year;
    }
  }
  return d;
}

WlsSolution fit_wls(const DesignMatrix& design) {
  const Eigen::Index n = design.x.rows();
  const Eigen::Index k = design.x.cols();
  if (design.y.size() != n || design.weights.size() != n) throw InvalidValue("design dimensions disagree");
  if (k == 0 || n < k) throw RankDeficient("fewer observations than coefficients");
  if ((design.weights.array() <= 0.0).any() || !design.weights.allFinite()) {
    throw InvalidValue("weights must be positive and finite");
  }

  const Eigen::VectorXd sqrt_w = design.weights.cwiseSqrt();
  const Eigen::MatrixXd xw = sqrt_w.asDiagonal() * design.x;
  const Eigen::VectorXd yw = sqrt_w.cwiseProduct(design.y);

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const double r_max = std::abs(r(0, 0));
  const double r_min = std::abs(r(k - 1, k - 1));
  const double rcond = r_max > 0.0 ? r_min / r_max : 0.0;
  if (!(rcond >= kRankTolerance)) {
    throw RankDeficient("design is rank deficient (reciprocal condition " + std::to_string(rcond) + ")");
  }

  WlsSolution sol;
  sol.rcond = rcond;
  sol.coef = qr.solve(yw);
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  sol.bread = perm * inner * perm.transpose();
  sol.residuals = design.y - design.x * sol.coef;
  return sol;
}

Eigen::MatrixXd cluster_robust_cov(const DesignMatrix& design, const Eigen::VectorXd& residuals,
                                   const Eigen::MatrixXd& bread) {
  const int g = design.n_clusters;
  if (g < 2) throw TooFewClusters("cluster-robust covariance needs at least two clusters");
  const Eigen::Index n = design.x.rows();
  const Eigen::Index k = design.x.cols();

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(g, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    scores.row(design.clusters[static_cast<std::size_t>(i)]) += (design.weights(i) * residuals(i)) * design.x.row(i);
  }
  const Eigen::MatrixXd meat = scores.transpose() * scores;
  const double factor = (static_cast<double>(g) / (g - 1)) * (static_cast<double>(n - 1) / static_cast<double>(n - k));
  Eigen::MatrixXd v = factor * (bread * meat * bread);
  return 0.5 * (v + v.transpose());
}

Eigen::MatrixXd iid_cov(const DesignMatrix& design, const Eigen::VectorXd& residuals, const Eigen::MatrixXd& bread) {
  const Eigen::Index n = design.x.rows();
  const Eigen::Index k = design.x.cols();
  if (n <= k) throw RankDeficient("no residual degrees of freedom");
  const double s2 = (design.weights.array() * residuals.array().square()).sum() / static_cast<double>(n - k);
  return s2 * bread;
}

CoefInference t_inference(double estimate, double variance, double df, double alpha) {
  namespace bm = boost::math;
  CoefInference out;
  out.estimate = estimate;
  out.se = std::sqrt(std::max(variance, 0.0));
  const bm::students_t dist(df);
  const double crit = bm::quantile(bm::complement(dist, alpha / 2.0));
  out.ci_low = estimate - crit * out.se;
  out.ci_high = estimate + crit * out.se;
  if (out.se > 0.0) {
    out.p_value = 2.0 * bm::cdf(bm::complement(dist, std::abs(estimate) / out.se));
  } else {
    out.p_value = estimate == 0.0 ? 1.0 : 0.0;
  }
  return out;
}

FitResult fit_policy_model(const TreatedPanel& panel, const ExposureMatrix& exposures, const ModelSpec& spec) {
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) throw InvalidConfig("alpha", "must lie in (0, 1)");
  const DesignMatrix design = build_design(panel, exposures, spec);
  const WlsSolution sol = fit_wls(design);

  FitResult fit;
  fit.n_obs = static_cast<std::size_t>(design.x.rows());
  fit.n_clusters = static_cast<std::size_t>(design.n_clusters);
  if (spec.se_type == SeType::cluster_robust) {
    fit.cov = cluster_robust_cov(design, sol.residuals, sol.bread);
    fit.df = design.n_clusters - 1;
  } else {
    fit.cov = iid_cov(design, sol.residuals, sol.bread);
    fit.df = static_cast<double>(design.x.rows() - design.x.cols());
  }

  const auto p1 = *design.column(ColumnRole::policy1);
  fit.alpha1 = t_inference(sol.coef(p1), fit.cov(p1, p1), fit.df, spec.alpha);
  if (const auto p2 = design.column(ColumnRole::policy2)) {
    fit.alpha2 = t_inference(sol.coef(*p2), fit.cov(*p2, *p2), fit.df, spec.alpha);
  }
  fit.beta_hat = sol.coef(*design.column(ColumnRole::covariate));
  if (const auto lag = design.column(ColumnRole::lag)) fit.gamma_hat = sol.coef(*lag);
  fit.intercept = sol.coef(*design.column(ColumnRole::intercept));

  const auto year_cols = design.columns(ColumnRole::year_fe);
  fit.year_effects = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(year_cols.size() + 1));
  for (std::size_t j = 0; j < year_cols.size(); ++j) {
    fit.year_effects(static_cast<Eigen::Index>(j + 1)) = sol.coef(year_cols[j]);
  }
  const auto unit_cols = design.columns(ColumnRole::unit_fe);
  if (!unit_cols.empty()) {
    Eigen::VectorXd ue = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unit_cols.size() + 1));
    for (std::size_t j = 0; j < unit_cols.size(); ++j) ue(static_cast<Eigen::Index>(j + 1)) = sol.coef(unit_cols[j]);
    fit.unit_effects = std::move(ue);
  }
  fit.residuals = sol.residuals;
  return fit;
}

}  // namespace copolicy
