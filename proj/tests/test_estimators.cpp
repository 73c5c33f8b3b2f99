#include <doctest.h>

#include <cmath>
#include <random>

#include "copolicy/errors.hpp"
#include "copolicy/estimators.hpp"
#include "copolicy/rng.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace copolicy;
using namespace testing::oracle;

namespace {

std::vector<int> panel_years(const Panel& p) { return p.years(); }

// Exposures for k treated units with enactments drawn from a gap condition.
ExposureMatrix draw_exposures(const Panel& p, std::size_t k, const GapCondition& gap, PhaseIn phase, Rng& rng) {
  const auto treated = assign_treated(p.n_units(), k, rng);
  std::vector<EnactmentPair> pairs;
  for (std::size_t j = 0; j < treated.size(); ++j) {
    pairs.push_back(sample_enactments(gap, Ordering::random, {p.first_year(), p.last_year()}, rng));
  }
  return build_exposures(p.n_units(), panel_years(p), treated, pairs, phase);
}

// y*_it built to satisfy the AR equation exactly.
TreatedPanel noiseless_ar(std::shared_ptr<const Panel> p, const ExposureMatrix& e, double a1, double a2, double beta,
                          double gamma) {
  TreatedPanel tp{p, std::vector<double>(p->size()), std::vector<RateEffects>(p->n_units())};
  for (std::size_t i = 0; i < p->n_units(); ++i) {
    tp.y_star[i * p->n_years()] = p->outcome(i, 0);
    for (std::size_t t = 1; t < p->n_years(); ++t) {
      const double sigma = 0.3 * std::sin(double(t)) + 0.05 * double(t);
      tp.y_star[i * p->n_years() + t] = a1 * e.da1(i, t) + a2 * e.da2(i, t) + beta * p->at(i, t).covariate +
                                        gamma * tp.y_star[i * p->n_years() + t - 1] + sigma + 1.5;
    }
  }
  return tp;
}

TreatedPanel untreated(std::shared_ptr<const Panel> p) {
  TreatedPanel tp{p, {}, std::vector<RateEffects>(p->n_units())};
  for (const auto& r : p->rows()) tp.y_star.push_back(r.outcome_rate);
  return tp;
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("WLS coefficients and cluster covariance match brute-force oracles") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> rows(30, 200), cols(2, 10), groups(3, 25);
    for (int rep = 0; rep < 100; ++rep) {
      const auto k = static_cast<std::size_t>(cols(rng));
      const auto d = random_design(rng, static_cast<std::size_t>(rows(rng)), k, groups(rng));
      const auto sol = fit_wls(d);
      const auto oracle = brute_force(d);
      for (std::size_t j = 0; j < k; ++j) {
        const double scale = std::max(1.0, (double)std::fabs(oracle.coef[j]));
        REQUIRE(std::abs(sol.coef(j) - (double)oracle.coef[j]) / scale < 1e-8);
      }
      CHECK(max_rel(sol.bread, oracle.bread) < 1e-8);
      const auto cov = cluster_robust_cov(d, sol.residuals, sol.bread);
      CHECK(max_rel(cov, oracle.cluster_cov) < 1e-8);
    }
  }

  TEST_CASE("exact linear data gives zero residuals") {
    DesignMatrix d;
    const int n = 20;
    d.x = Eigen::MatrixXd(n, 2);
    d.y = Eigen::VectorXd(n);
    d.weights = Eigen::VectorXd::Ones(n);
    for (int i = 0; i < n; ++i) {
      d.x(i, 0) = 1.0;
      d.x(i, 1) = i * 0.5;
      d.y(i) = 3.0 - 2.0 * d.x(i, 1);
      d.clusters.push_back(i % 4);
    }
    d.n_clusters = 4;
    const auto sol = fit_wls(d);
    CHECK(sol.coef(0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(sol.coef(1) == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(sol.residuals.cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("duplicated column is rank deficient") {
    std::mt19937_64 rng(5);
    auto d = random_design(rng, 50, 4, 5);
    d.x.col(3) = d.x.col(2);
    CHECK_THROWS_AS(fit_wls(d), RankDeficient);
  }

  TEST_CASE("nonpositive weights are rejected") {
    std::mt19937_64 rng(6);
    auto d = random_design(rng, 50, 3, 5);
    d.weights(7) = 0.0;
    CHECK_THROWS_AS(fit_wls(d), InvalidValue);
  }

  TEST_CASE("one observation per cluster reduces to HC1") {
    std::mt19937_64 rng(7);
    auto d = random_design(rng, 60, 4, 60);
    d.weights.setOnes();
    const auto sol = fit_wls(d);
    const auto cov = cluster_robust_cov(d, sol.residuals, sol.bread);
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(4, 4);
    for (Eigen::Index i = 0; i < 60; ++i) {
      meat += sol.residuals(i) * sol.residuals(i) * d.x.row(i).transpose() * d.x.row(i);
    }
    const Eigen::MatrixXd hc1 = 60.0 / (60.0 - 4.0) * sol.bread * meat * sol.bread;
    CHECK((cov - hc1).cwiseAbs().maxCoeff() < 1e-10 * hc1.cwiseAbs().maxCoeff());
  }

  TEST_CASE("a single cluster is too few") {
    std::mt19937_64 rng(8);
    auto d = random_design(rng, 30, 3, 1);
    const auto sol = fit_wls(d);
    CHECK_THROWS_AS(cluster_robust_cov(d, sol.residuals, sol.bread), TooFewClusters);
  }

  TEST_CASE("iid covariance is s^2 times the bread") {
    std::mt19937_64 rng(9);
    auto d = random_design(rng, 80, 3, 8);
    const auto sol = fit_wls(d);
    double s2 = 0.0;
    for (Eigen::Index i = 0; i < 80; ++i) s2 += d.weights(i) * sol.residuals(i) * sol.residuals(i);
    s2 /= 77.0;
    CHECK((iid_cov(d, sol.residuals, sol.bread) - s2 * sol.bread).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("weight-scale invariance") {
    std::mt19937_64 rng(10);
    auto d = random_design(rng, 120, 5, 12);
    const auto a = fit_wls(d);
    const auto cov_a = cluster_robust_cov(d, a.residuals, a.bread);
    for (double c : {1e-3, 7.0, 1e4}) {
      auto d2 = d;
      d2.weights *= c;
      const auto b = fit_wls(d2);
      const auto cov_b = cluster_robust_cov(d2, b.residuals, b.bread);
      CHECK((a.coef - b.coef).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((cov_a - cov_b).cwiseAbs().maxCoeff() < 1e-10 * cov_a.cwiseAbs().maxCoeff());
    }
  }

  TEST_CASE("t inference") {
    // t_{0.975, 49} = 2.009575237129...
    const double crit = 2.0095752371292;
    const auto c = t_inference(1.0, 0.25, 49.0, 0.05);
    CHECK(c.se == 0.5);
    CHECK(c.ci_low == doctest::Approx(1.0 - crit * 0.5).epsilon(1e-10));
    CHECK(c.ci_high == doctest::Approx(1.0 + crit * 0.5).epsilon(1e-10));
    const auto edge = t_inference(crit, 1.0, 49.0, 0.05);
    CHECK(edge.p_value == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(t_inference(0.0, 1.0, 10.0, 0.05).p_value == doctest::Approx(1.0));
  }

  TEST_CASE("design shapes for the default panel") {
    const auto p = testing::default_panel();
    Rng rng(11);
    const auto e = draw_exposures(*p, 30, GapCondition::standard(1), PhaseIn::instantaneous, rng);
    const auto tp = untreated(p);

    const auto ar = build_design(tp, e, {ModelClass::ar, Specification::correct});
    CHECK(ar.x.rows() == 850);
    CHECK(ar.columns(ColumnRole::policy1).size() + ar.columns(ColumnRole::policy2).size() == 2);
    CHECK(ar.columns(ColumnRole::year_fe).size() == 16);
    CHECK(ar.column(ColumnRole::lag).has_value());
    CHECK(ar.x.cols() == 21);
    CHECK(ar.n_clusters == 50);

    const auto arm = build_design(tp, e, {ModelClass::ar, Specification::misspecified});
    CHECK(arm.columns(ColumnRole::policy1).size() == 1);
    CHECK(arm.columns(ColumnRole::policy2).empty());

    const auto did = build_design(tp, e, {ModelClass::did, Specification::correct});
    CHECK(did.x.rows() == 900);
    CHECK(did.columns(ColumnRole::unit_fe).size() == 49);
    CHECK(did.columns(ColumnRole::year_fe).size() == 17);
    CHECK(did.x.cols() == 70);
    CHECK_FALSE(did.column(ColumnRole::lag).has_value());

    // Population weights by default, ones when unweighted.
    CHECK(did.weights(0) == p->at(0, 0).population);
    const auto unw = build_design(tp, e, {ModelClass::did, Specification::correct, Weighting::unweighted});
    CHECK(unw.weights.isOnes());
  }

  TEST_CASE("AR policy columns are change coded, DID columns level coded") {
    const auto p = testing::default_panel();
    Rng rng(12);
    const auto e = draw_exposures(*p, 30, GapCondition::standard(2), PhaseIn::instantaneous, rng);
    const auto tp = untreated(p);
    const auto ar = build_design(tp, e, {ModelClass::ar, Specification::correct});
    const auto did = build_design(tp, e, {ModelClass::did, Specification::correct});
    const auto c1 = *ar.column(ColumnRole::policy1);
    const auto c2 = *did.column(ColumnRole::policy1);
    const auto lag = *ar.column(ColumnRole::lag);
    for (std::size_t i = 0; i < p->n_units(); ++i) {
      for (std::size_t t = 1; t < p->n_years(); ++t) {
        const auto row = static_cast<Eigen::Index>(i * (p->n_years() - 1) + t - 1);
        REQUIRE(ar.x(row, c1) == e.da1(i, t));
        REQUIRE(ar.x(row, lag) == tp.y(i, t - 1));
        REQUIRE(ar.y(row) == tp.y(i, t));
      }
      for (std::size_t t = 0; t < p->n_years(); ++t) {
        REQUIRE(did.x(static_cast<Eigen::Index>(i * p->n_years() + t), c2) == e.a1(i, t));
      }
    }
  }

  TEST_CASE("noiseless AR panel recovers its coefficients") {
    const auto p = testing::default_panel();
    for (auto phase : {PhaseIn::instantaneous, PhaseIn::linear_3yr}) {
      Rng rng(13);
      const auto e = draw_exposures(*p, 30, GapCondition::standard(2), phase, rng);
      const auto tp = noiseless_ar(p, e, -0.8, -0.5, 0.07, 0.6);
      const auto fit = fit_policy_model(tp, e, {ModelClass::ar, Specification::correct});
      CHECK(std::abs(fit.alpha1.estimate + 0.8) < 1e-8);
      CHECK(std::abs(fit.alpha2->estimate + 0.5) < 1e-8);
      CHECK(std::abs(fit.beta_hat - 0.07) < 1e-8);
      CHECK(std::abs(*fit.gamma_hat - 0.6) < 1e-8);
      CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  TEST_CASE("identical exposures: misspecified AR absorbs both effects") {
    const auto p = testing::default_panel();
    Rng rng(14);
    const auto e = draw_exposures(*p, 30, GapCondition::simultaneous(), PhaseIn::instantaneous, rng);
    const auto tp = noiseless_ar(p, e, -0.8, -0.5, 0.07, 0.6);
    const auto fit = fit_policy_model(tp, e, {ModelClass::ar, Specification::misspecified});
    CHECK(std::abs(fit.alpha1.estimate - (-1.3)) < 1e-8);
    CHECK_FALSE(fit.alpha2.has_value());
    // With both columns the design is singular.
    CHECK_THROWS_AS(fit_policy_model(tp, e, {ModelClass::ar, Specification::correct}), RankDeficient);
  }

  TEST_CASE("equal populations: weighted equals unweighted") {
    auto rows = testing::default_panel()->rows();
    for (auto& r : rows) r.population = 12345.0;
    const auto p = std::make_shared<const Panel>(Panel::from_rows(rows));
    Rng rng(15);
    const auto e = draw_exposures(*p, 30, GapCondition::standard(1), PhaseIn::instantaneous, rng);
    const auto tp = apply_effects(p, e, {-0.1, -0.1});
    for (auto model : {ModelClass::ar, ModelClass::did}) {
      const auto w = fit_policy_model(tp, e, {model, Specification::correct, Weighting::population});
      const auto u = fit_policy_model(tp, e, {model, Specification::correct, Weighting::unweighted});
      CHECK(std::abs(w.alpha1.estimate - u.alpha1.estimate) < 1e-10);
      CHECK(std::abs(w.alpha1.se - u.alpha1.se) < 1e-10);
    }
  }

  TEST_CASE("DID on additive unit + year data recovers zero effects") {
    const auto base = testing::default_panel();
    std::vector<UnitYearRow> rows = base->rows();
    for (auto& r : rows) {
      const double unit = static_cast<double>(r.unit_id[0] - 'A') + 0.1 * static_cast<double>(r.unit_id[1] - 'A');
      r.outcome_rate = 5.0 + unit + 0.3 * (r.year - 1999) + 0.01 * (r.year - 1999) * (r.year - 1999);
    }
    const auto p = std::make_shared<const Panel>(Panel::from_rows(rows));
    Rng rng(16);
    const auto e = draw_exposures(*p, 30, GapCondition::standard(3), PhaseIn::linear_3yr, rng);
    const auto fit = fit_policy_model(untreated(p), e, {ModelClass::did, Specification::correct});
    CHECK(std::abs(fit.alpha1.estimate) < 1e-10);
    CHECK(std::abs(fit.alpha2->estimate) < 1e-10);
    CHECK(std::abs(fit.beta_hat) < 1e-10);
    CHECK(fit.unit_effects.has_value());
    CHECK((*fit.unit_effects)(0) == 0.0);
  }

  TEST_CASE("reference category choice does not move the policy estimates") {
    const auto p = testing::default_panel();
    Rng rng(17);
    const auto e = draw_exposures(*p, 30, GapCondition::standard(1), PhaseIn::instantaneous, rng);
    const auto tp = apply_effects(p, e, {-0.1, -0.2});
    for (auto model : {ModelClass::ar, ModelClass::did}) {
      const auto d = build_design(tp, e, {model, Specification::correct});
      // Rebuild the year dummies with the last sample year as reference.
      const auto years = d.columns(ColumnRole::year_fe);
      std::vector<int> sample_years(d.row_years);
      std::sort(sample_years.begin(), sample_years.end());
      sample_years.erase(std::unique(sample_years.begin(), sample_years.end()), sample_years.end());
      DesignMatrix alt = d;
      for (std::size_t j = 0; j < years.size(); ++j) {
        const int year = sample_years[j];  // all but the last year
        for (Eigen::Index r = 0; r < alt.x.rows(); ++r) alt.x(r, years[j]) = d.row_years[r] == year ? 1.0 : 0.0;
      }
      const auto a = fit_wls(d), b = fit_wls(alt);
      const auto c1 = *d.column(ColumnRole::policy1), c2 = *d.column(ColumnRole::policy2);
      CHECK(std::abs(a.coef(c1) - b.coef(c1)) < 1e-9);
      CHECK(std::abs(a.coef(c2) - b.coef(c2)) < 1e-9);
      const auto va = cluster_robust_cov(d, a.residuals, a.bread);
      const auto vb = cluster_robust_cov(alt, b.residuals, b.bread);
      CHECK(std::abs(va(c1, c1) - vb(c1, c1)) < 1e-9 * va(c1, c1));
    }
  }

  TEST_CASE("fit invariants: se^2 is the covariance diagonal, CI brackets the estimate, cov PSD") {
    const auto p = testing::default_panel();
    Rng rng(18);
    for (auto model : {ModelClass::ar, ModelClass::did}) {
      for (auto se : {SeType::cluster_robust, SeType::iid}) {
        const auto e = draw_exposures(*p, 30, GapCondition::standard(2), PhaseIn::instantaneous, rng);
        const auto tp = apply_effects(p, e, {-0.1, -0.1});
        const auto fit = fit_policy_model(tp, e, {model, Specification::correct, Weighting::population, se});
        CHECK(fit.alpha1.se * fit.alpha1.se == doctest::Approx(fit.cov(0, 0)).epsilon(1e-12));
        CHECK(fit.alpha1.ci_low <= fit.alpha1.estimate);
        CHECK(fit.alpha1.estimate <= fit.alpha1.ci_high);
        CHECK((fit.cov - fit.cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.cov);
        CHECK(eig.eigenvalues().minCoeff() > -1e-12 * eig.eigenvalues().maxCoeff());
        if (se == SeType::cluster_robust) {
          CHECK(fit.df == 49.0);
          CHECK(fit.n_clusters == 50);
        } else {
          CHECK(fit.df == double(fit.n_obs) - double(fit.cov.rows()));
        }
      }
    }
  }

  TEST_CASE("too few years") {
    const auto p = std::make_shared<const Panel>(testing::small_panel(5, 4));
    ExposureMatrix e(5, 4);
    std::vector<UnitYearRow> rows;
    for (const auto& r : p->rows()) {
      if (r.year == p->first_year()) rows.push_back(r);
    }
    const auto one_year = std::make_shared<const Panel>(Panel::from_rows(rows));
    ExposureMatrix e1(5, 1);
    CHECK_THROWS_AS(build_design(untreated(one_year), e1, {ModelClass::ar, Specification::correct}), TooFewYears);
  }

  TEST_CASE("enum strings") {
    CHECK(to_string(ModelClass::ar) == "AR");
    CHECK(parse_model_class("DID") == ModelClass::did);
    CHECK(parse_specification("misspecified") == Specification::misspecified);
    CHECK(parse_weighting("unweighted") == Weighting::unweighted);
    CHECK(parse_se_type("iid") == SeType::iid);
    CHECK_FALSE(parse_model_class("OLS"));
  }
}
