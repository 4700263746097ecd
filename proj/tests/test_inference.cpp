#include <doctest.h>

#include <cmath>

#include "recap/inference.hpp"
#include "recap/numerics.hpp"
#include "recap/simulate.hpp"
#include "test_oracles.hpp"
#include "test_util.hpp"

using namespace recap;

namespace {

CaptureDataset medium_dataset(std::uint64_t seed = 2024, int n = 40, int K = 4) {
  return testutil::random_dataset(ModelFamily::Mh, n, K, seed);
}

}  // namespace

TEST_CASE("ratio statistic vanishes at the fitted abundance") {
  const CaptureDataset data = medium_dataset();
  const ModelSpec model = testutil::model_of(ModelFamily::Mh, 1);
  const PenaltyConfig pen = penalty_config(summarize(data));
  EMControl ctrl;
  ctrl.tol = 1e-9;
  const FitResult fit = em_unknown_n(data, model, pen, ctrl);
  REQUIRE(fit.converged);
  CHECK(ratio_statistic(fit.N_hat, fit, data, model, ctrl) <= 1e-6);
}

TEST_CASE("ratio statistic matches the nested grid oracle on a tiny instance") {
  const CaptureDataset data = testutil::make_dataset({{1, 0}, {1, 1}, {0, 1}},
                                                     {{-0.7}, {0.2}, {1.0}});
  const ModelSpec model = testutil::model_of(ModelFamily::Mh, 1);
  const PenaltyConfig pen{chao_lower_bound(3, 2, 1), 0.05};
  EMControl ctrl;
  ctrl.tol = 1e-10;
  const FitResult fit = em_unknown_n(data, model, pen, ctrl);
  const double N_eval = 6.0;
  const double stat = ratio_statistic(N_eval, fit, data, model, ctrl);
  const double oracle_global = testoracle::unknown_n_value(data, model, pen, 60.0);
  const double oracle_fixed = testoracle::fixed_n_value(data, model, N_eval, pen);
  CHECK(std::fabs(stat - 2.0 * (oracle_global - oracle_fixed)) < 2e-3);
}

TEST_CASE("ratio interval endpoints sit on the cutoff") {
  const CaptureDataset data = medium_dataset(555, 35, 3);
  const ModelSpec model = testutil::model_of(ModelFamily::Mh, 1);
  const PenaltyConfig pen = penalty_config(summarize(data));
  const FitResult fit = em_unknown_n(data, model, pen);
  const ConfidenceInterval ci = ratio_ci(fit, data, model, 0.95);
  const double q = chisq_quantile(1, 0.95);
  if (!ci.lower_at_bound)
    CHECK(std::fabs(ratio_statistic(ci.lower, fit, data, model) - q) <= 1e-4);
  if (!ci.upper_censored)
    CHECK(std::fabs(ratio_statistic(ci.upper, fit, data, model) - q) <= 1e-4);
  CHECK(ci.lower >= data.n());
  CHECK(ci.lower <= fit.N_hat);
  CHECK(ci.upper >= fit.N_hat);
}

TEST_CASE("the penalty can only pull the upper limit inward") {
  const CaptureDataset data = medium_dataset(777, 30, 3);
  const ModelSpec model = testutil::model_of(ModelFamily::Mh, 1);
  const PenaltyConfig pen = penalty_config(summarize(data));
  const FitResult pel = em_unknown_n(data, model, pen);
  const FitResult el = em_unknown_n(data, model, PenaltyConfig{pen.chao, 0.0});
  if (std::fabs(pel.N_hat - el.N_hat) < 1e-3) {
    const ConfidenceInterval ci_p = ratio_ci(pel, data, model, 0.95);
    const ConfidenceInterval ci_e = ratio_ci(el, data, model, 0.95);
    CHECK(ci_p.upper <= ci_e.upper + 1e-3);
  }
}

TEST_CASE("wald_interval arithmetic and display rounding") {
  // SE = 18.75 at the 95% level spans 1.959964 standard errors
  const ConfidenceInterval ci = wald_interval(70.0, 18.75 * 18.75, 0.95, 47.0);
  CHECK(ci.lower == doctest::Approx(70.0 - 1.9599639845400545 * 18.75).epsilon(1e-9));
  CHECK(ci.upper == doctest::Approx(70.0 + 1.9599639845400545 * 18.75).epsilon(1e-9));
  CHECK(ci.lower == doctest::Approx(33.2506753).epsilon(1e-6));
  CHECK(ci.upper == doctest::Approx(106.7493247).epsilon(1e-6));
  CHECK(ci.lower_rounded() == 33);
  CHECK(ci.upper_rounded() == 107);
  CHECK(ci.below_n_warning);
  // symmetry about the point estimate
  CHECK(ci.upper - 70.0 == doctest::Approx(70.0 - ci.lower).epsilon(1e-12));
  // ties round outward
  ConfidenceInterval t;
  t.lower = 50.5;
  t.upper = 106.5;
  CHECK(t.lower_rounded() == 50);
  CHECK(t.upper_rounded() == 107);
  // zero variance degenerates to a point
  const ConfidenceInterval z = wald_interval(70.0, 0.0, 0.95, 47.0);
  CHECK(z.lower == 70.0);
  CHECK(z.upper == 70.0);
}

TEST_CASE("cl_variance agrees with a finite-difference delta-method oracle") {
  const CaptureDataset data = testutil::make_dataset(
      {{1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 0, 0}, {0, 0, 1}});
  const ModelSpec model = testutil::model_of(ModelFamily::M0, 0);
  const FitResult fit = em_cl(data, model);
  REQUIRE(fit.converged);
  const double var = cl_variance(fit, data, model);

  // oracle: numeric HT gradient and numeric second derivative of the log CL
  const double b = fit.beta_hat[0];
  const auto ht = [&](double bb) {
    const Eigen::VectorXd lp = log_never_capture_all(Eigen::VectorXd::Constant(1, bb), data, model);
    double s = 0.0;
    for (int i = 0; i < data.n(); ++i) s += 1.0 / -std::expm1(lp[i]);
    return s;
  };
  const auto cl = [&](double bb) {
    return conditional_loglik(Eigen::VectorXd::Constant(1, bb), data, model);
  };
  const double h = 1e-5;
  const double dht = (ht(b + h) - ht(b - h)) / (2.0 * h);
  const double info = -(cl(b + h) - 2.0 * cl(b) + cl(b - h)) / (h * h);
  const Eigen::VectorXd lp = log_never_capture_all(fit.beta_hat, data, model);
  double first = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const double phi = std::exp(lp[i]);
    const double omp = -std::expm1(lp[i]);
    first += phi / (omp * omp);
  }
  const double oracle = first + dht * dht / info;
  CHECK(var == doctest::Approx(oracle).epsilon(0.01));
}

TEST_CASE("se_from_curvature on a synthetic quadratic profile") {
  const auto prof = [](double N) { return -(N - 100.0) * (N - 100.0) / 50.0; };
  CHECK(se_from_curvature(prof, 100.0, 1.0) == doctest::Approx(5.0).epsilon(1e-9));
  // flat profile reports +inf
  CHECK(std::isinf(se_from_curvature([](double) { return 1.0; }, 100.0, 1.0)));
}

TEST_CASE("profile_se roughly agrees with the interval width") {
  ScenarioConfig cfg = make_scenario(Scenario::A, 150.0, 6, 1, 42);
  const CaptureDataset data = generate_population(cfg, 0);
  const ModelSpec model = cfg.model_fit;
  const PenaltyConfig pen = penalty_config(summarize(data));
  const FitResult fit = em_unknown_n(data, model, pen);
  const double se = profile_se(fit, data, model);
  const ConfidenceInterval ci = ratio_ci(fit, data, model, 0.95);
  REQUIRE(!ci.upper_censored);
  const double implied = (ci.upper - ci.lower) / (2.0 * 1.9599639845400545);
  CHECK(std::fabs(se - implied) / implied < 0.15);
}

TEST_CASE("aic bookkeeping") {
  const CaptureDataset data = testutil::random_dataset(ModelFamily::Mh, 25, 3, 9);
  // duplicate dataset with one extra all-zero covariate column
  CaptureDataset padded = data;
  padded.covariates.conservativeResize(data.n(), 2);
  padded.covariates.col(1).setZero();
  padded.covariate_names.push_back("x2");

  const ModelSpec m1 = testutil::model_of(ModelFamily::Mh, 1);
  const ModelSpec m2 = testutil::model_of(ModelFamily::Mh, 2);
  const PenaltyConfig pen = penalty_config(summarize(data));
  const FitResult f1 = em_unknown_n(data, m1, pen);
  const FitResult f2 = em_unknown_n(padded, m2, pen);
  // the zero column cannot change the likelihood, only the parameter count
  CHECK(aic(f2) - aic(f1) == doctest::Approx(2.0).epsilon(1e-6));
  // reproducible from the stored fields
  CHECK(aic(f1) == -2.0 * f1.loglik_el + 2.0 * (static_cast<double>(f1.beta_hat.size()) + 2.0));
}

TEST_CASE("ratio curves: minimum at the estimate and an exact penalty gap") {
  const CaptureDataset data = medium_dataset(888, 30, 3);
  const ModelSpec model = testutil::model_of(ModelFamily::Mh, 1);
  const PenaltyConfig pen = penalty_config(summarize(data));
  EMControl ctrl;
  ctrl.tol = 1e-9;
  const FitResult pel = em_unknown_n(data, model, pen, ctrl);
  const FitResult el = em_unknown_n(data, model, PenaltyConfig{pen.chao, 0.0}, ctrl);

  GridSpec grid;
  grid.from = data.n();
  grid.to = 3.0 * pel.N_hat;
  grid.points = 9;
  const RatioCurve curve_p = ratio_curve(pel, data, model, grid, ctrl);
  const RatioCurve curve_e = ratio_curve(el, data, model, grid, ctrl);

  for (const double v : curve_p.values) CHECK(v >= 0.0);

  GridSpec at_hat{pel.N_hat, pel.N_hat + 1.0, 2};
  const RatioCurve tiny = ratio_curve(pel, data, model, at_hat, ctrl);
  CHECK(tiny.values[0] <= 1e-6);

  // pointwise: R_pel - R_el = const - 2 C f(N) over the shared grid
  double shift = 0.0;
  bool first = true;
  for (size_t i = 0; i < curve_p.grid.size(); ++i) {
    const double gap = curve_p.values[i] - curve_e.values[i] +
                       2.0 * pen.C * penalty(curve_p.grid[i], pen.chao);
    if (first) {
      shift = gap;
      first = false;
    } else {
      CHECK(gap == doctest::Approx(shift).epsilon(1e-6));
    }
  }
}
