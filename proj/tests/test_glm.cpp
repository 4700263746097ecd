#include <doctest.h>

#include <cmath>
#include <vector>

#include "recap/glm.hpp"
#include "recap/simulate.hpp"

using namespace recap;

namespace {

Eigen::VectorXd scalar_design(double v) {
  Eigen::VectorXd z(1);
  z << v;
  return z;
}

// Two-stage dense grid search. The weighted Bernoulli log-likelihood is
// concave, so refining around the coarse-grid winner reaches the global
// argmax of the fine grid.
Eigen::Vector2d grid_argmax(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w) {
  Eigen::Vector2d best(0, 0);
  double best_val = -1e300;
  for (double b0 = -5.0; b0 <= 5.0 + 1e-9; b0 += 0.05)
    for (double b1 = -5.0; b1 <= 5.0 + 1e-9; b1 += 0.05) {
      const double v = weighted_logistic_loglik(Z, y, w, Eigen::Vector2d(b0, b1));
      if (v > best_val) {
        best_val = v;
        best = Eigen::Vector2d(b0, b1);
      }
    }
  const Eigen::Vector2d coarse = best;
  for (double b0 = coarse[0] - 0.06; b0 <= coarse[0] + 0.06 + 1e-12; b0 += 0.001)
    for (double b1 = coarse[1] - 0.06; b1 <= coarse[1] + 0.06 + 1e-12; b1 += 0.001) {
      const double v = weighted_logistic_loglik(Z, y, w, Eigen::Vector2d(b0, b1));
      if (v > best_val) {
        best_val = v;
        best = Eigen::Vector2d(b0, b1);
      }
    }
  return best;
}

}  // namespace

TEST_CASE("balanced responses give a zero coefficient") {
  std::vector<WeightedObservation> obs{{1.0, scalar_design(1.0), 1.0},
                                       {0.0, scalar_design(1.0), 1.0}};
  const LogisticFit fit = weighted_logistic_fit(obs, Eigen::VectorXd::Zero(1));
  CHECK(fit.converged);
  CHECK(std::fabs(fit.beta[0]) < 1e-9);
}

TEST_CASE("intercept-only fit recovers the log odds") {
  std::vector<WeightedObservation> obs;
  for (int i = 0; i < 30; ++i) obs.push_back({1.0, scalar_design(1.0), 1.0});
  for (int i = 0; i < 10; ++i) obs.push_back({0.0, scalar_design(1.0), 1.0});
  const LogisticFit fit = weighted_logistic_fit(obs, Eigen::VectorXd::Zero(1));
  CHECK(fit.converged);
  CHECK(fit.beta[0] == doctest::Approx(std::log(3.0)).epsilon(1e-8));
}

TEST_CASE("two-parameter weighted fit matches a dense grid search") {
  Eigen::MatrixXd Z(6, 2);
  Z << 1, -1.0, 1, -0.4, 1, 0.1, 1, 0.8, 1, 1.5, 1, 2.2;
  Eigen::VectorXd y(6), w(6);
  y << 0, 1, 0, 1, 1, 1;
  w << 1.0, 2.0, 0.5, 1.5, 3.0, 0.25;
  const LogisticFit fit = weighted_logistic_fit(Z, y, w, Eigen::VectorXd::Zero(2));
  REQUIRE(fit.converged);
  const Eigen::Vector2d oracle = grid_argmax(Z, y, w);
  CHECK(std::fabs(fit.beta[0] - oracle[0]) < 2e-3);
  CHECK(std::fabs(fit.beta[1] - oracle[1]) < 2e-3);
}

TEST_CASE("zero-weight rows never affect the fit") {
  Eigen::MatrixXd Z(4, 2);
  Z << 1, 0.5, 1, -0.5, 1, 2.0, 1, -3.0;
  Eigen::VectorXd y(4), w(4);
  y << 1, 0, 1, 1;
  w << 1, 1, 0, 0;
  const LogisticFit with_rows = weighted_logistic_fit(Z, y, w, Eigen::VectorXd::Zero(2));
  const LogisticFit without = weighted_logistic_fit(Z.topRows(2), y.head(2),
                                                    w.head(2), Eigen::VectorXd::Zero(2));
  CHECK(with_rows.beta.isApprox(without.beta, 1e-10));
}

TEST_CASE("scaling all weights leaves the argmax unchanged") {
  Eigen::MatrixXd Z(5, 2);
  Z << 1, -2, 1, -1, 1, 0, 1, 1, 1, 2;
  Eigen::VectorXd y(5), w(5);
  y << 0, 0, 1, 1, 1;
  w << 0.5, 1.0, 2.0, 1.0, 0.5;
  const LogisticFit a = weighted_logistic_fit(Z, y, w, Eigen::VectorXd::Zero(2));
  const LogisticFit b = weighted_logistic_fit(Z, y, (37.0 * w).eval(), Eigen::VectorXd::Zero(2));
  CHECK(a.beta.isApprox(b.beta, 1e-7));
}

TEST_CASE("the fit never decreases the objective from its start") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd Z(12, 2);
    Eigen::VectorXd y(12), w(12);
    for (int i = 0; i < 12; ++i) {
      Z(i, 0) = 1.0;
      Z(i, 1) = rng.normal();
      y[i] = rng.bernoulli(0.5);
      w[i] = 0.25 + 2.0 * rng.uniform();
    }
    Eigen::VectorXd start(2);
    start << rng.normal(), rng.normal();
    const LogisticFit fit = weighted_logistic_fit(Z, y, w, start);
    CHECK(fit.loglik >= weighted_logistic_loglik(Z, y, w, start) - 1e-12);
  }
}

TEST_CASE("separation is flagged, not fatal") {
  Eigen::MatrixXd Z(4, 2);
  Z << 1, -2, 1, -1, 1, 1, 1, 2;
  Eigen::VectorXd y(4), w = Eigen::VectorXd::Ones(4);
  y << 0, 0, 1, 1;  // perfectly separated on the slope
  const LogisticFit fit = weighted_logistic_fit(Z, y, w, Eigen::VectorXd::Zero(2), 1e-9, 2000);
  CHECK(fit.separation);
  CHECK(std::isfinite(fit.loglik));
}
