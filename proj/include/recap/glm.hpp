#pragma once

#include <Eigen/Dense>
#include <span>

namespace recap {

// One pseudo-observation of the weighted binomial regression problem.
struct WeightedObservation {
  double y = 0.0;       // response in {0, 1}
  Eigen::VectorXd z;    // design vector
  double w = 1.0;       // nonnegative weight
};

struct LogisticFit {
  Eigen::VectorXd beta;
  double loglik = 0.0;      // weighted log-likelihood at beta
  double score_norm = 0.0;  // max-norm of the weighted score at return
  int iterations = 0;
  bool converged = false;
  bool separation = false;  // ||beta||_inf exceeded 30 at convergence
  bool ridged = false;      // ridge fallback engaged at least once
};

// Maximizes sum_i w_i [y_i log g(z_i; b) + (1 - y_i) log(1 - g(z_i; b))] by
// damped Newton-Raphson (IRLS) with step halving; a small ridge is added to
// the Hessian when its factorization fails. The step-halving line search
// never accepts a decrease, so the weighted log-likelihood is non-decreasing
// across iterations.
LogisticFit weighted_logistic_fit(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& w, const Eigen::VectorXd& beta0,
                                  double tol = 1e-9, int max_iter = 100);

LogisticFit weighted_logistic_fit(std::span<const WeightedObservation> obs,
                                  const Eigen::VectorXd& beta0, double tol = 1e-9,
                                  int max_iter = 100);

// Weighted Bernoulli log-likelihood at beta (same objective the fit maximizes).
double weighted_logistic_loglik(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& w, const Eigen::VectorXd& beta);

}  // namespace recap
