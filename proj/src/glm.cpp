#include "recap/glm.hpp"

#include <cmath>

#include "recap/design.hpp"
#include "recap/errors.hpp"

namespace recap {

double weighted_logistic_loglik(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& w, const Eigen::VectorXd& beta) {
  const Eigen::Index m = Z.rows();
  const Eigen::VectorXd t = Z * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (w[i] == 0.0) continue;
    ll += w[i] * (y[i] * t[i] - softplus(t[i]));
  }
  return ll;
}

LogisticFit weighted_logistic_fit(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& w, const Eigen::VectorXd& beta0,
                                  double tol, int max_iter) {
  const Eigen::Index m = Z.rows();
  const Eigen::Index s = Z.cols();
  if (y.size() != m || w.size() != m)
    throw NumericalError("weighted_logistic_fit: inconsistent row counts");
  if (beta0.size() != s)
    throw NumericalError("weighted_logistic_fit: bad initial vector length");

  LogisticFit fit;
  fit.beta = beta0;

  Eigen::VectorXd t(m), g(m), resid(m), c(m);
  Eigen::VectorXd grad(s), delta(s);
  Eigen::MatrixXd H(s, s);

  double ll = weighted_logistic_loglik(Z, y, w, fit.beta);

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    t.noalias() = Z * fit.beta;
    for (Eigen::Index i = 0; i < m; ++i) g[i] = logistic(t[i]);
    resid = w.cwiseProduct(y - g);
    grad.noalias() = Z.transpose() * resid;
    fit.score_norm = grad.lpNorm<Eigen::Infinity>();
    if (fit.score_norm <= tol) {
      fit.converged = true;
      break;
    }

    c = w.cwiseProduct(g.cwiseProduct(Eigen::VectorXd::Ones(m) - g));
    H.noalias() = Z.transpose() * c.asDiagonal() * Z;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    delta = ldlt.solve(grad);
    bool ok = ldlt.info() == Eigen::Success && delta.allFinite();
    if (ok) {
      // LDLT can succeed on a semidefinite system and return a useless
      // direction; demand an ascent direction before trusting it.
      ok = grad.dot(delta) > 0.0;
    }
    if (!ok) {
      double lambda = 1e-8 * H.trace() / static_cast<double>(s);
      if (!(lambda > 0.0)) lambda = 1e-8;
      for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::MatrixXd Hr = H + lambda * Eigen::MatrixXd::Identity(s, s);
        Eigen::LDLT<Eigen::MatrixXd> ldlt_r(Hr);
        delta = ldlt_r.solve(grad);
        if (ldlt_r.info() == Eigen::Success && delta.allFinite() && grad.dot(delta) > 0.0) {
          fit.ridged = true;
          ok = true;
          break;
        }
        lambda *= 100.0;
      }
    }
    if (!ok) break;  // cannot make progress; report the current iterate

    // With extreme pseudo-weights the score tolerance can sit below the
    // attainable rounding noise; a vanishing Newton step means we are done.
    if (delta.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + fit.beta.lpNorm<Eigen::Infinity>())) {
      fit.converged = true;
      break;
    }

    // Step halving: only accept a strict ascent step. Progress at or below
    // rounding resolution means the iterate is numerically stationary.
    double eta = 1.0;
    bool improved = false;
    bool stationary = false;
    for (int half = 0; half < 60; ++half) {
      const Eigen::VectorXd cand = fit.beta + eta * delta;
      const double ll_new = weighted_logistic_loglik(Z, y, w, cand);
      if (std::isfinite(ll_new)) {
        if (ll_new > ll) {
          stationary = ll_new - ll <= 1e-14 * std::fabs(ll) + 1e-13;
          fit.beta = cand;
          ll = ll_new;
          improved = true;
          break;
        }
        if (ll_new == ll) {
          stationary = true;
          break;
        }
      }
      eta *= 0.5;
    }
    if (!improved || stationary) {
      fit.converged = fit.converged || stationary;
      break;
    }
  }
  fit.iterations = iter;
  fit.loglik = ll;
  if (!fit.converged) {
    // recompute the score at the final iterate for reporting
    t.noalias() = Z * fit.beta;
    for (Eigen::Index i = 0; i < m; ++i) g[i] = logistic(t[i]);
    grad.noalias() = Z.transpose() * (w.cwiseProduct(y - g));
    fit.score_norm = grad.lpNorm<Eigen::Infinity>();
    fit.converged = fit.score_norm <= tol;
  }
  fit.separation = fit.beta.lpNorm<Eigen::Infinity>() > 30.0;
  return fit;
}

LogisticFit weighted_logistic_fit(std::span<const WeightedObservation> obs,
                                  const Eigen::VectorXd& beta0, double tol, int max_iter) {
  const Eigen::Index m = static_cast<Eigen::Index>(obs.size());
  if (m == 0) throw NumericalError("weighted_logistic_fit: no observations");
  const Eigen::Index s = obs[0].z.size();
  Eigen::MatrixXd Z(m, s);
  Eigen::VectorXd y(m), w(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& o = obs[static_cast<size_t>(i)];
    if (o.z.size() != s) throw NumericalError("weighted_logistic_fit: ragged designs");
    if (!(o.w >= 0.0) || !std::isfinite(o.w))
      throw NumericalError("weighted_logistic_fit: weights must be finite and nonnegative");
    Z.row(i) = o.z.transpose();
    y[i] = o.y;
    w[i] = o.w;
  }
  return weighted_logistic_fit(Z, y, w, beta0, tol, max_iter);
}

}  // namespace recap
