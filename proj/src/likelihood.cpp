#include "recap/likelihood.hpp"

#include <cmath>
#include <limits>

#include "recap/errors.hpp"
#include "recap/numerics.hpp"

namespace recap {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double chao_lower_bound(int n, int m1, int m2) {
  if (n < 1) throw DataError("chao_lower_bound: n must be positive");
  if (m2 > 0) return n + static_cast<double>(m1) * m1 / (2.0 * m2);
  return n + static_cast<double>(m1) * (m1 - 1) / 2.0;
}

double tuning_constant(int n, int m1, int m2) {
  if (n < 1) throw DataError("tuning_constant: n must be positive");
  if (m1 <= 0) return 0.0;
  const double m1d = m1;
  return 2.0 * static_cast<double>(m2) * m2 / (n * m1d * m1d * m1d * m1d);
}

double penalty(double N, double chao) {
  if (N <= chao) return 0.0;
  const double d = N - chao;
  return -d * d;
}

PenaltyConfig penalty_config(const DatasetSummary& summary) {
  return PenaltyConfig{chao_lower_bound(summary.n, summary.m1, summary.m2),
                       tuning_constant(summary.n, summary.m1, summary.m2)};
}

Eigen::VectorXd log_never_capture_all(const Eigen::VectorXd& beta,
                                      const CaptureDataset& data, const ModelSpec& model) {
  const int n = data.n();
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i)
    out[i] = log_never_capture_prob(model, model.select_covariates(data, i), beta, data.K());
  return out;
}

double bernoulli_loglik(const Eigen::VectorXd& beta, const CaptureDataset& data,
                        const ModelSpec& model) {
  const int n = data.n();
  const int K = data.K();
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = model.select_covariates(data, i);
    const DesignVectors dv = build_design(model, x, data.histories.row(i).transpose(), K);
    for (int k = 0; k < K; ++k) {
      const double t = beta.dot(dv.z[static_cast<size_t>(k)]);
      ll += data.histories(i, k) * t - softplus(t);
    }
  }
  return ll;
}

double log_el(const ELParams& params, const CaptureDataset& data, const ModelSpec& model) {
  const int n = data.n();
  if (params.p.size() != n) throw DataError("log_el: p must have length n");
  if (!(params.N >= n)) throw DataError("log_el: N must be at least n");

  double value = log_binom(params.N, n);
  if (params.N > n) value += (params.N - n) * std::log(params.alpha);
  for (int i = 0; i < n; ++i) {
    if (params.p[i] <= 0.0) return kNegInf;
    value += std::log(params.p[i]);
  }
  value += bernoulli_loglik(params.beta, data, model);
  return value;
}

std::optional<double> solve_xi(const Eigen::VectorXd& phi, double alpha) {
  const Eigen::Index n = phi.size();
  if (n == 0) throw DataError("solve_xi: empty phi");
  const Eigen::VectorXd a = phi.array() - alpha;
  const double amax = a.maxCoeff();
  const double amin = a.minCoeff();

  if (phi.maxCoeff() - phi.minCoeff() < 1e-12) return 0.0;  // degenerate spread
  if (amax <= 0.0 || amin >= 0.0) return std::nullopt;      // alpha outside hull

  const auto g = [&](double xi) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += a[i] / (1.0 + xi * a[i]);
    return s;
  };
  const auto gprime = [&](double xi) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = 1.0 + xi * a[i];
      s -= a[i] * a[i] / (d * d);
    }
    return s;
  };

  // At the solution every p_i = 1/(n (1 + xi a_i)) is below 1, which keeps
  // the root at least 1/(n |a|) away from either pole; insetting by half that
  // distance yields a guaranteed sign-changing bracket for the strictly
  // decreasing g.
  const double nd = static_cast<double>(n);
  double lo = -1.0 / amax + 0.5 / (nd * amax);
  double hi = -1.0 / amin - 0.5 / (nd * (-amin));

  double xi = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double val = g(xi);
    if (std::fabs(val) <= 1e-10) return xi;
    if (val > 0.0)
      lo = xi;
    else
      hi = xi;
    const double der = gprime(xi);
    double next = (der < 0.0) ? xi - val / der : 0.5 * (lo + hi);
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (next == xi) break;
    xi = next;
  }
  return xi;
}

double profile_log_pel(double N, const Eigen::VectorXd& beta, double alpha,
                       const CaptureDataset& data, const ModelSpec& model,
                       const PenaltyConfig& pen) {
  const int n = data.n();
  if (!(N >= n)) throw DataError("profile_log_pel: N must be at least n");
  if (!(alpha > 0.0 && alpha < 1.0)) return kNegInf;

  Eigen::VectorXd phi = log_never_capture_all(beta, data, model);
  for (int i = 0; i < n; ++i) phi[i] = std::exp(phi[i]);

  const std::optional<double> xi = solve_xi(phi, alpha);
  if (!xi) return kNegInf;

  double value = log_binom(N, n);
  if (N > n) value += (N - n) * std::log(alpha);
  const double nd = n;
  for (int i = 0; i < n; ++i) {
    const double denom = 1.0 + *xi * (phi[i] - alpha);
    if (!(denom > 0.0)) return kNegInf;
    value -= std::log(nd * denom);  // log p_i with p_i = 1/(n denom)
  }
  value += bernoulli_loglik(beta, data, model);
  value += pen.C * penalty(N, pen.chao);
  return value;
}

double conditional_loglik(const Eigen::VectorXd& beta, const CaptureDataset& data,
                          const ModelSpec& model) {
  const Eigen::VectorXd log_phi = log_never_capture_all(beta, data, model);
  double value = bernoulli_loglik(beta, data, model);
  for (Eigen::Index i = 0; i < log_phi.size(); ++i) {
    const double one_minus_phi = -std::expm1(log_phi[i]);
    if (!(one_minus_phi > 0.0)) return kNegInf;  // phi -> 1 sentinel
    value -= std::log(one_minus_phi);
  }
  return value;
}

}  // namespace recap
