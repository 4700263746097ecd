#include "recap/inference.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "recap/errors.hpp"
#include "recap/numerics.hpp"

namespace recap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RatioEval {
  double value = 0.0;
  bool inner_converged = true;
};

RatioEval ratio_eval(double N, const FitResult& fit, const CaptureDataset& data,
                     const ModelSpec& model, const EMControl& ctrl) {
  const FitResult inner = em_fixed_n(data, model, N, fit.penalty_config, ctrl);
  RatioEval out;
  out.value = std::fmax(0.0, 2.0 * (fit.loglik - inner.loglik));
  out.inner_converged = inner.converged;
  return out;
}

}  // namespace

long long ConfidenceInterval::lower_rounded() const {
  return static_cast<long long>(std::ceil(lower - 0.5));
}

long long ConfidenceInterval::upper_rounded() const {
  return static_cast<long long>(std::floor(upper + 0.5));
}

double ratio_statistic(double N, const FitResult& fit, const CaptureDataset& data,
                       const ModelSpec& model, const EMControl& ctrl) {
  if (!(N >= data.n())) throw DataError("ratio_statistic: N must be at least n");
  return ratio_eval(N, fit, data, model, ctrl).value;
}

ConfidenceInterval ratio_ci(const FitResult& fit, const CaptureDataset& data,
                            const ModelSpec& model, double level, const EMControl& ctrl) {
  ConfidenceInterval ci;
  ci.level = level;
  ci.method = fit.method == Method::PEL ? "PEL-ratio" : "EL-ratio";
  const double q = chisq_quantile(1.0, level);
  const double n = data.n();
  const double N_hat = std::fmin(fit.N_hat, ctrl.n_cap);

  bool any_unconverged = false;
  const auto R = [&](double N) {
    const RatioEval e = ratio_eval(N, fit, data, model, ctrl);
    if (!e.inner_converged) any_unconverged = true;
    return e.value;
  };

  // Lower endpoint.
  if (N_hat <= n) {
    ci.lower = n;
    ci.lower_at_bound = true;
  } else {
    const double r_at_n = R(n);
    if (r_at_n <= q) {
      ci.lower = n;
      ci.lower_at_bound = true;
    } else {
      ci.lower = find_root([&](double N) { return R(N) - q; }, Bracket{n, N_hat}, 1e-5);
    }
  }

  // Upper endpoint: expand the offset until the ratio crosses the cutoff or
  // the abundance cap is reached.
  double offset = std::fmax(1.0, 0.1 * N_hat);
  double lo = N_hat;
  double hi = N_hat;
  bool crossed = false;
  while (true) {
    hi = N_hat + offset;
    if (hi >= ctrl.n_cap) {
      hi = ctrl.n_cap;
      crossed = R(hi) > q;
      break;
    }
    if (R(hi) > q) {
      crossed = true;
      break;
    }
    lo = hi;
    offset *= 2.0;
  }
  if (!crossed) {
    ci.upper = ctrl.n_cap;
    ci.upper_censored = true;
  } else {
    ci.upper = find_root([&](double N) { return R(N) - q; }, Bracket{lo, hi}, 1e-5);
  }
  ci.inner_unconverged = any_unconverged;
  return ci;
}

double cl_variance(const FitResult& fit, const CaptureDataset& data, const ModelSpec& model) {
  const int n = data.n();
  const int K = data.K();
  const Eigen::VectorXd& beta = fit.beta_hat;
  const int s = static_cast<int>(beta.size());

  // Gradient of the conditional log-likelihood; reused for the
  // finite-difference observed information.
  const auto grad_cl = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(s);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x = model.select_covariates(data, i);
      const DesignVectors dv = build_design(model, x, data.histories.row(i).transpose(), K);
      double log_phi = 0.0;
      Eigen::VectorXd A = Eigen::VectorXd::Zero(s);
      for (int k = 0; k < K; ++k) {
        const double tz = b.dot(dv.z[static_cast<size_t>(k)]);
        grad += (data.histories(i, k) - logistic(tz)) * dv.z[static_cast<size_t>(k)];
        const double t0 = b.dot(dv.z0[static_cast<size_t>(k)]);
        log_phi -= softplus(t0);
        A += logistic(t0) * dv.z0[static_cast<size_t>(k)];
      }
      const double phi = std::exp(log_phi);
      const double omp = -std::expm1(log_phi);
      if (!(omp > 0.0)) return Eigen::VectorXd::Constant(s, std::numeric_limits<double>::quiet_NaN()).eval();
      grad -= phi / omp * A;
    }
    return grad;
  };

  // HT-sum pieces and the delta-method gradient G = d/dbeta sum 1/(1-phi_i).
  double ht_term = 0.0;
  Eigen::VectorXd G = Eigen::VectorXd::Zero(s);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = model.select_covariates(data, i);
    const DesignVectors dv = build_design(model, x, data.histories.row(i).transpose(), K);
    double log_phi = 0.0;
    Eigen::VectorXd A = Eigen::VectorXd::Zero(s);
    for (int k = 0; k < K; ++k) {
      const double t0 = beta.dot(dv.z0[static_cast<size_t>(k)]);
      log_phi -= softplus(t0);
      A += logistic(t0) * dv.z0[static_cast<size_t>(k)];
    }
    const double phi = std::exp(log_phi);
    const double omp = -std::expm1(log_phi);
    if (!(omp > 0.0)) return kInf;
    ht_term += phi / (omp * omp);
    G += phi / (omp * omp) * A;  // d(1/(1-phi))/dbeta = -phi A / (1-phi)^2
  }

  // Observed information by central differences of the analytic gradient.
  Eigen::MatrixXd info(s, s);
  for (int j = 0; j < s; ++j) {
    const double h = 1e-5 * (1.0 + std::fabs(beta[j]));
    Eigen::VectorXd bp = beta, bm = beta;
    bp[j] += h;
    bm[j] -= h;
    const Eigen::VectorXd gp = grad_cl(bp);
    const Eigen::VectorXd gm = grad_cl(bm);
    if (!gp.allFinite() || !gm.allFinite()) return kInf;
    info.col(j) = -(gp - gm) / (2.0 * h);
  }
  info = 0.5 * (info + info.transpose()).eval();

  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success) return kInf;
  const Eigen::VectorXd sol = ldlt.solve(G);
  if (!sol.allFinite()) return kInf;
  const double delta_term = G.dot(sol);
  if (delta_term < 0.0) return kInf;  // information not positive definite
  return ht_term + delta_term;
}

ConfidenceInterval wald_interval(double N_hat, double variance, double level, double n) {
  ConfidenceInterval ci;
  ci.level = level;
  ci.method = "CL-Wald";
  if (!std::isfinite(N_hat) || !std::isfinite(variance) || variance < 0.0) {
    ci.lower = -kInf;
    ci.upper = kInf;
    ci.unstable = true;
    return ci;
  }
  const double q = chisq_quantile(1.0, level);
  const double half = std::sqrt(q * variance);
  ci.lower = N_hat - half;
  ci.upper = N_hat + half;
  ci.below_n_warning = ci.lower < n;
  return ci;
}

ConfidenceInterval wald_ci_cl(const FitResult& fit, const CaptureDataset& data,
                              const ModelSpec& model, double level) {
  if (fit.method != Method::CL)
    throw DataError("wald_ci_cl: fit must come from the conditional-likelihood method");
  const double var = cl_variance(fit, data, model);
  ConfidenceInterval ci = wald_interval(fit.N_hat, var, level, data.n());
  ci.unstable = ci.unstable || fit.unstable || !std::isfinite(var);
  return ci;
}

double se_from_curvature(const std::function<double(double)>& profile, double N_hat,
                         double step) {
  const double curv = curvature(profile, N_hat, step);
  if (!(curv < 0.0)) return kInf;  // flat or convex profile
  return std::sqrt(-1.0 / curv);
}

double profile_se(const FitResult& fit, const CaptureDataset& data, const ModelSpec& model,
                  const EMControl& ctrl) {
  EMControl tight = ctrl;
  tight.tol = std::fmin(ctrl.tol, 1e-8);
  const auto prof = [&](double N) {
    return em_fixed_n(data, model, N, fit.penalty_config, tight).loglik;
  };
  const double n = data.n();
  // Two-stage step choice: a pilot curvature sets the scale, then the step is
  // re-set to about half the implied standard error.
  double h = std::fmax(1.0, 0.02 * std::fabs(fit.N_hat));
  if (fit.N_hat - h < n) h = std::fmax((fit.N_hat - n) * 0.5, 1e-3);
  double se = se_from_curvature(prof, fit.N_hat, h);
  if (std::isfinite(se)) {
    double h2 = 0.5 * se;
    h2 = std::fmin(std::fmax(h2, 0.5 * h), 50.0 * h);
    if (fit.N_hat - h2 < n) h2 = std::fmax((fit.N_hat - n) * 0.5, 1e-3);
    se = se_from_curvature(prof, fit.N_hat, h2);
  }
  return se;
}

double aic(const FitResult& fit) {
  const double dim = static_cast<double>(fit.beta_hat.size());
  return -2.0 * fit.loglik_el + 2.0 * (dim + 2.0);
}

RatioCurve ratio_curve(const FitResult& fit, const CaptureDataset& data,
                       const ModelSpec& model, const GridSpec& grid, const EMControl& ctrl,
                       int threads) {
  if (grid.points < 2) throw DataError("ratio_curve: need at least two grid points");
  const double lo = std::fmax(grid.from, static_cast<double>(data.n()));
  const double hi = std::fmax(grid.to, lo);
  RatioCurve curve;
  curve.method = fit.method == Method::PEL ? "PEL-ratio" : "EL-ratio";
  curve.grid.resize(static_cast<size_t>(grid.points));
  curve.values.assign(static_cast<size_t>(grid.points), 0.0);
  for (int i = 0; i < grid.points; ++i)
    curve.grid[static_cast<size_t>(i)] = lo + (hi - lo) * i / (grid.points - 1);

  const int nthreads = std::max(1, threads);
  std::atomic<int> next{0};
  const auto worker = [&]() {
    int i;
    while ((i = next.fetch_add(1)) < grid.points)
      curve.values[static_cast<size_t>(i)] =
          ratio_eval(curve.grid[static_cast<size_t>(i)], fit, data, model, ctrl).value;
  };
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return curve;
}

}  // namespace recap
