#include "recap/em.hpp"

#include <cmath>
#include <limits>

#include "recap/errors.hpp"
#include "recap/glm.hpp"
#include "recap/numerics.hpp"

namespace recap {

namespace {

double logsumexp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// Pseudo-data for the weighted logistic sub-problem: the n*K realized design
// rows with the capture indicators as responses and unit weights, stacked on
// the n*K never-captured design rows with zero responses and the
// conditional-expectation weights.
struct Workspace {
  int n = 0, K = 0, s = 0;
  Eigen::MatrixXd Z;   // 2nK x s
  Eigen::VectorXd y;   // 2nK
  Eigen::VectorXd w;   // 2nK; top half fixed at 1

  mutable Eigen::VectorXd t_buf;

  Workspace(const CaptureDataset& data, const ModelSpec& model) {
    n = data.n();
    K = data.K();
    s = model.param_dim(K);
    Z.resize(2 * n * K, s);
    y.resize(2 * n * K);
    w.resize(2 * n * K);
    w.setOnes();
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x = model.select_covariates(data, i);
      const DesignVectors dv = build_design(model, x, data.histories.row(i).transpose(), K);
      for (int k = 0; k < K; ++k) {
        const int row = i * K + k;
        Z.row(row) = dv.z[static_cast<size_t>(k)].transpose();
        Z.row(n * K + row) = dv.z0[static_cast<size_t>(k)].transpose();
        y[row] = data.histories(i, k);
        y[n * K + row] = 0.0;
      }
    }
    t_buf.resize(n * K);
  }

  void set_weights(const Eigen::VectorXd& wi) {
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < K; ++k) w[n * K + i * K + k] = wi[i];
  }

  void log_phi(const Eigen::VectorXd& beta, Eigen::VectorXd& out) const {
    t_buf.noalias() = Z.bottomRows(n * K) * beta;
    out.resize(n);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = 0; k < K; ++k) acc -= softplus(t_buf[i * K + k]);
      out[i] = acc;
    }
  }

  // Bernoulli block of the observed histories.
  double bern(const Eigen::VectorXd& beta) const {
    t_buf.noalias() = Z.topRows(n * K) * beta;
    double ll = 0.0;
    for (int r = 0; r < n * K; ++r) ll += y[r] * t_buf[r] - softplus(t_buf[r]);
    return ll;
  }
};

enum class LoopMode { FixedN, UnknownN, CL };

FitResult run_em(const CaptureDataset& data, const ModelSpec& model, double N_fixed,
                 const PenaltyConfig& pen, const EMControl& ctrl, LoopMode mode) {
  model.validate();
  data.validate();
  const int n = data.n();
  Workspace ws(data, model);

  // Step 0: zero parameters, uniform masses.
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(ws.s);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 1.0 / n);
  Eigen::VectorXd logp = Eigen::VectorXd::Constant(n, -std::log(static_cast<double>(n)));
  Eigen::VectorXd log_phi(n);
  ws.log_phi(beta, log_phi);
  double log_alpha = logsumexp(log_phi + logp);

  double N = (mode == LoopMode::FixedN) ? N_fixed
                                        : std::max(pen.chao, static_cast<double>(n) + 1.0);
  if (mode == LoopMode::FixedN && !(N >= n))
    throw NumericalError("em_fixed_n: N must be at least n");
  double lb = log_binom(N, n);

  const auto el_objective = [&](double Nv, double lbv) {
    double v = lbv + logp.sum() + ws.bern(beta) + pen.C * penalty(Nv, pen.chao);
    if (Nv > n) v += (Nv - n) * log_alpha;
    return v;
  };
  const auto cl_objective = [&]() {
    double v = ws.bern(beta);
    for (int i = 0; i < n; ++i) {
      const double omp = -std::expm1(log_phi[i]);
      if (!(omp > 0.0)) return -std::numeric_limits<double>::infinity();
      v -= std::log(omp);
    }
    return v;
  };

  FitResult fit;
  fit.model = model;
  fit.penalty_config = pen;
  fit.method = (mode == LoopMode::CL) ? Method::CL : (pen.C > 0.0 ? Method::PEL : Method::EL);

  double obj = (mode == LoopMode::CL) ? cl_objective() : el_objective(N, lb);
  fit.trace.push_back(obj);

  Eigen::VectorXd wi(n);
  for (int r = 0; r < ctrl.max_iter; ++r) {
    // E step at (N, beta, p).
    if (N > n) {
      if (!std::isfinite(log_alpha))
        throw NumericalError("em: degenerate never-capture probabilities");
      for (int i = 0; i < n; ++i) wi[i] = (N - n) * std::exp(log_phi[i] + logp[i] - log_alpha);
    } else {
      wi.setZero();
    }
    ws.set_weights(wi);

    // Step 1: weighted logistic update, warm-started at the current beta so
    // the line search can only improve the weighted likelihood.
    const LogisticFit inner = weighted_logistic_fit(ws.Z, ws.y, ws.w, beta, ctrl.inner_tol, 200);
    beta = inner.beta;
    ws.log_phi(beta, log_phi);

    // Step 2: mass and never-capture updates.
    p = (wi.array() + 1.0) / N;
    logp = p.array().log();
    log_alpha = logsumexp(log_phi + logp);

    // Abundance update.
    if (mode == LoopMode::UnknownN) {
      const double N_new = abundance_step(n, log_alpha, pen, ctrl.n_cap);
      const auto step_value = [&](double Nv) {
        double v = log_binom(Nv, n) + pen.C * penalty(Nv, pen.chao);
        if (Nv > n) v += (Nv - n) * log_alpha;
        return v;
      };
      if (step_value(N_new) >= step_value(N)) {
        N = N_new;
        lb = log_binom(N, n);
      }
    } else if (mode == LoopMode::CL) {
      const double one_minus_alpha = -std::expm1(log_alpha);
      double N_new = n / std::max(one_minus_alpha, static_cast<double>(n) / ctrl.n_cap);
      N = std::min(N_new, ctrl.n_cap);
    }

    const double obj_new = (mode == LoopMode::CL) ? cl_objective() : el_objective(N, lb);
    fit.trace.push_back(obj_new);
    const double incr = obj_new - obj;
    obj = obj_new;
    fit.iterations = r + 1;
    const bool done = (mode == LoopMode::CL) ? std::fabs(incr) <= ctrl.tol : incr <= ctrl.tol;
    if (done) {
      fit.converged = true;
      break;
    }
  }

  fit.beta_hat = beta;
  fit.alpha_hat = std::exp(log_alpha);
  fit.p_hat = p;
  fit.separation = beta.lpNorm<Eigen::Infinity>() > 30.0;

  if (mode == LoopMode::CL) {
    double ht = 0.0;
    bool exploded = false;
    for (int i = 0; i < n; ++i) {
      const double omp = -std::expm1(log_phi[i]);
      if (omp < 1e-12) {
        exploded = true;
        ht = std::numeric_limits<double>::infinity();
        break;
      }
      ht += 1.0 / omp;
      if (omp < 1e-8) exploded = true;
    }
    fit.N_hat = ht;
    fit.unstable = exploded || !std::isfinite(ht) || ht > ctrl.n_cap;
    fit.loglik = obj;
    if (std::isfinite(ht)) {
      double lel = log_binom(ht, n) + logp.sum() + ws.bern(beta);
      if (ht > n) lel += (ht - n) * log_alpha;
      fit.loglik_el = lel;
    } else {
      fit.loglik_el = std::numeric_limits<double>::quiet_NaN();
    }
  } else {
    fit.N_hat = N;
    fit.boundary_N = (mode == LoopMode::UnknownN) && N >= 0.999 * ctrl.n_cap;
    fit.loglik = obj;
    fit.loglik_el = obj - pen.C * penalty(N, pen.chao);
  }
  fit.N_rounded = std::llround(std::min(fit.N_hat, 9e17));
  return fit;
}

}  // namespace

std::string method_token(Method m) {
  switch (m) {
    case Method::CL: return "cl";
    case Method::EL: return "el";
    case Method::PEL: return "pel";
  }
  return "?";
}

Eigen::VectorXd e_step_weights(double N, const Eigen::VectorXd& beta,
                               const Eigen::VectorXd& p, const CaptureDataset& data,
                               const ModelSpec& model) {
  const int n = data.n();
  if (p.size() != n) throw DataError("e_step_weights: p must have length n");
  if (!(N >= n)) throw DataError("e_step_weights: N must be at least n");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  if (N == static_cast<double>(n)) return w;

  const Eigen::VectorXd log_phi = log_never_capture_all(beta, data, model);
  Eigen::VectorXd terms(n);
  for (int i = 0; i < n; ++i)
    terms[i] = (p[i] > 0.0) ? log_phi[i] + std::log(p[i])
                            : -std::numeric_limits<double>::infinity();
  const double log_alpha = logsumexp(terms);
  if (!std::isfinite(log_alpha))
    throw NumericalError("e_step_weights: degenerate never-capture probabilities");
  for (int i = 0; i < n; ++i) w[i] = (N - n) * std::exp(terms[i] - log_alpha);
  return w;
}

FitResult em_fixed_n(const CaptureDataset& data, const ModelSpec& model, double N,
                     const PenaltyConfig& pen, const EMControl& ctrl) {
  return run_em(data, model, N, pen, ctrl, LoopMode::FixedN);
}

FitResult em_unknown_n(const CaptureDataset& data, const ModelSpec& model,
                       const PenaltyConfig& pen, const EMControl& ctrl) {
  return run_em(data, model, 0.0, pen, ctrl, LoopMode::UnknownN);
}

FitResult em_cl(const CaptureDataset& data, const ModelSpec& model, const EMControl& ctrl) {
  return run_em(data, model, 0.0, PenaltyConfig{0.0, 0.0}, ctrl, LoopMode::CL);
}

double abundance_step(int n, double log_alpha, const PenaltyConfig& pen, double cap) {
  const double nd = n;
  if (!(cap > nd)) return nd;
  if (!(log_alpha < 0.0)) return cap;

  const auto value = [&](double N) {
    double v = log_binom(N, nd) + pen.C * penalty(N, pen.chao);
    if (N > nd) v += (N - nd) * log_alpha;
    return v;
  };
  // The objective is concave in N; optimize in u = log(N - n + 1) to keep the
  // search well-scaled over [n, cap].
  const double u_hi = std::log(cap - nd + 1.0);
  const auto fu = [&](double u) { return value(nd + std::expm1(u)); };
  const double u_star = maximize_1d(fu, Bracket{0.0, u_hi}, 1e-8);

  double best = nd + std::expm1(u_star);
  best = std::fmin(std::fmax(best, nd), cap);
  double best_value = value(best);
  if (value(nd) >= best_value) {
    best = nd;
    best_value = value(nd);
  }
  if (value(cap) > best_value) best = cap;
  return best;
}

double horvitz_thompson(const Eigen::VectorXd& phi) {
  double ht = 0.0;
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    const double omp = 1.0 - phi[i];
    if (!(omp > 0.0)) return std::numeric_limits<double>::infinity();
    ht += 1.0 / omp;
  }
  return ht;
}

}  // namespace recap
