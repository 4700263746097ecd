#pragma once

#include <Eigen/Dense>
#include <vector>

#include "recap/dataset.hpp"
#include "recap/design.hpp"
#include "recap/likelihood.hpp"

namespace recap {

enum class Method { CL, EL, PEL };

std::string method_token(Method m);

struct EMControl {
  double tol = 1e-5;        // stop when the objective increment drops to this
  int max_iter = 10000;
  double inner_tol = 1e-9;  // score tolerance of the logistic sub-fits
  double n_cap = 1e9;       // abundance search cap
};

struct FitResult {
  Method method = Method::PEL;
  ModelSpec model;
  double N_hat = 0.0;
  long long N_rounded = 0;
  Eigen::VectorXd beta_hat;
  double alpha_hat = 0.0;
  Eigen::VectorXd p_hat;
  double loglik = 0.0;     // maximized objective (penalized log EL for PEL,
                           // log EL for EL, log CL for CL)
  double loglik_el = 0.0;  // unpenalized log EL evaluated at the fit
  PenaltyConfig penalty_config{0.0, 0.0};
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective value after each iteration
  bool boundary_N = false;    // abundance step reached the search cap
  bool separation = false;    // regression parameters ran away
  bool unstable = false;      // CL instability (capture probabilities near 0)
};

// Conditional-expectation weights for the unobserved individuals:
// w_i = (N - n) phi_i p_i / alpha with alpha = sum_i phi_i p_i.
Eigen::VectorXd e_step_weights(double N, const Eigen::VectorXd& beta,
                               const Eigen::VectorXd& p, const CaptureDataset& data,
                               const ModelSpec& model);

// Alternates the weighted logistic update and the mass/alpha updates at a
// fixed abundance until the penalized log EL increment falls below ctrl.tol.
// Returns the profile value over (beta, alpha, {p_i}) at this N.
FitResult em_fixed_n(const CaptureDataset& data, const ModelSpec& model, double N,
                     const PenaltyConfig& pen, const EMControl& ctrl = {});

// Full maximization with unknown abundance: the fixed-N sweep plus a 1-D
// continuous abundance update each iteration. pen.C = 0 yields the
// unpenalized EL estimator.
FitResult em_unknown_n(const CaptureDataset& data, const ModelSpec& model,
                       const PenaltyConfig& pen, const EMControl& ctrl = {});

// Conditional-likelihood variant: closed-form abundance update n/(1 - alpha)
// inside the loop, convergence monitored on the log CL, and the final
// abundance reported as the Horvitz-Thompson sum.
FitResult em_cl(const CaptureDataset& data, const ModelSpec& model,
                const EMControl& ctrl = {});

// The abundance update objective argmax_{N in [n, cap]} of
// log C(N, n) + (N - n) log(alpha) + C f(N), solved in log(N - n + 1)
// coordinates. Exposed for tests.
double abundance_step(int n, double log_alpha, const PenaltyConfig& pen, double cap);

// sum_i 1 / (1 - phi_i).
double horvitz_thompson(const Eigen::VectorXd& phi);

}  // namespace recap
