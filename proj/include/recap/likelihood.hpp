#pragma once

#include <Eigen/Dense>
#include <optional>

#include "recap/dataset.hpp"
#include "recap/design.hpp"

namespace recap {

// Full parameter point of the empirical likelihood: abundance N, regression
// parameters, the never-capture probability alpha, and the point masses p_i
// placed on the observed covariates.
struct ELParams {
  double N = 0.0;
  Eigen::VectorXd beta;
  double alpha = 0.0;
  Eigen::VectorXd p;
};

// Quadratic abundance penalty configuration: the stabilizing lower bound and
// the data-adaptive tuning constant C (C = 0 disables the penalty).
struct PenaltyConfig {
  double chao = 0.0;
  double C = 0.0;
};

// n + m1^2 / (2 m2); falls back to the bias-corrected n + m1(m1-1)/2 when no
// individual was captured exactly twice.
double chao_lower_bound(int n, int m1, int m2);

// Data-adaptive tuning constant 2 m2^2 / (n m1^4); zero when m1 = 0.
double tuning_constant(int n, int m1, int m2);

// Quadratic penalty f(N) = -(N - chao)^2 for N above the lower bound, else 0.
double penalty(double N, double chao);

PenaltyConfig penalty_config(const DatasetSummary& summary);

// Log empirical likelihood at a full parameter point:
//   log C(N, n) + (N - n) log alpha + sum_i log p_i + Bernoulli block.
// Returns -inf when some p_i = 0.
double log_el(const ELParams& params, const CaptureDataset& data, const ModelSpec& model);

// Lagrange multiplier xi solving sum_i (phi_i - alpha) / (1 + xi (phi_i - alpha)) = 0
// on the interval where every 1 + xi (phi_i - alpha) stays positive. Returns
// nullopt when alpha lies outside the convex hull of the phi_i (no feasible
// point masses); returns 0 when the phi_i are all (numerically) equal.
std::optional<double> solve_xi(const Eigen::VectorXd& phi, double alpha);

// Profile (penalized) log EL at fixed (N, beta, alpha): the p_i are profiled
// out through the multiplier, p_i = 1 / (n [1 + xi (phi_i - alpha)]), and the
// sum of their logs is included so the value equals the constrained maximum
// of log_el over the p-simplex. -inf when the constraint set is empty.
double profile_log_pel(double N, const Eigen::VectorXd& beta, double alpha,
                       const CaptureDataset& data, const ModelSpec& model,
                       const PenaltyConfig& pen);

// Log conditional likelihood: Bernoulli block minus sum_i log(1 - phi_i),
// conditioning each individual on being captured at least once.
double conditional_loglik(const Eigen::VectorXd& beta, const CaptureDataset& data,
                          const ModelSpec& model);

// Bernoulli block sum_i sum_k [d log g + (1 - d) log(1 - g)] over the
// realized designs, shared by the likelihood objects above.
double bernoulli_loglik(const Eigen::VectorXd& beta, const CaptureDataset& data,
                        const ModelSpec& model);

// log phi_i for every observed individual.
Eigen::VectorXd log_never_capture_all(const Eigen::VectorXd& beta,
                                      const CaptureDataset& data, const ModelSpec& model);

}  // namespace recap
