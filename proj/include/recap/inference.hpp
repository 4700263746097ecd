#pragma once

#include <functional>
#include <string>
#include <vector>

#include "recap/em.hpp"

namespace recap {

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  std::string method;        // "PEL-ratio", "EL-ratio", "CL-Wald"
  bool upper_censored = false;  // no crossing found below the abundance cap
  bool lower_at_bound = false;  // ratio stayed under the cutoff down to N = n
  bool below_n_warning = false; // Wald lower extends below n (reported raw)
  bool unstable = false;        // variance or inner profile failure
  bool inner_unconverged = false;

  // Display rounding: nearest integer with ties pushed outward.
  long long lower_rounded() const;
  long long upper_rounded() const;
};

struct GridSpec {
  double from = 0.0;
  double to = 0.0;
  int points = 101;
};

struct RatioCurve {
  std::vector<double> grid;
  std::vector<double> values;
  std::string method;
};

// Likelihood-ratio statistic at abundance N: twice the gap between the
// fitted maximum and the inner profile over (beta, alpha, {p_i}) at this N,
// the latter computed by the fixed-N EM sweep. Nonnegative by construction.
double ratio_statistic(double N, const FitResult& fit, const CaptureDataset& data,
                       const ModelSpec& model, const EMControl& ctrl = {});

// Ratio confidence interval: the abundances where the ratio statistic stays
// below the chi-squared(1) cutoff. Endpoints located by bracket expansion and
// root finding; the upper end is censored at ctrl.n_cap when the ratio never
// reaches the cutoff below the cap.
ConfidenceInterval ratio_ci(const FitResult& fit, const CaptureDataset& data,
                            const ModelSpec& model, double level,
                            const EMControl& ctrl = {});

// Plug-in variance of the Horvitz-Thompson abundance estimator:
// sum_i phi_i/(1-phi_i)^2 + G' I^{-1} G with G the gradient of the
// Horvitz-Thompson sum and I the observed information of the conditional
// log-likelihood at the fitted parameters.
double cl_variance(const FitResult& fit, const CaptureDataset& data,
                   const ModelSpec& model);

// Wald interval N_hat -/+ sqrt(quantile * variance). Endpoints are reported
// raw; a lower endpoint below n only raises a warning flag.
ConfidenceInterval wald_ci_cl(const FitResult& fit, const CaptureDataset& data,
                              const ModelSpec& model, double level);
// Same interval from precomputed pieces (exposed for tests).
ConfidenceInterval wald_interval(double N_hat, double variance, double level, double n);

// Standard error from the curvature of a 1-D profile at its maximizer.
double se_from_curvature(const std::function<double(double)>& profile, double N_hat,
                         double step);

// Standard error of the fitted abundance from the numerical curvature of the
// (penalized) fixed-N profile at N_hat. +inf with a flat or convex profile.
double profile_se(const FitResult& fit, const CaptureDataset& data,
                  const ModelSpec& model, const EMControl& ctrl = {});

// -2 * (unpenalized log EL at the fit) + 2 * (dim beta + 2), counting the
// regression parameters, the never-capture probability, and the abundance.
double aic(const FitResult& fit);

// Ratio statistic evaluated over an abundance grid (exported for plotting).
RatioCurve ratio_curve(const FitResult& fit, const CaptureDataset& data,
                       const ModelSpec& model, const GridSpec& grid,
                       const EMControl& ctrl = {}, int threads = 1);

}  // namespace recap
