#pragma once

#include <functional>

namespace recap {

// Closed interval handed to the 1-D solvers.
struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
};

// Regularized lower incomplete gamma function P(a, x).
double gamma_p(double a, double x);

// Quantile of the chi-squared distribution with df degrees of freedom:
// the x solving P(df/2, x/2) = p. Requires 0 <= p < 1.
double chisq_quantile(double df, double p);

// log of the binomial coefficient C(N, n), extended to real N >= n via
// log-gamma so abundance can be treated as a continuous parameter.
double log_binom(double N, double n);

// Argmax of a unimodal f on [b.lo, b.hi] to within tol (Brent's method,
// golden section plus parabolic steps). Monotone f converges to the
// matching endpoint.
double maximize_1d(const std::function<double(double)>& f, Bracket b, double tol);

// Root of a continuous f with f(lo)*f(hi) <= 0 (Brent's method). Stops when
// |f(x)| <= tol or the bracket width falls below tol.
double find_root(const std::function<double(double)>& f, Bracket b, double tol);

// Central second difference (f(x0+h) - 2 f(x0) + f(x0-h)) / h^2.
double curvature(const std::function<double(double)>& f, double x0, double h);

}  // namespace recap
