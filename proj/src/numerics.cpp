#include "recap/numerics.hpp"

#include <cmath>
#include <limits>

#include "recap/errors.hpp"

namespace recap {

namespace {

constexpr double kTiny = 1e-300;

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 2000; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) = 1 - P(a, x), valid for x >= a + 1
// (modified Lentz).
double gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 2000; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

// Standard normal quantile (Acklam's rational approximation). Only used to
// seed the chi-squared quantile iteration; the Newton loop below does the
// actual convergence.
double normal_quantile_approx(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw NumericalError("gamma_p: need a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double chisq_quantile(double df, double p) {
  if (!(df > 0.0)) throw NumericalError("chisq_quantile: df must be positive");
  if (!(p >= 0.0) || p >= 1.0)
    throw NumericalError("chisq_quantile: p must lie in [0, 1)");
  if (p == 0.0) return 0.0;

  const double a = 0.5 * df;

  // Wilson-Hilferty starting point.
  const double z = normal_quantile_approx(p);
  double t = 1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df));
  double y = 0.5 * df * t * t * t;
  if (!(y > 0.0) || !std::isfinite(y)) y = 0.5 * df;

  // Maintain a bisection bracket around the root of P(a, y) = p.
  double ylo = 0.0;
  double yhi = y;
  while (gamma_p(a, yhi) < p) {
    ylo = yhi;
    yhi *= 2.0;
    if (yhi > 1e280) throw NumericalError("chisq_quantile: bracket overflow");
  }
  y = std::fmin(std::fmax(y, ylo + 0.25 * (yhi - ylo)), yhi);

  const double lg = std::lgamma(a);
  for (int it = 0; it < 200; ++it) {
    const double err = gamma_p(a, y) - p;
    if (err > 0.0)
      yhi = y;
    else
      ylo = y;
    const double logpdf = (a - 1.0) * std::log(y) - y - lg;
    double ynew;
    if (logpdf > -700.0) {
      ynew = y - err / std::exp(logpdf);
    } else {
      ynew = 0.5 * (ylo + yhi);
    }
    if (!(ynew > ylo) || !(ynew < yhi)) ynew = 0.5 * (ylo + yhi);
    const double dy = std::fabs(ynew - y);
    y = ynew;
    if (dy <= 1e-13 * y + 1e-300) break;
  }
  return 2.0 * y;
}

double log_binom(double N, double n) {
  if (!(n >= 0.0) || !(N >= n)) throw NumericalError("log_binom: need N >= n >= 0");
  if (n == 0.0) return 0.0;
  const long long ni = std::llround(n);
  if (static_cast<double>(ni) == n && ni <= 20000) {
    // Exact-count path: summing log factors avoids the catastrophic
    // cancellation of lgamma(N+1) - lgamma(N-n+1) at very large N.
    double s = 0.0;
    for (long long j = 1; j <= ni; ++j)
      s += std::log(N - n + static_cast<double>(j)) - std::log(static_cast<double>(j));
    return s;
  }
  return std::lgamma(N + 1.0) - std::lgamma(n + 1.0) - std::lgamma(N - n + 1.0);
}

double maximize_1d(const std::function<double(double)>& f, Bracket br, double tol) {
  if (!(br.lo < br.hi)) throw NumericalError("maximize_1d: invalid bracket");
  const auto g = [&](double u) {
    const double v = f(u);
    if (std::isnan(v)) throw NumericalError("maximize_1d: non-finite evaluation");
    return -v;
  };

  const double gold = 0.3819660112501051;
  double a = br.lo, b = br.hi;
  double x = a + gold * (b - a);
  double w = x, v = x;
  double fx = g(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int it = 0; it < 500; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol;
    const double tol2 = 2.0 * tol1;
    if (std::fabs(x - xm) <= tol2 - 0.5 * (b - a)) break;

    bool golden = true;
    if (std::fabs(e) > tol1) {
      // Trial parabolic step through (x, w, v).
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double pstep = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) pstep = -pstep;
      q = std::fabs(q);
      const double etemp = e;
      e = d;
      if (std::fabs(pstep) < std::fabs(0.5 * q * etemp) && pstep > q * (a - x) &&
          pstep < q * (b - x)) {
        d = pstep / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (xm >= x) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm) ? a - x : b - x;
      d = gold * e;
    }
    const double u = (std::fabs(d) >= tol1) ? x + d : x + ((d >= 0.0) ? tol1 : -tol1);
    const double fu = g(u);
    if (fu <= fx) {
      if (u >= x)
        a = x;
      else
        b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x)
        a = u;
      else
        b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return x;
}

double find_root(const std::function<double(double)>& f, Bracket br, double tol) {
  double a = br.lo, b = br.hi;
  double fa = f(a), fb = f(b);
  if (!std::isfinite(fa) || !std::isfinite(fb))
    throw NumericalError("find_root: non-finite endpoint evaluation");
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0) throw NumericalError("find_root: no sign change on bracket");

  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int it = 0; it < 300; ++it) {
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) + 0.5 * tol;
    const double xm = 0.5 * (c - b);
    if (std::fabs(fb) <= tol || std::fabs(xm) <= tol1) return b;

    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      const double s = fb / fa;
      double p, q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::fmin(3.0 * xm * q - std::fabs(tol1 * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::fabs(d) > tol1) ? d : ((xm >= 0.0) ? tol1 : -tol1);
    fb = f(b);
    if (!std::isfinite(fb)) throw NumericalError("find_root: non-finite evaluation");
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a; fc = fa;
      d = b - a; e = d;
    }
  }
  return b;
}

double curvature(const std::function<double(double)>& f, double x0, double h) {
  if (!(h > 0.0)) throw NumericalError("curvature: step must be positive");
  const double fp = f(x0 + h);
  const double f0 = f(x0);
  const double fm = f(x0 - h);
  if (!std::isfinite(fp) || !std::isfinite(f0) || !std::isfinite(fm))
    throw NumericalError("curvature: non-finite evaluation");
  return (fp - 2.0 * f0 + fm) / (h * h);
}

}  // namespace recap
