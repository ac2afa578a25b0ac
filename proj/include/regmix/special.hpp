#pragma once

// Scalar special functions used by the density kernels.  Self-contained so the
// library does not pull in GSL/Boost for a handful of classic approximations.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace regmix {

// Log-gamma via the Lanczos approximation (g = 7, 9 coefficients).
// Relative accuracy is ~1e-14 over the positive axis, which is what the
// negative-binomial identities in the test suite rely on.
inline double log_gamma(double x) {
  static const double kCoef[9] = {
      0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
      771.32342877765313,       -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};
  static const double kHalfLogTwoPi = 0.91893853320467274178032973640562;

  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x <= 0.0 && x == std::floor(x))
    return std::numeric_limits<double>::infinity();
  if (x < 0.5) {
    // Reflection: log|Gamma(x)| = log(pi / |sin(pi x)|) - log Gamma(1 - x).
    return std::log(M_PI / std::fabs(std::sin(M_PI * x))) - log_gamma(1.0 - x);
  }
  const double z = x - 1.0;
  double acc = kCoef[0];
  for (int i = 1; i < 9; ++i) acc += kCoef[i] / (z + i);
  const double t = z + 7.5;
  return kHalfLogTwoPi + (z + 0.5) * std::log(t) - t + std::log(acc);
}

// Digamma: recur up to x >= 8, then the asymptotic Bernoulli series.
inline double digamma(double x) {
  if (x <= 0.0 && x == std::floor(x))
    return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  if (x < 0.0) {
    // psi(x) = psi(1-x) - pi cot(pi x)
    return digamma(1.0 - x) - M_PI / std::tan(M_PI * x);
  }
  while (x < 10.0) {
    value -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // ln x - 1/(2x) - 1/(12x^2) + 1/(120x^4) - 1/(252x^6) + 1/(240x^8) - ...
  double series = inv2 * (1.0 / 12.0 -
                  inv2 * (1.0 / 120.0 -
                  inv2 * (1.0 / 252.0 -
                  inv2 * (1.0 / 240.0 -
                  inv2 * (1.0 / 132.0 -
                  inv2 * (691.0 / 32760.0))))));
  return value + std::log(x) - 0.5 * inv - series;
}

// Trigamma by the same recur-then-asymptotic scheme.
inline double trigamma(double x) {
  if (x <= 0.0 && x == std::floor(x))
    return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  while (x < 10.0) {
    value += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // 1/x + 1/(2x^2) + 1/(6x^3) - 1/(30x^5) + 1/(42x^7) - 1/(30x^9) + ...
  double series = inv * (1.0 +
                  inv * (0.5 +
                  inv * (1.0 / 6.0 -
                  inv2 * (1.0 / 30.0 -
                  inv2 * (1.0 / 42.0 -
                  inv2 * (1.0 / 30.0 -
                  inv2 * (5.0 / 66.0 -
                  inv2 * (691.0 / 2730.0))))))));
  return value + series;
}

inline double log_factorial(double n) { return log_gamma(n + 1.0); }

inline double log_binomial_coef(double n, double k) {
  return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}

// Regularized lower incomplete gamma P(a, x); series for x < a+1, continued
// fraction (modified Lentz) otherwise.
inline double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0)
    throw std::invalid_argument("gamma_p: require a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  const double lg = log_gamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Q(a, x) continued fraction.
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace regmix
