#pragma once

// Adaptive Simpson quadrature for the continuous-response inner integrals.
// Integrands here are mixture densities (or |differences| of them), so the
// caller always supplies breakpoints at the component means to keep the
// initial panels from straddling every peak.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace regmix {

namespace detail {

template <typename Fn>
double adaptive_simpson_rec(const Fn& f, double a, double b, double fa,
                            double fm, double fb, double whole, double tol,
                            int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol * 0.5,
                              depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol * 0.5,
                              depth - 1);
}

}  // namespace detail

template <typename Fn>
double adaptive_simpson(const Fn& f, double a, double b, double tol,
                        int max_depth = 28) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol,
                                      max_depth);
}

// Integrate over [lo, hi] split at the supplied interior knots.
template <typename Fn>
double integrate_with_knots(const Fn& f, double lo, double hi,
                            std::vector<double> knots, double tol) {
  knots.push_back(lo);
  knots.push_back(hi);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = std::max(knots[i], lo);
    const double b = std::min(knots[i + 1], hi);
    if (b <= a) continue;
    total += adaptive_simpson(f, a, b, tol / static_cast<double>(knots.size()));
  }
  return total;
}

}  // namespace regmix
