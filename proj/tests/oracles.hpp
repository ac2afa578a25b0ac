#pragma once

// Test-only oracles, independent of the library implementation paths they
// check: brute-force transport enumeration, central finite differences, and
// a Laplace-expansion determinant.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "regmix/measures.hpp"
#include "regmix/rng.hpp"

namespace oracles {

// Minimum transport cost over all nonnegative integer matrices with the
// given margins (weights scaled to integer units), by exhaustive recursion.
// Vertices of the transportation polytope are integral for integral margins,
// so this sweeps every vertex coupling.
inline double brute_force_transport(const std::vector<int>& a,
                                    const std::vector<int>& b,
                                    const Eigen::MatrixXd& cost,
                                    double unit) {
  const int k = static_cast<int>(a.size());
  const int kp = static_cast<int>(b.size());
  std::vector<int> arem = a, brem = b;
  double best = std::numeric_limits<double>::infinity();
  std::function<void(int, double)> rec = [&](int cell, double acc) {
    if (acc >= best) return;
    if (cell == k * kp) {
      best = acc;
      return;
    }
    const int i = cell / kp, j = cell % kp;
    const bool last_col = j == kp - 1;  // this cell closes row i
    const bool last_row = i == k - 1;   // this cell closes column j
    int lo = 0, hi = std::min(arem[i], brem[j]);
    if (last_col && last_row) {
      if (arem[i] != brem[j]) return;
      lo = hi = arem[i];
    } else if (last_col) {
      if (arem[i] > brem[j]) return;
      lo = hi = arem[i];
    } else if (last_row) {
      if (brem[j] > arem[i]) return;
      lo = hi = brem[j];
    }
    for (int f = lo; f <= hi; ++f) {
      arem[i] -= f;
      brem[j] -= f;
      rec(cell + 1, acc + f * unit * cost(i, j));
      arem[i] += f;
      brem[j] += f;
    }
  };
  rec(0, 0.0);
  return best;
}

inline double central_diff(const std::function<double(double)>& f, double x,
                           double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double central_diff2(const std::function<double(double)>& f, double x,
                            double h = 1e-4) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

inline double cross_diff(const std::function<double(double, double)>& f,
                         double x, double y, double h = 1e-4) {
  return (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) +
          f(x - h, y - h)) /
         (4.0 * h * h);
}

// Determinant by Laplace expansion along the first row; fine for n <= 8.
inline double laplace_determinant(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  if (n == 1) return m(0, 0);
  double det = 0.0;
  for (int c = 0; c < n; ++c) {
    Eigen::MatrixXd minor(n - 1, n - 1);
    for (int i = 1; i < n; ++i) {
      int cc = 0;
      for (int j = 0; j < n; ++j) {
        if (j == c) continue;
        minor(i - 1, cc++) = m(i, j);
      }
    }
    det += (c % 2 == 0 ? 1.0 : -1.0) * m(0, c) * laplace_determinant(minor);
  }
  return det;
}

// Random discrete measure on a shared box, for property tests.
inline regmix::MixingMeasure random_measure(int max_atoms, int d1, int d2,
                                            regmix::Rng& rng) {
  regmix::ParamBox box;
  box.theta1_lo.assign(d1, -2.0);
  box.theta1_hi.assign(d1, 2.0);
  box.theta2_lo.assign(d2, -2.0);
  box.theta2_hi.assign(d2, 2.0);
  const int k = 1 + static_cast<int>(rng.uniform_index(max_atoms));
  std::vector<regmix::Atom> atoms(k);
  std::vector<double> alpha(k, 1.0);
  const std::vector<double> weights = rng.dirichlet(alpha);
  for (int j = 0; j < k; ++j) {
    atoms[j].weight = weights[j];
    for (int c = 0; c < d1; ++c)
      atoms[j].theta1.push_back(rng.uniform(-2.0, 2.0));
    for (int c = 0; c < d2; ++c)
      atoms[j].theta2.push_back(rng.uniform(-2.0, 2.0));
  }
  return regmix::MixingMeasure(std::move(atoms), std::move(box));
}

// Random measure with weights on the quarter grid (multiples of 1/units).
inline regmix::MixingMeasure random_grid_measure(int max_atoms, int units,
                                                 int d1, regmix::Rng& rng,
                                                 std::vector<int>* int_weights) {
  regmix::ParamBox box;
  box.theta1_lo.assign(d1, -2.0);
  box.theta1_hi.assign(d1, 2.0);
  const int k = 1 + static_cast<int>(rng.uniform_index(
                        std::min(max_atoms, units)));
  // Composition of `units` into k positive parts.
  std::vector<int> parts(k, 1);
  for (int extra = 0; extra < units - k; ++extra)
    parts[rng.uniform_index(k)] += 1;
  std::vector<regmix::Atom> atoms(k);
  for (int j = 0; j < k; ++j) {
    atoms[j].weight = static_cast<double>(parts[j]) / units;
    for (int c = 0; c < d1; ++c)
      atoms[j].theta1.push_back(rng.uniform(-2.0, 2.0));
  }
  if (int_weights) *int_weights = parts;
  return regmix::MixingMeasure(std::move(atoms), std::move(box));
}

}  // namespace oracles
