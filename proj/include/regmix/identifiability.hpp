#pragma once

// Closed-form and numeric diagnostics for strong identifiability: the
// binomial complexity-level rule, negative-binomial pathology detection, the
// Vandermonde-style determinant identity, and a Gram-matrix rank proxy for
// the linear-independence conditions.
//
// The numeric rank test is a grid-resolution proxy for the almost-everywhere
// conditions: it can falsify identifiability at the grid, never certify it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "regmix/model.hpp"

namespace regmix {

struct IdentifiabilityReport {
  int order_claimed = -1;  // -1 encodes "none"
  std::string rule_fired;
  std::vector<std::pair<int, int>> offending_pairs;
  double smallest_singular_value =
      std::numeric_limits<double>::quiet_NaN();
  double singular_ratio = std::numeric_limits<double>::quiet_NaN();
  double threshold = 1e-6;
  std::string note;
};

// Proposition-level rule for Binomial(N) mixtures: first order iff
// 2k <= N+1, second order iff 3k <= N+1.
inline bool binomial_complexity_ok(int k, int n, int order) {
  if (k < 1 || n < 1 || (order != 1 && order != 2))
    throw std::invalid_argument("binomial_complexity_ok: bad arguments");
  return order == 1 ? 2 * k <= n + 1 : 3 * k <= n + 1;
}

// Pairs (i, j) of (mu, phi) atoms hitting the NB pathology: equal
// mean-to-dispersion ratio and dispersion gap 1 (order 1) or in {1, 2}
// (order 2), both within tol.
inline std::vector<std::pair<int, int>> nb_pathological_pairs(
    const std::vector<std::pair<double, double>>& atoms, int order,
    double tol) {
  if (order != 1 && order != 2)
    throw std::invalid_argument("nb_pathological_pairs: order in {1,2}");
  if (tol < 0.0)
    throw std::invalid_argument("nb_pathological_pairs: tol >= 0");
  for (const auto& [mu, phi] : atoms)
    if (!(mu > 0.0) || !(phi > 0.0))
      throw std::invalid_argument("nb_pathological_pairs: require mu,phi > 0");
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < static_cast<int>(atoms.size()); ++i)
    for (int j = i + 1; j < static_cast<int>(atoms.size()); ++j) {
      const double ratio_gap =
          std::fabs(atoms[i].first / atoms[i].second -
                    atoms[j].first / atoms[j].second);
      if (ratio_gap > tol) continue;
      const double dgap = std::fabs(atoms[i].second - atoms[j].second);
      bool hit = std::fabs(dgap - 1.0) <= tol;
      if (order == 2) hit = hit || std::fabs(dgap - 2.0) <= tol;
      if (hit) pairs.emplace_back(i, j);
    }
  return pairs;
}

// Regression wrapper: atoms (mu_j(x), phi_j(x)) probed on an x grid; a pair
// is reported only if it is pathological at every probe point.
inline std::vector<std::pair<int, int>> nb_pathological_pairs(
    const ModelShape& shape, const MixingMeasure& g, int order, double tol,
    const std::vector<std::vector<double>>& probes) {
  if (probes.empty())
    throw std::invalid_argument("nb_pathological_pairs: no probe points");
  std::optional<std::vector<std::pair<int, int>>> agreed;
  for (const auto& x : probes) {
    std::vector<std::pair<double, double>> atoms;
    for (const auto& atom : g.atoms()) atoms.push_back(shape.mu_phi(atom, x));
    auto pairs = nb_pathological_pairs(atoms, order, tol);
    if (!agreed) {
      agreed = std::move(pairs);
    } else {
      std::vector<std::pair<int, int>> kept;
      for (const auto& p : *agreed)
        if (std::find(pairs.begin(), pairs.end(), p) != pairs.end())
          kept.push_back(p);
      *agreed = std::move(kept);
    }
    if (agreed->empty()) break;
  }
  return *agreed;
}

struct PathologyGapSummary {
  std::vector<double> gaps;  // mu1(x)/phi1 - mu2(x)/phi2 per row
  double mean = 0.0;
  double sd = 0.0;
  double band = 0.0;
  double fraction_within_band = 0.0;
};

// Per-row pathology gap of a 2-component NB regression, suitable for
// histogramming, plus the band filter used by the subsampling workflow.
inline PathologyGapSummary nb_pathology_gap(
    const ModelShape& shape, const MixingMeasure& g,
    const std::vector<std::vector<double>>& xs, double band = 0.3) {
  if (g.size() != 2)
    throw std::invalid_argument("nb_pathology_gap: exactly 2 components");
  if (shape.kernel.family() != Family::kNegBinomial)
    throw std::invalid_argument("nb_pathology_gap: negbin kernel required");
  PathologyGapSummary out;
  out.band = band;
  double s = 0.0, ss = 0.0;
  long within = 0;
  for (const auto& x : xs) {
    const auto [mu1, phi1] = shape.mu_phi(g.atoms()[0], x);
    const auto [mu2, phi2] = shape.mu_phi(g.atoms()[1], x);
    const double gap = mu1 / phi1 - mu2 / phi2;
    out.gaps.push_back(gap);
    s += gap;
    ss += gap * gap;
    if (std::fabs(gap) <= band) ++within;
  }
  const double n = static_cast<double>(out.gaps.size());
  out.mean = s / n;
  out.sd = std::sqrt(std::max(0.0, ss / n - out.mean * out.mean));
  out.fraction_within_band = within / n;
  return out;
}

inline PathologyGapSummary nb_pathology_gap(const ModelShape& shape,
                                            const MixingMeasure& g,
                                            const Dataset& data,
                                            double band = 0.3) {
  return nb_pathology_gap(shape, g, data.x, band);
}

inline PathologyGapSummary nb_pathology_gap(const ModelShape& shape,
                                            const MixingMeasure& g,
                                            const CovariateDistribution& px,
                                            std::size_t mc_points,
                                            std::uint64_t seed,
                                            double band = 0.3) {
  Rng rng(seed);
  std::vector<std::vector<double>> xs;
  xs.reserve(mc_points);
  for (std::size_t i = 0; i < mc_points; ++i) xs.push_back(px.draw(rng));
  return nb_pathology_gap(shape, g, xs, band);
}

// The 2K x 2K matrix with columns (q_i^m)_m and (m q_i^{m-1})_m: its
// determinant equals prod_{i<j} (q_i - q_j)^4.  Returns (det, product).
inline std::pair<double, double> vandermonde_d1_det(
    const std::vector<double>& q) {
  const int k = static_cast<int>(q.size());
  if (k < 2 || k > 5)
    throw std::invalid_argument("vandermonde_d1_det: 2 <= K <= 5");
  Eigen::MatrixXd d1(2 * k, 2 * k);
  for (int m = 0; m < 2 * k; ++m)
    for (int i = 0; i < k; ++i) {
      d1(m, i) = std::pow(q[i], m);
      d1(m, k + i) = m == 0 ? 0.0 : m * std::pow(q[i], m - 1);
    }
  const double det = Eigen::FullPivLU<Eigen::MatrixXd>(d1).determinant();
  double prod = 1.0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const double d = q[i] - q[j];
      prod *= d * d * d * d;
    }
  return {det, prod};
}

// Numeric strong-identifiability proxy: assembles the matrix whose columns
// are {f_j} plus theta-derivative columns (chain rule through the links) up
// to the requested order, evaluated over the (x, y) grid, and reports the
// singular-value ratio of the column space.
inline IdentifiabilityReport numeric_strong_identifiability(
    const ModelShape& shape, const MixingMeasure& g, int order,
    const std::vector<std::vector<double>>& x_grid,
    const std::vector<double>& y_grid, double threshold = 1e-6) {
  if (order != 1 && order != 2)
    throw std::invalid_argument("numeric_strong_identifiability: order 1|2");
  if (x_grid.empty() || y_grid.empty())
    throw std::invalid_argument("numeric_strong_identifiability: empty grid");
  shape.validate();
  const Kernel& kernel = shape.kernel;
  const std::size_t d1 = shape.d1();
  const std::size_t d2 = shape.d2();
  const std::size_t k = g.size();

  // Columns per component: 1 density + d1 + d2 first-order, then all distinct
  // second-order terms when order == 2.
  std::size_t per_comp = 1 + d1 + d2;
  if (order == 2)
    per_comp += d1 * (d1 + 1) / 2 + d2 * (d2 + 1) / 2 + d1 * d2;
  const std::size_t cols = per_comp * k;
  const std::size_t rows = x_grid.size() * y_grid.size();

  Eigen::MatrixXd a(rows, cols);
  std::size_t row = 0;
  for (const auto& x : x_grid) {
    for (double y : y_grid) {
      std::size_t col = 0;
      for (const auto& atom : g.atoms()) {
        const auto [mu, phi] = shape.mu_phi(atom, x);
        kernel.check_params(mu, phi);
        const double f = kernel.density(y, mu, phi);
        const double fmu = kernel.d_mu(y, mu, phi);
        const double fphi = d2 > 0 ? kernel.d_phi(y, mu, phi) : 0.0;
        const Eigen::VectorXd g1 = shape.link1.grad_theta(x, atom.theta1);
        Eigen::VectorXd g2;
        if (d2 > 0) g2 = shape.link2->grad_theta(x, atom.theta2);

        a(row, col++) = f;
        for (std::size_t c = 0; c < d1; ++c) a(row, col++) = fmu * g1(c);
        for (std::size_t c = 0; c < d2; ++c) a(row, col++) = fphi * g2(c);

        if (order == 2) {
          const double fmu2 = kernel.d_mu2(y, mu, phi);
          const double fphi2 = d2 > 0 ? kernel.d_phi2(y, mu, phi) : 0.0;
          const double fmuphi = d2 > 0 ? kernel.d_mu_phi(y, mu, phi) : 0.0;
          const Eigen::MatrixXd h1 = shape.link1.hess_theta(x, atom.theta1);
          Eigen::MatrixXd h2;
          if (d2 > 0) h2 = shape.link2->hess_theta(x, atom.theta2);
          for (std::size_t ca = 0; ca < d1; ++ca)
            for (std::size_t cb = ca; cb < d1; ++cb)
              a(row, col++) = fmu2 * g1(ca) * g1(cb) + fmu * h1(ca, cb);
          for (std::size_t ca = 0; ca < d2; ++ca)
            for (std::size_t cb = ca; cb < d2; ++cb)
              a(row, col++) = fphi2 * g2(ca) * g2(cb) + fphi * h2(ca, cb);
          for (std::size_t ca = 0; ca < d1; ++ca)
            for (std::size_t cb = 0; cb < d2; ++cb)
              a(row, col++) = fmuphi * g1(ca) * g2(cb);
        }
      }
      ++row;
    }
  }

  // sigma_min over all column directions: sqrt of the extreme eigenvalues of
  // A'A (n_cols is small).  Using the ratio makes the verdict invariant to
  // column scaling.
  const Eigen::MatrixXd gram = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double lo = std::max(0.0, eig.eigenvalues().minCoeff());
  const double hi = std::max(0.0, eig.eigenvalues().maxCoeff());

  IdentifiabilityReport report;
  report.rule_fired = "numeric";
  report.threshold = threshold;
  report.smallest_singular_value = std::sqrt(lo);
  report.singular_ratio = hi > 0.0 ? std::sqrt(lo / hi) : 0.0;
  report.order_claimed = report.singular_ratio > threshold ? order : -1;
  report.note = "grid-resolution proxy; can falsify, not certify";
  return report;
}

// CLI-level composite: closed-form rules first, numeric fallback alongside.
inline IdentifiabilityReport check_identifiability(
    const ModelShape& shape, const MixingMeasure& g, int order,
    const std::vector<std::vector<double>>& x_grid,
    const std::vector<double>& y_grid, double threshold = 1e-6,
    double pathology_tol = 1e-6) {
  IdentifiabilityReport report = numeric_strong_identifiability(
      shape, g, order, x_grid, y_grid, threshold);
  const int k = static_cast<int>(g.size());
  if (shape.kernel.family() == Family::kBinomial) {
    const int n = shape.kernel.binomial_n();
    if (!binomial_complexity_ok(k, n, order)) {
      report.rule_fired = "binomial_complexity";
      report.order_claimed = -1;
      report.note = "complexity rule: order-" + std::to_string(order) +
                    " requires " + std::to_string(order == 1 ? 2 * k : 3 * k) +
                    " <= N+1 = " + std::to_string(n + 1);
    } else if (order == 2 && 3 * k <= n + 1 && n + 1 < 6 * k) {
      report.note +=
          "; second-order rule 3k <= N+1 applied while N+1 < 6k (statement "
          "vs appendix discrepancy recorded)";
    }
  }
  if (shape.kernel.family() == Family::kNegBinomial) {
    auto pairs = nb_pathological_pairs(shape, g, order, pathology_tol, x_grid);
    if (!pairs.empty()) {
      report.rule_fired = "nb_pathology";
      report.order_claimed = -1;
      report.offending_pairs = std::move(pairs);
    }
  }
  return report;
}

inline void to_json(nlohmann::json& j, const IdentifiabilityReport& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [a, b] : r.offending_pairs)
    pairs.push_back(nlohmann::json::array({a, b}));
  j = nlohmann::json{
      {"order_claimed", r.order_claimed == -1
                            ? nlohmann::json("none")
                            : nlohmann::json(r.order_claimed)},
      {"rule_fired", r.rule_fired},
      {"offending_pairs", pairs},
      {"smallest_singular_value", r.smallest_singular_value},
      {"singular_ratio", r.singular_ratio},
      {"threshold", r.threshold},
      {"note", r.note}};
}

}  // namespace regmix
