#pragma once

// Discrete mixing measures over a compact parameter box, and exact order-r
// Wasserstein distances between them.  The optimal coupling is computed with
// the classic transportation simplex (north-west start, Bland pivoting), which
// is exact for these small dense problems.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "regmix/rng.hpp"

namespace regmix {

struct Atom {
  std::vector<double> theta1;
  std::vector<double> theta2;
  double weight = 0.0;
};

// Bounds of the compact parameter space Theta = Theta1 x Theta2.
struct ParamBox {
  std::vector<double> theta1_lo, theta1_hi;
  std::vector<double> theta2_lo, theta2_hi;

  std::size_t d1() const { return theta1_lo.size(); }
  std::size_t d2() const { return theta2_lo.size(); }

  void validate() const {
    if (theta1_lo.size() != theta1_hi.size() ||
        theta2_lo.size() != theta2_hi.size())
      throw std::invalid_argument("ParamBox: lo/hi dimension mismatch");
    for (std::size_t i = 0; i < theta1_lo.size(); ++i)
      if (!(theta1_lo[i] < theta1_hi[i]))
        throw std::invalid_argument("ParamBox: require lo < hi (theta1)");
    for (std::size_t i = 0; i < theta2_lo.size(); ++i)
      if (!(theta2_lo[i] < theta2_hi[i]))
        throw std::invalid_argument("ParamBox: require lo < hi (theta2)");
  }

  // Euclidean diameter of the box in the concatenated parameter space.
  double diameter() const {
    double s = 0.0;
    for (std::size_t i = 0; i < theta1_lo.size(); ++i) {
      const double d = theta1_hi[i] - theta1_lo[i];
      s += d * d;
    }
    for (std::size_t i = 0; i < theta2_lo.size(); ++i) {
      const double d = theta2_hi[i] - theta2_lo[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
};

class MixingMeasure {
 public:
  MixingMeasure() = default;
  MixingMeasure(std::vector<Atom> atoms, ParamBox box)
      : atoms_(std::move(atoms)), box_(std::move(box)) {}

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::vector<Atom>& atoms() { return atoms_; }
  const ParamBox& box() const { return box_; }
  std::size_t size() const { return atoms_.size(); }

  std::size_t d1() const { return atoms_.empty() ? 0 : atoms_[0].theta1.size(); }
  std::size_t d2() const { return atoms_.empty() ? 0 : atoms_[0].theta2.size(); }

  double weight_sum() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight;
    return s;
  }

  // weight_tol: allowed |sum - 1|.  check_box: enforce atom containment
  // (perturbed / loaded measures satisfy it; raw MCMC states need not).
  void validate(double weight_tol = 1e-12, bool check_box = false) const {
    if (atoms_.empty())
      throw std::invalid_argument("MixingMeasure: no atoms");
    for (const auto& a : atoms_) {
      if (a.theta1.size() != d1() || a.theta2.size() != d2())
        throw std::invalid_argument("MixingMeasure: ragged atom dimensions");
      if (a.weight < 0.0)
        throw std::invalid_argument("MixingMeasure: negative weight");
    }
    if (std::fabs(weight_sum() - 1.0) > weight_tol)
      throw std::invalid_argument("MixingMeasure: weights do not sum to 1");
    if (check_box) {
      if (box_.d1() != d1() || box_.d2() != d2())
        throw std::invalid_argument("MixingMeasure: box dimension mismatch");
      for (const auto& a : atoms_) {
        for (std::size_t i = 0; i < d1(); ++i)
          if (a.theta1[i] < box_.theta1_lo[i] || a.theta1[i] > box_.theta1_hi[i])
            throw std::invalid_argument("MixingMeasure: atom outside box");
        for (std::size_t i = 0; i < d2(); ++i)
          if (a.theta2[i] < box_.theta2_lo[i] || a.theta2[i] > box_.theta2_hi[i])
            throw std::invalid_argument("MixingMeasure: atom outside box");
      }
    }
  }

  void normalize() {
    const double s = weight_sum();
    if (s <= 0.0)
      throw std::invalid_argument("MixingMeasure: non-positive total weight");
    for (auto& a : atoms_) a.weight /= s;
  }

 private:
  std::vector<Atom> atoms_;
  ParamBox box_;
};

struct TransportPlan {
  Eigen::MatrixXd q;  // k x k' coupling, row sums = source weights
  double cost = 0.0;  // sum q_ij * rho^r
};

inline double atom_distance(const Atom& a, const Atom& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.theta1.size(); ++i) {
    const double d = a.theta1[i] - b.theta1[i];
    s += d * d;
  }
  for (std::size_t i = 0; i < a.theta2.size(); ++i) {
    const double d = a.theta2[i] - b.theta2[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Entry (i, j) = ||(theta1_i, theta2_i) - (theta1_j', theta2_j')||_2 ^ r.
inline Eigen::MatrixXd cost_matrix(const MixingMeasure& g,
                                   const MixingMeasure& h, int r) {
  if (r != 1 && r != 2) throw std::invalid_argument("cost_matrix: r in {1,2}");
  if (g.d1() != h.d1() || g.d2() != h.d2())
    throw std::invalid_argument("cost_matrix: atom dimension mismatch");
  Eigen::MatrixXd c(g.size(), h.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < h.size(); ++j) {
      const double d = atom_distance(g.atoms()[i], h.atoms()[j]);
      c(i, j) = (r == 1) ? d : d * d;
    }
  return c;
}

namespace detail {

// Exact solver for min sum f_ij c_ij subject to the transportation
// constraints.  Supplies/demands must each sum to (numerically) the same
// total.  Returns the optimal flow matrix.
inline Eigen::MatrixXd solve_transportation(const std::vector<double>& a,
                                            const std::vector<double>& b,
                                            const Eigen::MatrixXd& cost) {
  const int k = static_cast<int>(a.size());
  const int kp = static_cast<int>(b.size());
  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(k, kp);
  std::vector<std::vector<char>> basic(k, std::vector<char>(kp, 0));

  // North-west corner start: k + kp - 1 basic cells, possibly degenerate.
  {
    std::vector<double> arem = a, brem = b;
    int i = 0, j = 0;
    for (;;) {
      const double m = std::min(arem[i], brem[j]);
      flow(i, j) = m;
      basic[i][j] = 1;
      arem[i] -= m;
      brem[j] -= m;
      if (i == k - 1 && j == kp - 1) break;
      if (arem[i] == 0.0 && i < k - 1)
        ++i;
      else
        ++j;
    }
  }

  std::vector<double> u(k), v(kp);
  std::vector<char> useen(k), vseen(kp);
  std::vector<int> stack;

  const double kReducedTol = 1e-12;
  const int kMaxPivots = 100000;
  for (int pivot = 0; pivot < kMaxPivots; ++pivot) {
    // Duals from the basis tree, rooted at row 0 with u_0 = 0.
    std::fill(useen.begin(), useen.end(), 0);
    std::fill(vseen.begin(), vseen.end(), 0);
    u[0] = 0.0;
    useen[0] = 1;
    stack.assign(1, 0);  // nodes: rows are [0,k), cols are k + j
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node < k) {
        for (int j = 0; j < kp; ++j)
          if (basic[node][j] && !vseen[j]) {
            v[j] = cost(node, j) - u[node];
            vseen[j] = 1;
            stack.push_back(k + j);
          }
      } else {
        const int j = node - k;
        for (int i = 0; i < k; ++i)
          if (basic[i][j] && !useen[i]) {
            u[i] = cost(i, j) - v[j];
            useen[i] = 1;
            stack.push_back(i);
          }
      }
    }

    // Entering cell: first (row-major) non-basic cell with negative reduced
    // cost.  Lowest-index preference doubles as Bland's anti-cycling rule.
    int ei = -1, ej = -1;
    for (int i = 0; i < k && ei < 0; ++i)
      for (int j = 0; j < kp; ++j)
        if (!basic[i][j] && cost(i, j) - u[i] - v[j] < -kReducedTol) {
          ei = i;
          ej = j;
          break;
        }
    if (ei < 0) break;  // optimal

    // Unique cycle: path from row ei to col ej through the basis tree.
    // parent[] encodes the tree; rebuild by BFS from row ei.
    std::vector<int> parent(k + kp, -2);
    parent[ei] = -1;
    stack.assign(1, ei);
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node < k) {
        for (int j = 0; j < kp; ++j)
          if (basic[node][j] && parent[k + j] == -2) {
            parent[k + j] = node;
            stack.push_back(k + j);
          }
      } else {
        const int j = node - k;
        for (int i = 0; i < k; ++i)
          if (basic[i][j] && parent[i] == -2) {
            parent[i] = k + j;
            stack.push_back(i);
          }
      }
    }
    if (parent[k + ej] == -2)
      throw std::logic_error("transportation: basis tree is disconnected");

    // Walk the path col ej -> row ei; cells alternate -,+ starting from the
    // cell adjacent to the entering one on the column side.
    std::vector<std::pair<int, int>> minus_cells, plus_cells;
    int node = k + ej;
    bool minus = true;
    while (parent[node] != -1) {
      const int par = parent[node];
      const int row = node < k ? node : par;
      const int col = node < k ? par - k : node - k;
      (minus ? minus_cells : plus_cells).emplace_back(row, col);
      minus = !minus;
      node = par;
    }

    double theta = std::numeric_limits<double>::infinity();
    for (const auto& [i, j] : minus_cells) theta = std::min(theta, flow(i, j));
    // Leaving cell: lowest row-major index among the minimizers.
    int li = -1, lj = -1;
    for (const auto& [i, j] : minus_cells)
      if (flow(i, j) == theta) {
        if (li < 0 || i * kp + j < li * kp + lj) {
          li = i;
          lj = j;
        }
      }

    for (const auto& [i, j] : minus_cells) flow(i, j) -= theta;
    for (const auto& [i, j] : plus_cells) flow(i, j) += theta;
    flow(ei, ej) += theta;
    basic[ei][ej] = 1;
    basic[li][lj] = 0;
    flow(li, lj) = 0.0;
  }
  return flow;
}

}  // namespace detail

// Exact W_r between two normalized discrete measures.  Zero-weight atoms
// (below 1e-12) are transport-irrelevant and dropped before solving; the plan
// is reported in the original indexing with zero rows/columns for them.
inline std::pair<double, TransportPlan> wasserstein(const MixingMeasure& g,
                                                    const MixingMeasure& h,
                                                    int r) {
  if (r != 1 && r != 2) throw std::invalid_argument("wasserstein: r in {1,2}");
  if (g.size() == 0 || h.size() == 0)
    throw std::invalid_argument("wasserstein: empty measure");
  if (std::fabs(g.weight_sum() - 1.0) > 1e-9 ||
      std::fabs(h.weight_sum() - 1.0) > 1e-9)
    throw std::invalid_argument("wasserstein: measures must be normalized");

  // Kept atoms are put in a canonical (lexicographic) order before solving,
  // which makes the result invariant under relabeling, not just up to
  // floating-point noise from pivot order.
  const double kDropTol = 1e-12;
  auto atom_less = [](const Atom& x, const Atom& y) {
    if (x.theta1 != y.theta1) return x.theta1 < y.theta1;
    if (x.theta2 != y.theta2) return x.theta2 < y.theta2;
    return x.weight < y.weight;
  };
  auto kept_sorted = [&](const MixingMeasure& m) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m.atoms()[i].weight > kDropTol) idx.push_back(static_cast<int>(i));
    std::sort(idx.begin(), idx.end(), [&](int x, int y) {
      return atom_less(m.atoms()[x], m.atoms()[y]);
    });
    return idx;
  };
  const std::vector<int> gi = kept_sorted(g);
  const std::vector<int> hj = kept_sorted(h);
  std::vector<double> a, b;
  for (int i : gi) a.push_back(g.atoms()[i].weight);
  for (int j : hj) b.push_back(h.atoms()[j].weight);
  if (a.empty() || b.empty())
    throw std::invalid_argument("wasserstein: measure has no positive mass");

  const Eigen::MatrixXd full_cost = cost_matrix(g, h, r);
  Eigen::MatrixXd cost(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      cost(i, j) = full_cost(gi[i], hj[j]);

  const Eigen::MatrixXd flow = detail::solve_transportation(a, b, cost);

  TransportPlan plan;
  plan.q = Eigen::MatrixXd::Zero(g.size(), h.size());
  std::vector<std::pair<double, double>> terms;  // (cost, mass)
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if (flow(i, j) > 0.0) {
        plan.q(gi[i], hj[j]) = flow(i, j);
        terms.emplace_back(cost(i, j), flow(i, j));
      }
  // Accumulate in a canonical order so the value is invariant under atom
  // relabeling whenever the optimal plan is unique.
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (const auto& [c, m] : terms) total += c * m;
  plan.cost = total;

  const double dist = (r == 1) ? total : std::sqrt(total);
  return {dist, plan};
}

inline double wasserstein_distance(const MixingMeasure& g,
                                   const MixingMeasure& h, int r) {
  return wasserstein(g, h, r).first;
}

// Uniform perturbation around g0 (same atom count): every theta coordinate is
// shifted by U(-radius, radius) and clamped to the box; weights are shifted by
// U(-radius, radius), floored at 1e-12 and renormalized.
inline MixingMeasure perturb(const MixingMeasure& g0, double radius, Rng& rng) {
  if (radius <= 0.0) throw std::invalid_argument("perturb: radius must be > 0");
  g0.validate(1e-9);
  const ParamBox& box = g0.box();
  if (box.d1() != g0.d1() || box.d2() != g0.d2())
    throw std::invalid_argument("perturb: measure has no usable box");

  std::vector<Atom> atoms = g0.atoms();
  for (auto& atom : atoms) {
    for (std::size_t c = 0; c < atom.theta1.size(); ++c) {
      const double t = atom.theta1[c] + rng.uniform(-radius, radius);
      atom.theta1[c] = std::clamp(t, box.theta1_lo[c], box.theta1_hi[c]);
    }
    for (std::size_t c = 0; c < atom.theta2.size(); ++c) {
      const double t = atom.theta2[c] + rng.uniform(-radius, radius);
      atom.theta2[c] = std::clamp(t, box.theta2_lo[c], box.theta2_hi[c]);
    }
  }
  double total = 0.0;
  for (auto& atom : atoms) {
    atom.weight = std::max(atom.weight + rng.uniform(-radius, radius), 1e-12);
    total += atom.weight;
  }
  for (auto& atom : atoms) atom.weight /= total;

  return MixingMeasure(std::move(atoms), box);
}

// One-line description of the perturbation scheme, recorded in experiment
// metadata so results are auditable.
inline const char* perturbation_scheme_note() {
  return "theta: +U(-radius,radius) per coordinate, clamped to box; "
         "weights: +U(-radius,radius), floored at 1e-12, renormalized";
}

// ---- JSON (schema: {"atoms":[{"theta1":[],"theta2":[],"weight":w}],
//                     "box":{"theta1_lo":[],...}}) ----

inline void to_json(nlohmann::json& j, const ParamBox& box) {
  j = nlohmann::json{{"theta1_lo", box.theta1_lo},
                     {"theta1_hi", box.theta1_hi},
                     {"theta2_lo", box.theta2_lo},
                     {"theta2_hi", box.theta2_hi}};
}

inline void from_json(const nlohmann::json& j, ParamBox& box) {
  box.theta1_lo = j.value("theta1_lo", std::vector<double>{});
  box.theta1_hi = j.value("theta1_hi", std::vector<double>{});
  box.theta2_lo = j.value("theta2_lo", std::vector<double>{});
  box.theta2_hi = j.value("theta2_hi", std::vector<double>{});
  box.validate();
}

inline void to_json(nlohmann::json& j, const MixingMeasure& g) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : g.atoms())
    atoms.push_back(nlohmann::json{
        {"theta1", a.theta1}, {"theta2", a.theta2}, {"weight", a.weight}});
  j = nlohmann::json{{"atoms", atoms}, {"box", g.box()}};
}

inline void from_json(const nlohmann::json& j, MixingMeasure& g) {
  std::vector<Atom> atoms;
  for (const auto& ja : j.at("atoms")) {
    Atom a;
    a.theta1 = ja.value("theta1", std::vector<double>{});
    a.theta2 = ja.value("theta2", std::vector<double>{});
    a.weight = ja.at("weight").get<double>();
    atoms.push_back(std::move(a));
  }
  ParamBox box = j.at("box").get<ParamBox>();
  g = MixingMeasure(std::move(atoms), std::move(box));
  g.validate(1e-9, true);
}

}  // namespace regmix
