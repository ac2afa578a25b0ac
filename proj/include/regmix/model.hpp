#pragma once

// The mixture-of-regressions conditional density f_G(y|x): evaluation,
// simulation, likelihood, and distance functionals between conditional
// densities (expected total variation / Hellinger, prediction error).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "regmix/kernels.hpp"
#include "regmix/links.hpp"
#include "regmix/measures.hpp"
#include "regmix/parallel.hpp"
#include "regmix/quadrature.hpp"
#include "regmix/rng.hpp"

namespace regmix {

struct Dataset {
  std::vector<std::vector<double>> x;  // n rows of p covariates
  std::vector<double> y;
  std::vector<int> labels;  // optional simulation ground truth, may be empty

  std::size_t size() const { return y.size(); }
  std::size_t covariate_dim() const { return x.empty() ? 0 : x[0].size(); }

  void validate() const {
    if (y.empty()) throw std::invalid_argument("dataset: empty");
    if (x.size() != y.size())
      throw std::invalid_argument("dataset: x/y length mismatch");
    for (const auto& row : x)
      if (row.size() != covariate_dim())
        throw std::invalid_argument("dataset: ragged covariate rows");
    for (const auto& row : x)
      for (double v : row)
        if (!std::isfinite(v))
          throw std::invalid_argument("dataset: non-finite covariate");
    for (double v : y)
      if (!std::isfinite(v))
        throw std::invalid_argument("dataset: non-finite response");
  }
};

// CSV with a header row: x1,...,xp,y.  %.17g round-trips doubles and the
// parse path is locale-independent.
inline void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const std::size_t p = data.covariate_dim();
  for (std::size_t c = 0; c < p; ++c) out << "x" << (c + 1) << ",";
  out << "y\n";
  char buf[40];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t c = 0; c < p; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.x[i][c]);
      out << buf << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", data.y[i]);
    out << buf << "\n";
  }
}

inline double parse_double_field(const std::string& field) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw std::runtime_error("csv: cannot parse number '" + field + "'");
  return value;
}

inline Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty file");
  std::size_t cols = 1 + std::count(line.begin(), line.end(), ',');
  if (cols < 2) throw std::runtime_error("csv: need at least x1 and y");
  Dataset data;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(parse_double_field(field));
    if (row.size() != cols) throw std::runtime_error("csv: ragged row");
    data.y.push_back(row.back());
    row.pop_back();
    data.x.push_back(std::move(row));
  }
  data.validate();
  return data;
}

struct CovariateDistribution {
  enum class Kind { kUniform, kEmpirical };
  Kind kind = Kind::kUniform;
  std::vector<double> lo, hi;                // uniform
  std::vector<std::vector<double>> rows;     // empirical

  static CovariateDistribution uniform(std::vector<double> lo_,
                                       std::vector<double> hi_) {
    if (lo_.size() != hi_.size() || lo_.empty())
      throw std::invalid_argument("covariates: lo/hi mismatch");
    for (std::size_t i = 0; i < lo_.size(); ++i)
      if (!(lo_[i] < hi_[i]))
        throw std::invalid_argument("covariates: require lo < hi");
    CovariateDistribution d;
    d.kind = Kind::kUniform;
    d.lo = std::move(lo_);
    d.hi = std::move(hi_);
    return d;
  }

  static CovariateDistribution empirical(std::vector<std::vector<double>> r) {
    if (r.empty()) throw std::invalid_argument("covariates: no rows");
    CovariateDistribution d;
    d.kind = Kind::kEmpirical;
    d.rows = std::move(r);
    return d;
  }

  std::size_t dim() const {
    return kind == Kind::kUniform ? lo.size() : rows[0].size();
  }

  std::vector<double> draw(Rng& rng) const {
    if (kind == Kind::kUniform) {
      std::vector<double> x(lo.size());
      for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = rng.uniform(lo[i], hi[i]);
      return x;
    }
    return rows[rng.uniform_index(rows.size())];
  }
};

// Everything about a model except the mixing measure: enough to fit, and the
// contract the fitted measure must satisfy.
struct ModelShape {
  Kernel kernel;
  Link link1;
  std::optional<Link> link2;
  std::optional<double> dispersion;  // fixed phi shared by all components
  ParamBox box;
  std::optional<CovariateDistribution> px;

  std::size_t d1() const { return link1.param_dim(); }
  std::size_t d2() const { return link2 ? link2->param_dim() : 0; }

  void validate() const {
    box.validate();
    if (kernel.has_dispersion()) {
      if (link2.has_value() == dispersion.has_value())
        throw std::invalid_argument(
            "model: dispersion family needs exactly one of link2 / fixed "
            "dispersion");
      if (dispersion && !(*dispersion > 0.0))
        throw std::invalid_argument("model: fixed dispersion must be > 0");
    } else if (link2 || dispersion) {
      throw std::invalid_argument(
          "model: family has no dispersion parameter");
    }
    if (box.d1() != d1() || box.d2() != d2())
      throw std::invalid_argument("model: box does not match link dims");
  }

  // (mu, phi) for one atom at covariate x.
  std::pair<double, double> mu_phi(const Atom& atom,
                                   const std::vector<double>& x) const {
    const double mu = link1.eval(x, atom.theta1);
    double phi = 0.0;
    if (link2)
      phi = link2->eval(x, atom.theta2);
    else if (dispersion)
      phi = *dispersion;
    return {mu, phi};
  }
};

class Model {
 public:
  Model() = default;
  Model(ModelShape shape, MixingMeasure g)
      : shape_(std::move(shape)), g_(std::move(g)) {
    shape_.validate();
    g_.validate(1e-9);
    if (g_.d1() != shape_.d1() || g_.d2() != shape_.d2())
      throw std::invalid_argument("model: measure dims do not match links");
  }

  const ModelShape& shape() const { return shape_; }
  const MixingMeasure& mixing_measure() const { return g_; }
  const Kernel& kernel() const { return shape_.kernel; }

  // log f_G(y|x) by log-sum-exp across components.  Returns -inf only when
  // every component assigns a true zero; sub-normal magnitudes stay exact in
  // log space (the -745 underflow floor applies to exp(), not to us).
  double conditional_log_density(double y, const std::vector<double>& x) const {
    double best = -std::numeric_limits<double>::infinity();
    thread_local std::vector<double> terms;
    terms.clear();
    for (const auto& atom : g_.atoms()) {
      if (atom.weight <= 0.0) continue;
      const auto [mu, phi] = shape_.mu_phi(atom, x);
      shape_.kernel.check_params(mu, phi);
      const double t =
          std::log(atom.weight) + shape_.kernel.log_density(y, mu, phi);
      terms.push_back(t);
      best = std::max(best, t);
    }
    if (best == -std::numeric_limits<double>::infinity()) return best;
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - best);
    return best + std::log(acc);
  }

  double conditional_density(double y, const std::vector<double>& x) const {
    return std::exp(conditional_log_density(y, x));
  }

  // Sum of per-observation log densities; -inf signals a zero-density
  // observation (invalid model/data pairing).
  double log_likelihood(const Dataset& data) const {
    data.validate();
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double l = conditional_log_density(data.y[i], data.x[i]);
      if (l == -std::numeric_limits<double>::infinity())
        return -std::numeric_limits<double>::infinity();
      total += l;
    }
    return total;
  }

  Dataset simulate(const CovariateDistribution& px, std::size_t n, Rng& rng,
                   bool keep_labels = true) const {
    if (n < 1) throw std::invalid_argument("simulate: n >= 1");
    Dataset data;
    data.x.reserve(n);
    data.y.reserve(n);
    if (keep_labels) data.labels.reserve(n);
    const auto& atoms = g_.atoms();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> x = px.draw(rng);
      const double u = rng.uniform();
      double cum = 0.0;
      std::size_t j = atoms.size() - 1;
      for (std::size_t c = 0; c < atoms.size(); ++c) {
        cum += atoms[c].weight;
        if (u < cum) {
          j = c;
          break;
        }
      }
      const auto [mu, phi] = shape_.mu_phi(atoms[j], x);
      shape_.kernel.check_params(mu, phi);
      data.y.push_back(shape_.kernel.sample(mu, phi, rng));
      data.x.push_back(std::move(x));
      if (keep_labels) data.labels.push_back(static_cast<int>(j));
    }
    return data;
  }

 private:
  ModelShape shape_;
  MixingMeasure g_;
};

struct DistanceEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t mc_points = 0;
  int workers = 1;
};

namespace detail {

// Pointwise distance between two conditional mixtures at a fixed covariate:
// exact truncated sums for count kernels, adaptive quadrature for the
// continuous ones.  integrand_tv selects 0.5|fA-fB| versus 0.5(sqrt fA -
// sqrt fB)^2.
inline double conditional_distance_at_x(const Model& a, const Model& b,
                                        const std::vector<double>& x,
                                        bool integrand_tv) {
  const Kernel& ka = a.kernel();
  auto term = [&](double fa, double fb) {
    if (integrand_tv) return 0.5 * std::fabs(fa - fb);
    const double d = std::sqrt(fa) - std::sqrt(fb);
    return 0.5 * d * d;
  };
  if (ka.is_discrete()) {
    long ymax = 0;
    for (const Model* m : {&a, &b})
      for (const auto& atom : m->mixing_measure().atoms()) {
        if (atom.weight <= 0.0) continue;
        const auto [mu, phi] = m->shape().mu_phi(atom, x);
        ymax = std::max(ymax, m->kernel().truncation_ymax(mu, phi));
      }
    double total = 0.0;
    for (long y = 0; y <= ymax; ++y) {
      const double yy = static_cast<double>(y);
      total += term(a.conditional_density(yy, x), b.conditional_density(yy, x));
    }
    return total;
  }
  // Continuous: integrate over the union of +-12 sigma component windows,
  // with knots at every component mean so no peak hides inside one panel.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::vector<double> knots;
  for (const Model* m : {&a, &b})
    for (const auto& atom : m->mixing_measure().atoms()) {
      if (atom.weight <= 0.0) continue;
      const auto [mu, phi] = m->shape().mu_phi(atom, x);
      const double sd = std::sqrt(m->kernel().variance(mu, phi));
      lo = std::min(lo, mu - 12.0 * sd);
      hi = std::max(hi, mu + 12.0 * sd);
      for (double off : {-6.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 6.0})
        knots.push_back(mu + off * sd);
    }
  auto f = [&](double y) {
    return term(a.conditional_density(y, x), b.conditional_density(y, x));
  };
  return integrate_with_knots(f, lo, hi, std::move(knots), 1e-8);
}

inline void check_comparable(const Model& a, const Model& b) {
  if (a.kernel().family() != b.kernel().family())
    throw std::invalid_argument("distance: mismatched kernel families");
  if (a.kernel().family() == Family::kBinomial &&
      a.kernel().binomial_n() != b.kernel().binomial_n())
    throw std::invalid_argument("distance: mismatched binomial supports");
}

// Monte Carlo average over X of a per-x functional, chunked per worker with
// fixed-stride seed splitting; bitwise reproducible for a fixed worker count.
template <typename PerX>
DistanceEstimate mc_expect_over_x(const CovariateDistribution& px,
                                  std::size_t mc_points, std::uint64_t seed,
                                  int workers, const PerX& per_x) {
  if (mc_points < 1) throw std::invalid_argument("mc_points >= 1");
  workers = std::max(1, workers);
  const std::size_t chunks = static_cast<std::size_t>(workers);
  std::vector<double> sums(chunks, 0.0), sumsqs(chunks, 0.0);
  std::vector<std::size_t> counts(chunks, 0);
  parallel_for(chunks, workers, [&](std::size_t w) {
    Rng rng(derive_seed(seed, w));
    const std::size_t n0 = mc_points / chunks;
    const std::size_t extra = w < mc_points % chunks ? 1 : 0;
    const std::size_t n = n0 + extra;
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = per_x(px.draw(rng));
      s += v;
      ss += v * v;
    }
    sums[w] = s;
    sumsqs[w] = ss;
    counts[w] = n;
  });
  double s = 0.0, ss = 0.0;
  std::size_t n = 0;
  for (std::size_t w = 0; w < chunks; ++w) {
    s += sums[w];
    ss += sumsqs[w];
    n += counts[w];
  }
  DistanceEstimate est;
  est.value = s / static_cast<double>(n);
  const double var =
      std::max(0.0, ss / static_cast<double>(n) - est.value * est.value);
  est.std_error = std::sqrt(var / static_cast<double>(n));
  est.mc_points = n;
  est.workers = workers;
  return est;
}

}  // namespace detail

// E_X V(f_A(.|X), f_B(.|X)) by Monte Carlo over X.
inline DistanceEstimate expected_total_variation(const Model& a,
                                                 const Model& b,
                                                 const CovariateDistribution& px,
                                                 std::size_t mc_points,
                                                 std::uint64_t seed,
                                                 int workers = 1) {
  detail::check_comparable(a, b);
  return detail::mc_expect_over_x(
      px, mc_points, seed, workers, [&](const std::vector<double>& x) {
        return detail::conditional_distance_at_x(a, b, x, true);
      });
}

// E_X d_H^2(f_A(.|X), f_B(.|X)).
inline DistanceEstimate expected_hellinger_sq(const Model& a, const Model& b,
                                              const CovariateDistribution& px,
                                              std::size_t mc_points,
                                              std::uint64_t seed,
                                              int workers = 1) {
  detail::check_comparable(a, b);
  return detail::mc_expect_over_x(
      px, mc_points, seed, workers, [&](const std::vector<double>& x) {
        return detail::conditional_distance_at_x(a, b, x, false);
      });
}

// E_X W_r between the pushforward measures
// sum_j p_j delta_{(h1(X,theta1j), h2(X,theta2j))}.
inline DistanceEstimate prediction_error(const MixingMeasure& g,
                                         const MixingMeasure& g0,
                                         const ModelShape& shape,
                                         const CovariateDistribution& px,
                                         int r, std::size_t mc_points,
                                         std::uint64_t seed, int workers = 1) {
  if (r != 1 && r != 2)
    throw std::invalid_argument("prediction_error: r in {1,2}");
  const bool has_phi = shape.link2.has_value() || shape.dispersion.has_value();
  auto pushforward = [&](const MixingMeasure& m,
                         const std::vector<double>& x) {
    ParamBox box;
    box.theta1_lo = {-1e12};
    box.theta1_hi = {1e12};
    if (has_phi) {
      box.theta2_lo = {-1e12};
      box.theta2_hi = {1e12};
    }
    std::vector<Atom> atoms;
    for (const auto& atom : m.atoms()) {
      const auto [mu, phi] = shape.mu_phi(atom, x);
      Atom pa;
      pa.theta1 = {mu};
      if (has_phi) pa.theta2 = {phi};
      pa.weight = atom.weight;
      atoms.push_back(std::move(pa));
    }
    return MixingMeasure(std::move(atoms), std::move(box));
  };
  return detail::mc_expect_over_x(
      px, mc_points, seed, workers, [&](const std::vector<double>& x) {
        return wasserstein_distance(pushforward(g, x), pushforward(g0, x), r);
      });
}

// ---- JSON (model document composes kernel/link/measure schemas) ----

inline void to_json(nlohmann::json& j, const CovariateDistribution& px) {
  if (px.kind == CovariateDistribution::Kind::kUniform)
    j = {{"uniform", {{"lo", px.lo}, {"hi", px.hi}}}};
  else
    j = {{"empirical", {{"rows", px.rows}}}};
}

inline void from_json(const nlohmann::json& j, CovariateDistribution& px) {
  if (j.contains("uniform"))
    px = CovariateDistribution::uniform(
        j["uniform"].at("lo").get<std::vector<double>>(),
        j["uniform"].at("hi").get<std::vector<double>>());
  else if (j.contains("empirical"))
    px = CovariateDistribution::empirical(
        j["empirical"].at("rows").get<std::vector<std::vector<double>>>());
  else
    throw std::invalid_argument("covariates: expected uniform or empirical");
}

inline void to_json(nlohmann::json& j, const ModelShape& shape) {
  j = nlohmann::json{{"kernel", shape.kernel}, {"link1", shape.link1}};
  if (shape.link2) j["link2"] = *shape.link2;
  if (shape.dispersion) j["dispersion"] = *shape.dispersion;
  j["box"] = shape.box;
  if (shape.px) j["px"] = *shape.px;
}

inline void from_json(const nlohmann::json& j, ModelShape& shape) {
  shape.kernel = j.at("kernel").get<Kernel>();
  shape.link1 = j.at("link1").get<Link>();
  shape.link2.reset();
  shape.dispersion.reset();
  if (j.contains("link2")) shape.link2 = j["link2"].get<Link>();
  if (j.contains("dispersion")) shape.dispersion = j["dispersion"].get<double>();
  shape.box = j.at("box").get<ParamBox>();
  shape.px.reset();
  if (j.contains("px")) shape.px = j["px"].get<CovariateDistribution>();
  shape.validate();
}

inline void to_json(nlohmann::json& j, const Model& m) {
  to_json(j, m.shape());
  j["measure"] = m.mixing_measure();
}

inline Model model_from_json(const nlohmann::json& j) {
  ModelShape shape = j.get<ModelShape>();
  if (!j.contains("measure"))
    throw std::invalid_argument("model: missing measure");
  nlohmann::json jm = j.at("measure");
  if (!jm.contains("box")) jm["box"] = shape.box;  // shape box is canonical
  MixingMeasure g = jm.get<MixingMeasure>();
  return Model(std::move(shape), std::move(g));
}

}  // namespace regmix
