#pragma once

// Maximum (conditional) likelihood by EM / generalized EM.
//
// The E-step is shared; the M-step follows the family of the kernel:
//   normal (fixed variance, linear link)  exact weighted least squares
//   poisson / binomial                    one Newton iteration on Q (EM1)
//   negative binomial                     gradient ascent on Q
// Dispersion parameters are held fixed during a run; an optional profile
// search over a phi grid is provided separately.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "regmix/model.hpp"

namespace regmix {

enum class MStepStrategy { kClosedForm, kEm1Newton, kEm1Bare, kGradient };

struct EMConfig {
  int k = 2;
  int max_iter = 2000;
  double epsilon = -1.0;  // <= 0 selects the default 1e-8 * n
  MStepStrategy m_step = MStepStrategy::kClosedForm;
  double nu = 0.01;            // gradient-ascent step size
  bool backtracking = true;    // halve steps until Q does not decrease
  int restarts = 1;
  std::uint64_t seed = 0;
  enum class Init { kRandomFromBox, kKmeansOnY, kSupplied };
  Init init = Init::kRandomFromBox;
  std::optional<MixingMeasure> init_measure;
  bool exact_fitted_guard = true;  // re-seed a collapsing component once
  // Pins the (fixed) dispersion coordinates of randomly initialized atoms,
  // component by component; used when refitting with known dispersions.
  std::optional<std::vector<std::vector<double>>> init_theta2;
};

struct Responsibilities {
  Eigen::MatrixXd w;  // n x K, rows on the simplex
};

struct EMResult {
  MixingMeasure g_hat;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  int restart_index = 0;
  int gradient_fallbacks = 0;  // EM1 pivots with a non-ND Hessian
  int reseeds = 0;
  bool failed = false;
  std::string diagnostic;
};

namespace emdetail {

inline double clamp_score(double s) { return std::min(s, 700.0); }

// mu from the linear score through the link's outer map.
inline double mu_from_score(OuterMap outer, double s) {
  switch (outer) {
    case OuterMap::kIdentity: return s;
    case OuterMap::kExp: return std::exp(clamp_score(s));
    case OuterMap::kSigmoid: return sigmoid(s);
  }
  return s;
}

struct FitWorkspace {
  Eigen::MatrixXd features;  // n x d1 inner features of link1
  Eigen::VectorXd y;
  OuterMap outer = OuterMap::kIdentity;
};

inline FitWorkspace make_workspace(const ModelShape& shape,
                                   const Dataset& data) {
  if (!shape.link1.has_linear_inner())
    throw std::invalid_argument(
        "em: link1 must be (a map of) a linear feature score");
  FitWorkspace ws;
  const std::size_t n = data.size();
  const std::size_t d = shape.link1.param_dim();
  ws.features.resize(n, d);
  ws.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ws.features.row(i) = shape.link1.inner_features(data.x[i]).transpose();
    ws.y(i) = data.y[i];
  }
  ws.outer = shape.link1.outer();
  return ws;
}

inline double component_phi(const ModelShape& shape, const Atom& atom,
                            const std::vector<double>& x0) {
  if (shape.dispersion) return *shape.dispersion;
  if (shape.link2) return shape.link2->eval(x0, atom.theta2);
  return 0.0;
}

}  // namespace emdetail

// Posterior membership probabilities w_ij, computed in log space, plus the
// observed-data log-likelihood of the current state (free by-product of the
// same pass).
inline std::pair<Responsibilities, double> e_step_with_loglik(
    const Model& m, const Dataset& data) {
  const auto& atoms = m.mixing_measure().atoms();
  const std::size_t n = data.size();
  const std::size_t k = atoms.size();
  Responsibilities resp;
  resp.w.resize(n, k);
  double loglik = 0.0;
  std::vector<double> terms(k);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const auto [mu, phi] = m.shape().mu_phi(atoms[j], data.x[i]);
      const double lw = atoms[j].weight > 0.0
                            ? std::log(atoms[j].weight)
                            : -std::numeric_limits<double>::infinity();
      terms[j] = lw + m.kernel().log_density(data.y[i], mu, phi);
      best = std::max(best, terms[j]);
    }
    if (best == -std::numeric_limits<double>::infinity())
      throw std::runtime_error(
          "e_step: zero density under every component at observation " +
          std::to_string(i));
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      resp.w(i, j) = std::exp(terms[j] - best);
      denom += resp.w(i, j);
    }
    resp.w.row(i) /= denom;
    loglik += best + std::log(denom);
  }
  return {std::move(resp), loglik};
}

inline Responsibilities e_step(const Model& m, const Dataset& data) {
  return e_step_with_loglik(m, data).first;
}

// Exact weighted least squares for the Normal kernel with a linear link:
// theta_j = (X' W_j X)^{-1} X' W_j y.
inline Eigen::VectorXd m_step_normal(const Eigen::MatrixXd& features,
                                     const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& w) {
  const Eigen::MatrixXd xtw = features.transpose() * w.asDiagonal();
  const Eigen::MatrixXd a = xtw * features;
  const Eigen::VectorXd b = xtw * y;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-13)
    throw std::runtime_error(
        "m_step_normal: singular weighted normal equations");
  const Eigen::VectorXd theta = ldlt.solve(b);
  if (!theta.allFinite())
    throw std::runtime_error(
        "m_step_normal: singular weighted normal equations");
  return theta;
}

namespace emdetail {

// Per-component weighted expected complete-data log-likelihood (the theta_j
// part of Q), used by the backtracking line searches.
inline double q_component(const Kernel& kernel, const FitWorkspace& ws,
                          const Eigen::VectorXd& w,
                          const Eigen::VectorXd& theta, double phi) {
  double q = 0.0;
  const Eigen::VectorXd scores = ws.features * theta;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (w(i) == 0.0) continue;
    const double mu = mu_from_score(ws.outer, scores(i));
    if (!kernel.params_valid(mu, phi))
      return -std::numeric_limits<double>::infinity();
    q += w(i) * kernel.log_density(ws.y(i), mu, phi);
  }
  return q;
}

// dQ/dtheta for the Table-of-M-steps families.
inline Eigen::VectorXd q_gradient(const Kernel& kernel, const FitWorkspace& ws,
                                  const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& theta, double phi) {
  const Eigen::VectorXd scores = ws.features * theta;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (w(i) == 0.0) continue;
    double coef = 0.0;
    switch (kernel.family()) {
      case Family::kPoisson:
        coef = ws.y(i) - std::exp(clamp_score(scores(i)));
        break;
      case Family::kBinomial:
        coef = ws.y(i) - kernel.binomial_n() * sigmoid(scores(i));
        break;
      case Family::kNegBinomial: {
        const double mu = std::exp(clamp_score(scores(i)));
        coef = phi * (ws.y(i) - mu) / (phi + mu);
        break;
      }
      default:
        throw std::invalid_argument("q_gradient: unsupported family");
    }
    g += w(i) * coef * ws.features.row(i).transpose();
  }
  return g;
}

inline Eigen::MatrixXd q_hessian(const Kernel& kernel, const FitWorkspace& ws,
                                 const Eigen::VectorXd& w,
                                 const Eigen::VectorXd& theta) {
  const Eigen::VectorXd scores = ws.features * theta;
  Eigen::MatrixXd h =
      Eigen::MatrixXd::Zero(theta.size(), theta.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (w(i) == 0.0) continue;
    double coef = 0.0;
    switch (kernel.family()) {
      case Family::kPoisson:
        coef = -std::exp(clamp_score(scores(i)));
        break;
      case Family::kBinomial: {
        const double s = sigmoid(scores(i));
        coef = -kernel.binomial_n() * s * (1.0 - s);
        break;
      }
      default:
        throw std::invalid_argument("q_hessian: unsupported family");
    }
    h += w(i) * coef *
         (ws.features.row(i).transpose() * ws.features.row(i));
  }
  return h;
}

}  // namespace emdetail

struct Em1Outcome {
  Eigen::VectorXd theta;
  bool hessian_fallback = false;
};

// One Newton iteration of the M-step equation (EM1).  If the Hessian is not
// negative definite the update falls back to a backtracked gradient step and
// reports it.  With `backtracking`, the Newton step itself is halved until Q
// does not decrease (GEM).
inline Em1Outcome m_step_em1(const Kernel& kernel,
                             const emdetail::FitWorkspace& ws,
                             const Eigen::VectorXd& w,
                             const Eigen::VectorXd& theta, double phi,
                             bool backtracking) {
  if (kernel.family() != Family::kPoisson &&
      kernel.family() != Family::kBinomial)
    throw std::invalid_argument("m_step_em1: family must be Poisson/Binomial");
  const Eigen::VectorXd g = emdetail::q_gradient(kernel, ws, w, theta, phi);
  const Eigen::MatrixXd h = emdetail::q_hessian(kernel, ws, w, theta);

  Em1Outcome out;
  Eigen::LLT<Eigen::MatrixXd> llt(-h);
  Eigen::VectorXd step;
  if (llt.info() == Eigen::Success) {
    step = llt.solve(g);  // theta - H^{-1} g == theta + (-H)^{-1} g
  } else {
    out.hessian_fallback = true;
    step = g;  // gradient direction, scaled by the line search below
  }
  if (!step.allFinite()) {
    out.hessian_fallback = true;
    step = g;
  }

  if (!backtracking && !out.hessian_fallback) {
    out.theta = theta + step;
    return out;
  }
  const double q0 = emdetail::q_component(kernel, ws, w, theta, phi);
  double scale = 1.0;
  for (int halving = 0; halving < 40; ++halving) {
    const Eigen::VectorXd cand = theta + scale * step;
    const double q = emdetail::q_component(kernel, ws, w, cand, phi);
    if (q >= q0) {
      out.theta = cand;
      return out;
    }
    scale *= 0.5;
  }
  out.theta = theta;  // no admissible step; GEM keeps the current point
  return out;
}

// Gradient-ascent M-step for the negative binomial family:
// theta <- theta + nu * dQ/dtheta, with optional step halving.
inline Eigen::VectorXd m_step_gradient(const Kernel& kernel,
                                       const emdetail::FitWorkspace& ws,
                                       const Eigen::VectorXd& w,
                                       const Eigen::VectorXd& theta, double phi,
                                       double nu, bool backtracking) {
  if (kernel.family() != Family::kNegBinomial)
    throw std::invalid_argument("m_step_gradient: family must be negbin");
  if (!(nu > 0.0)) throw std::invalid_argument("m_step_gradient: nu > 0");
  const Eigen::VectorXd g = emdetail::q_gradient(kernel, ws, w, theta, phi);
  if (!backtracking) return theta + nu * g;
  const double q0 = emdetail::q_component(kernel, ws, w, theta, phi);
  double step = nu;
  for (int halving = 0; halving < 40; ++halving) {
    const Eigen::VectorXd cand = theta + step * g;
    const double q = emdetail::q_component(kernel, ws, w, cand, phi);
    if (std::isfinite(q) && q >= q0) return cand;
    step *= 0.5;
  }
  return theta;
}

namespace emdetail {

inline MixingMeasure random_init(
    const ModelShape& shape, int k, Rng& rng,
    const std::optional<std::vector<std::vector<double>>>& pinned_theta2 =
        std::nullopt) {
  std::vector<Atom> atoms(k);
  for (int j = 0; j < k; ++j) {
    Atom& atom = atoms[j];
    atom.theta1.resize(shape.d1());
    for (std::size_t c = 0; c < shape.d1(); ++c)
      atom.theta1[c] =
          rng.uniform(shape.box.theta1_lo[c], shape.box.theta1_hi[c]);
    if (pinned_theta2) {
      atom.theta2 = (*pinned_theta2)[j % pinned_theta2->size()];
      if (atom.theta2.size() != shape.d2())
        throw std::invalid_argument("fit_em: init_theta2 dimension mismatch");
    } else {
      atom.theta2.resize(shape.d2());
      for (std::size_t c = 0; c < shape.d2(); ++c)
        atom.theta2[c] =
            rng.uniform(shape.box.theta2_lo[c], shape.box.theta2_hi[c]);
    }
    atom.weight = 1.0 / k;
  }
  return MixingMeasure(std::move(atoms), shape.box);
}

// 1-d k-means on y, then intercept-level component parameters.  Slope
// coordinates start at zero; dispersion coordinates start mid-box.
inline MixingMeasure kmeans_init(const ModelShape& shape, int k,
                                 const Dataset& data, const FitWorkspace& ws) {
  std::vector<double> sorted = data.y;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> centers(k);
  for (int j = 0; j < k; ++j)
    centers[j] = sorted[std::min(sorted.size() - 1,
                                 static_cast<std::size_t>(
                                     (j + 0.5) / k * sorted.size()))];
  std::vector<int> assign(data.size(), 0);
  for (int sweep = 0; sweep < 50; ++sweep) {
    bool moved = false;
    std::vector<double> sums(k, 0.0);
    std::vector<int> counts(k, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      int bestj = 0;
      double bestd = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d = std::fabs(data.y[i] - centers[j]);
        if (d < bestd) {
          bestd = d;
          bestj = j;
        }
      }
      if (assign[i] != bestj) moved = true;
      assign[i] = bestj;
      sums[bestj] += data.y[i];
      counts[bestj] += 1;
    }
    for (int j = 0; j < k; ++j)
      if (counts[j] > 0) centers[j] = sums[j] / counts[j];
    if (!moved) break;
  }
  std::vector<Atom> atoms(k);
  for (int j = 0; j < k; ++j) {
    Atom& atom = atoms[j];
    atom.theta1.assign(shape.d1(), 0.0);
    double level = centers[j];
    switch (ws.outer) {
      case OuterMap::kIdentity: break;
      case OuterMap::kExp: level = std::log(std::max(level, 1e-6)); break;
      case OuterMap::kSigmoid: {
        double q = level / shape.kernel.binomial_n();
        q = std::clamp(q, 1e-3, 1.0 - 1e-3);
        level = std::log(q / (1.0 - q));
        break;
      }
    }
    atom.theta1[0] = std::clamp(level, shape.box.theta1_lo[0],
                                shape.box.theta1_hi[0]);
    atom.theta2.resize(shape.d2());
    for (std::size_t c = 0; c < shape.d2(); ++c)
      atom.theta2[c] =
          0.5 * (shape.box.theta2_lo[c] + shape.box.theta2_hi[c]);
    atom.weight = 1.0 / k;
  }
  return MixingMeasure(std::move(atoms), shape.box);
}

}  // namespace emdetail

// Algorithm: alternate E and M steps from a (random / k-means / supplied)
// start until the log-likelihood increase drops to epsilon; keep the best of
// `restarts` runs.
inline EMResult fit_em(const ModelShape& shape, const EMConfig& config,
                       const Dataset& data) {
  shape.validate();
  data.validate();
  if (config.k < 1) throw std::invalid_argument("fit_em: k >= 1");
  const double epsilon =
      config.epsilon > 0.0 ? config.epsilon : 1e-8 * data.size();

  const Family family = shape.kernel.family();
  switch (config.m_step) {
    case MStepStrategy::kClosedForm:
      if (family != Family::kNormalFixed && family != Family::kNormal)
        throw std::invalid_argument("fit_em: closed_form needs normal kernel");
      if (shape.link1.outer() != OuterMap::kIdentity)
        throw std::invalid_argument("fit_em: closed_form needs a linear link");
      break;
    case MStepStrategy::kEm1Newton:
    case MStepStrategy::kEm1Bare:
      if (family != Family::kPoisson && family != Family::kBinomial)
        throw std::invalid_argument("fit_em: em1 needs poisson/binomial");
      break;
    case MStepStrategy::kGradient:
      if (family != Family::kNegBinomial)
        throw std::invalid_argument("fit_em: gradient needs negbin");
      break;
  }
  if (config.init == EMConfig::Init::kSupplied && !config.init_measure)
    throw std::invalid_argument("fit_em: supplied init requires a measure");

  const emdetail::FitWorkspace ws = emdetail::make_workspace(shape, data);
  const std::vector<double> x0(shape.link1.covariate_dim(), 0.0);

  std::optional<EMResult> best;
  std::string last_error;
  for (int restart = 0; restart < std::max(1, config.restarts); ++restart) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(restart)));
    MixingMeasure g =
        config.init == EMConfig::Init::kSupplied ? *config.init_measure
        : config.init == EMConfig::Init::kKmeansOnY
            ? emdetail::kmeans_init(shape, config.k, data, ws)
            : emdetail::random_init(shape, config.k, rng, config.init_theta2);
    if (static_cast<int>(g.size()) != config.k)
      throw std::invalid_argument("fit_em: init measure has wrong k");

    EMResult run;
    run.restart_index = restart;
    try {
      std::vector<double> phis(config.k);
      for (int j = 0; j < config.k; ++j)
        phis[j] = emdetail::component_phi(shape, g.atoms()[j], x0);

      double prev = -std::numeric_limits<double>::infinity();
      for (int iter = 0; iter < config.max_iter; ++iter) {
        Model current(shape, g);
        auto [resp, loglik] = e_step_with_loglik(current, data);
        run.loglik_trace.push_back(loglik);
        run.iterations = iter;
        if (loglik - prev <= epsilon &&
            prev != -std::numeric_limits<double>::infinity()) {
          run.converged = true;
          break;
        }
        prev = loglik;

        // M-step: weights then per-component theta1 (dispersion fixed).
        const Eigen::VectorXd colmeans =
            resp.w.colwise().mean().transpose();
        for (int j = 0; j < config.k; ++j) {
          Atom& atom = g.atoms()[j];
          atom.weight = colmeans(j);
          const Eigen::VectorXd wj = resp.w.col(j);
          Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(
              atom.theta1.data(), atom.theta1.size());
          switch (config.m_step) {
            case MStepStrategy::kClosedForm:
              theta = m_step_normal(ws.features, ws.y, wj);
              break;
            case MStepStrategy::kEm1Newton:
            case MStepStrategy::kEm1Bare: {
              const bool bt = config.m_step == MStepStrategy::kEm1Newton &&
                              config.backtracking;
              Em1Outcome out =
                  m_step_em1(shape.kernel, ws, wj, theta, phis[j], bt);
              if (out.hessian_fallback) ++run.gradient_fallbacks;
              theta = out.theta;
              break;
            }
            case MStepStrategy::kGradient:
              theta = m_step_gradient(shape.kernel, ws, wj, theta, phis[j],
                                      config.nu, config.backtracking);
              break;
          }
          for (std::size_t c = 0; c < atom.theta1.size(); ++c)
            atom.theta1[c] = theta(c);
        }

        // Degenerate-component guard (exact-fitted runs only).
        if (config.exact_fitted_guard) {
          for (int j = 0; j < config.k; ++j) {
            if (g.atoms()[j].weight < 1e-6 / config.k) {
              if (run.reseeds >= config.k) {
                run.failed = true;
                run.diagnostic = "component collapsed twice";
                break;
              }
              ++run.reseeds;
              Atom& atom = g.atoms()[j];
              for (std::size_t c = 0; c < shape.d1(); ++c)
                atom.theta1[c] = rng.uniform(shape.box.theta1_lo[c],
                                             shape.box.theta1_hi[c]);
              atom.weight = 1.0 / config.k;
            }
          }
          if (run.failed) break;
        }
        g.normalize();
      }
    } catch (const std::exception& err) {
      run.failed = true;
      run.diagnostic = err.what();
      last_error = err.what();
    }
    if (run.failed || run.loglik_trace.empty() ||
        !std::isfinite(run.loglik_trace.back()))
      continue;
    run.g_hat = g;
    if (!best || run.loglik_trace.back() > best->loglik_trace.back())
      best = std::move(run);
  }
  if (!best)
    throw std::runtime_error(
        "fit_em: no restart produced a finite likelihood" +
        (last_error.empty() ? std::string() : " (" + last_error + ")"));
  return *best;
}

// Experimental: profile the fixed NB dispersion over a grid, keeping the
// best final likelihood.  Every component shares the profiled phi.
inline EMResult fit_em_profile_phi(ModelShape shape, const EMConfig& config,
                                   const Dataset& data,
                                   const std::vector<double>& phi_grid) {
  if (phi_grid.empty())
    throw std::invalid_argument("fit_em_profile_phi: empty grid");
  std::optional<EMResult> best;
  for (double phi : phi_grid) {
    shape.dispersion = phi;
    shape.link2.reset();
    EMResult r = fit_em(shape, config, data);
    if (!best || r.loglik_trace.back() > best->loglik_trace.back())
      best = std::move(r);
  }
  return *best;
}

inline MStepStrategy m_step_strategy_from_string(const std::string& s) {
  if (s == "closed_form") return MStepStrategy::kClosedForm;
  if (s == "em1") return MStepStrategy::kEm1Newton;
  if (s == "em1_bare") return MStepStrategy::kEm1Bare;
  if (s == "gradient") return MStepStrategy::kGradient;
  throw std::invalid_argument("unknown m-step strategy '" + s + "'");
}

inline std::string to_string(MStepStrategy s) {
  switch (s) {
    case MStepStrategy::kClosedForm: return "closed_form";
    case MStepStrategy::kEm1Newton: return "em1";
    case MStepStrategy::kEm1Bare: return "em1_bare";
    case MStepStrategy::kGradient: return "gradient";
  }
  return "?";
}

// Default strategy for a kernel family (the Table-of-M-steps pairing).
inline MStepStrategy default_m_step(Family family) {
  switch (family) {
    case Family::kNormalFixed:
    case Family::kNormal: return MStepStrategy::kClosedForm;
    case Family::kPoisson:
    case Family::kBinomial: return MStepStrategy::kEm1Newton;
    case Family::kNegBinomial: return MStepStrategy::kGradient;
  }
  return MStepStrategy::kClosedForm;
}

inline void from_json(const nlohmann::json& j, EMConfig& c) {
  c = EMConfig{};
  c.k = j.value("k", 2);
  c.max_iter = j.value("max_iter", 2000);
  c.epsilon = j.value("epsilon", -1.0);
  if (j.contains("strategy"))
    c.m_step = m_step_strategy_from_string(j["strategy"].get<std::string>());
  c.nu = j.value("nu", 0.01);
  c.backtracking = j.value("backtracking", true);
  c.restarts = j.value("restarts", 1);
  c.seed = j.value("seed", 0ULL);
  const std::string init = j.value("init", "random_from_box");
  if (init == "random_from_box")
    c.init = EMConfig::Init::kRandomFromBox;
  else if (init == "kmeans_on_y")
    c.init = EMConfig::Init::kKmeansOnY;
  else
    throw std::invalid_argument("em config: unknown init '" + init + "'");
  c.exact_fitted_guard = j.value("exact_fitted_guard", true);
  if (j.contains("init_theta2"))
    c.init_theta2 = j["init_theta2"].get<std::vector<std::vector<double>>>();
}

inline void to_json(nlohmann::json& j, const EMConfig& c) {
  j = nlohmann::json{
      {"k", c.k},
      {"max_iter", c.max_iter},
      {"epsilon", c.epsilon},
      {"strategy", to_string(c.m_step)},
      {"nu", c.nu},
      {"backtracking", c.backtracking},
      {"restarts", c.restarts},
      {"seed", c.seed},
      {"init", c.init == EMConfig::Init::kKmeansOnY ? "kmeans_on_y"
                                                    : "random_from_box"},
      {"exact_fitted_guard", c.exact_fitted_guard}};
  if (c.init_theta2) j["init_theta2"] = *c.init_theta2;
}

inline void to_json(nlohmann::json& j, const EMResult& r) {
  j = nlohmann::json{{"measure", r.g_hat},
                     {"loglik_trace", r.loglik_trace},
                     {"loglik", r.loglik_trace.back()},
                     {"iterations", r.iterations},
                     {"converged", r.converged},
                     {"restart_index", r.restart_index},
                     {"gradient_fallbacks", r.gradient_fallbacks},
                     {"reseeds", r.reseeds}};
}

}  // namespace regmix
