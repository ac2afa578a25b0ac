#pragma once

// Fixed-K Bayesian inference by Gibbs sampling with Metropolis-Hastings
// moves.  Per iteration: allocations Z, weights p | Z ~ Dirichlet(alpha + n),
// then per component an MH move on eta = 1/phi (Gamma(2, 2/eta) proposal,
// Hastings corrected) and an MH move on theta (Gaussian random walk against
// the component likelihood times the N(0, Sigma) prior).
//
// The same structure works for the kernels without a dispersion parameter
// (the eta move is simply skipped).

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "regmix/em.hpp"
#include "regmix/model.hpp"

namespace regmix {

struct PriorSpec {
  std::vector<double> weight_concentration;  // per component; default all 1
  Eigen::MatrixXd theta_cov;                 // default identity
  double eta_shape = 0.01;
  double eta_rate = 0.01;

  void validate(int k, int d1) const {
    if (!weight_concentration.empty() &&
        static_cast<int>(weight_concentration.size()) != k)
      throw std::invalid_argument("prior: concentration size != k");
    for (double a : weight_concentration)
      if (!(a > 0.0)) throw std::invalid_argument("prior: concentration <= 0");
    if (theta_cov.size() != 0 &&
        (theta_cov.rows() != d1 || theta_cov.cols() != d1))
      throw std::invalid_argument("prior: theta covariance size mismatch");
    if (!(eta_shape > 0.0) || !(eta_rate > 0.0))
      throw std::invalid_argument("prior: gamma hyperparameters must be > 0");
  }
};

struct MCMCConfig {
  int iterations = 2500;
  int burn_in = 500;
  int thin = 1;
  double proposal_sd = 0.1;         // Sigma' = proposal_sd^2 * I by default
  Eigen::MatrixXd proposal_cov;     // overrides proposal_sd when non-empty
  double eta_proposal_shape = 2.0;  // fixed by the sampling scheme
  std::uint64_t seed = 0;

  void validate() const {
    if (burn_in >= iterations)
      throw std::invalid_argument("mcmc: burn_in < iterations required");
    if (thin < 1) throw std::invalid_argument("mcmc: thin >= 1");
  }
};

struct GibbsState {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> theta;
  std::vector<double> eta;  // empty when the dispersion is not sampled
};

struct ChainSample {
  std::vector<double> weights;
  std::vector<std::vector<double>> theta;
  std::vector<double> eta;
  std::vector<double> phi;
  std::vector<long> alloc_counts;
};

struct Chain {
  std::vector<ChainSample> samples;
  long theta_proposals = 0;
  long theta_accepts = 0;
  long eta_proposals = 0;
  long eta_accepts = 0;

  double theta_acceptance() const {
    return theta_proposals == 0
               ? 0.0
               : static_cast<double>(theta_accepts) / theta_proposals;
  }
  double eta_acceptance() const {
    return eta_proposals == 0
               ? 0.0
               : static_cast<double>(eta_accepts) / eta_proposals;
  }
};

namespace bayesdetail {

// mu-dependent part of log f(y | mu(theta), phi); constants in theta dropped.
inline double loglik_mu_part(const Kernel& kernel, double y, double score,
                             double phi) {
  switch (kernel.family()) {
    case Family::kNormalFixed: {
      const double d = y - score;
      return -d * d / (2.0 * kernel.fixed_sigma2());
    }
    case Family::kPoisson:
      return y * score - std::exp(emdetail::clamp_score(score));
    case Family::kBinomial: {
      // y*s - N*log(1 + e^s), computed stably.
      const double soft =
          score > 0.0 ? score + std::log1p(std::exp(-score))
                      : std::log1p(std::exp(score));
      return y * score - kernel.binomial_n() * soft;
    }
    case Family::kNegBinomial: {
      const double mu = std::exp(emdetail::clamp_score(score));
      return y * (score - std::log(phi + mu)) - phi * std::log(phi + mu);
    }
    default:
      throw std::invalid_argument("gibbs: unsupported kernel family");
  }
}

// phi-dependent part of the NB log-likelihood; constants in phi dropped.
inline double loglik_phi_part(double y, double mu, double phi) {
  return log_gamma(phi + y) - log_gamma(phi) +
         phi * std::log(phi) - (y + phi) * std::log(phi + mu);
}

inline double log_gamma_pdf(double x, double shape, double rate) {
  return shape * std::log(rate) - log_gamma(shape) +
         (shape - 1.0) * std::log(x) - rate * x;
}

}  // namespace bayesdetail

class GibbsSampler {
 public:
  GibbsSampler(const ModelShape& shape, int k, PriorSpec prior,
               MCMCConfig config, const Dataset& data)
      : shape_(shape), k_(k), prior_(std::move(prior)), config_(config) {
    shape_.validate();
    config_.validate();
    if (k_ < 1) throw std::invalid_argument("gibbs: k >= 1");
    if (shape_.kernel.family() == Family::kNormal)
      throw std::invalid_argument(
          "gibbs: mean-variance normal kernel is not supported; fix sigma2");
    sample_eta_ = shape_.kernel.family() == Family::kNegBinomial &&
                  shape_.link2.has_value();
    if (shape_.link2 &&
        shape_.link2->kind() != LinkKind::kIdentityConstant)
      throw std::invalid_argument(
          "gibbs: dispersion link must be identity_constant");
    const int d1 = static_cast<int>(shape_.d1());
    prior_.validate(k_, d1);
    if (prior_.weight_concentration.empty())
      prior_.weight_concentration.assign(k_, 1.0);
    if (prior_.theta_cov.size() == 0)
      prior_.theta_cov = Eigen::MatrixXd::Identity(d1, d1);
    theta_prec_ = prior_.theta_cov.llt().solve(
        Eigen::MatrixXd::Identity(d1, d1));
    Eigen::MatrixXd prop = config_.proposal_cov;
    if (prop.size() == 0)
      prop = config_.proposal_sd * config_.proposal_sd *
             Eigen::MatrixXd::Identity(d1, d1);
    Eigen::LLT<Eigen::MatrixXd> llt(prop);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("gibbs: proposal covariance not SPD");
    proposal_chol_ = llt.matrixL();

    n_ = data.size();
    if (n_ > 0) {
      data.validate();
      features_.resize(n_, d1);
      y_.resize(n_);
      for (std::size_t i = 0; i < n_; ++i) {
        features_.row(i) = shape_.link1.inner_features(data.x[i]).transpose();
        y_(i) = data.y[i];
      }
      if (!shape_.link1.has_linear_inner())
        throw std::invalid_argument("gibbs: link1 must have a linear score");
    }
  }

  // Z_i ~ Categorical(p_j f_j(y_i|x_i)), log-space normalized.
  std::vector<int> sample_allocations(const GibbsState& state, Rng& rng) const {
    std::vector<int> z(n_, 0);
    std::vector<double> logp(k_);
    for (std::size_t i = 0; i < n_; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < k_; ++j) {
        const double score = features_.row(i).dot(state.theta[j]);
        const double phi = component_phi(state, j);
        double ll = bayesdetail::loglik_mu_part(shape_.kernel, y_(i), score,
                                                phi);
        // Components carry different dispersions, so the phi-only terms do
        // not cancel in the normalization.
        if (shape_.kernel.family() == Family::kNegBinomial)
          ll += log_gamma(phi + y_(i)) - log_gamma(phi) + phi * std::log(phi);
        logp[j] = std::log(state.weights[j]) + ll;
        best = std::max(best, logp[j]);
      }
      if (best == -std::numeric_limits<double>::infinity())
        throw std::runtime_error("gibbs: zero mass at observation " +
                                 std::to_string(i));
      double total = 0.0;
      for (int j = 0; j < k_; ++j) {
        logp[j] = std::exp(logp[j] - best);
        total += logp[j];
      }
      const double u = rng.uniform() * total;
      double cum = 0.0;
      int pick = k_ - 1;
      for (int j = 0; j < k_; ++j) {
        cum += logp[j];
        if (u < cum) {
          pick = j;
          break;
        }
      }
      z[i] = pick;
    }
    return z;
  }

  std::vector<double> sample_weights(const std::vector<long>& counts,
                                     Rng& rng) const {
    std::vector<double> alpha(k_);
    for (int j = 0; j < k_; ++j)
      alpha[j] = prior_.weight_concentration[j] + counts[j];
    return rng.dirichlet(alpha);
  }

  // Symmetric Gaussian random walk against component likelihood x prior.
  void mh_update_theta(GibbsState& state, const std::vector<int>& z, Rng& rng,
                       Chain& chain) const {
    const int d1 = static_cast<int>(shape_.d1());
    for (int j = 0; j < k_; ++j) {
      Eigen::VectorXd noise(d1);
      for (int c = 0; c < d1; ++c) noise(c) = rng.normal();
      const Eigen::VectorXd proposal =
          state.theta[j] + proposal_chol_ * noise;
      const double phi = component_phi(state, j);
      const double log_ratio = theta_log_target(proposal, j, z, phi) -
                               theta_log_target(state.theta[j], j, z, phi);
      ++chain.theta_proposals;
      if (std::log(rng.uniform_pos()) < log_ratio) {
        state.theta[j] = proposal;
        ++chain.theta_accepts;
      }
    }
  }

  // Gamma(2, 2/eta) proposal with the Hastings correction.
  void mh_update_eta(GibbsState& state, const std::vector<int>& z, Rng& rng,
                     Chain& chain) const {
    if (!sample_eta_) return;
    const double shape2 = config_.eta_proposal_shape;
    for (int j = 0; j < k_; ++j) {
      const double eta_old = state.eta[j];
      const double eta_new = rng.gamma(shape2, shape2 / eta_old);
      ++chain.eta_proposals;
      if (!(eta_new > 0.0)) continue;
      const double log_ratio =
          eta_log_target(eta_new, j, z, state) -
          eta_log_target(eta_old, j, z, state) +
          bayesdetail::log_gamma_pdf(eta_old, shape2, shape2 / eta_new) -
          bayesdetail::log_gamma_pdf(eta_new, shape2, shape2 / eta_old);
      if (std::log(rng.uniform_pos()) < log_ratio) {
        state.eta[j] = eta_new;
        ++chain.eta_accepts;
      }
    }
  }

  GibbsState draw_initial_state(Rng& rng) const {
    GibbsState state;
    state.weights = rng.dirichlet(prior_.weight_concentration);
    const int d1 = static_cast<int>(shape_.d1());
    const Eigen::MatrixXd prior_chol =
        Eigen::LLT<Eigen::MatrixXd>(prior_.theta_cov).matrixL();
    for (int j = 0; j < k_; ++j) {
      Eigen::VectorXd noise(d1);
      for (int c = 0; c < d1; ++c) noise(c) = rng.normal();
      state.theta.push_back(prior_chol * noise);
    }
    if (sample_eta_)
      for (int j = 0; j < k_; ++j)
        state.eta.push_back(rng.gamma(prior_.eta_shape, prior_.eta_rate));
    return state;
  }

  Chain run(Rng& rng) const {
    Chain chain;
    GibbsState state = draw_initial_state(rng);
    std::vector<int> z(n_, 0);
    for (int t = 1; t <= config_.iterations; ++t) {
      z = sample_allocations(state, rng);
      std::vector<long> counts(k_, 0);
      for (int zi : z) ++counts[zi];
      state.weights = sample_weights(counts, rng);
      mh_update_eta(state, z, rng, chain);
      mh_update_theta(state, z, rng, chain);
      if (t > config_.burn_in &&
          (t - config_.burn_in - 1) % config_.thin == 0) {
        ChainSample sample;
        sample.weights = state.weights;
        for (int j = 0; j < k_; ++j)
          sample.theta.push_back(std::vector<double>(
              state.theta[j].data(), state.theta[j].data() + shape_.d1()));
        if (sample_eta_) {
          sample.eta = state.eta;
          for (double e : state.eta) sample.phi.push_back(1.0 / e);
        } else if (shape_.dispersion) {
          sample.phi.assign(k_, *shape_.dispersion);
        }
        sample.alloc_counts = counts;
        chain.samples.push_back(std::move(sample));
      }
    }
    return chain;
  }

  // Assemble the mixing measure encoded by one kept sample.
  MixingMeasure sample_measure(const ChainSample& sample) const {
    std::vector<Atom> atoms(k_);
    for (int j = 0; j < k_; ++j) {
      atoms[j].theta1 = sample.theta[j];
      if (sample_eta_) atoms[j].theta2 = {sample.phi[j]};
      atoms[j].weight = sample.weights[j];
    }
    return MixingMeasure(std::move(atoms), shape_.box);
  }

  bool samples_eta() const { return sample_eta_; }

 private:
  double component_phi(const GibbsState& state, int j) const {
    if (sample_eta_) return 1.0 / state.eta[j];
    if (shape_.dispersion) return *shape_.dispersion;
    return 0.0;
  }

  double theta_log_target(const Eigen::VectorXd& theta, int j,
                          const std::vector<int>& z, double phi) const {
    double ll = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      if (z[i] == j)
        ll += bayesdetail::loglik_mu_part(shape_.kernel, y_(i),
                                          features_.row(i).dot(theta), phi);
    return ll - 0.5 * theta.dot(theta_prec_ * theta);
  }

  double eta_log_target(double eta, int j, const std::vector<int>& z,
                        const GibbsState& state) const {
    const double phi = 1.0 / eta;
    double ll = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      if (z[i] == j) {
        const double mu = std::exp(emdetail::clamp_score(
            features_.row(i).dot(state.theta[j])));
        ll += bayesdetail::loglik_phi_part(y_(i), mu, phi);
      }
    return ll + (prior_.eta_shape - 1.0) * std::log(eta) -
           prior_.eta_rate * eta;
  }

  ModelShape shape_;
  int k_;
  PriorSpec prior_;
  MCMCConfig config_;
  bool sample_eta_ = false;
  Eigen::MatrixXd theta_prec_;
  Eigen::MatrixXd proposal_chol_;
  std::size_t n_ = 0;
  Eigen::MatrixXd features_;
  Eigen::VectorXd y_;
};

inline Chain run_gibbs(const ModelShape& shape, int k, const PriorSpec& prior,
                       const MCMCConfig& config, const Dataset& data) {
  GibbsSampler sampler(shape, k, prior, config, data);
  Rng rng(config.seed);
  return sampler.run(rng);
}

struct PosteriorW1 {
  double mean = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  std::size_t samples = 0;
};

inline void from_json(const nlohmann::json& j, PriorSpec& p) {
  p = PriorSpec{};
  if (j.contains("weight_concentration"))
    p.weight_concentration =
        j["weight_concentration"].get<std::vector<double>>();
  if (j.contains("theta_cov")) {
    const auto rows = j["theta_cov"].get<std::vector<std::vector<double>>>();
    p.theta_cov.resize(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c)
        p.theta_cov(r, c) = rows[r][c];
  }
  p.eta_shape = j.value("eta_shape", 0.01);
  p.eta_rate = j.value("eta_rate", 0.01);
}

inline void to_json(nlohmann::json& j, const PriorSpec& p) {
  j = nlohmann::json{{"eta_shape", p.eta_shape}, {"eta_rate", p.eta_rate}};
  if (!p.weight_concentration.empty())
    j["weight_concentration"] = p.weight_concentration;
  if (p.theta_cov.size() != 0) {
    std::vector<std::vector<double>> rows(p.theta_cov.rows());
    for (Eigen::Index r = 0; r < p.theta_cov.rows(); ++r)
      for (Eigen::Index c = 0; c < p.theta_cov.cols(); ++c)
        rows[r].push_back(p.theta_cov(r, c));
    j["theta_cov"] = rows;
  }
}

inline void from_json(const nlohmann::json& j, MCMCConfig& c) {
  c = MCMCConfig{};
  c.iterations = j.value("iterations", 2500);
  c.burn_in = j.value("burn_in", 500);
  c.thin = j.value("thin", 1);
  c.proposal_sd = j.value("proposal_sd", 0.1);
  if (j.contains("proposal_cov")) {
    const auto rows = j["proposal_cov"].get<std::vector<std::vector<double>>>();
    c.proposal_cov.resize(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t cc = 0; cc < rows[r].size(); ++cc)
        c.proposal_cov(r, cc) = rows[r][cc];
  }
  c.seed = j.value("seed", 0ULL);
  c.validate();
}

inline void to_json(nlohmann::json& j, const MCMCConfig& c) {
  j = nlohmann::json{{"iterations", c.iterations},
                     {"burn_in", c.burn_in},
                     {"thin", c.thin},
                     {"proposal_sd", c.proposal_sd},
                     {"eta_proposal_shape", c.eta_proposal_shape},
                     {"seed", c.seed}};
}

inline void to_json(nlohmann::json& j, const ChainSample& s) {
  j = nlohmann::json{{"weights", s.weights},
                     {"theta", s.theta},
                     {"alloc_counts", s.alloc_counts}};
  if (!s.eta.empty()) j["eta"] = s.eta;
  if (!s.phi.empty()) j["phi"] = s.phi;
}

// Mean and interquartile range of W1(sample measure, g0) over kept samples.
inline PosteriorW1 posterior_w1(const GibbsSampler& sampler,
                                const Chain& chain, const MixingMeasure& g0) {
  if (chain.samples.empty())
    throw std::invalid_argument("posterior_w1: empty chain");
  std::vector<double> values;
  values.reserve(chain.samples.size());
  double total = 0.0;
  for (const auto& sample : chain.samples) {
    const double w1 =
        wasserstein_distance(sampler.sample_measure(sample), g0, 1);
    values.push_back(w1);
    total += w1;
  }
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - lo;
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  PosteriorW1 out;
  out.mean = total / values.size();
  out.q25 = quantile(0.25);
  out.q75 = quantile(0.75);
  out.samples = values.size();
  return out;
}

}  // namespace regmix
