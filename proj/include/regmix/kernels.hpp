#pragma once

// Conditional density families f(y | mu, phi) with analytic densities,
// log-densities and partial derivatives in (mu, phi), plus exact sampling.
//
// Families and parameter conventions:
//   normal_fixed  mu = mean, variance sigma2 fixed at construction
//   normal        mu = mean, phi = variance (> 0)
//   poisson       mu = rate (> 0), no dispersion
//   binomial      mu = success probability q in [0,1], N trials, no dispersion
//   negbin        mu = mean (> 0), phi = dispersion (> 0),
//                 Var = mu + mu^2/phi,
//                 f(y) = Gamma(phi+y)/(Gamma(phi) y!) (mu/(phi+mu))^y
//                        (phi/(phi+mu))^phi

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "regmix/rng.hpp"
#include "regmix/special.hpp"

namespace regmix {

enum class Family { kNormalFixed, kNormal, kPoisson, kBinomial, kNegBinomial };

class Kernel {
 public:
  static Kernel normal_fixed(double sigma2) {
    if (!(sigma2 > 0.0))
      throw std::invalid_argument("normal_fixed: sigma2 must be > 0");
    Kernel k;
    k.family_ = Family::kNormalFixed;
    k.sigma2_ = sigma2;
    return k;
  }
  static Kernel normal() {
    Kernel k;
    k.family_ = Family::kNormal;
    return k;
  }
  static Kernel poisson() {
    Kernel k;
    k.family_ = Family::kPoisson;
    return k;
  }
  static Kernel binomial(int n) {
    if (n < 1) throw std::invalid_argument("binomial: N must be >= 1");
    Kernel k;
    k.family_ = Family::kBinomial;
    k.binom_n_ = n;
    return k;
  }
  static Kernel neg_binomial() {
    Kernel k;
    k.family_ = Family::kNegBinomial;
    return k;
  }

  Family family() const { return family_; }
  double fixed_sigma2() const { return sigma2_; }
  int binomial_n() const { return binom_n_; }

  bool has_dispersion() const {
    return family_ == Family::kNormal || family_ == Family::kNegBinomial;
  }
  bool is_discrete() const {
    return family_ == Family::kPoisson || family_ == Family::kBinomial ||
           family_ == Family::kNegBinomial;
  }

  bool params_valid(double mu, double phi) const {
    switch (family_) {
      case Family::kNormalFixed: return std::isfinite(mu);
      case Family::kNormal: return std::isfinite(mu) && phi > 0.0;
      case Family::kPoisson: return mu > 0.0;
      case Family::kBinomial: return mu >= 0.0 && mu <= 1.0;
      case Family::kNegBinomial: return mu > 0.0 && phi > 0.0;
    }
    return false;
  }

  void check_params(double mu, double phi) const {
    if (!params_valid(mu, phi))
      throw std::invalid_argument("kernel: parameters outside valid region");
  }

  bool in_support(double y) const {
    switch (family_) {
      case Family::kNormalFixed:
      case Family::kNormal:
        return std::isfinite(y);
      case Family::kPoisson:
      case Family::kNegBinomial:
        return y >= 0.0 && y == std::floor(y);
      case Family::kBinomial:
        return y >= 0.0 && y <= binom_n_ && y == std::floor(y);
    }
    return false;
  }

  void check_support(double y) const {
    if (!in_support(y))
      throw std::invalid_argument("kernel: y outside support");
  }

  double log_density(double y, double mu, double phi = 0.0) const {
    check_params(mu, phi);
    check_support(y);
    switch (family_) {
      case Family::kNormalFixed:
        return normal_logpdf(y, mu, sigma2_);
      case Family::kNormal:
        return normal_logpdf(y, mu, phi);
      case Family::kPoisson:
        return y * std::log(mu) - mu - log_gamma(y + 1.0);
      case Family::kBinomial: {
        const double q = mu;
        double t = log_binomial_coef(binom_n_, y);
        if (y > 0.0) t += y * std::log(q);
        if (y < binom_n_) t += (binom_n_ - y) * std::log(1.0 - q);
        // q on the boundary with mass elsewhere: true zero
        if ((q == 0.0 && y > 0.0) || (q == 1.0 && y < binom_n_))
          return -std::numeric_limits<double>::infinity();
        return t;
      }
      case Family::kNegBinomial:
        return log_gamma(phi + y) - log_gamma(phi) - log_gamma(y + 1.0) +
               y * (std::log(mu) - std::log(phi + mu)) +
               phi * (std::log(phi) - std::log(phi + mu));
    }
    return -std::numeric_limits<double>::infinity();
  }

  double density(double y, double mu, double phi = 0.0) const {
    return std::exp(log_density(y, mu, phi));
  }

  // ---- analytic derivatives of the density (not the log-density) ----

  double d_mu(double y, double mu, double phi = 0.0) const {
    return density(y, mu, phi) * lmu(y, mu, phi);
  }
  double d_mu2(double y, double mu, double phi = 0.0) const {
    const double g = lmu(y, mu, phi);
    return density(y, mu, phi) * (g * g + lmu2(y, mu, phi));
  }
  double d_phi(double y, double mu, double phi = 0.0) const {
    return density(y, mu, phi) * lphi(y, mu, phi);
  }
  double d_phi2(double y, double mu, double phi = 0.0) const {
    const double g = lphi(y, mu, phi);
    return density(y, mu, phi) * (g * g + lphi2(y, mu, phi));
  }
  double d_mu_phi(double y, double mu, double phi = 0.0) const {
    return density(y, mu, phi) *
           (lmu(y, mu, phi) * lphi(y, mu, phi) + lmuphi(y, mu, phi));
  }

  double mean(double mu, double /*phi*/ = 0.0) const {
    return family_ == Family::kBinomial ? binom_n_ * mu : mu;
  }

  double variance(double mu, double phi = 0.0) const {
    switch (family_) {
      case Family::kNormalFixed: return sigma2_;
      case Family::kNormal: return phi;
      case Family::kPoisson: return mu;
      case Family::kBinomial: return binom_n_ * mu * (1.0 - mu);
      case Family::kNegBinomial: return mu + mu * mu / phi;
    }
    return 0.0;
  }

  double sample(double mu, double phi, Rng& rng) const {
    check_params(mu, phi);
    switch (family_) {
      case Family::kNormalFixed: return rng.normal(mu, std::sqrt(sigma2_));
      case Family::kNormal: return rng.normal(mu, std::sqrt(phi));
      case Family::kPoisson: return static_cast<double>(rng.poisson(mu));
      case Family::kBinomial:
        return static_cast<double>(rng.binomial(binom_n_, mu));
      case Family::kNegBinomial:
        return static_cast<double>(rng.neg_binomial(mu, phi));
    }
    return 0.0;
  }

  // Smallest y such that the tail mass beyond it is below tail_tol, from the
  // geometric pmf-ratio envelope.  Finite support families return it exactly.
  long truncation_ymax(double mu, double phi = 0.0,
                       double tail_tol = 1e-12) const {
    check_params(mu, phi);
    if (!is_discrete())
      throw std::invalid_argument("truncation_ymax: continuous support");
    if (family_ == Family::kBinomial) return binom_n_;
    const double sd = std::sqrt(variance(mu, phi));
    long y = static_cast<long>(std::ceil(mean(mu, phi) + 10.0 * sd)) + 20;
    for (int iter = 0; iter < 200; ++iter) {
      double ratio;  // upper bound on f(t+1)/f(t) for all t >= y
      if (family_ == Family::kPoisson) {
        ratio = mu / (y + 1.0);
      } else {
        const double q = mu / (mu + phi);
        ratio = std::max(q * (phi + y) / (y + 1.0), q);
      }
      if (ratio < 1.0) {
        const double f = density(static_cast<double>(y), mu, phi);
        if (f * ratio / (1.0 - ratio) < tail_tol) return y;
      }
      y += std::max<long>(16, y / 2);
    }
    throw std::runtime_error("truncation_ymax: did not converge");
  }

 private:
  static double normal_logpdf(double y, double mu, double var) {
    const double d = y - mu;
    return -0.5 * std::log(2.0 * M_PI * var) - d * d / (2.0 * var);
  }

  void require_dispersion() const {
    if (!has_dispersion())
      throw std::invalid_argument(
          "kernel: family has no dispersion parameter");
  }

  // Derivatives of the log-density.
  double lmu(double y, double mu, double phi) const {
    switch (family_) {
      case Family::kNormalFixed: return (y - mu) / sigma2_;
      case Family::kNormal: return (y - mu) / phi;
      case Family::kPoisson: return y / mu - 1.0;
      case Family::kBinomial: {
        if (mu <= 0.0 || mu >= 1.0)
          throw std::invalid_argument("binomial d_mu: q on boundary");
        return y / mu - (binom_n_ - y) / (1.0 - mu);
      }
      case Family::kNegBinomial: return y / mu - (y + phi) / (phi + mu);
    }
    return 0.0;
  }

  double lmu2(double y, double mu, double phi) const {
    switch (family_) {
      case Family::kNormalFixed: return -1.0 / sigma2_;
      case Family::kNormal: return -1.0 / phi;
      case Family::kPoisson: return -y / (mu * mu);
      case Family::kBinomial: {
        if (mu <= 0.0 || mu >= 1.0)
          throw std::invalid_argument("binomial d_mu2: q on boundary");
        const double r = 1.0 - mu;
        return -y / (mu * mu) - (binom_n_ - y) / (r * r);
      }
      case Family::kNegBinomial:
        return -y / (mu * mu) + (y + phi) / ((phi + mu) * (phi + mu));
    }
    return 0.0;
  }

  double lphi(double y, double mu, double phi) const {
    require_dispersion();
    if (family_ == Family::kNormal) {
      const double d = y - mu;
      return -0.5 / phi + d * d / (2.0 * phi * phi);
    }
    return digamma(phi + y) - digamma(phi) + std::log(phi) -
           std::log(phi + mu) + 1.0 - (y + phi) / (phi + mu);
  }

  double lphi2(double y, double mu, double phi) const {
    require_dispersion();
    if (family_ == Family::kNormal) {
      const double d = y - mu;
      return 0.5 / (phi * phi) - d * d / (phi * phi * phi);
    }
    const double s = phi + mu;
    return trigamma(phi + y) - trigamma(phi) + 1.0 / phi - 1.0 / s -
           (mu - y) / (s * s);
  }

  double lmuphi(double y, double mu, double phi) const {
    require_dispersion();
    if (family_ == Family::kNormal) return -(y - mu) / (phi * phi);
    const double s = phi + mu;
    return (y - mu) / (s * s);
  }

  Family family_ = Family::kNormalFixed;
  double sigma2_ = 1.0;
  int binom_n_ = 1;
};

// ---- JSON ({"family":"negbin"|"poisson"|"binomial"|"normal_fixed"|"normal",
//             "N":..., "sigma2":...}) ----

inline void to_json(nlohmann::json& j, const Kernel& k) {
  switch (k.family()) {
    case Family::kNormalFixed:
      j = {{"family", "normal_fixed"}, {"sigma2", k.fixed_sigma2()}};
      break;
    case Family::kNormal: j = {{"family", "normal"}}; break;
    case Family::kPoisson: j = {{"family", "poisson"}}; break;
    case Family::kBinomial:
      j = {{"family", "binomial"}, {"N", k.binomial_n()}};
      break;
    case Family::kNegBinomial: j = {{"family", "negbin"}}; break;
  }
}

inline void from_json(const nlohmann::json& j, Kernel& k) {
  const std::string family = j.at("family").get<std::string>();
  if (family == "normal_fixed")
    k = Kernel::normal_fixed(j.at("sigma2").get<double>());
  else if (family == "normal")
    k = Kernel::normal();
  else if (family == "poisson")
    k = Kernel::poisson();
  else if (family == "binomial")
    k = Kernel::binomial(j.at("N").get<int>());
  else if (family == "negbin")
    k = Kernel::neg_binomial();
  else
    throw std::invalid_argument("kernel: unknown family '" + family + "'");
}

}  // namespace regmix
