#pragma once

// Deterministic random number generation.  Everything is hand-rolled on top of
// xoshiro256** so that streams are reproducible bit-for-bit across compilers
// and standard libraries; std::<distribution> implementations are not.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "regmix/special.hpp"

namespace regmix {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derives an independent child seed; used to hand each worker / replicate its
// own stream from (master seed, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0xA3EC647659359ACDULL * (index + 1));
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
    has_spare_normal_ = false;
    spare_normal_ = 0.0;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1).
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free Lemire-style bounded draw is overkill here; modulo bias
    // at n << 2^64 is far below anything these experiments can resolve.
    return next_u64() % n;
  }

  double normal() {
    if (has_spare_normal_) {
      has_spare_normal_ = false;
      return spare_normal_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_normal_ = r * std::sin(a);
    has_spare_normal_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Marsaglia-Tsang; shape < 1 handled by the boost Gamma(a+1) * U^{1/a}.
  double gamma(double shape) {
    if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be > 0");
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double gamma(double shape, double rate) { return gamma(shape) / rate; }

  long poisson(double mu) {
    if (mu < 0.0) throw std::invalid_argument("poisson: mu must be >= 0");
    if (mu == 0.0) return 0;
    if (mu < 10.0) {
      // Knuth's product-of-uniforms method.
      const double limit = std::exp(-mu);
      long k = 0;
      double prod = uniform_pos();
      while (prod > limit) {
        ++k;
        prod *= uniform_pos();
      }
      return k;
    }
    return poisson_ptrs(mu);
  }

  long binomial(long n, double q) {
    if (n < 0 || q < 0.0 || q > 1.0)
      throw std::invalid_argument("binomial: invalid (n, q)");
    long k = 0;
    for (long i = 0; i < n; ++i) k += (uniform() < q) ? 1 : 0;
    return k;
  }

  // Mean/dispersion negative binomial as a Poisson-Gamma mixture:
  // lambda ~ Gamma(phi, phi/mu), y | lambda ~ Poisson(lambda).
  long neg_binomial(double mu, double phi) {
    if (mu <= 0.0 || phi <= 0.0)
      throw std::invalid_argument("neg_binomial: require mu, phi > 0");
    return poisson(gamma(phi, phi / mu));
  }

  std::vector<double> dirichlet(const std::vector<double>& alpha) {
    std::vector<double> draw(alpha.size());
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      draw[i] = gamma(alpha[i]);
      total += draw[i];
    }
    for (auto& v : draw) v /= total;
    return draw;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  // Hoermann's PTRS transformed-rejection sampler, exact for mu >= 10.
  long poisson_ptrs(double mu) {
    const double slam = std::sqrt(mu);
    const double loglam = std::log(mu);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform_pos();
      const double us = 0.5 - std::fabs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + mu + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<long>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          -mu + kf * loglam - log_gamma(kf + 1.0))
        return static_cast<long>(kf);
    }
  }

  std::uint64_t state_[4];
  bool has_spare_normal_;
  double spare_normal_;
};

}  // namespace regmix
