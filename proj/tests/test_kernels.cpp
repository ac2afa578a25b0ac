#include "regmix/kernels.hpp"

#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "regmix/quadrature.hpp"

using namespace regmix;

namespace {

struct GridPoint {
  double y, mu, phi;
};

// 100 deterministic points per family for the derivative checks.
std::vector<GridPoint> derivative_grid(const Kernel& k, Rng& rng) {
  std::vector<GridPoint> grid;
  for (int i = 0; i < 100; ++i) {
    GridPoint p{};
    switch (k.family()) {
      case Family::kNormalFixed:
        p.mu = rng.uniform(-4.0, 4.0);
        p.y = p.mu + rng.uniform(-5.0, 5.0);
        break;
      case Family::kNormal:
        p.mu = rng.uniform(-4.0, 4.0);
        p.phi = rng.uniform(0.3, 4.0);
        p.y = p.mu + rng.uniform(-5.0, 5.0);
        break;
      case Family::kPoisson:
        p.mu = rng.uniform(0.3, 8.0);
        p.y = static_cast<double>(rng.poisson(p.mu));
        break;
      case Family::kBinomial:
        p.mu = rng.uniform(0.05, 0.95);
        p.y = static_cast<double>(rng.uniform_index(k.binomial_n() + 1));
        break;
      case Family::kNegBinomial:
        p.mu = rng.uniform(0.3, 8.0);
        p.phi = rng.uniform(0.3, 8.0);
        p.y = static_cast<double>(rng.uniform_index(12));
        break;
    }
    grid.push_back(p);
  }
  return grid;
}

}  // namespace

TEST_CASE("density closed-form spot values") {
  REQUIRE(Kernel::poisson().density(0, 2.0) ==
          Catch::Approx(std::exp(-2.0)).epsilon(1e-12));
  REQUIRE(Kernel::poisson().density(0, 2.0) ==
          Catch::Approx(0.135335).margin(1e-6));
  REQUIRE(Kernel::binomial(1).density(1, 0.3) ==
          Catch::Approx(0.3).epsilon(1e-12));
  // NB at y = 0: (phi/(phi+mu))^phi
  REQUIRE(Kernel::neg_binomial().density(0, 2.0, 1.0) ==
          Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  REQUIRE(Kernel::normal_fixed(1.0).density(0.5, 0.0) ==
          Catch::Approx(std::exp(-0.125) / std::sqrt(2.0 * M_PI))
              .epsilon(1e-12));
}

TEST_CASE("exp(log_density) == density") {
  Rng rng(31);
  for (const Kernel& k :
       {Kernel::normal_fixed(2.0), Kernel::normal(), Kernel::poisson(),
        Kernel::binomial(5), Kernel::neg_binomial()}) {
    for (const auto& p : derivative_grid(k, rng)) {
      const double f = k.density(p.y, p.mu, p.phi);
      REQUIRE(f >= 0.0);
      if (f > 0.0)
        REQUIRE(std::exp(k.log_density(p.y, p.mu, p.phi)) ==
                Catch::Approx(f).epsilon(1e-12));
    }
  }
}

TEST_CASE("densities normalize over the support") {
  // count families: exact truncated sums
  for (auto [k, mu, phi] :
       {std::tuple{Kernel::poisson(), 3.5, 0.0},
        std::tuple{Kernel::neg_binomial(), 2.0, 0.7},
        std::tuple{Kernel::neg_binomial(), 7.0, 3.0}}) {
    const long ymax = k.truncation_ymax(mu, phi);
    double total = 0.0;
    for (long y = 0; y <= ymax; ++y) total += k.density(y, mu, phi);
    REQUIRE(total == Catch::Approx(1.0).margin(1e-8));
  }
  {
    const Kernel k = Kernel::binomial(7);
    double total = 0.0;
    for (long y = 0; y <= 7; ++y) total += k.density(y, 0.4);
    REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
  }
  {
    const Kernel k = Kernel::normal();
    const double total = adaptive_simpson(
        [&](double y) { return k.density(y, 1.0, 2.3); }, 1.0 - 30.0,
        1.0 + 30.0, 1e-10);
    REQUIRE(total == Catch::Approx(1.0).margin(1e-8));
  }
}

TEST_CASE("truncation tail bound is honoured") {
  const Kernel nb = Kernel::neg_binomial();
  const long ymax = nb.truncation_ymax(2.0, 0.5, 1e-12);
  double tail = 0.0;
  for (long y = ymax + 1; y <= ymax + 4000; ++y)
    tail += nb.density(y, 2.0, 0.5);
  REQUIRE(tail < 1e-12);
}

TEST_CASE("analytic derivatives match finite differences") {
  Rng rng(32);
  for (const Kernel& k :
       {Kernel::normal_fixed(1.5), Kernel::normal(), Kernel::poisson(),
        Kernel::binomial(6), Kernel::neg_binomial()}) {
    for (const auto& p : derivative_grid(k, rng)) {
      auto f_of_mu = [&](double m) { return k.density(p.y, m, p.phi); };
      REQUIRE(k.d_mu(p.y, p.mu, p.phi) ==
              Catch::Approx(oracles::central_diff(f_of_mu, p.mu))
                  .margin(1e-6));
      REQUIRE(k.d_mu2(p.y, p.mu, p.phi) ==
              Catch::Approx(oracles::central_diff2(f_of_mu, p.mu))
                  .margin(1e-6));
      if (k.has_dispersion()) {
        auto f_of_phi = [&](double ph) { return k.density(p.y, p.mu, ph); };
        REQUIRE(k.d_phi(p.y, p.mu, p.phi) ==
                Catch::Approx(oracles::central_diff(f_of_phi, p.phi))
                    .margin(1e-6));
        REQUIRE(k.d_phi2(p.y, p.mu, p.phi) ==
                Catch::Approx(oracles::central_diff2(f_of_phi, p.phi))
                    .margin(1e-6));
        auto f2 = [&](double m, double ph) { return k.density(p.y, m, ph); };
        REQUIRE(k.d_mu_phi(p.y, p.mu, p.phi) ==
                Catch::Approx(oracles::cross_diff(f2, p.mu, p.phi))
                    .margin(1e-6));
      }
    }
  }
}

TEST_CASE("families without dispersion reject phi derivatives") {
  REQUIRE_THROWS_AS(Kernel::poisson().d_phi(1, 2.0), std::invalid_argument);
  REQUIRE_THROWS_AS(Kernel::binomial(3).d_phi(1, 0.5),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(Kernel::normal_fixed(1.0).d_phi(0.0, 0.0),
                    std::invalid_argument);
}

TEST_CASE("normal d_mu vanishes at the mean") {
  REQUIRE(Kernel::normal().d_mu(1.7, 1.7, 0.9) ==
          Catch::Approx(0.0).margin(1e-15));
}

// The Gaussian density solves the heat equation with the probabilists'
// scaling: d2f/dmu2 = 2 df/d(sigma2).  Verified against finite differences
// before freezing the constant.
TEST_CASE("normal heat equation") {
  const Kernel k = Kernel::normal();
  Rng rng(33);
  for (int i = 0; i < 100; ++i) {
    const double mu = rng.uniform(-3.0, 3.0);
    const double phi = rng.uniform(0.4, 3.0);
    const double y = mu + rng.uniform(-4.0, 4.0);
    REQUIRE(k.d_mu2(y, mu, phi) ==
            Catch::Approx(2.0 * k.d_phi(y, mu, phi)).margin(1e-10));
    // and the finite-difference oracle agrees about the factor of two
    if (i < 5) {
      auto f_of_mu = [&](double m) { return k.density(y, m, phi); };
      auto f_of_phi = [&](double p) { return k.density(y, mu, p); };
      REQUIRE(oracles::central_diff2(f_of_mu, mu) ==
              Catch::Approx(2.0 * oracles::central_diff(f_of_phi, phi))
                  .margin(1e-5));
    }
  }
}

// d/dmu NB(y|mu,phi) = (phi/mu) [ NB(y|mu(phi+1)/phi, phi+1) - NB(y|mu,phi) ]
TEST_CASE("negative binomial derivative recurrence") {
  const Kernel k = Kernel::neg_binomial();
  {
    const double y = 3, mu = 2.0, phi = 1.5;
    const double lhs = k.d_mu(y, mu, phi);
    const double rhs = (phi / mu) * (k.density(y, mu * (phi + 1.0) / phi,
                                               phi + 1.0) -
                                     k.density(y, mu, phi));
    REQUIRE(lhs == Catch::Approx(rhs).margin(1e-12));
    REQUIRE(lhs ==
            Catch::Approx(oracles::central_diff(
                              [&](double m) { return k.density(y, m, phi); },
                              mu))
                .margin(1e-6));
  }
  Rng rng(34);
  for (int i = 0; i < 500; ++i) {
    const double mu = rng.uniform(0.1, 10.0);
    const double phi = rng.uniform(0.2, 10.0);
    const double y = static_cast<double>(rng.uniform_index(51));
    const double lhs = k.d_mu(y, mu, phi);
    const double rhs = (phi / mu) * (k.density(y, mu * (phi + 1.0) / phi,
                                               phi + 1.0) -
                                     k.density(y, mu, phi));
    REQUIRE(lhs == Catch::Approx(rhs).margin(1e-12));
  }
}

TEST_CASE("sampling matches analytic moments") {
  Rng rng(35);
  {
    const Kernel k = Kernel::poisson();
    double s = 0.0;
    for (int i = 0; i < 100000; ++i) s += k.sample(4.0, 0.0, rng);
    REQUIRE(s / 1e5 == Catch::Approx(4.0).margin(0.02));
  }
  {
    const Kernel k = Kernel::neg_binomial();
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < 100000; ++i) {
      const double v = k.sample(2.0, 0.5, rng);
      s += v;
      ss += v * v;
    }
    const double mean = s / 1e5;
    REQUIRE(ss / 1e5 - mean * mean == Catch::Approx(10.0).margin(0.36));
  }
  {
    const Kernel k = Kernel::binomial(1);
    for (int i = 0; i < 50; ++i) REQUIRE(k.sample(0.0, 0.0, rng) == 0.0);
  }
  // determinism
  Rng a(99), b(99);
  const Kernel k = Kernel::normal();
  for (int i = 0; i < 10; ++i)
    REQUIRE(k.sample(1.0, 2.0, a) == k.sample(1.0, 2.0, b));
}

TEST_CASE("parameter and support validation") {
  REQUIRE_THROWS_AS(Kernel::poisson().density(1, -1.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(Kernel::poisson().density(1.5, 2.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(Kernel::binomial(3).density(4, 0.5),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(Kernel::neg_binomial().density(1, 2.0, -1.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(Kernel::normal().density(0.0, 0.0, 0.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(Kernel::normal_fixed(-1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(Kernel::binomial(0), std::invalid_argument);
}

TEST_CASE("kernel JSON round trip") {
  for (const Kernel& k :
       {Kernel::normal_fixed(2.0), Kernel::normal(), Kernel::poisson(),
        Kernel::binomial(5), Kernel::neg_binomial()}) {
    nlohmann::json j = k;
    const Kernel back = j.get<Kernel>();
    REQUIRE(back.family() == k.family());
  }
  REQUIRE(nlohmann::json(Kernel::binomial(5))["N"] == 5);
  REQUIRE(nlohmann::json(Kernel::normal_fixed(2.0))["sigma2"] == 2.0);
  const nlohmann::json bad{{"family", "cauchy"}};
  REQUIRE_THROWS_AS(bad.get<Kernel>(), std::invalid_argument);
}
