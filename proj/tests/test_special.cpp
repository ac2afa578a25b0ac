#include "regmix/special.hpp"

#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

using namespace regmix;

TEST_CASE("log_gamma matches the C library to 1e-13 relative") {
  for (double x : {1e-3, 0.01, 0.2, 0.5, 0.9, 1.0, 1.5, 2.0, 3.7, 5.0, 9.2,
                   17.0, 33.3, 50.0, 120.5, 1000.0}) {
    const double ours = log_gamma(x);
    const double ref = std::lgamma(x);
    const double scale = std::max(1.0, std::fabs(ref));
    REQUIRE(std::fabs(ours - ref) <= 1e-13 * scale);
  }
}

TEST_CASE("log_gamma recurrence and exact values") {
  REQUIRE(log_gamma(1.0) == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(log_gamma(2.0) == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(log_gamma(5.0) == Catch::Approx(std::log(24.0)).epsilon(1e-14));
  // Gamma(x+1) = x Gamma(x)
  for (double x : {0.3, 1.7, 6.9, 25.0}) {
    REQUIRE(log_gamma(x + 1.0) ==
            Catch::Approx(log_gamma(x) + std::log(x)).epsilon(1e-13));
  }
}

TEST_CASE("digamma is the derivative of log_gamma") {
  REQUIRE(digamma(1.0) == Catch::Approx(-0.5772156649015329).epsilon(1e-12));
  for (double x : {0.4, 1.1, 2.5, 7.3, 19.0}) {
    const double fd =
        oracles::central_diff([](double t) { return log_gamma(t); }, x, 1e-6);
    REQUIRE(digamma(x) == Catch::Approx(fd).margin(1e-7));
    REQUIRE(digamma(x + 1.0) ==
            Catch::Approx(digamma(x) + 1.0 / x).epsilon(1e-13));
  }
}

TEST_CASE("trigamma is the derivative of digamma") {
  REQUIRE(trigamma(1.0) ==
          Catch::Approx(M_PI * M_PI / 6.0).epsilon(1e-12));
  for (double x : {0.4, 1.1, 2.5, 7.3, 19.0}) {
    const double fd =
        oracles::central_diff([](double t) { return digamma(t); }, x, 1e-6);
    REQUIRE(trigamma(x) == Catch::Approx(fd).margin(1e-6));
  }
}

TEST_CASE("regularized incomplete gamma") {
  // P(1, x) = 1 - exp(-x)
  for (double x : {0.1, 0.5, 1.0, 3.0, 10.0})
    REQUIRE(gamma_p(1.0, x) ==
            Catch::Approx(1.0 - std::exp(-x)).epsilon(1e-12));
  REQUIRE(gamma_p(3.5, 0.0) == 0.0);
  REQUIRE(gamma_p(3.5, 200.0) == Catch::Approx(1.0).margin(1e-12));
  // monotone in x
  double prev = 0.0;
  for (double x = 0.1; x < 20.0; x += 0.7) {
    const double p = gamma_p(2.7, x);
    REQUIRE(p >= prev);
    prev = p;
  }
  REQUIRE_THROWS_AS(gamma_p(-1.0, 1.0), std::invalid_argument);
}

TEST_CASE("log_sum_exp") {
  REQUIRE(log_sum_exp(std::log(2.0), std::log(3.0)) ==
          Catch::Approx(std::log(5.0)).epsilon(1e-14));
  const double ninf = -std::numeric_limits<double>::infinity();
  REQUIRE(log_sum_exp(ninf, 1.5) == 1.5);
  REQUIRE(log_sum_exp(-1000.0, -1001.0) ==
          Catch::Approx(-1000.0 + std::log(1.0 + std::exp(-1.0)))
              .epsilon(1e-12));
}
