#include "regmix/identifiability.hpp"

#include <cmath>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

using namespace regmix;

namespace {

Model load_model(const std::string& name) {
  std::ifstream in(std::string(CONFIG_DIR) + "/" + name);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace

TEST_CASE("binomial complexity rule") {
  REQUIRE_FALSE(binomial_complexity_ok(2, 1, 1));  // 2k = 4 > N+1 = 2
  REQUIRE(binomial_complexity_ok(2, 3, 1));        // 4 <= 4
  REQUIRE(binomial_complexity_ok(1, 1, 1));        // 2 <= 2
  REQUIRE(binomial_complexity_ok(2, 5, 2));        // 6 <= 6
  REQUIRE_FALSE(binomial_complexity_ok(2, 4, 2));  // 6 > 5
  REQUIRE_THROWS_AS(binomial_complexity_ok(0, 1, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(binomial_complexity_ok(1, 1, 3), std::invalid_argument);
}

TEST_CASE("NB pathological pairs on plain atoms") {
  // the pathological configuration at x = 0: ratios 2 and 2, gap exactly 1
  const std::vector<std::pair<double, double>> patho{{1.0, 0.5}, {3.0, 1.5}};
  REQUIRE(nb_pathological_pairs(patho, 1, 1e-9) ==
          std::vector<std::pair<int, int>>{{0, 1}});

  // ratios 1 vs 2.5: clean
  const std::vector<std::pair<double, double>> clean{{1.0, 1.0}, {5.0, 2.0}};
  REQUIRE(nb_pathological_pairs(clean, 1, 1e-9).empty());

  // crash-data dispersions with matched ratios: |phi1 - phi2| = 1.1255, so
  // the pair fires only once tol >= 0.1255
  const double c = 1.0;
  const std::vector<std::pair<double, double>> crash{{9.3692 * c, 9.3692},
                                                     {8.2437 * c, 8.2437}};
  REQUIRE(nb_pathological_pairs(crash, 1, 1e-3).empty());
  REQUIRE(nb_pathological_pairs(crash, 1, 0.1254).empty());
  REQUIRE(nb_pathological_pairs(crash, 1, 0.1256).size() == 1);

  // order 2 also catches |phi_i - phi_j| = 2
  const std::vector<std::pair<double, double>> gap2{{1.0, 0.5}, {5.0, 2.5}};
  REQUIRE(nb_pathological_pairs(gap2, 1, 1e-9).empty());
  REQUIRE(nb_pathological_pairs(gap2, 2, 1e-9).size() == 1);

  // symmetric in the pair and invariant to permutation
  std::vector<std::pair<double, double>> three{{1.0, 0.5}, {9.0, 9.0},
                                               {3.0, 1.5}};
  REQUIRE(nb_pathological_pairs(three, 1, 1e-9) ==
          std::vector<std::pair<int, int>>{{0, 2}});
  std::swap(three[0], three[1]);
  REQUIRE(nb_pathological_pairs(three, 1, 1e-9) ==
          std::vector<std::pair<int, int>>{{1, 2}});

  const std::vector<std::pair<double, double>> nonpositive{{0.0, 1.0}};
  REQUIRE_THROWS_AS(nb_pathological_pairs(nonpositive, 1, 1e-9),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(nb_pathological_pairs(clean, 1, -1.0),
                    std::invalid_argument);
}

TEST_CASE("NB pathological pairs through the regression links") {
  const Model nb = load_model("model_nb_pathological.json");
  std::vector<std::vector<double>> probes;
  for (double x : {0.0, 1.0, 2.5, 4.0, 5.0}) probes.push_back({x});
  const auto pairs = nb_pathological_pairs(
      nb.shape(), nb.mixing_measure(), 1, 1e-9, probes);
  REQUIRE(pairs == std::vector<std::pair<int, int>>{{0, 1}});
}

TEST_CASE("pathology gap summary") {
  const Model nb = load_model("model_nb_pathological.json");
  // exact pathology: mu1/phi1 = mu2/phi2 = 2 e^x at every covariate
  const auto patho =
      nb_pathology_gap(nb.shape(), nb.mixing_measure(), *nb.shape().px,
                       2000, 77, 0.3);
  REQUIRE(patho.gaps.size() == 2000);
  for (double g : patho.gaps) REQUIRE(std::fabs(g) <= 1e-10);
  REQUIRE(patho.fraction_within_band == 1.0);

  // identical components: all gaps exactly zero
  nlohmann::json j;
  to_json(j, nb);
  j["measure"]["atoms"][1] = j["measure"]["atoms"][0];
  j["measure"]["atoms"][0]["weight"] = 0.4;
  j["measure"]["atoms"][1]["weight"] = 0.6;
  const Model twin = model_from_json(j);
  const auto zero = nb_pathology_gap(twin.shape(), twin.mixing_measure(),
                                     *twin.shape().px, 200, 78, 0.3);
  for (double g : zero.gaps) REQUIRE(g == 0.0);

  // crash-style parameters: nondegenerate spread, band fraction in (0, 1)
  const Model crash = load_model("model_crash_synthetic.json");
  const auto summary =
      nb_pathology_gap(crash.shape(), crash.mixing_measure(),
                       *crash.shape().px, 4000, 79, 0.3);
  REQUIRE(summary.sd > 0.0);
  REQUIRE(summary.fraction_within_band > 0.0);
  REQUIRE(summary.fraction_within_band < 1.0);

  const MixingMeasure one_comp({{{0.0, 1.0}, {0.5}, 1.0}}, nb.shape().box);
  const auto px = *nb.shape().px;
  REQUIRE_THROWS_AS(nb_pathology_gap(nb.shape(), one_comp, px, 10, 1, 0.3),
                    std::invalid_argument);
}

TEST_CASE("Vandermonde-style determinant identity") {
  {
    const auto [det, prod] = vandermonde_d1_det({0.3, 0.7});
    REQUIRE(prod == Catch::Approx(0.0256).epsilon(1e-12));
    REQUIRE(det == Catch::Approx(prod).margin(1e-10));
    // independent 4x4 oracle
    Eigen::MatrixXd d1(4, 4);
    for (int m = 0; m < 4; ++m) {
      d1(m, 0) = std::pow(0.3, m);
      d1(m, 1) = std::pow(0.7, m);
      d1(m, 2) = m == 0 ? 0.0 : m * std::pow(0.3, m - 1);
      d1(m, 3) = m == 0 ? 0.0 : m * std::pow(0.7, m - 1);
    }
    REQUIRE(det ==
            Catch::Approx(oracles::laplace_determinant(d1)).margin(1e-12));
  }
  {
    const auto [det, prod] = vandermonde_d1_det({0.4, 0.4});
    REQUIRE(prod == 0.0);
    REQUIRE(det == Catch::Approx(0.0).margin(1e-14));
  }
  {
    const auto [det, prod] = vandermonde_d1_det({0.1, 0.5, 0.9});
    REQUIRE(det == Catch::Approx(prod).epsilon(1e-8));
  }
  Rng rng(91);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(3));
    std::vector<double> q(k);
    for (auto& v : q) v = rng.uniform(0.05, 0.95);
    const auto [det, prod] = vandermonde_d1_det(q);
    REQUIRE(det == Catch::Approx(prod).epsilon(1e-8));
  }
  REQUIRE_THROWS_AS(vandermonde_d1_det({0.5}), std::invalid_argument);
}

TEST_CASE("numeric rank proxy: binomial N=1 constant mixture is degenerate") {
  const Model binom = load_model("model_binomial_mixture.json");
  const auto report = numeric_strong_identifiability(
      binom.shape(), binom.mixing_measure(), 1, {{0.5}}, {0.0, 1.0});
  // two grid rows cannot support six independent columns
  REQUIRE(report.singular_ratio < 1e-12);
  REQUIRE(report.order_claimed == -1);
}

TEST_CASE("numeric rank proxy: logistic pair is first-order identifiable") {
  const Model logistic = load_model("model_logistic_pair.json");
  std::vector<std::vector<double>> xs;
  for (int g = 0; g < 25; ++g) xs.push_back({-6.0 + 12.0 * g / 24.0});
  const auto report = numeric_strong_identifiability(
      logistic.shape(), logistic.mixing_measure(), 1, xs, {0.0, 1.0});
  REQUIRE(report.singular_ratio > 1e-6);
  REQUIRE(report.order_claimed == 1);
}

TEST_CASE("numeric rank proxy: the NB pathological pair is rank-deficient") {
  // atoms are (mu, phi) directly: identity links on both coordinates
  ModelShape shape;
  shape.kernel = Kernel::neg_binomial();
  shape.link1 = Link::identity_constant();
  shape.link2 = Link::identity_constant();
  shape.box.theta1_lo = {0.01};
  shape.box.theta1_hi = {50};
  shape.box.theta2_lo = {0.01};
  shape.box.theta2_hi = {50};
  MixingMeasure patho({{{1.0}, {0.5}, 0.4}, {{3.0}, {1.5}, 0.6}}, shape.box);
  std::vector<double> ys;
  for (int y = 0; y <= 60; ++y) ys.push_back(y);
  const auto bad =
      numeric_strong_identifiability(shape, patho, 1, {{}}, ys);
  REQUIRE(bad.singular_ratio < 1e-8);

  // moving off the pathological manifold restores full rank
  MixingMeasure ok({{{1.0}, {0.5}, 0.4}, {{3.0}, {2.2}, 0.6}}, shape.box);
  const auto good = numeric_strong_identifiability(shape, ok, 1, {{}}, ys);
  REQUIRE(good.singular_ratio > 1e-6);
}

TEST_CASE("rule consistency: flagged pairs are numerically rank-deficient") {
  ModelShape shape;
  shape.kernel = Kernel::neg_binomial();
  shape.link1 = Link::identity_constant();
  shape.link2 = Link::identity_constant();
  shape.box.theta1_lo = {0.01};
  shape.box.theta1_hi = {80};
  shape.box.theta2_lo = {0.01};
  shape.box.theta2_hi = {80};
  std::vector<double> ys;
  for (int y = 0; y <= 80; ++y) ys.push_back(y);
  Rng rng(92);
  for (int trial = 0; trial < 10; ++trial) {
    const double phi1 = rng.uniform(0.4, 3.0);
    const double ratio = rng.uniform(0.5, 3.0);
    const double phi2 = phi1 + 1.0;
    MixingMeasure g({{{ratio * phi1}, {phi1}, 0.5},
                     {{ratio * phi2}, {phi2}, 0.5}},
                    shape.box);
    std::vector<std::pair<double, double>> atoms{
        {ratio * phi1, phi1}, {ratio * phi2, phi2}};
    REQUIRE(nb_pathological_pairs(atoms, 1, 1e-9).size() == 1);
    const auto report =
        numeric_strong_identifiability(shape, g, 1, {{}}, ys);
    REQUIRE(report.singular_ratio < 1e-6);
  }
}

TEST_CASE("composite check fires the closed-form rules") {
  const Model binom = load_model("model_binomial_mixture.json");
  const auto r1 = check_identifiability(
      binom.shape(), binom.mixing_measure(), 1, {{0.5}}, {0.0, 1.0});
  REQUIRE(r1.rule_fired == "binomial_complexity");
  REQUIRE(r1.order_claimed == -1);

  const Model nb = load_model("model_nb_pathological.json");
  std::vector<std::vector<double>> xs;
  for (int g = 0; g < 9; ++g) xs.push_back({5.0 * g / 8.0});
  std::vector<double> ys;
  for (int y = 0; y <= 40; ++y) ys.push_back(y);
  const auto r2 = check_identifiability(nb.shape(), nb.mixing_measure(), 1,
                                        xs, ys);
  REQUIRE(r2.rule_fired == "nb_pathology");
  REQUIRE(r2.offending_pairs.size() == 1);

  nlohmann::json j = r2;
  REQUIRE(j["order_claimed"] == "none");
  REQUIRE(j["offending_pairs"][0][0] == 0);
}

TEST_CASE("second-order numeric columns exist and behave") {
  const Model quad = load_model("model_quadratic_normal.json");
  std::vector<std::vector<double>> xs;
  for (int g = 0; g < 9; ++g) xs.push_back({-3.0 + 6.0 * g / 8.0});
  std::vector<double> ys;
  for (int g = 0; g < 41; ++g) ys.push_back(-12.0 + 36.0 * g / 40.0);
  const auto report = numeric_strong_identifiability(
      quad.shape(), quad.mixing_measure(), 2, xs, ys);
  // fixed-variance normal with a polynomial link is second-order
  // identifiable, so the columns stay independent at grid resolution
  REQUIRE(report.singular_ratio > 1e-8);
}
