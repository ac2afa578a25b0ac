#pragma once

// Declarative harness for the four simulation studies, emitting long-format
// records plus summary/metadata documents.  Every experiment is a pure
// function of (spec, seeds): replicates derive their streams from
// (master seed, n index, replicate index) and are aggregated in job order,
// so reruns are bitwise identical for any worker count.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "regmix/bayes.hpp"
#include "regmix/em.hpp"
#include "regmix/identifiability.hpp"
#include "regmix/model.hpp"
#include "regmix/parallel.hpp"
#include "regmix/version.hpp"

namespace regmix {

struct Record {
  std::string metric;
  std::string arm;  // "" when the experiment has a single arm
  double n = 0.0;   // sample size (or 0 when not applicable)
  long replicate = 0;
  double value = 0.0;
  bool failed = false;
};

inline std::string records_to_csv(const std::vector<Record>& records) {
  std::ostringstream out;
  out << "metric,arm,n,replicate,value,failed\n";
  char buf[40];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.n);
    out << r.metric << "," << r.arm << "," << buf << "," << r.replicate << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    out << buf << "," << (r.failed ? 1 : 0) << "\n";
  }
  return out.str();
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// OLS of log(error) on log(n).
inline SlopeFit fit_loglog_slope(
    const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3)
    throw std::invalid_argument("fit_loglog_slope: need >= 3 points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [n, e] : points) {
    if (!(n > 0.0) || !(e > 0.0))
      throw std::invalid_argument("fit_loglog_slope: nonpositive value");
    const double x = std::log(n), y = std::log(e);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double m = static_cast<double>(points.size());
  const double sxx_c = sxx - sx * sx / m;
  const double sxy_c = sxy - sx * sy / m;
  const double syy_c = syy - sy * sy / m;
  SlopeFit fit;
  fit.slope = sxy_c / sxx_c;
  fit.intercept = (sy - fit.slope * sx) / m;
  fit.r2 = syy_c > 0.0 ? sxy_c * sxy_c / (sxx_c * syy_c) : 1.0;
  return fit;
}

namespace expdetail {

struct Aggregate {
  double mean = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  long failures = 0;
  long count = 0;
};

inline Aggregate aggregate(std::vector<double> values, long failures) {
  Aggregate agg;
  agg.failures = failures;
  agg.count = static_cast<long>(values.size());
  if (values.empty()) return agg;
  double s = 0.0;
  for (double v : values) s += v;
  agg.mean = s / values.size();
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - lo;
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  agg.q25 = quantile(0.25);
  agg.median = quantile(0.5);
  agg.q75 = quantile(0.75);
  return agg;
}

inline std::uint64_t job_seed(std::uint64_t master, std::size_t n_index,
                              std::size_t replicate) {
  return derive_seed(derive_seed(master, n_index), replicate);
}

}  // namespace expdetail

// ---------------------------------------------------------------------------
// Inverse-bound scatter: perturb G0, record (W1(G, G0), E_X V(f_G, f_G0)).
// ---------------------------------------------------------------------------

struct InverseBoundSpec {
  Model truth;
  CovariateDistribution px;
  double radius = 0.3;
  int samples = 2000;
  std::size_t mc_points = 2000;
  std::uint64_t seed = 0;
  // Adds the exact zero-TV witness (atoms moved apart by radius/3 with the
  // mixture mean preserved); only meaningful for the Binomial(1) constant
  // mixture where random sampling almost surely never lands on V = 0.
  bool include_witness = false;
  int workers = 1;
};

struct InverseBoundResult {
  std::vector<Record> records;  // metrics w1 / exv / ratio per sample
  double min_ratio = 0.0;       // over samples with W1 > 1e-6
  double median_ratio = 0.0;
  double min_ratio_small_w1 = 0.0;  // over samples with W1 < 0.05
  long small_w1_count = 0;
};

inline InverseBoundResult run_inverse_bound(const InverseBoundSpec& spec) {
  if (spec.samples < 1) throw std::invalid_argument("inverse_bound: samples");
  const MixingMeasure& g0 = spec.truth.mixing_measure();
  const ModelShape& shape = spec.truth.shape();

  const int total = spec.samples + (spec.include_witness ? 1 : 0);
  std::vector<double> w1(total), exv(total);
  parallel_for(static_cast<std::size_t>(total), spec.workers,
               [&](std::size_t s) {
                 MixingMeasure g;
                 if (spec.include_witness && s == 0) {
                   // Shift atom coordinates away from the weighted mean by
                   // +-delta so the mixture marginal is unchanged.
                   g = g0;
                   double mean = 0.0;
                   for (const auto& a : g.atoms()) mean += a.weight * a.theta1[0];
                   const double delta = spec.radius / 3.0;
                   for (auto& a : g.atoms())
                     a.theta1[0] += a.theta1[0] >= mean ? delta : -delta;
                 } else {
                   Rng rng(derive_seed(spec.seed, s));
                   g = perturb(g0, spec.radius, rng);
                 }
                 Model perturbed(shape, g);
                 w1[s] = wasserstein_distance(g, g0, 1);
                 exv[s] = expected_total_variation(perturbed, spec.truth,
                                                   spec.px, spec.mc_points,
                                                   derive_seed(spec.seed, 1000003 + s),
                                                   1)
                              .value;
               });

  InverseBoundResult result;
  std::vector<double> ratios;
  result.min_ratio = std::numeric_limits<double>::infinity();
  result.min_ratio_small_w1 = std::numeric_limits<double>::infinity();
  for (int s = 0; s < total; ++s) {
    const bool witness = spec.include_witness && s == 0;
    result.records.push_back(
        {"w1", witness ? "witness" : "", 0.0, s, w1[s], false});
    result.records.push_back(
        {"exv", witness ? "witness" : "", 0.0, s, exv[s], false});
    if (w1[s] > 1e-6) {
      const double ratio = exv[s] / w1[s];
      result.records.push_back(
          {"ratio", witness ? "witness" : "", 0.0, s, ratio, false});
      ratios.push_back(ratio);
      result.min_ratio = std::min(result.min_ratio, ratio);
      if (w1[s] < 0.05 && !witness) {
        result.min_ratio_small_w1 = std::min(result.min_ratio_small_w1, ratio);
        ++result.small_w1_count;
      }
    }
  }
  std::sort(ratios.begin(), ratios.end());
  result.median_ratio =
      ratios.empty() ? 0.0 : ratios[ratios.size() / 2];
  return result;
}

// ---------------------------------------------------------------------------
// MLE rate curve: simulate, EM-fit, record W1 (exact) or W2 (over-fitted).
// ---------------------------------------------------------------------------

struct RateCurveSpec {
  Model truth;
  CovariateDistribution px;
  bool overfit = false;  // fit k0+1 components, report W2
  std::vector<long> n_grid;
  int replicates = 16;
  EMConfig em;  // k is overridden per setting
  std::uint64_t seed = 0;
  int workers = 1;
};

struct CurvePoint {
  long n = 0;
  expdetail::Aggregate error;
  double reference_half = 0.0;     // c * (log n / n)^{1/2}
  double reference_quarter = 0.0;  // c * (log n / n)^{1/4}
};

struct RateCurveResult {
  std::vector<Record> records;
  std::vector<CurvePoint> curve;
  SlopeFit slope;  // log mean error vs log n
  int metric_order = 1;
};

inline RateCurveResult run_rate_curve(const RateCurveSpec& spec) {
  if (spec.n_grid.empty() || spec.replicates < 1)
    throw std::invalid_argument("rate_curve: empty grid or replicates < 1");
  for (std::size_t i = 1; i < spec.n_grid.size(); ++i)
    if (spec.n_grid[i] <= spec.n_grid[i - 1])
      throw std::invalid_argument("rate_curve: n_grid must be increasing");

  const MixingMeasure& g0 = spec.truth.mixing_measure();
  const int k0 = static_cast<int>(g0.size());
  const int fit_k = spec.overfit ? k0 + 1 : k0;
  const int r = spec.overfit ? 2 : 1;

  const std::size_t jobs = spec.n_grid.size() * spec.replicates;
  std::vector<double> errors(jobs, 0.0);
  std::vector<char> failed(jobs, 0);
  parallel_for(jobs, spec.workers, [&](std::size_t job) {
    const std::size_t ni = job / spec.replicates;
    const std::size_t rep = job % spec.replicates;
    const std::uint64_t base = expdetail::job_seed(spec.seed, ni, rep);
    try {
      Rng sim_rng(derive_seed(base, 0));
      const Dataset data = spec.truth.simulate(
          spec.px, static_cast<std::size_t>(spec.n_grid[ni]), sim_rng, false);
      EMConfig em = spec.em;
      em.k = fit_k;
      em.seed = derive_seed(base, 1);
      em.exact_fitted_guard = !spec.overfit;
      const EMResult fit = fit_em(spec.truth.shape(), em, data);
      errors[job] = wasserstein_distance(fit.g_hat, g0, r);
    } catch (const std::exception&) {
      failed[job] = 1;
    }
  });

  RateCurveResult result;
  result.metric_order = r;
  const std::string metric = r == 1 ? "w1" : "w2";
  for (std::size_t ni = 0; ni < spec.n_grid.size(); ++ni) {
    std::vector<double> ok;
    long failures = 0;
    for (int rep = 0; rep < spec.replicates; ++rep) {
      const std::size_t job = ni * spec.replicates + rep;
      result.records.push_back({metric, "", static_cast<double>(spec.n_grid[ni]),
                                rep, errors[job], failed[job] != 0});
      if (failed[job])
        ++failures;
      else
        ok.push_back(errors[job]);
    }
    CurvePoint point;
    point.n = spec.n_grid[ni];
    point.error = expdetail::aggregate(std::move(ok), failures);
    result.curve.push_back(point);
  }

  // Analytic reference curves anchored at the first grid point's mean.
  const double n0 = static_cast<double>(spec.n_grid[0]);
  const double e0 = result.curve[0].error.mean;
  const double c_half = e0 / std::sqrt(std::log(n0) / n0);
  const double c_quarter = e0 / std::pow(std::log(n0) / n0, 0.25);
  for (auto& point : result.curve) {
    const double n = static_cast<double>(point.n);
    point.reference_half = c_half * std::sqrt(std::log(n) / n);
    point.reference_quarter = c_quarter * std::pow(std::log(n) / n, 0.25);
    result.records.push_back({"reference_half", "", n, -1,
                              point.reference_half, false});
    result.records.push_back({"reference_quarter", "", n, -1,
                              point.reference_quarter, false});
  }

  std::vector<std::pair<double, double>> points;
  for (const auto& point : result.curve)
    if (point.error.count > 0 && point.error.mean > 0.0)
      points.emplace_back(static_cast<double>(point.n), point.error.mean);
  result.slope = fit_loglog_slope(points);
  return result;
}

// ---------------------------------------------------------------------------
// Bayesian posterior contraction on the pathological NB configuration.
// ---------------------------------------------------------------------------

struct PosteriorContractionSpec {
  Model truth;
  CovariateDistribution px;
  std::vector<long> n_grid;
  int replicates = 8;
  PriorSpec prior;
  MCMCConfig mcmc;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct PosteriorContractionResult {
  std::vector<Record> records;  // metric mean_w1 per (n, replicate)
  std::vector<CurvePoint> curve;
  std::vector<std::vector<double>> per_replicate;  // [n_index][replicate]
  double theta_acceptance = 0.0;  // pooled over chains
  double eta_acceptance = 0.0;
};

inline PosteriorContractionResult run_posterior_contraction(
    const PosteriorContractionSpec& spec) {
  if (spec.n_grid.empty() || spec.replicates < 1)
    throw std::invalid_argument("posterior_contraction: bad grid/replicates");
  const MixingMeasure& g0 = spec.truth.mixing_measure();
  const int k0 = static_cast<int>(g0.size());

  const std::size_t jobs = spec.n_grid.size() * spec.replicates;
  std::vector<double> means(jobs, 0.0);
  std::vector<char> failed(jobs, 0);
  std::vector<long> tprop(jobs, 0), tacc(jobs, 0), eprop(jobs, 0),
      eacc(jobs, 0);
  parallel_for(jobs, spec.workers, [&](std::size_t job) {
    const std::size_t ni = job / spec.replicates;
    const std::size_t rep = job % spec.replicates;
    const std::uint64_t base = expdetail::job_seed(spec.seed, ni, rep);
    try {
      Rng sim_rng(derive_seed(base, 0));
      const Dataset data = spec.truth.simulate(
          spec.px, static_cast<std::size_t>(spec.n_grid[ni]), sim_rng, false);
      MCMCConfig mcmc = spec.mcmc;
      mcmc.seed = derive_seed(base, 1);
      GibbsSampler sampler(spec.truth.shape(), k0, spec.prior, mcmc, data);
      Rng chain_rng(mcmc.seed);
      const Chain chain = sampler.run(chain_rng);
      means[job] = posterior_w1(sampler, chain, g0).mean;
      tprop[job] = chain.theta_proposals;
      tacc[job] = chain.theta_accepts;
      eprop[job] = chain.eta_proposals;
      eacc[job] = chain.eta_accepts;
    } catch (const std::exception&) {
      failed[job] = 1;
    }
  });

  PosteriorContractionResult result;
  long tp = 0, ta = 0, ep = 0, ea = 0;
  for (std::size_t ni = 0; ni < spec.n_grid.size(); ++ni) {
    std::vector<double> ok;
    std::vector<double> all;
    long failures = 0;
    for (int rep = 0; rep < spec.replicates; ++rep) {
      const std::size_t job = ni * spec.replicates + rep;
      result.records.push_back({"mean_w1", "",
                                static_cast<double>(spec.n_grid[ni]), rep,
                                means[job], failed[job] != 0});
      all.push_back(failed[job] ? std::numeric_limits<double>::quiet_NaN()
                                : means[job]);
      if (failed[job]) {
        ++failures;
      } else {
        ok.push_back(means[job]);
        tp += tprop[job];
        ta += tacc[job];
        ep += eprop[job];
        ea += eacc[job];
      }
    }
    CurvePoint point;
    point.n = spec.n_grid[ni];
    point.error = expdetail::aggregate(std::move(ok), failures);
    result.curve.push_back(point);
    result.per_replicate.push_back(std::move(all));
  }
  result.theta_acceptance = tp > 0 ? static_cast<double>(ta) / tp : 0.0;
  result.eta_acceptance = ep > 0 ? static_cast<double>(ea) / ep : 0.0;

  // 1/log(n) reference anchored at the first grid point.
  const double c =
      result.curve[0].error.mean * std::log(static_cast<double>(spec.n_grid[0]));
  for (auto& point : result.curve) {
    point.reference_half = c / std::log(static_cast<double>(point.n));
    result.records.push_back({"reference_invlog", "",
                              static_cast<double>(point.n), -1,
                              point.reference_half, false});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Subsample stability against the full-data reference fit (crash workflow).
// ---------------------------------------------------------------------------

struct SubsampleStabilitySpec {
  ModelShape shape;
  Dataset full_data;
  double band = 0.3;
  std::vector<long> n_grid;
  int replicates = 8;
  EMConfig em;  // k applies to both the reference and subsample fits
  std::uint64_t seed = 0;
  int workers = 1;
};

struct SubsampleStabilityResult {
  std::vector<Record> records;  // arms "all" and "band"
  MixingMeasure reference_fit;
  PathologyGapSummary gap_summary;
  long band_rows = 0;
  std::map<std::string, std::vector<CurvePoint>> curves;
};

inline SubsampleStabilityResult run_subsample_stability(
    const SubsampleStabilitySpec& spec) {
  spec.full_data.validate();
  if (spec.em.k != 2)
    throw std::invalid_argument("subsample_stability: 2-component workflow");
  for (long n : spec.n_grid)
    if (n < 1 || n > static_cast<long>(spec.full_data.size()))
      throw std::invalid_argument(
          "subsample_stability: subsample size exceeds available rows");

  // Reference fit on the full data.
  EMConfig ref_cfg = spec.em;
  ref_cfg.seed = derive_seed(spec.seed, 0xFFFF);
  const EMResult reference = fit_em(spec.shape, ref_cfg, spec.full_data);

  SubsampleStabilityResult result;
  result.reference_fit = reference.g_hat;
  result.gap_summary = nb_pathology_gap(spec.shape, reference.g_hat,
                                        spec.full_data, spec.band);

  // Band-restricted row set (pathology-adjacent subpopulation).
  std::vector<std::size_t> band_rows;
  for (std::size_t i = 0; i < spec.full_data.size(); ++i)
    if (std::fabs(result.gap_summary.gaps[i]) <= spec.band)
      band_rows.push_back(i);
  result.band_rows = static_cast<long>(band_rows.size());

  // Subsample fits share the reference fit's dispersions.
  std::vector<std::vector<double>> ref_theta2;
  for (const auto& atom : reference.g_hat.atoms())
    ref_theta2.push_back(atom.theta2);

  struct Arm {
    std::string name;
    const std::vector<std::size_t>* rows;  // nullptr = all rows
  };
  std::vector<std::size_t> all_rows(spec.full_data.size());
  for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
  const std::vector<Arm> arms = {{"all", &all_rows}, {"band", &band_rows}};

  for (const auto& arm : arms) {
    const std::vector<std::size_t>& rows = *arm.rows;
    std::vector<CurvePoint> curve;
    for (std::size_t ni = 0; ni < spec.n_grid.size(); ++ni) {
      const long n = spec.n_grid[ni];
      if (n > static_cast<long>(rows.size())) {
        CurvePoint point;
        point.n = n;
        point.error = expdetail::aggregate({}, spec.replicates);
        curve.push_back(point);
        for (int rep = 0; rep < spec.replicates; ++rep)
          result.records.push_back({"w1_to_full", arm.name,
                                    static_cast<double>(n), rep, 0.0, true});
        continue;
      }
      // The full-size unrestricted "subsample" is the estimator applied to
      // the full data, i.e. the reference fit itself; replay it exactly so
      // the error is zero by construction.
      const bool replay_reference =
          arm.name == "all" && n == static_cast<long>(spec.full_data.size());
      std::vector<double> errs(spec.replicates, 0.0);
      std::vector<char> failed(spec.replicates, 0);
      parallel_for(static_cast<std::size_t>(spec.replicates), spec.workers,
                   [&](std::size_t rep) {
                     const std::uint64_t base = expdetail::job_seed(
                         spec.seed + (arm.name == "band" ? 0x10000 : 0), ni,
                         rep);
                     try {
                       Rng rng(derive_seed(base, 0));
                       // Uniform subsample without replacement (partial
                       // Fisher-Yates), kept in ascending row order.
                       std::vector<std::size_t> pool = rows;
                       for (long t = 0; t < n && !replay_reference; ++t) {
                         const std::size_t pick =
                             t + rng.uniform_index(pool.size() - t);
                         std::swap(pool[t], pool[pick]);
                       }
                       std::sort(pool.begin(), pool.begin() + n);
                       Dataset sub;
                       for (long t = 0; t < n; ++t) {
                         sub.x.push_back(spec.full_data.x[pool[t]]);
                         sub.y.push_back(spec.full_data.y[pool[t]]);
                       }
                       EMConfig em = spec.em;
                       if (replay_reference) {
                         em.seed = derive_seed(spec.seed, 0xFFFF);
                       } else {
                         em.seed = derive_seed(base, 1);
                         em.init_theta2 = ref_theta2;
                       }
                       const EMResult fit = fit_em(spec.shape, em, sub);
                       errs[rep] = wasserstein_distance(fit.g_hat,
                                                        reference.g_hat, 1);
                     } catch (const std::exception&) {
                       failed[rep] = 1;
                     }
                   });
      std::vector<double> ok;
      long failures = 0;
      for (int rep = 0; rep < spec.replicates; ++rep) {
        result.records.push_back({"w1_to_full", arm.name,
                                  static_cast<double>(n), rep, errs[rep],
                                  failed[rep] != 0});
        if (failed[rep])
          ++failures;
        else
          ok.push_back(errs[rep]);
      }
      CurvePoint point;
      point.n = n;
      point.error = expdetail::aggregate(std::move(ok), failures);
      curve.push_back(point);
    }
    result.curves[arm.name] = std::move(curve);
  }

  // n^{-1/2} reference anchored at the first unrestricted point.
  const auto& all_curve = result.curves["all"];
  if (!all_curve.empty() && all_curve[0].error.count > 0) {
    const double c = all_curve[0].error.mean *
                     std::sqrt(static_cast<double>(all_curve[0].n));
    for (const auto& point : all_curve)
      result.records.push_back(
          {"reference_sqrt", "", static_cast<double>(point.n), -1,
           c / std::sqrt(static_cast<double>(point.n)), false});
  }
  return result;
}

// ---------------------------------------------------------------------------
// JSON-driven front end (CLI `experiment` subcommand).
// ---------------------------------------------------------------------------

struct ExperimentOutput {
  std::string records_csv;
  nlohmann::json summary;
  nlohmann::json meta;
};

inline nlohmann::json aggregate_to_json(const expdetail::Aggregate& a) {
  return nlohmann::json{{"mean", a.mean},     {"q25", a.q25},
                        {"median", a.median}, {"q75", a.q75},
                        {"failures", a.failures}, {"count", a.count}};
}

inline nlohmann::json curve_to_json(const std::vector<CurvePoint>& curve) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& point : curve) {
    nlohmann::json jp = aggregate_to_json(point.error);
    jp["n"] = point.n;
    jp["reference_half"] = point.reference_half;
    jp["reference_quarter"] = point.reference_quarter;
    arr.push_back(jp);
  }
  return arr;
}

inline ExperimentOutput run_experiment_json(const nlohmann::json& spec_json,
                                            int workers) {
  const std::string kind = spec_json.at("experiment").get<std::string>();
  const std::uint64_t seed = spec_json.at("seed").get<std::uint64_t>();
  Model truth = model_from_json(spec_json.at("truth"));
  if (!truth.shape().px && kind != "subsample_stability")
    throw std::invalid_argument("experiment: truth model needs a px block");

  ExperimentOutput out;
  out.meta = nlohmann::json{
      {"version", kVersion},
      {"experiment", kind},
      {"seed", seed},
      {"workers", workers},
      {"perturbation_scheme", perturbation_scheme_note()},
      {"spec", spec_json}};

  if (kind == "inverse_bound") {
    InverseBoundSpec spec{truth,
                          *truth.shape().px,
                          spec_json.value("radius", 0.3),
                          spec_json.value("samples", 2000),
                          spec_json.value("mc_points", std::size_t{2000}),
                          seed,
                          spec_json.value("include_witness", false),
                          workers};
    const InverseBoundResult r = run_inverse_bound(spec);
    out.records_csv = records_to_csv(r.records);
    out.summary = nlohmann::json{{"min_ratio", r.min_ratio},
                                 {"median_ratio", r.median_ratio},
                                 {"min_ratio_small_w1", r.min_ratio_small_w1},
                                 {"small_w1_count", r.small_w1_count}};
  } else if (kind == "rate_curve") {
    RateCurveSpec spec;
    spec.truth = truth;
    spec.px = *truth.shape().px;
    spec.overfit = spec_json.value("setting", "exact") == "overfit";
    spec.n_grid = spec_json.at("n_grid").get<std::vector<long>>();
    spec.replicates = spec_json.value("replicates", 16);
    spec.em = spec_json.value("em", EMConfig{});
    spec.seed = seed;
    spec.workers = workers;
    const RateCurveResult r = run_rate_curve(spec);
    out.records_csv = records_to_csv(r.records);
    long failures = 0;
    for (const auto& point : r.curve) failures += point.error.failures;
    out.summary = nlohmann::json{{"slope", r.slope.slope},
                                 {"intercept", r.slope.intercept},
                                 {"r2", r.slope.r2},
                                 {"metric", r.metric_order == 1 ? "w1" : "w2"},
                                 {"failures", failures},
                                 {"curve", curve_to_json(r.curve)}};
  } else if (kind == "posterior_contraction") {
    PosteriorContractionSpec spec;
    spec.truth = truth;
    spec.px = *truth.shape().px;
    spec.n_grid = spec_json.at("n_grid").get<std::vector<long>>();
    spec.replicates = spec_json.value("replicates", 8);
    spec.prior = spec_json.value("prior", PriorSpec{});
    spec.mcmc = spec_json.value("mcmc", MCMCConfig{});
    spec.seed = seed;
    spec.workers = workers;
    const PosteriorContractionResult r = run_posterior_contraction(spec);
    out.records_csv = records_to_csv(r.records);
    long failures = 0;
    for (const auto& point : r.curve) failures += point.error.failures;
    out.summary = nlohmann::json{{"theta_acceptance", r.theta_acceptance},
                                 {"eta_acceptance", r.eta_acceptance},
                                 {"failures", failures},
                                 {"curve", curve_to_json(r.curve)}};
  } else if (kind == "subsample_stability") {
    SubsampleStabilitySpec spec;
    spec.shape = truth.shape();
    if (spec_json.contains("data")) {
      spec.full_data = read_csv(spec_json["data"].get<std::string>());
    } else {
      Rng rng(derive_seed(seed, 0xDA7A));
      spec.full_data = truth.simulate(
          *truth.shape().px, spec_json.value("full_n", std::size_t{868}), rng,
          false);
    }
    spec.band = spec_json.value("band", 0.3);
    spec.n_grid = spec_json.at("n_grid").get<std::vector<long>>();
    spec.replicates = spec_json.value("replicates", 8);
    spec.em = spec_json.value("em", EMConfig{});
    spec.seed = seed;
    spec.workers = workers;
    const SubsampleStabilityResult r = run_subsample_stability(spec);
    out.records_csv = records_to_csv(r.records);
    out.summary = nlohmann::json{
        {"gap_mean", r.gap_summary.mean},
        {"gap_sd", r.gap_summary.sd},
        {"gap_fraction_within_band", r.gap_summary.fraction_within_band},
        {"band_rows", r.band_rows},
        {"reference_fit", r.reference_fit},
        {"curves",
         {{"all", curve_to_json(r.curves.at("all"))},
          {"band", curve_to_json(r.curves.at("band"))}}}};
  } else {
    throw std::invalid_argument("experiment: unknown kind '" + kind + "'");
  }
  return out;
}

}  // namespace regmix
