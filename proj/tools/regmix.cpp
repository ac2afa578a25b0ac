// regmix: simulate, fit (EM / Gibbs), measure distances, check
// identifiability, and run the simulation-study experiments.
//
// Exit codes: 0 success, 1 validation error (machine-readable JSON on
// stderr), 2 runtime failure.  Every stochastic subcommand requires --seed
// and embeds the resolved seed in its output meta block.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "regmix/bayes.hpp"
#include "regmix/em.hpp"
#include "regmix/experiments.hpp"
#include "regmix/identifiability.hpp"
#include "regmix/model.hpp"
#include "regmix/version.hpp"

namespace {

using nlohmann::json;

struct ValidationError : std::runtime_error {
  std::string code;
  ValidationError(std::string code_, const std::string& message)
      : std::runtime_error(message), code(std::move(code_)) {}
};

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("file_not_found", "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& err) {
    throw ValidationError("json_parse_error",
                          path + ": " + std::string(err.what()));
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
}

void write_json(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

json make_meta(const std::string& command, const json& config,
               std::optional<std::uint64_t> seed, double wall_time_s,
               int threads) {
  json meta{{"version", regmix::kVersion},
            {"command", command},
            {"config", config},
            {"wall_time_s", wall_time_s},
            {"threads", threads}};
  if (seed) meta["seed"] = *seed;
  return meta;
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed) {
  if (!seed)
    throw ValidationError("seed_required",
                          "this subcommand is stochastic; pass --seed");
  return *seed;
}

regmix::CovariateDistribution require_px(const regmix::ModelShape& shape) {
  if (!shape.px)
    throw ValidationError("px_missing",
                          "model JSON must carry a px block for this command");
  return *shape.px;
}

// Evaluation grids for the numeric identifiability check: x over the px (or
// unit) box, y over the pooled component support.
std::pair<std::vector<std::vector<double>>, std::vector<double>> build_grids(
    const regmix::Model& model, int x_points, int y_points) {
  const auto& shape = model.shape();
  std::vector<std::vector<double>> xs;
  const std::size_t p = shape.link1.covariate_dim();
  if (p == 0) {
    xs.push_back({});
  } else {
    std::vector<double> lo(p, -1.0), hi(p, 1.0);
    if (shape.px && shape.px->kind == regmix::CovariateDistribution::Kind::kUniform) {
      lo = shape.px->lo;
      hi = shape.px->hi;
    }
    for (int g = 0; g < x_points; ++g) {
      std::vector<double> x(p);
      for (std::size_t c = 0; c < p; ++c) {
        const double t =
            x_points == 1 ? 0.5 : static_cast<double>(g) / (x_points - 1);
        x[c] = lo[c] + t * (hi[c] - lo[c]);
      }
      xs.push_back(std::move(x));
    }
  }
  std::vector<double> ys;
  if (model.kernel().is_discrete()) {
    long ymax = 0;
    for (const auto& x : xs)
      for (const auto& atom : model.mixing_measure().atoms()) {
        const auto [mu, phi] = shape.mu_phi(atom, x);
        ymax = std::max(ymax, model.kernel().truncation_ymax(mu, phi, 1e-10));
      }
    ymax = std::min<long>(ymax, 400);
    for (long y = 0; y <= ymax; ++y) ys.push_back(static_cast<double>(y));
  } else {
    double lo = 1e300, hi = -1e300;
    for (const auto& x : xs)
      for (const auto& atom : model.mixing_measure().atoms()) {
        const auto [mu, phi] = shape.mu_phi(atom, x);
        const double sd = std::sqrt(model.kernel().variance(mu, phi));
        lo = std::min(lo, mu - 6.0 * sd);
        hi = std::max(hi, mu + 6.0 * sd);
      }
    for (int g = 0; g < y_points; ++g)
      ys.push_back(lo + (hi - lo) * g / (y_points - 1));
  }
  return {xs, ys};
}

int run(int argc, char** argv) {
  CLI::App app{"mixture-of-regressions toolkit"};
  app.require_subcommand(1);
  int threads = regmix::default_worker_count();
  app.add_option("--threads", threads, "worker pool size");

  // --- simulate ---
  auto* sim = app.add_subcommand("simulate", "draw a dataset from a model");
  std::string sim_model, sim_out, sim_labels;
  std::size_t sim_n = 0;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--model", sim_model)->required();
  sim->add_option("--n", sim_n)->required();
  sim->add_option("--seed", sim_seed);
  sim->add_option("--out", sim_out)->required();
  sim->add_option("--labels-out", sim_labels);

  // --- fit-em ---
  auto* fem = app.add_subcommand("fit-em", "maximum likelihood by EM/GEM");
  std::string fem_data, fem_model, fem_out, fem_strategy, fem_init = "random_from_box";
  int fem_k = 2, fem_restarts = 8, fem_max_iter = 2000;
  double fem_eps = -1.0, fem_nu = 0.01;
  bool fem_no_backtracking = false, fem_overfit = false;
  std::optional<std::uint64_t> fem_seed;
  fem->add_option("--data", fem_data)->required();
  fem->add_option("--model", fem_model)->required();
  fem->add_option("--k", fem_k)->required();
  fem->add_option("--strategy", fem_strategy,
                  "closed_form|em1|em1_bare|gradient (default: by family)");
  fem->add_option("--epsilon", fem_eps);
  fem->add_option("--max-iter", fem_max_iter);
  fem->add_option("--nu", fem_nu);
  fem->add_option("--restarts", fem_restarts);
  fem->add_option("--init", fem_init, "random_from_box|kmeans_on_y");
  fem->add_flag("--no-backtracking", fem_no_backtracking);
  fem->add_flag("--overfit", fem_overfit,
                "disable the degenerate-component guard");
  fem->add_option("--seed", fem_seed);
  fem->add_option("--out", fem_out)->required();

  // --- fit-bayes ---
  auto* fb = app.add_subcommand("fit-bayes", "fixed-K Gibbs sampling");
  std::string fb_data, fb_model, fb_out, fb_prior;
  int fb_k = 2, fb_iters = 2500, fb_burnin = 500, fb_thin = 1;
  double fb_proposal_sd = 0.1;
  std::optional<std::uint64_t> fb_seed;
  fb->add_option("--data", fb_data)->required();
  fb->add_option("--model", fb_model)->required();
  fb->add_option("--k", fb_k)->required();
  fb->add_option("--iters", fb_iters);
  fb->add_option("--burnin", fb_burnin);
  fb->add_option("--thin", fb_thin);
  fb->add_option("--proposal-sd", fb_proposal_sd);
  fb->add_option("--prior", fb_prior, "prior spec JSON file");
  fb->add_option("--seed", fb_seed);
  fb->add_option("--out", fb_out)->required();

  // --- wasserstein ---
  auto* ws = app.add_subcommand("wasserstein",
                                "exact W_r between two mixing measures");
  std::string ws_a, ws_b, ws_out;
  int ws_r = 1;
  ws->add_option("--a", ws_a)->required();
  ws->add_option("--b", ws_b)->required();
  ws->add_option("--r", ws_r);
  ws->add_option("--out", ws_out, "also write distance + plan JSON");

  // --- distance ---
  auto* dist = app.add_subcommand(
      "distance", "expected distance between two conditional densities");
  std::string dist_a, dist_b, dist_metric = "tv", dist_out;
  std::size_t dist_mc = 2000;
  int dist_r = 1;
  std::optional<std::uint64_t> dist_seed;
  dist->add_option("--model-a", dist_a)->required();
  dist->add_option("--model-b", dist_b)->required();
  dist->add_option("--metric", dist_metric, "tv|hellinger2|prediction");
  dist->add_option("--mc-points", dist_mc);
  dist->add_option("--r", dist_r, "order for --metric prediction");
  dist->add_option("--seed", dist_seed);
  dist->add_option("--out", dist_out);

  // --- check-identifiability ---
  auto* ident = app.add_subcommand("check-identifiability",
                                   "strong-identifiability diagnostics");
  std::string ident_model, ident_report;
  int ident_order = 1, ident_xgrid = 21;
  double ident_threshold = 1e-6, ident_tol = 1e-6;
  ident->add_option("--model", ident_model)->required();
  ident->add_option("--order", ident_order);
  ident->add_option("--report", ident_report)->required();
  ident->add_option("--x-grid", ident_xgrid);
  ident->add_option("--threshold", ident_threshold);
  ident->add_option("--pathology-tol", ident_tol);

  // --- experiment ---
  auto* exp = app.add_subcommand("experiment", "run a simulation study");
  std::string exp_spec, exp_out;
  exp->add_option("--spec", exp_spec)->required();
  exp->add_option("--out", exp_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (app.exit(err) == 0) return 0;
    std::cerr << json{{"error", "argument_error"}, {"message", err.what()}}
              << "\n";
    return 1;
  }

  Stopwatch watch;

  if (*sim) {
    const std::uint64_t seed = require_seed(sim_seed);
    const regmix::Model model = regmix::model_from_json(load_json(sim_model));
    const auto px = require_px(model.shape());
    regmix::Rng rng(seed);
    const regmix::Dataset data =
        model.simulate(px, sim_n, rng, !sim_labels.empty());
    regmix::write_csv(data, sim_out);
    if (!sim_labels.empty()) {
      std::ofstream lout(sim_labels);
      lout << "label\n";
      for (int l : data.labels) lout << l << "\n";
    }
    const json config{{"model", sim_model}, {"n", sim_n}, {"out", sim_out}};
    write_json(sim_out + ".meta.json",
               json{{"meta", make_meta("simulate", config, seed,
                                       watch.seconds(), threads)}});
    return 0;
  }

  if (*fem) {
    const std::uint64_t seed = require_seed(fem_seed);
    const json shape_json = load_json(fem_model);
    const regmix::ModelShape shape = shape_json.get<regmix::ModelShape>();
    const regmix::Dataset data = regmix::read_csv(fem_data);
    regmix::EMConfig config;
    config.k = fem_k;
    config.max_iter = fem_max_iter;
    config.epsilon = fem_eps;
    config.m_step = fem_strategy.empty()
                        ? regmix::default_m_step(shape.kernel.family())
                        : regmix::m_step_strategy_from_string(fem_strategy);
    config.nu = fem_nu;
    config.backtracking = !fem_no_backtracking;
    config.restarts = fem_restarts;
    config.seed = seed;
    config.init = fem_init == "kmeans_on_y"
                      ? regmix::EMConfig::Init::kKmeansOnY
                      : regmix::EMConfig::Init::kRandomFromBox;
    config.exact_fitted_guard = !fem_overfit;
    const regmix::EMResult result = regmix::fit_em(shape, config, data);
    json out{{"result", result}};
    out["meta"] = make_meta("fit-em", json(config), seed, watch.seconds(),
                            threads);
    write_json(fem_out, out);
    return 0;
  }

  if (*fb) {
    const std::uint64_t seed = require_seed(fb_seed);
    const regmix::ModelShape shape =
        load_json(fb_model).get<regmix::ModelShape>();
    const regmix::Dataset data = regmix::read_csv(fb_data);
    regmix::PriorSpec prior;
    if (!fb_prior.empty()) prior = load_json(fb_prior).get<regmix::PriorSpec>();
    regmix::MCMCConfig config;
    config.iterations = fb_iters;
    config.burn_in = fb_burnin;
    config.thin = fb_thin;
    config.proposal_sd = fb_proposal_sd;
    config.seed = seed;
    config.validate();
    regmix::GibbsSampler sampler(shape, fb_k, prior, config, data);
    regmix::Rng rng(seed);
    const regmix::Chain chain = sampler.run(rng);
    json samples = json::array();
    for (const auto& sample : chain.samples) samples.push_back(json(sample));
    json out{{"k", fb_k},
             {"acceptance",
              {{"theta", chain.theta_acceptance()},
               {"eta", chain.eta_acceptance()}}},
             {"samples", samples}};
    out["meta"] =
        make_meta("fit-bayes", json(config), seed, watch.seconds(), threads);
    write_json(fb_out, out);
    return 0;
  }

  if (*ws) {
    const regmix::MixingMeasure a =
        load_json(ws_a).get<regmix::MixingMeasure>();
    const regmix::MixingMeasure b =
        load_json(ws_b).get<regmix::MixingMeasure>();
    const auto [distance, plan] = regmix::wasserstein(a, b, ws_r);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", distance);
    std::cout << buf << "\n";
    if (!ws_out.empty()) {
      std::vector<std::vector<double>> q(plan.q.rows());
      for (Eigen::Index i = 0; i < plan.q.rows(); ++i)
        for (Eigen::Index j = 0; j < plan.q.cols(); ++j)
          q[i].push_back(plan.q(i, j));
      json out{{"distance", distance}, {"cost", plan.cost}, {"plan", q}};
      out["meta"] = make_meta("wasserstein",
                              json{{"a", ws_a}, {"b", ws_b}, {"r", ws_r}},
                              std::nullopt, watch.seconds(), threads);
      write_json(ws_out, out);
    }
    return 0;
  }

  if (*dist) {
    const std::uint64_t seed = require_seed(dist_seed);
    const regmix::Model a = regmix::model_from_json(load_json(dist_a));
    const regmix::Model b = regmix::model_from_json(load_json(dist_b));
    const auto px = require_px(a.shape());
    regmix::DistanceEstimate est;
    if (dist_metric == "tv")
      est = regmix::expected_total_variation(a, b, px, dist_mc, seed, threads);
    else if (dist_metric == "hellinger2")
      est = regmix::expected_hellinger_sq(a, b, px, dist_mc, seed, threads);
    else if (dist_metric == "prediction")
      est = regmix::prediction_error(a.mixing_measure(), b.mixing_measure(),
                                     a.shape(), px, dist_r, dist_mc, seed,
                                     threads);
    else
      throw ValidationError("unknown_metric",
                            "metric must be tv|hellinger2|prediction");
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", est.value);
    std::cout << buf << "\n";
    if (!dist_out.empty()) {
      json out{{"value", est.value},
               {"std_error", est.std_error},
               {"mc_points", est.mc_points},
               {"workers", est.workers}};
      out["meta"] = make_meta(
          "distance",
          json{{"model_a", dist_a}, {"model_b", dist_b},
               {"metric", dist_metric}, {"mc_points", dist_mc}, {"r", dist_r}},
          seed, watch.seconds(), threads);
      write_json(dist_out, out);
    }
    return 0;
  }

  if (*ident) {
    const regmix::Model model = regmix::model_from_json(load_json(ident_model));
    const auto [xs, ys] = build_grids(model, ident_xgrid, 81);
    const regmix::IdentifiabilityReport report = regmix::check_identifiability(
        model.shape(), model.mixing_measure(), ident_order, xs, ys,
        ident_threshold, ident_tol);
    json out{{"report", report}};
    out["meta"] = make_meta(
        "check-identifiability",
        json{{"model", ident_model}, {"order", ident_order},
             {"x_grid", ident_xgrid}, {"threshold", ident_threshold}},
        std::nullopt, watch.seconds(), threads);
    write_json(ident_report, out);
    return 0;
  }

  if (*exp) {
    const json spec = load_json(exp_spec);
    if (!spec.contains("seed"))
      throw ValidationError("seed_required", "experiment spec needs a seed");
    std::filesystem::create_directories(exp_out);
    regmix::ExperimentOutput out = regmix::run_experiment_json(spec, threads);
    write_text(exp_out + "/records.csv", out.records_csv);
    write_json(exp_out + "/summary.json", out.summary);
    out.meta["wall_time_s"] = watch.seconds();
    out.meta["threads"] = threads;
    write_json(exp_out + "/meta.json", out.meta);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& err) {
    std::cerr << json{{"error", err.code}, {"message", err.what()}} << "\n";
    return 1;
  } catch (const std::invalid_argument& err) {
    std::cerr << json{{"error", "validation_error"}, {"message", err.what()}}
              << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << json{{"error", "runtime_error"}, {"message", err.what()}}
              << "\n";
    return 2;
  }
}
