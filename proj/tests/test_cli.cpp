#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  const fs::path dir = fs::temp_directory_path() / "regmix_cli_io";
  fs::create_directories(dir);
  const fs::path out_path = dir / "stdout.txt";
  const fs::path err_path = dir / "stderr.txt";
  const std::string cmd = std::string(REGMIX_BIN_PATH) + " " + args + " > " +
                          out_path.string() + " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WEXITSTATUS(status);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

std::string config_path(const std::string& name) {
  return std::string(CONFIG_DIR) + "/" + name;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json load(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

// Outputs must be identical across reruns except for the wall-time field.
json strip_wall_time(json j) {
  if (j.contains("meta") && j["meta"].contains("wall_time_s"))
    j["meta"].erase("wall_time_s");
  if (j.contains("wall_time_s")) j.erase("wall_time_s");
  return j;
}

}  // namespace

#ifndef CONFIG_DIR
#error "CONFIG_DIR must be defined"
#endif

TEST_CASE("wasserstein subcommand prints the exact distance") {
  const CliResult r = run_cli("wasserstein --a " +
                              config_path("measure_binom_g1.json") + " --b " +
                              config_path("measure_binom_g2.json") + " --r 1");
  REQUIRE(r.exit_code == 0);
  REQUIRE(std::fabs(std::stod(r.out) - 0.1) < 1e-12);
}

TEST_CASE("missing seed on a stochastic subcommand is a validation error") {
  const fs::path dir = fresh_dir("regmix_cli_seed");
  const CliResult r =
      run_cli("simulate --model " + config_path("model_quadratic_normal.json") +
              " --n 10 --out " + (dir / "d.csv").string());
  REQUIRE(r.exit_code == 1);
  const json err = json::parse(r.err);
  REQUIRE(err["error"] == "seed_required");
}

TEST_CASE("unknown subcommand and bad files exit with code 1") {
  REQUIRE(run_cli("frobnicate").exit_code == 1);
  const fs::path dir = fresh_dir("regmix_cli_badfile");
  const CliResult r = run_cli("simulate --model /nonexistent.json --n 5 " +
                              std::string("--seed 1 --out ") +
                              (dir / "d.csv").string());
  REQUIRE(r.exit_code == 1);
  REQUIRE(json::parse(r.err)["error"] == "file_not_found");
}

TEST_CASE("simulate then fit-em round trip keeps the likelihood monotone") {
  const fs::path dir = fresh_dir("regmix_cli_roundtrip");
  const std::string data = (dir / "data.csv").string();
  const std::string result = (dir / "fit.json").string();

  CliResult sim =
      run_cli("simulate --model " + config_path("model_quadratic_normal.json") +
              " --n 4000 --seed 11 --out " + data);
  REQUIRE(sim.exit_code == 0);

  CliResult fit = run_cli(
      "fit-em --data " + data + " --model " +
      config_path("model_quadratic_normal.json") +
      " --k 2 --strategy closed_form --restarts 3 --max-iter 200 --seed 7 "
      "--out " +
      result);
  REQUIRE(fit.exit_code == 0);

  const json out = load(result);
  const auto trace = out["result"]["loglik_trace"].get<std::vector<double>>();
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i)
    REQUIRE(trace[i] >= trace[i - 1] - 1e-9);
  REQUIRE(out["meta"]["seed"] == 7);
  REQUIRE(out["meta"]["version"] == "0.1.0");
}

TEST_CASE("stochastic outputs are bitwise reproducible modulo wall time") {
  const fs::path dir = fresh_dir("regmix_cli_determinism");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  for (int run = 0; run < 2; ++run) {
    const CliResult r = run_cli(
        "simulate --model " + config_path("model_nb_pathological.json") +
        " --n 200 --seed 42 --out " +
        (dir / ("d" + std::to_string(run) + ".csv")).string());
    REQUIRE(r.exit_code == 0);
  }
  REQUIRE(slurp(dir / "d0.csv") == slurp(dir / "d1.csv"));
  REQUIRE(strip_wall_time(load(dir / "d0.csv.meta.json"))["meta"]["seed"] ==
          42);

  for (int run = 0; run < 2; ++run) {
    const CliResult r = run_cli(
        "fit-bayes --data " + (dir / "d0.csv").string() + " --model " +
        config_path("model_nb_pathological.json") +
        " --k 2 --iters 60 --burnin 20 --seed 3 --out " +
        (dir / ("chain" + std::to_string(run) + ".json")).string());
    REQUIRE(r.exit_code == 0);
  }
  const json c0 = strip_wall_time(load(dir / "chain0.json"));
  const json c1 = strip_wall_time(load(dir / "chain1.json"));
  REQUIRE(c0 == c1);
  REQUIRE(c0["samples"].size() == 40);
}

TEST_CASE("distance subcommand reproduces the total-variation collapse") {
  const fs::path dir = fresh_dir("regmix_cli_distance");
  // second measure of the counterexample, as a full model document
  json model2 = load(config_path("model_binomial_mixture.json"));
  model2["measure"]["atoms"][0]["theta1"] = {0.2};
  model2["measure"]["atoms"][1]["theta1"] = {0.8};
  const fs::path m2 = dir / "g2.json";
  std::ofstream(m2) << model2.dump(2);

  const CliResult r = run_cli(
      "distance --model-a " + config_path("model_binomial_mixture.json") +
      " --model-b " + m2.string() + " --metric tv --mc-points 100 --seed 5");
  REQUIRE(r.exit_code == 0);
  REQUIRE(std::stod(r.out) <= 1e-12);
}

TEST_CASE("check-identifiability writes a structured report") {
  const fs::path dir = fresh_dir("regmix_cli_ident");
  const std::string report = (dir / "report.json").string();
  const CliResult r = run_cli(
      "check-identifiability --model " +
      config_path("model_nb_pathological.json") + " --order 1 --report " +
      report);
  REQUIRE(r.exit_code == 0);
  const json j = load(report);
  REQUIRE(j["report"]["rule_fired"] == "nb_pathology");
  REQUIRE(j["report"]["order_claimed"] == "none");
}

TEST_CASE("experiment subcommand writes records, summary and meta") {
  const fs::path dir = fresh_dir("regmix_cli_experiment");
  json spec = load(config_path("experiment_inverse_bound_binomial.json"));
  spec["samples"] = 40;
  const fs::path spec_path = dir / "spec.json";
  std::ofstream(spec_path) << spec.dump(2);

  const CliResult r = run_cli("experiment --spec " + spec_path.string() +
                              " --out " + (dir / "out").string());
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(dir / "out" / "records.csv"));
  REQUIRE(fs::exists(dir / "out" / "summary.json"));
  const json meta = load(dir / "out" / "meta.json");
  REQUIRE(meta["experiment"] == "inverse_bound");
  REQUIRE(meta["seed"] == spec["seed"]);
}
