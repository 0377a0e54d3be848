#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "doctest.h"
#include "stratreg/cli.hpp"
#include "stratreg/serialize.hpp"

using namespace stratreg;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "stratreg_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines(const std::string& text) {
  std::size_t n = 0;
  for (char ch : text) n += ch == '\n';
  return n;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("run reproduces the Example 4 loop") {
    const auto out = scratch("e4.json");
    const Result r = call({"run", "--example", "4", "--mode", "min-norm", "--epochs", "10", "--epoch-size", "5",
                           "--seed", "1", "--out", out.string()});
    REQUIRE(r.code == 0);
    const json j = json::parse(slurp(out));
    REQUIRE(j["epochs"].size() == 10);
    for (const auto& e : j["epochs"]) {
      CHECK(e["beta_hat"] == json::array({1.0, 0.0}));
      CHECK(e["D"] == json::array({0}));
    }
    CHECK(j.contains("timestamp"));
  }

  TEST_CASE("run with exploration covers both features by epoch 2") {
    const auto out = scratch("e4a.json");
    const auto csv = scratch("e4a.csv");
    const Result r = call({"run", "--example", "4", "--mode", "algorithm2", "--alpha", "3", "--epochs", "3",
                           "--epoch-size", "5", "--out", out.string(), "--csv", csv.string(), "--no-timestamp"});
    REQUIRE(r.code == 0);
    const json j = json::parse(slurp(out));
    CHECK(j["epochs"][1]["D"] == json::array({0, 1}));
    CHECK_FALSE(j.contains("timestamp"));
    const std::string table = slurp(csv);
    CHECK(table.rfind("E,tau,err_D,err_full,rank_U,min_eig_V,D,beta_hat\n", 0) == 0);
    CHECK(lines(table) == 4);
  }

  TEST_CASE("run usage errors") {
    CHECK(call({"run", "--example", "4"}).code == 2);
    CHECK(call({"run", "--out", scratch("x.json").string()}).code == 2);
    CHECK(call({"run", "--example", "9", "--out", scratch("x.json").string()}).code == 2);
    CHECK(call({"run", "--example", "4", "--mode", "greedy", "--out", scratch("x.json").string()}).code == 2);
    CHECK(call({"run", "--example", "4", "--epochs", "0", "--out", scratch("x.json").string()}).code == 2);
    CHECK(call({"run", "--scenario", scratch("missing.json").string(), "--out", scratch("x.json").string()}).code == 2);
    CHECK(call({"run", "--example", "4", "--beta0", "1,x", "--out", scratch("x.json").string()}).code == 2);
    CHECK(call({"run", "--example", "1", "--random", "2,1,1,3", "--out", scratch("x.json").string()}).code == 2);
    const Result r = call({"run", "--example", "4"});
    CHECK(r.err.find("--out") != std::string::npos);
  }

  TEST_CASE("run reports runtime failures with exit code 1") {
    const Result r = call({"run", "--example", "4", "--out", "/nonexistent-dir/deeper/r.json"});
    CHECK(r.code == 1);
    CHECK_FALSE(r.err.empty());
  }

  TEST_CASE("run accepts scenario files and random scenarios") {
    const auto file = scratch("scn.json");
    save_scenario(random_scenario(3, 2, 2, 0.1, 4), file);
    CHECK(call({"run", "--scenario", file.string(), "--epochs", "2", "--epoch-size", "10", "--out",
                scratch("f.json").string()})
              .code == 0);
    CHECK(call({"run", "--random", "3,1,2,8", "--sigma", "0.2", "--epochs", "2", "--epoch-size", "10", "--out",
                scratch("g.json").string(), "--keep-observations"})
              .code == 0);
    const json j = json::parse(slurp(scratch("g.json")));
    CHECK(j["observations"].size() == 20);
  }

  TEST_CASE("identical run commands give identical bytes") {
    std::vector<std::string> base{"run", "--random", "4,2,2,3", "--sigma", "0.3", "--mode", "algorithm2",
                                  "--alpha", "1.5", "--epochs", "4", "--epoch-size", "25", "--seed", "17",
                                  "--no-timestamp", "--keep-observations", "--out"};
    auto a = base, b = base;
    a.push_back(scratch("det_a.json").string());
    b.push_back(scratch("det_b.json").string());
    REQUIRE(call(a).code == 0);
    REQUIRE(call(b).code == 0);
    CHECK(slurp(scratch("det_a.json")) == slurp(scratch("det_b.json")));
  }

  TEST_CASE("sweep writes one row per configuration and seed") {
    const auto out = scratch("sweep1.csv");
    const Result r = call({"sweep", "--example", "3", "--sigma", "0.1", "--T", "60", "--n", "20", "--seeds", "3",
                           "--out", out.string()});
    REQUIRE(r.code == 0);
    const std::string csv = slurp(out);
    CHECK(csv.rfind("run_id,n,alpha,T,sigma,seed,final_err_D,final_err_full,d_covered,epochs_to_full_coverage\n", 0) ==
          0);
    CHECK(lines(csv) == 4);

    const auto grid = scratch("sweep2.csv");
    REQUIRE(call({"sweep", "--random", "3,1,1,2", "--sigma", "0.3,0.1", "--T", "600,2400,9600", "--epochs", "3",
                  "--alpha", "0,1", "--seeds", "2", "--out", grid.string()})
                .code == 0);
    CHECK(lines(slurp(grid)) == 1 + 3 * 2 * 2 * 2);
  }

  TEST_CASE("sweep specification files") {
    const auto spec = scratch("spec.json");
    std::ofstream(spec) << R"({"example": 1, "T": [40, 80], "n": [20], "alpha": [0.5], "seeds": 2,
                              "master_seed": 5, "mode": "algorithm2"})";
    const auto out = scratch("spec.csv");
    REQUIRE(call({"sweep", "--spec", spec.string(), "--out", out.string()}).code == 0);
    CHECK(lines(slurp(out)) == 5);
    // Flags override the file.
    REQUIRE(call({"sweep", "--spec", spec.string(), "--seeds", "1", "--out", out.string()}).code == 0);
    CHECK(lines(slurp(out)) == 3);
  }

  TEST_CASE("sweep usage errors") {
    const auto out = scratch("bad.csv").string();
    CHECK(call({"sweep", "--example", "3", "--n", "10", "--out", out}).code == 2);
    CHECK(call({"sweep", "--example", "3", "--T", "100", "--out", out}).code == 2);
    CHECK(call({"sweep", "--example", "3", "--T", "100", "--n", "30", "--out", out}).code == 2);
    CHECK(call({"sweep", "--T", "100", "--n", "10", "--out", out}).code == 2);
    CHECK(call({"sweep", "--example", "3", "--T", "100", "--n", "10", "--seeds", "0", "--out", out}).code == 2);
    CHECK(call({"sweep", "--example", "3", "--T", "100", "--n", "10"}).code == 2);
  }

  TEST_CASE("sweep output does not depend on the worker count") {
    cli::SweepSpec spec;
    spec.scenario = random_scenario(3, 1, 2, 0.3, 11);
    spec.horizon = {60, 120};
    spec.num_epochs = 3;
    spec.alpha = {0.0, 2.0};
    spec.sigma = {0.3};
    spec.seeds = 5;
    spec.master_seed = 123;
    spec.mode = LseTieRule::algorithm2;
    const std::string one = cli::sweep_csv(cli::run_sweep(spec, 1));
    CHECK(one == cli::sweep_csv(cli::run_sweep(spec, 8)));
    CHECK(one == cli::sweep_csv(cli::run_sweep(spec, 3)));
    const auto rows = cli::run_sweep(spec, 2);
    REQUIRE(rows.size() == 20);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].run_id == i);
      CHECK(rows[i].seed == derive_seed(123, i));
    }
  }

  TEST_CASE("diagnose reports constants and thresholds") {
    const auto out = scratch("diag.json");
    const Result r = call({"diagnose", "--example", "3", "--delta", "0.05", "--n", "50", "--epochs", "2", "--out",
                           out.string(), "--no-timestamp"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("K = 0") != std::string::npos);
    const json j = json::parse(slurp(out));
    CHECK(j["constants"]["k_big"] == 0.0);
    CHECK(j["alpha_threshold"].get<double>() == doctest::Approx(2.0 * std::sqrt(3.0)));
    CHECK(j["epoch_size_threshold"].get<double>() > 0.0);
    CHECK(j["concentration"]["noise_pass"] == true);
    CHECK(j["T"] == 100);
    const auto n_min = j["minimal_epoch_size"].get<std::size_t>();
    CHECK(n_min == minimal_epoch_size(instance_constants(build_example(3).scenario), 3, 2, 0.05));

    const auto out1 = scratch("diag1.json");
    REQUIRE(call({"diagnose", "--example", "1", "--out", out1.string()}).code == 0);
    const json j1 = json::parse(slurp(out1));
    CHECK(j1["constants"]["lambda_sigma"].get<double>() > 0.0);
    CHECK(j1["lambda_sigma_grid"].get<double>() >= j1["constants"]["lambda_sigma"].get<double>() - 1e-3);
  }

  TEST_CASE("diagnose usage errors") {
    CHECK(call({"diagnose"}).code == 2);
    CHECK(call({"diagnose", "--example", "3", "--delta", "1.5"}).code == 2);
    CHECK(call({"diagnose", "--example", "3", "--n", "30", "--T", "100"}).code == 2);
  }

  TEST_CASE("dispatch") {
    CHECK(call({}).code == 2);
    CHECK(call({"fly"}).code == 2);
    CHECK(call({"--help"}).code == 0);
    CHECK(call({"run", "--help"}).code == 0);
  }

  TEST_CASE("worker count comes from the environment") {
    setenv("STRATREG_THREADS", "3", 1);
    CHECK(cli::worker_threads() == 3);
    setenv("STRATREG_THREADS", "zero", 1);
    CHECK(cli::worker_threads() >= 1);
    unsetenv("STRATREG_THREADS");
  }

  TEST_CASE("the installed binary honours exit codes") {
    const std::string bin = STRATREG_CLI_PATH;
    CHECK(WEXITSTATUS(std::system((bin + " run --example 4 > /dev/null 2>&1").c_str())) == 2);
    CHECK(WEXITSTATUS(std::system((bin + " run --example 4 --epochs 2 --epoch-size 3 --out " +
                                   scratch("bin.json").string() + " > /dev/null")
                                      .c_str())) == 0);
  }
}
