#include "stratreg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "stratreg/metrics.hpp"
#include "stratreg/serialize.hpp"

namespace stratreg::cli {

namespace {

// Lossless, for files.
std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// Short, for the console.
std::string show(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

Vector parse_vector(const std::string& text, const char* what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string("cannot parse ") + what + " entry '" + item + "'");
    }
  }
  if (vals.empty()) throw UsageError(std::string(what) + " is empty");
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

// Shared scenario selection: exactly one of --example, --scenario, --random.
struct ScenarioSource {
  int example = 0;
  std::string file;
  std::string random;  // "d,r,l,seed"
  double sigma = -1.0;
  std::string noise;

  void add_to(CLI::App& app, bool sigma_override = true) {
    app.add_option("--example", example, "built-in example 1..4")->check(CLI::Range(1, 4));
    app.add_option("--scenario", file, "scenario JSON file");
    app.add_option("--random", random, "random scenario d,r,l,seed");
    if (sigma_override) {
      app.add_option("--sigma", sigma, "override the noise bound sigma")->check(CLI::NonNegativeNumber);
    }
    app.add_option("--noise", noise, "override the noise law")
        ->check(CLI::IsMember({"uniform", "truncated_gaussian", "zero"}));
  }

  bool given() const { return example != 0 || !file.empty() || !random.empty(); }

  ExampleScenario resolve() const {
    const int picked = (example != 0) + !file.empty() + !random.empty();
    if (picked == 0) throw UsageError("no scenario given (use --example, --scenario or --random)");
    if (picked > 1) throw UsageError("give only one of --example, --scenario, --random");

    ExampleScenario out;
    if (example != 0) {
      out = build_example(example);
    } else if (!file.empty()) {
      out.scenario = load_scenario(file);
    } else {
      const Vector p = parse_vector(random, "--random");
      if (p.size() != 4 || (p.array() < 0).any() || (p.array() != p.array().floor()).any()) {
        throw UsageError("--random expects four non-negative integers d,r,l,seed");
      }
      out.scenario = random_scenario(static_cast<std::size_t>(p(0)), static_cast<std::size_t>(p(1)),
                                     static_cast<std::size_t>(p(2)), 0.0, static_cast<std::uint64_t>(p(3)));
    }
    if (sigma >= 0.0) out.scenario.model.sigma = sigma;
    if (!noise.empty()) out.scenario.model.noise_kind = noise_kind_from_string(noise);
    out.scenario.validate();
    return out;
  }
};

// CLI11 consumes its argument vector back to front.
int parse(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err, bool& done) {
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    done = true;
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }
  done = false;
  return kOk;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}

std::string epoch_csv(const RunRecord& r) {
  std::ostringstream s;
  s << "E,tau,err_D,err_full,rank_U,min_eig_V,D,beta_hat\n";
  for (const auto& e : r.epochs) {
    std::vector<std::string> d, b;
    for (auto k : e.modified) d.push_back(std::to_string(k));
    for (Eigen::Index i = 0; i < e.beta_hat.size(); ++i) b.push_back(fmt(e.beta_hat(i)));
    s << e.epoch << ',' << e.tau << ',' << fmt(e.err_modified) << ',' << fmt(e.err_full) << ',' << e.rank_u << ','
      << fmt(e.min_eig_v) << ',' << join(d, ';') << ',' << join(b, ';') << '\n';
  }
  return s.str();
}

std::string vec_text(const Vector& v) {
  std::vector<std::string> parts;
  for (Eigen::Index i = 0; i < v.size(); ++i) parts.push_back(show(v(i)));
  return "(" + join(parts, ',') + ")";
}

}  // namespace

void SweepSpec::validate() const {
  scenario.validate();
  if (horizon.empty()) throw UsageError("empty T grid");
  if (alpha.empty()) throw UsageError("empty alpha grid");
  if (sigma.empty()) throw UsageError("empty sigma grid");
  if (n.empty() == !num_epochs.has_value()) throw UsageError("give exactly one of an n grid or a number of epochs");
  if (seeds < 1) throw UsageError("seeds must be >= 1");
  for (auto t : horizon) {
    if (t < 1) throw UsageError("T must be >= 1");
    if (num_epochs && (*num_epochs < 1 || t % *num_epochs != 0)) {
      throw UsageError("T = " + std::to_string(t) + " is not a multiple of the epoch count");
    }
    for (auto m : n) {
      if (m < 1 || t % m != 0) throw UsageError("T = " + std::to_string(t) + " is not a multiple of n = " + std::to_string(m));
    }
  }
  for (auto a : alpha) {
    if (!std::isfinite(a) || a < 0.0) throw UsageError("alpha grid entries must be >= 0");
  }
  for (auto s : sigma) {
    if (!std::isfinite(s) || s < 0.0) throw UsageError("sigma grid entries must be >= 0");
  }
}

std::size_t worker_threads() {
  if (const char* env = std::getenv("STRATREG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, std::size_t threads) {
  spec.validate();

  struct Job {
    std::size_t n, horizon;
    double alpha, sigma;
  };
  std::vector<Job> jobs;
  for (auto t : spec.horizon) {
    const std::vector<std::size_t> ns = spec.num_epochs ? std::vector<std::size_t>{t / *spec.num_epochs} : spec.n;
    for (auto m : ns) {
      for (auto a : spec.alpha) {
        for (auto s : spec.sigma) {
          for (std::size_t k = 0; k < spec.seeds; ++k) jobs.push_back({m, t, a, s});
        }
      }
    }
  }

  std::vector<SweepRow> rows(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const Job& job = jobs[i];
        Scenario sc = spec.scenario;
        sc.model.sigma = job.sigma;
        LearnerConfig cfg;
        cfg.epoch_size = job.n;
        cfg.num_epochs = job.horizon / job.n;
        cfg.alpha = job.alpha;
        cfg.beta0 = spec.beta0;
        cfg.lse_tie_rule = spec.mode;
        cfg.seed = derive_seed(spec.master_seed, i);
        const RunRecord rec = run_dynamics(sc, cfg);

        SweepRow& row = rows[i];
        row.run_id = i;
        row.n = job.n;
        row.alpha = job.alpha;
        row.horizon = job.horizon;
        row.sigma = job.sigma;
        row.seed = cfg.seed;
        row.final_err_d = rec.epochs.back().err_modified;
        row.final_err_full = rec.epochs.back().err_full;
        row.d_covered = rec.epochs.back().modified.size();
        for (const auto& e : rec.epochs) {
          if (e.modified.size() == sc.d()) {
            row.epochs_to_full_coverage = static_cast<long>(e.epoch);
            break;
          }
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t pool = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> workers;
  for (std::size_t w = 1; w < pool; ++w) workers.emplace_back(work);
  work();
  for (auto& w : workers) w.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream s;
  s << "run_id,n,alpha,T,sigma,seed,final_err_D,final_err_full,d_covered,epochs_to_full_coverage\n";
  for (const auto& r : rows) {
    s << r.run_id << ',' << r.n << ',' << fmt(r.alpha) << ',' << r.horizon << ',' << fmt(r.sigma) << ',' << r.seed << ','
      << fmt(r.final_err_d) << ',' << fmt(r.final_err_full) << ',' << r.d_covered << ',' << r.epochs_to_full_coverage
      << '\n';
  }
  return s.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int cmd_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulate epoch-based retraining against strategic agents", "stratreg run"};
  ScenarioSource source;
  source.add_to(app);
  std::size_t epochs = 10, epoch_size = 100;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::string mode = "min-norm", agent_ties = "uniform_random", out_path, csv_path, beta0;
  bool keep = false, no_timestamp = false;
  app.add_option("--epochs", epochs, "number of epochs")->check(CLI::PositiveNumber);
  app.add_option("--epoch-size", epoch_size, "rounds per epoch (n)")->check(CLI::PositiveNumber);
  app.add_option("--alpha", alpha, "exploration magnitude for algorithm2")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "random seed");
  app.add_option("--mode", mode, "refit rule")->check(CLI::IsMember({"min-norm", "algorithm2"}));
  app.add_option("--agent-ties", agent_ties, "agent tie rule")->check(CLI::IsMember({"lowest_index", "uniform_random"}));
  app.add_option("--beta0", beta0, "initial model, comma separated");
  app.add_option("--out", out_path, "RunRecord JSON path")->required();
  app.add_option("--csv", csv_path, "per-epoch CSV summary path");
  app.add_flag("--keep-observations", keep, "include the round-by-round log");
  app.add_flag("--no-timestamp", no_timestamp, "omit the timestamp field");

  bool done = false;
  const int code = parse(app, args, out, err, done);
  if (done) return code;

  return guarded(err, [&] {
    const ExampleScenario ex = source.resolve();
    LearnerConfig cfg;
    cfg.epoch_size = epoch_size;
    cfg.num_epochs = epochs;
    cfg.alpha = alpha;
    cfg.beta0 = beta0.empty() ? ex.beta0 : std::optional<Vector>(parse_vector(beta0, "--beta0"));
    cfg.lse_tie_rule = lse_tie_rule_from_string(mode);
    cfg.agent_tie_rule = agent_ties == "lowest_index" ? AgentTieRule::lowest_index : AgentTieRule::uniform_random;
    cfg.seed = seed;
    cfg.keep_observations = keep;
    cfg.validate(ex.scenario.d());

    const RunRecord rec = run_dynamics(ex.scenario, cfg);
    json j = to_json(rec);
    if (!no_timestamp) j["timestamp"] = utc_timestamp();
    write_text(out_path, j.dump(2) + "\n");
    if (!csv_path.empty()) write_text(csv_path, epoch_csv(rec));

    const EpochEntry& last = rec.epochs.back();
    out << "scenario " << rec.scenario << ", " << rec.epochs.size() << " epochs of " << cfg.epoch_size << " rounds\n"
        << "final beta_hat " << vec_text(last.beta_hat) << ", |D| = " << last.modified.size() << ", err_D "
        << show(last.err_modified) << ", err_full " << show(last.err_full) << "\n"
        << "wrote " << out_path << "\n";
    return static_cast<int>(kOk);
  });
}

int cmd_sweep(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Replicate runs over a parameter grid and seeds", "stratreg sweep"};
  ScenarioSource source;
  source.add_to(app, false);
  std::vector<std::size_t> n_grid, t_grid;
  std::vector<double> alpha_grid, sigma_grid;
  std::size_t epochs = 0, seeds = 1;
  std::uint64_t master = 0;
  std::string mode = "min-norm", spec_path, out_path;
  auto* n_opt = app.add_option("--n", n_grid, "epoch sizes, comma separated")->delimiter(',');
  auto* e_opt = app.add_option("--epochs", epochs, "derive n = T / epochs")->check(CLI::PositiveNumber);
  auto* a_opt = app.add_option("--alpha", alpha_grid, "alpha values")->delimiter(',');
  auto* t_opt = app.add_option("--T", t_grid, "horizons")->delimiter(',');
  auto* s_opt = app.add_option("--sigma", sigma_grid, "noise bounds (default: the scenario's)")->delimiter(',');
  auto* k_opt = app.add_option("--seeds", seeds, "replicates per configuration");
  auto* m_opt = app.add_option("--master-seed", master, "master seed");
  auto* mode_opt = app.add_option("--mode", mode, "refit rule")->check(CLI::IsMember({"min-norm", "algorithm2"}));
  app.add_option("--spec", spec_path, "sweep specification JSON");
  app.add_option("--out", out_path, "output CSV path")->required();

  bool done = false;
  const int code = parse(app, args, out, err, done);
  if (done) return code;

  return guarded(err, [&] {
    SweepSpec spec;
    json file = json::object();
    if (!spec_path.empty()) {
      std::ifstream in(spec_path);
      if (!in) throw UsageError("cannot open " + spec_path);
      try {
        in >> file;
      } catch (const json::exception& e) {
        throw UsageError("cannot parse " + spec_path + ": " + e.what());
      }
    }

    ExampleScenario ex;
    if (source.given()) {
      ex = source.resolve();
    } else if (file.contains("scenario")) {
      ex.scenario = scenario_from_json(file.at("scenario"));
    } else if (file.contains("scenario_file")) {
      ex.scenario = load_scenario(file.at("scenario_file").get<std::string>());
    } else if (file.contains("example")) {
      ex = build_example(file.at("example").get<int>());
    } else {
      throw UsageError("no scenario given (use --example, --scenario, --random or a spec file)");
    }
    spec.scenario = ex.scenario;
    spec.beta0 = ex.beta0;

    try {
      spec.n = n_opt->count() ? n_grid : file.value("n", std::vector<std::size_t>{});
      if (e_opt->count()) {
        spec.num_epochs = epochs;
      } else if (file.contains("epochs")) {
        spec.num_epochs = file.at("epochs").get<std::size_t>();
      }
      if (n_opt->count() && !e_opt->count()) spec.num_epochs.reset();
      if (e_opt->count() && !n_opt->count()) spec.n.clear();
      spec.alpha = a_opt->count() ? alpha_grid : file.value("alpha", std::vector<double>{0.0});
      spec.horizon = t_opt->count() ? t_grid : file.value("T", std::vector<std::size_t>{});
      spec.sigma = s_opt->count() ? sigma_grid : file.value("sigma", std::vector<double>{ex.scenario.model.sigma});
      spec.seeds = k_opt->count() ? seeds : file.value("seeds", std::size_t{1});
      spec.master_seed = m_opt->count() ? master : file.value("master_seed", std::uint64_t{0});
      spec.mode = lse_tie_rule_from_string(mode_opt->count() ? mode : file.value("mode", std::string("min-norm")));
    } catch (const json::exception& e) {
      throw UsageError(std::string("malformed sweep specification: ") + e.what());
    }

    const std::vector<SweepRow> rows = run_sweep(spec, worker_threads());
    write_text(out_path, sweep_csv(rows));
    out << "wrote " << rows.size() << " rows to " << out_path << "\n";
    return static_cast<int>(kOk);
  });
}

int cmd_diagnose(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Report instance constants, thresholds and concentration checks", "stratreg diagnose"};
  ScenarioSource source;
  source.add_to(app);
  double delta = 0.05, alpha = 0.0;
  std::size_t n = 100, epochs = 5, horizon = 0;
  std::uint64_t seed = 0;
  std::string mode = "min-norm", out_path, csv_path;
  bool no_timestamp = false;
  app.add_option("--delta", delta, "failure probability in (0,1)")->check(CLI::Range(0.0, 1.0));
  app.add_option("--n", n, "epoch size")->check(CLI::PositiveNumber);
  app.add_option("--epochs", epochs, "epochs in the fresh run")->check(CLI::PositiveNumber);
  auto* t_opt = app.add_option("--T", horizon, "horizon (default n * epochs)")->check(CLI::PositiveNumber);
  app.add_option("--alpha", alpha, "alpha for the fresh run")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "seed for the fresh run");
  app.add_option("--mode", mode, "refit rule")->check(CLI::IsMember({"min-norm", "algorithm2"}));
  app.add_option("--out", out_path, "JSON report path");
  app.add_option("--csv", csv_path, "concentration CSV path");
  app.add_flag("--no-timestamp", no_timestamp, "omit the timestamp field");

  bool done = false;
  const int code = parse(app, args, out, err, done);
  if (done) return code;

  return guarded(err, [&] {
    if (!(delta > 0.0 && delta < 1.0)) throw UsageError("--delta must lie strictly between 0 and 1");
    const ExampleScenario ex = source.resolve();
    const Scenario& sc = ex.scenario;
    const std::size_t d = sc.d();
    if (t_opt->count()) {
      if (horizon % n != 0) throw UsageError("--T must be a multiple of --n");
      epochs = horizon / n;
    }
    horizon = n * epochs;

    const InstanceConstants c = instance_constants(sc);
    const double a_thr = alpha_threshold(c, d, static_cast<double>(horizon), static_cast<double>(n), delta);
    const double n_thr = epoch_size_threshold(c, d, static_cast<double>(horizon), delta);
    // Smallest n meeting the threshold with T = epochs * n; absent if not representable.
    std::optional<std::size_t> n_min;
    try {
      n_min = minimal_epoch_size(c, d, epochs, delta);
    } catch (const std::overflow_error&) {
    }
    std::optional<double> grid;
    if (d <= 3) grid = lambda_sigma(sc.features, LambdaMode::grid_exact);

    LearnerConfig cfg;
    cfg.epoch_size = n;
    cfg.num_epochs = epochs;
    cfg.alpha = alpha;
    cfg.beta0 = ex.beta0;
    cfg.lse_tie_rule = lse_tie_rule_from_string(mode);
    cfg.seed = seed;
    cfg.keep_observations = true;
    const RunRecord rec = run_dynamics(sc, cfg);
    const ConcentrationReport rep = concentration_report(sc, rec, c, delta);

    out << "scenario " << sc.name << " (d = " << d << ", r = " << sc.features.r() << ", sigma = " << show(sc.model.sigma)
        << ")\n"
        << "K' = " << show(c.k_prime) << "  K = " << show(c.k_big) << "\n"
        << "lambda(Sigma) lower bound = " << show(c.lambda_sigma);
    if (grid) out << "  grid = " << show(*grid);
    out << "\n"
        << "lambda = " << show(c.lambda) << "  gamma = " << show(c.gamma) << "\n"
        << "kappa' = " << show(c.kappa_prime) << "  kappa = " << show(c.kappa) << "\n"
        << "T = " << horizon << "  n = " << n << "  delta = " << show(delta) << "\n"
        << "alpha_threshold = " << show(a_thr) << "\n"
        << "epoch_size_threshold = " << show(n_thr) << "\n"
        << "minimal epoch size for " << epochs << " epochs = " << (n_min ? std::to_string(*n_min) : "n/a") << "\n";
    for (const auto& f : rep.noise) {
      out << "noise correlation feature " << f.feature << ": " << show(f.correlation) << " <= " << show(f.bound) << " "
          << (f.pass ? "ok" : "VIOLATED") << "\n";
    }
    out << "restricted min eigenvalue " << show(rep.restricted_min_eig) << " >= " << show(rep.restricted_lower) << " "
        << (rep.restricted_pass ? "ok" : "VIOLATED") << "\n"
        << "first-order residual " << show(rep.foc) << "\n";

    if (!out_path.empty()) {
      json j = {{"scenario", to_json(sc)},
                {"constants", to_json(c)},
                {"T", horizon},
                {"n", n},
                {"delta", delta},
                {"seed", seed},
                {"alpha_threshold", a_thr},
                {"epoch_size_threshold", n_thr},
                {"concentration", to_json(rep)}};
      j["lambda_sigma_grid"] = grid ? json(*grid) : json(nullptr);
      j["minimal_epoch_size"] = n_min ? json(*n_min) : json(nullptr);
      if (!no_timestamp) j["timestamp"] = utc_timestamp();
      write_text(out_path, j.dump(2) + "\n");
    }
    if (!csv_path.empty()) write_text(csv_path, to_csv(csv_rows(rep)));
    return static_cast<int>(kOk);
  });
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  static const char* usage =
      "usage: stratreg <command> [options]\n"
      "commands:\n"
      "  run       simulate one run and write a RunRecord JSON\n"
      "  sweep     replicate runs over a grid and write a CSV\n"
      "  diagnose  print instance constants, thresholds and concentration checks\n"
      "use 'stratreg <command> --help' for options\n";
  if (args.empty()) {
    err << usage;
    return kUsageError;
  }
  const std::string& cmd = args.front();
  const std::vector<std::string> rest(args.begin() + 1, args.end());
  if (cmd == "run") return cmd_run(rest, out, err);
  if (cmd == "sweep") return cmd_sweep(rest, out, err);
  if (cmd == "diagnose") return cmd_diagnose(rest, out, err);
  if (cmd == "-h" || cmd == "--help" || cmd == "help") {
    out << usage;
    return kOk;
  }
  err << "unknown command '" << cmd << "'\n" << usage;
  return kUsageError;
}

}  // namespace stratreg::cli
