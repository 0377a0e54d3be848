#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stratreg/learner.hpp"
#include "stratreg/scenarios.hpp"

namespace stratreg::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsageError = 2 };

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SweepSpec {
  Scenario scenario;
  std::optional<Vector> beta0;
  std::vector<std::size_t> n;          // epoch sizes; empty when derived from num_epochs
  std::optional<std::size_t> num_epochs;  // n = T / num_epochs
  std::vector<double> alpha;
  std::vector<std::size_t> horizon;    // T
  std::vector<double> sigma;
  std::size_t seeds = 1;
  std::uint64_t master_seed = 0;
  LseTieRule mode = LseTieRule::min_norm;

  void validate() const;
};

struct SweepRow {
  std::size_t run_id = 0;
  std::size_t n = 0;
  double alpha = 0.0;
  std::size_t horizon = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  double final_err_d = 0.0;
  double final_err_full = 0.0;
  std::size_t d_covered = 0;
  long epochs_to_full_coverage = -1;
};

// Grid order is T, then n, then alpha, then sigma, then seed index (innermost).
// Run i uses seed derive_seed(master_seed, i); rows come back in run_id order.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, std::size_t threads);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// STRATREG_THREADS if set to a positive integer, else the hardware concurrency.
std::size_t worker_threads();

// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

// Each takes the arguments after the subcommand name.
int cmd_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_sweep(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_diagnose(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// args[0] is the subcommand.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stratreg::cli
