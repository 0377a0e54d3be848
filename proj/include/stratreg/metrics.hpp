#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stratreg/agents.hpp"
#include "stratreg/learner.hpp"
#include "stratreg/numerics.hpp"
#include "stratreg/scenarios.hpp"

namespace stratreg {

// Sorted 0-based indices touched by at least one nonzero modification.
std::vector<std::size_t> modified_set(std::span<const Observation> observations);

// sqrt(sum_{k in D} (beta_hat(k) - beta_star(k))^2)
double recovery_error(const Vector& beta_hat, const Vector& beta_star, const std::vector<std::size_t>& coords);

// |beta_hat^T x_bar - beta_star^T x_bar|
double prediction_gap(const Vector& beta_hat, const Vector& beta_star, const Vector& x_bar);

// ||X^T (X beta - Y)||_inf; zero exactly at least-squares minimizers.
double foc_residual(const Matrix& x, const Vector& y, const Vector& beta);
double foc_residual(std::span<const Observation> observations, const Vector& beta);

// Basis of Sigma + span{e_k : k in coords}, with Sigma given by generator columns.
numerics::Basis modified_feature_space(const Eigen::MatrixXd& sigma_generators, const std::vector<std::size_t>& coords,
                                       std::size_t d);

struct BoundCheckReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double delta = 0.0;
  double bound = 0.0;          // W_max sqrt(2 tau log(2/delta))
  double mean_abs_sum = 0.0;
  double max_abs_sum = 0.0;
  double violation_rate = 0.0;
  double allowed_rate = 0.0;   // delta + 2 sqrt(delta (1 - delta) / trials)
  bool pass = false;
};

// Next increment W_t given the realized prefix W_1..W_{t-1}. Must satisfy
// |W_t| <= W_max and E[W_t | prefix] = 0.
using IncrementGenerator = std::function<double(std::span<const double> prefix, Rng& rng)>;

/// Empirical check of |sum_t W_t| <= W_max sqrt(2 tau log(2/delta)).
///
/// Trial i draws from its own stream seeded with derive_seed(seed, i).
/// Throws std::invalid_argument if the generator exceeds W_max.
BoundCheckReport martingale_bound_check(const IncrementGenerator& generator, double w_max, std::size_t tau,
                                        double delta, std::size_t trials, std::uint64_t seed);

// Two binomial standard errors above delta.
double binomial_slack_rate(double delta, std::size_t trials);

struct FeatureNoiseCheck {
  std::size_t feature = 0;
  double correlation = 0.0;  // |sum_t x_bar_t(k) eps_t|
  double bound = 0.0;        // K' sqrt(2 tau log(2d/delta))
  bool pass = true;
};

struct ConcentrationReport {
  std::size_t tau = 0;
  std::size_t epoch_size = 0;
  double delta = 0.0;
  std::vector<FeatureNoiseCheck> noise;
  bool noise_pass = true;
  double restricted_min_eig = 0.0;   // of X^T X on Sigma + D_tau
  double restricted_lower = 0.0;     // lambda n / 2 - kappa' d^2 sqrt(tau log(6d/delta))
  bool restricted_pass = true;
  double foc = 0.0;                  // foc_residual of the final posted model
  bool pass = true;
};

// Requires a run recorded with keep_observations.
ConcentrationReport concentration_report(const Scenario& scenario, const RunRecord& run, const InstanceConstants& consts,
                                         double delta);

struct CsvRow {
  std::string check;
  double statistic;
  double bound;
  bool pass;
};

std::vector<CsvRow> csv_rows(const ConcentrationReport& report);
std::vector<CsvRow> csv_rows(const BoundCheckReport& report);
std::string to_csv(const std::vector<CsvRow>& rows);

}  // namespace stratreg
