#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratreg/agents.hpp"
#include "stratreg/numerics.hpp"
#include "stratreg/random.hpp"
#include "stratreg/scenarios.hpp"

namespace stratreg {

// How the learner picks among least-squares solutions after each epoch.
enum class LseTieRule { min_norm, algorithm2 };

const char* to_string(LseTieRule rule);
LseTieRule lse_tie_rule_from_string(const std::string& s);
const char* to_string(AgentTieRule rule);

struct LearnerConfig {
  std::size_t epoch_size = 1;  // n
  std::size_t num_epochs = 1;  // T / n
  double alpha = 0.0;          // ignored under min_norm
  std::optional<Vector> beta0; // defaults to the unit-norm all-ones vector
  LseTieRule lse_tie_rule = LseTieRule::min_norm;
  AgentTieRule agent_tie_rule = AgentTieRule::uniform_random;
  std::uint64_t seed = 0;
  bool keep_observations = false;
  double rel_tol = numerics::kDefaultRelTol;

  void validate(std::size_t d) const;
  Vector initial_model(std::size_t d) const;
};

struct EpochEntry {
  std::size_t epoch = 0;                 // E, 1-based
  std::size_t tau = 0;                   // E n
  Vector beta_hat;                       // model posted for epoch E + 1
  std::vector<std::size_t> modified;     // D_tau, 0-based feature indices, sorted
  double err_modified = 0.0;             // l2 error over D_tau
  double err_full = 0.0;                 // l2 error over all features
  std::size_t rank_u = 0;                // rank of span(x_bar_1..x_bar_tau)
  double min_eig_v = 0.0;                // min eigenvalue of X^T X on Sigma + D_tau; 0 if that space is {0}
};

struct RunRecord {
  std::string scenario;
  LearnerConfig config;
  std::uint64_t seed = 0;
  std::vector<EpochEntry> epochs;
  bool has_observations = false;
  std::vector<Observation> observations;
};

/// Stacked modified features and labels, one row per round.
class History {
 public:
  explicit History(std::size_t d) : d_(d) {}
  void append(const Observation& obs);
  std::size_t rows() const { return y_.size(); }
  std::size_t dim() const { return d_; }
  Matrix x() const;
  Vector y() const;
  // X^T (Y - X beta) without materializing X.
  Vector gradient(const Vector& beta) const;

 private:
  std::size_t d_;
  std::vector<double> x_;
  std::vector<double> y_;
};

History stack(std::span<const Observation> observations);

/// Running QR compression of the stacked history.
///
/// Keeps R (at most d x d, upper triangular) and z with X = Q R and z the
/// matching rows of Q^T Y. Least-squares solutions, the row space, singular
/// values and X^T X = R^T R all agree with the full history, so refits cost
/// O(n d^2) per epoch instead of O(tau d^2).
class CompressedHistory {
 public:
  explicit CompressedHistory(std::size_t d);
  void append(std::span<const Observation> batch);
  std::size_t rows() const { return rows_; }
  const Matrix& r() const { return r_; }
  const Vector& z() const { return z_; }

 private:
  std::size_t d_;
  std::size_t rows_ = 0;
  Matrix r_;
  Vector z_;
};

// Minimum-norm least-squares refit on all observations so far.
Vector lse_update(std::span<const Observation> observations, double rel_tol = numerics::kDefaultRelTol);
Vector lse_update(const Matrix& x, const Vector& y, double rel_tol = numerics::kDefaultRelTol);

/// Exploration-forcing refit.
///
/// When the observed features span all of R^d this is the unique
/// least-squares solution. Otherwise it returns beta_min + alpha v, where
/// beta_min is the minimum-norm solution and v is the normalized sum of the
/// canonical orthonormal basis of the unobserved directions. Since X v = 0
/// the result is still a least-squares solution, and
/// ||result||^2 = ||beta_min||^2 + alpha^2.
Vector tie_break_update(std::span<const Observation> observations, double alpha,
                        double rel_tol = numerics::kDefaultRelTol);
Vector tie_break_update(const Matrix& x, const Vector& y, double alpha, double rel_tol = numerics::kDefaultRelTol);

// n rounds of sample -> cost draw -> best response -> modify -> label, in round order.
std::vector<Observation> run_epoch(const Scenario& scenario, const Vector& beta_posted, std::size_t n, Rng& rng,
                                   AgentTieRule tie_rule = AgentTieRule::uniform_random, std::size_t epoch = 1,
                                   std::size_t first_round = 1);

RunRecord run_dynamics(const Scenario& scenario, const LearnerConfig& config);

}  // namespace stratreg
