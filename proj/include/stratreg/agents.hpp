#pragma once

#include <cstddef>
#include <optional>
#include <utility>

#include "stratreg/numerics.hpp"
#include "stratreg/random.hpp"
#include "stratreg/scenarios.hpp"

namespace stratreg {

/// Single-feature change an agent applies. An empty index means no change.
struct Modification {
  std::optional<std::size_t> index;
  double amount = 0.0;

  bool empty() const { return !index.has_value(); }
  Vector expand(std::size_t d) const;
};

/// One round of play. x, delta and eps are latent to the learner and kept
/// for diagnostics; the learner sees only x_bar and y_bar.
struct Observation {
  Vector x;
  Modification delta;
  Vector x_bar;
  double y_bar = 0.0;
  double eps = 0.0;
  std::size_t epoch = 0;  // 1-based
  std::size_t t = 0;      // 1-based round
};

enum class AgentTieRule { lowest_index, uniform_random };

struct DrawnCost {
  const Vector* c = nullptr;
  double budget = 0.0;
  std::size_t type_index = 0;
};

DrawnCost sample_cost_budget(const CostModel& costs, Rng& rng);

/// Budgeted best response to the posted model.
///
/// Moves the feature maximizing |beta_hat(j)| / c(j) by sgn(beta_hat(k)) B / c(k),
/// which maximizes beta_hat^T delta over sum_k c(k) |delta(k)| <= B. Ties among
/// maximizers follow the tie rule; uniform_random draws from rng only when more
/// than one feature ties. A zero model yields the empty modification.
Modification best_response(const Vector& beta_hat, const Vector& c, double budget, AgentTieRule tie_rule, Rng& rng);

Vector apply_modification(const Vector& x, const Modification& m);

// Returns (y_bar, eps).
std::pair<double, double> realize_label(const TrueModel& model, const Vector& x_bar, Rng& rng);

}  // namespace stratreg
