#include "stratreg/agents.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace stratreg {

Vector Modification::expand(std::size_t d) const {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(d));
  if (index) {
    if (*index >= d) throw std::invalid_argument("modification index out of range");
    v(static_cast<Eigen::Index>(*index)) = amount;
  }
  return v;
}

DrawnCost sample_cost_budget(const CostModel& costs, Rng& rng) {
  const auto& types = costs.types;
  std::size_t i = 0;
  if (types.size() > 1) {
    const double u = uniform(rng, 0.0, 1.0);
    double acc = 0.0;
    i = types.size() - 1;
    for (std::size_t j = 0; j < types.size(); ++j) {
      acc += types[j].prob;
      if (u < acc) {
        i = j;
        break;
      }
    }
  }
  return DrawnCost{&types[i].c, types[i].budget, i};
}

Modification best_response(const Vector& beta_hat, const Vector& c, double budget, AgentTieRule tie_rule, Rng& rng) {
  if (beta_hat.size() != c.size()) throw std::invalid_argument("best_response: model and cost dimensions differ");
  if (!(budget > 0.0)) throw std::invalid_argument("best_response: budget must be > 0");
  if (c.size() == 0 || !(c.minCoeff() > 0.0)) throw std::invalid_argument("best_response: costs must be > 0");

  double best = 0.0;
  for (Eigen::Index j = 0; j < c.size(); ++j) best = std::max(best, std::abs(beta_hat(j)) / c(j));
  if (best == 0.0) return {};

  std::vector<std::size_t> maximizers;
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    if (std::abs(beta_hat(j)) / c(j) == best) maximizers.push_back(static_cast<std::size_t>(j));
  }
  std::size_t k = maximizers.front();
  if (tie_rule == AgentTieRule::uniform_random && maximizers.size() > 1) {
    std::uniform_int_distribution<std::size_t> pick(0, maximizers.size() - 1);
    k = maximizers[pick(rng)];
  }
  const auto ki = static_cast<Eigen::Index>(k);
  const double sign = beta_hat(ki) < 0.0 ? -1.0 : 1.0;
  return Modification{k, sign * budget / c(ki)};
}

Vector apply_modification(const Vector& x, const Modification& m) {
  Vector out = x;
  if (m.index) {
    if (*m.index >= static_cast<std::size_t>(x.size())) throw std::invalid_argument("apply_modification: index out of range");
    out(static_cast<Eigen::Index>(*m.index)) += m.amount;
  }
  return out;
}

std::pair<double, double> realize_label(const TrueModel& model, const Vector& x_bar, Rng& rng) {
  if (x_bar.size() != model.beta_star.size()) throw std::invalid_argument("realize_label: dimension mismatch");
  const double eps = model.sample_noise(rng);
  return {model.beta_star.dot(x_bar) + eps, eps};
}

}  // namespace stratreg
