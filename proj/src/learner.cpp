#include "stratreg/learner.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <tuple>

#include "stratreg/metrics.hpp"

namespace stratreg {

const char* to_string(LseTieRule rule) { return rule == LseTieRule::min_norm ? "min-norm" : "algorithm2"; }

LseTieRule lse_tie_rule_from_string(const std::string& s) {
  if (s == "min-norm" || s == "min_norm") return LseTieRule::min_norm;
  if (s == "algorithm2") return LseTieRule::algorithm2;
  throw std::invalid_argument("unknown mode '" + s + "' (expected min-norm or algorithm2)");
}

const char* to_string(AgentTieRule rule) {
  return rule == AgentTieRule::lowest_index ? "lowest_index" : "uniform_random";
}

void LearnerConfig::validate(std::size_t d) const {
  if (epoch_size < 1) throw std::invalid_argument("epoch size must be >= 1");
  if (num_epochs < 1) throw std::invalid_argument("number of epochs must be >= 1");
  if (!std::isfinite(alpha) || alpha < 0.0) throw std::invalid_argument("alpha must be finite and >= 0");
  if (beta0) {
    if (static_cast<std::size_t>(beta0->size()) != d) throw std::invalid_argument("beta0 has wrong dimension");
    numerics::require_finite(*beta0, "beta0");
  }
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw std::invalid_argument("rel_tol must lie in (0, 1)");
}

Vector LearnerConfig::initial_model(std::size_t d) const {
  if (beta0) return *beta0;
  return Vector::Ones(static_cast<Eigen::Index>(d)) / std::sqrt(static_cast<double>(d));
}

void History::append(const Observation& obs) {
  if (static_cast<std::size_t>(obs.x_bar.size()) != d_) throw std::invalid_argument("observation has wrong dimension");
  x_.insert(x_.end(), obs.x_bar.data(), obs.x_bar.data() + obs.x_bar.size());
  y_.push_back(obs.y_bar);
}

Matrix History::x() const {
  return Eigen::Map<const Matrix>(x_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(d_));
}

Vector History::y() const { return Eigen::Map<const Vector>(y_.data(), static_cast<Eigen::Index>(y_.size())); }

Vector History::gradient(const Vector& beta) const {
  Vector g = Vector::Zero(static_cast<Eigen::Index>(d_));
  const auto d = static_cast<Eigen::Index>(d_);
  for (std::size_t i = 0; i < rows(); ++i) {
    const Eigen::Map<const Vector> row(x_.data() + i * d_, d);
    g += (y_[i] - row.dot(beta)) * row;
  }
  return g;
}

History stack(std::span<const Observation> observations) {
  if (observations.empty()) throw std::invalid_argument("empty observation history");
  History h(static_cast<std::size_t>(observations.front().x_bar.size()));
  for (const auto& obs : observations) h.append(obs);
  return h;
}

CompressedHistory::CompressedHistory(std::size_t d) : d_(d), r_(0, static_cast<Eigen::Index>(d)), z_(0) {}

void CompressedHistory::append(std::span<const Observation> batch) {
  if (batch.empty()) return;
  const auto d = static_cast<Eigen::Index>(d_);
  const auto kept = r_.rows();
  // Factor [R z; X_batch Y_batch]; the leading block of the triangular
  // factor is the new R and the last column holds the new z.
  Eigen::MatrixXd m(kept + static_cast<Eigen::Index>(batch.size()), d + 1);
  m.topLeftCorner(kept, d) = r_;
  m.col(d).head(kept) = z_;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& obs = batch[i];
    if (obs.x_bar.size() != d) throw std::invalid_argument("observation has wrong dimension");
    const auto row = kept + static_cast<Eigen::Index>(i);
    m.row(row).head(d) = obs.x_bar.transpose();
    m(row, d) = obs.y_bar;
  }
  numerics::require_finite(m, "history");
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::Index keep = std::min(m.rows(), d);
  r_ = qr.matrixQR().topLeftCorner(keep, d).triangularView<Eigen::Upper>();
  z_ = qr.matrixQR().col(d).head(keep);
  rows_ += batch.size();
}

Vector lse_update(const Matrix& x, const Vector& y, double rel_tol) {
  if (x.rows() == 0) throw std::invalid_argument("empty observation history");
  return numerics::min_norm_lse(x, y, rel_tol);
}

Vector lse_update(std::span<const Observation> observations, double rel_tol) {
  const History h = stack(observations);
  return lse_update(h.x(), h.y(), rel_tol);
}

Vector tie_break_update(const Matrix& x, const Vector& y, double alpha, double rel_tol) {
  if (x.rows() == 0) throw std::invalid_argument("empty observation history");
  if (!std::isfinite(alpha) || alpha < 0.0) throw std::invalid_argument("alpha must be finite and >= 0");
  const Vector beta_min = numerics::min_norm_lse(x, y, rel_tol);
  const numerics::Basis observed = numerics::row_space_basis(x, rel_tol);
  if (observed.size() == observed.ambient_dim()) return beta_min;

  const numerics::Basis unexplored = numerics::complement_basis(observed);
  Vector v = Vector::Zero(x.cols());
  for (const auto& b : unexplored.vectors()) v += b;
  v.normalize();
  return beta_min + alpha * v;
}

Vector tie_break_update(std::span<const Observation> observations, double alpha, double rel_tol) {
  const History h = stack(observations);
  return tie_break_update(h.x(), h.y(), alpha, rel_tol);
}

std::vector<Observation> run_epoch(const Scenario& scenario, const Vector& beta_posted, std::size_t n, Rng& rng,
                                   AgentTieRule tie_rule, std::size_t epoch, std::size_t first_round) {
  if (static_cast<std::size_t>(beta_posted.size()) != scenario.d()) {
    throw std::invalid_argument("run_epoch: posted model has wrong dimension");
  }
  std::vector<Observation> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Observation obs;
    obs.epoch = epoch;
    obs.t = first_round + i;
    obs.x = sample_features(scenario.features, rng);
    const DrawnCost cost = sample_cost_budget(scenario.costs, rng);
    obs.delta = best_response(beta_posted, *cost.c, cost.budget, tie_rule, rng);
    obs.x_bar = apply_modification(obs.x, obs.delta);
    std::tie(obs.y_bar, obs.eps) = realize_label(scenario.model, obs.x_bar, rng);
    out.push_back(std::move(obs));
  }
  return out;
}

namespace {

// The compressed system carries rounding from every earlier epoch, so take
// one correction step against the raw history: delta = pinv(X^T X) X^T r,
// evaluated as pinv(R) pinv(R^T) X^T r. delta lies in the row space, which
// leaves any tie-break bump untouched.
Vector refine(const History& raw, const CompressedHistory& packed, const Vector& beta, double rel_tol) {
  const Vector g = raw.gradient(beta);
  if (packed.r().rows() == 0 || g.isZero(0.0)) return beta;
  const Matrix rt = packed.r().transpose();
  const Vector w = numerics::min_norm_lse(rt, g, rel_tol);
  return beta + numerics::min_norm_lse(packed.r(), w, rel_tol);
}

}  // namespace

RunRecord run_dynamics(const Scenario& scenario, const LearnerConfig& config) {
  scenario.validate();
  const std::size_t d = scenario.d();
  config.validate(d);

  RunRecord record;
  record.scenario = scenario.name;
  record.config = config;
  record.seed = config.seed;
  record.has_observations = config.keep_observations;

  Rng rng(config.seed);
  History raw(d);
  CompressedHistory history(d);
  std::set<std::size_t> modified;
  Vector posted = config.initial_model(d);
  const Eigen::MatrixXd sigma_gen = scenario.features.support_basis().columns();

  for (std::size_t e = 1; e <= config.num_epochs; ++e) {
    auto batch = run_epoch(scenario, posted, config.epoch_size, rng, config.agent_tie_rule, e,
                           (e - 1) * config.epoch_size + 1);
    history.append(batch);
    for (const auto& obs : batch) {
      raw.append(obs);
      if (obs.delta.index && obs.delta.amount != 0.0) modified.insert(*obs.delta.index);
    }
    if (config.keep_observations) {
      record.observations.insert(record.observations.end(), std::make_move_iterator(batch.begin()),
                                 std::make_move_iterator(batch.end()));
    }

    const Matrix& x = history.r();
    const Vector& y = history.z();
    posted = config.lse_tie_rule == LseTieRule::min_norm ? lse_update(x, y, config.rel_tol)
                                                         : tie_break_update(x, y, config.alpha, config.rel_tol);
    posted = refine(raw, history, posted, config.rel_tol);

    EpochEntry entry;
    entry.epoch = e;
    entry.tau = e * config.epoch_size;
    entry.beta_hat = posted;
    entry.modified.assign(modified.begin(), modified.end());
    entry.err_modified = recovery_error(posted, scenario.model.beta_star, entry.modified);
    entry.err_full = (posted - scenario.model.beta_star).norm();
    entry.rank_u = numerics::numerical_rank(x, config.rel_tol);
    const numerics::Basis v_basis = modified_feature_space(sigma_gen, entry.modified, d);
    if (!v_basis.empty()) {
      const Eigen::MatrixXd gram = x.transpose() * x;
      entry.min_eig_v = numerics::min_eigenvalue_restricted(gram, v_basis);
    }
    record.epochs.push_back(std::move(entry));
  }
  return record;
}

}  // namespace stratreg
