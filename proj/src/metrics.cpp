#include "stratreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace stratreg {

std::vector<std::size_t> modified_set(std::span<const Observation> observations) {
  std::set<std::size_t> touched;
  for (const auto& obs : observations) {
    if (obs.delta.index && obs.delta.amount != 0.0) touched.insert(*obs.delta.index);
  }
  return {touched.begin(), touched.end()};
}

double recovery_error(const Vector& beta_hat, const Vector& beta_star, const std::vector<std::size_t>& coords) {
  if (beta_hat.size() != beta_star.size()) throw std::invalid_argument("recovery_error: dimension mismatch");
  double sum = 0.0;
  for (auto k : coords) {
    if (k >= static_cast<std::size_t>(beta_hat.size())) throw std::invalid_argument("recovery_error: index out of range");
    const double diff = beta_hat(static_cast<Eigen::Index>(k)) - beta_star(static_cast<Eigen::Index>(k));
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

double prediction_gap(const Vector& beta_hat, const Vector& beta_star, const Vector& x_bar) {
  if (beta_hat.size() != beta_star.size() || beta_hat.size() != x_bar.size()) {
    throw std::invalid_argument("prediction_gap: dimension mismatch");
  }
  return std::abs(beta_hat.dot(x_bar) - beta_star.dot(x_bar));
}

double foc_residual(const Matrix& x, const Vector& y, const Vector& beta) {
  if (x.rows() == 0) throw std::invalid_argument("foc_residual: no observations");
  if (x.rows() != y.size() || x.cols() != beta.size()) throw std::invalid_argument("foc_residual: dimension mismatch");
  return (x.transpose() * (x * beta - y)).cwiseAbs().maxCoeff();
}

double foc_residual(std::span<const Observation> observations, const Vector& beta) {
  const History h = stack(observations);
  return foc_residual(h.x(), h.y(), beta);
}

numerics::Basis modified_feature_space(const Eigen::MatrixXd& sigma_generators, const std::vector<std::size_t>& coords,
                                       std::size_t d) {
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd gen(di, sigma_generators.cols() + static_cast<Eigen::Index>(coords.size()));
  if (sigma_generators.cols() > 0) gen.leftCols(sigma_generators.cols()) = sigma_generators;
  for (std::size_t j = 0; j < coords.size(); ++j) {
    gen.col(sigma_generators.cols() + static_cast<Eigen::Index>(j)) =
        Vector::Unit(di, static_cast<Eigen::Index>(coords[j]));
  }
  return numerics::span_basis(gen);
}

double binomial_slack_rate(double delta, std::size_t trials) {
  return delta + 2.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
}

BoundCheckReport martingale_bound_check(const IncrementGenerator& generator, double w_max, std::size_t tau,
                                        double delta, std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("martingale_bound_check: trials must be >= 1");
  if (tau < 1) throw std::invalid_argument("martingale_bound_check: tau must be >= 1");
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("martingale_bound_check: delta must lie in (0, 1]");
  if (!(w_max >= 0.0)) throw std::invalid_argument("martingale_bound_check: W_max must be >= 0");

  BoundCheckReport rep;
  rep.trials = trials;
  rep.delta = delta;
  rep.bound = w_max * std::sqrt(2.0 * static_cast<double>(tau) * std::log(2.0 / delta));

  std::vector<double> prefix;
  prefix.reserve(tau);
  double abs_total = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    Rng rng(derive_seed(seed, i));
    prefix.clear();
    double sum = 0.0;
    for (std::size_t t = 0; t < tau; ++t) {
      const double w = generator(std::span<const double>(prefix), rng);
      if (!(std::abs(w) <= w_max)) throw std::invalid_argument("martingale_bound_check: increment exceeds W_max");
      prefix.push_back(w);
      sum += w;
    }
    const double a = std::abs(sum);
    abs_total += a;
    rep.max_abs_sum = std::max(rep.max_abs_sum, a);
    if (a > rep.bound) ++rep.violations;
  }
  rep.mean_abs_sum = abs_total / static_cast<double>(trials);
  rep.violation_rate = static_cast<double>(rep.violations) / static_cast<double>(trials);
  rep.allowed_rate = binomial_slack_rate(delta, trials);
  rep.pass = rep.violation_rate <= rep.allowed_rate;
  return rep;
}

ConcentrationReport concentration_report(const Scenario& scenario, const RunRecord& run, const InstanceConstants& consts,
                                         double delta) {
  if (!run.has_observations || run.observations.empty()) {
    throw std::invalid_argument("concentration_report: run has no observation log (use keep_observations)");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("concentration_report: delta must lie in (0, 1)");
  const std::size_t d = scenario.d();
  const auto dd = static_cast<double>(d);

  ConcentrationReport rep;
  rep.tau = run.observations.size();
  rep.epoch_size = run.config.epoch_size;
  rep.delta = delta;
  const auto tau = static_cast<double>(rep.tau);

  Vector corr = Vector::Zero(static_cast<Eigen::Index>(d));
  for (const auto& obs : run.observations) corr += obs.x_bar * obs.eps;
  const double noise_bound = consts.k_prime * std::sqrt(2.0 * tau * std::log(2.0 * dd / delta));
  for (std::size_t k = 0; k < d; ++k) {
    FeatureNoiseCheck f;
    f.feature = k;
    f.correlation = std::abs(corr(static_cast<Eigen::Index>(k)));
    f.bound = noise_bound;
    f.pass = f.correlation <= f.bound;
    rep.noise_pass = rep.noise_pass && f.pass;
    rep.noise.push_back(f);
  }

  const History h = stack(run.observations);
  const Matrix x = h.x();
  const std::vector<std::size_t> coords = modified_set(run.observations);
  const numerics::Basis v_basis = modified_feature_space(scenario.features.support_basis().columns(), coords, d);
  if (!v_basis.empty()) {
    const Eigen::MatrixXd gram = x.transpose() * x;
    rep.restricted_min_eig = numerics::min_eigenvalue_restricted(gram, v_basis);
  }
  rep.restricted_lower = consts.lambda * static_cast<double>(rep.epoch_size) / 2.0 -
                         consts.kappa_prime * dd * dd * std::sqrt(tau * std::log(6.0 * dd / delta));
  rep.restricted_pass = v_basis.empty() || rep.restricted_min_eig >= rep.restricted_lower;

  if (!run.epochs.empty()) rep.foc = foc_residual(x, h.y(), run.epochs.back().beta_hat);
  rep.pass = rep.noise_pass && rep.restricted_pass;
  return rep;
}

std::vector<CsvRow> csv_rows(const ConcentrationReport& report) {
  std::vector<CsvRow> rows;
  for (const auto& f : report.noise) {
    rows.push_back({"noise_correlation_feature_" + std::to_string(f.feature), f.correlation, f.bound, f.pass});
  }
  rows.push_back({"restricted_min_eigenvalue", report.restricted_min_eig, report.restricted_lower,
                  report.restricted_pass});
  return rows;
}

std::vector<CsvRow> csv_rows(const BoundCheckReport& report) {
  return {{"martingale_violation_rate", report.violation_rate, report.allowed_rate, report.pass},
          {"martingale_mean_abs_sum", report.mean_abs_sum, report.bound, report.mean_abs_sum <= report.bound}};
}

std::string to_csv(const std::vector<CsvRow>& rows) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "check,statistic,bound,pass\n";
  for (const auto& r : rows) out << r.check << ',' << r.statistic << ',' << r.bound << ',' << (r.pass ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace stratreg
