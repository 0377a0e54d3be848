#include "stratreg/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace stratreg {

const char* to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::uniform: return "uniform";
    case NoiseKind::truncated_gaussian: return "truncated_gaussian";
    case NoiseKind::zero: return "zero";
  }
  return "uniform";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "uniform") return NoiseKind::uniform;
  if (s == "truncated_gaussian") return NoiseKind::truncated_gaussian;
  if (s == "zero") return NoiseKind::zero;
  throw std::invalid_argument("unknown noise_kind '" + s + "'");
}

void TrueModel::validate() const {
  if (beta_star.size() < 1) throw std::invalid_argument("beta_star is empty");
  numerics::require_finite(beta_star, "beta_star");
  if (!std::isfinite(sigma) || sigma < 0.0) throw std::invalid_argument("sigma must be finite and >= 0");
}

double TrueModel::sample_noise(Rng& rng) const {
  if (sigma == 0.0 || noise_kind == NoiseKind::zero) return 0.0;
  if (noise_kind == NoiseKind::uniform) return uniform(rng, -sigma, sigma);
  // Symmetric truncation keeps the mean at zero.
  std::normal_distribution<double> normal(0.0, sigma / 2.0);
  for (;;) {
    const double e = normal(rng);
    if (std::abs(e) <= sigma) return e;
  }
}

void FeatureDistribution::validate() const {
  if (loading.rows() < 1 || loading.cols() < 1) throw std::invalid_argument("loading must be at least 1 x 1");
  if (loading.cols() > loading.rows()) throw std::invalid_argument("latent dimension r must not exceed d");
  numerics::require_finite(loading, "loading");
  for (Eigen::Index i = 0; i < loading.rows(); ++i) {
    if (loading.row(i).lpNorm<1>() > 1.0 + 1e-12) {
      throw std::invalid_argument("loading row " + std::to_string(i) + " has l1 norm above 1");
    }
  }
}

Vector FeatureDistribution::from_latent(const Vector& z) const {
  if (static_cast<std::size_t>(z.size()) != r()) throw std::invalid_argument("latent vector has wrong dimension");
  return loading * z;
}

Eigen::MatrixXd FeatureDistribution::covariance() const { return loading * loading.transpose() / 3.0; }

numerics::Basis FeatureDistribution::support_basis() const { return numerics::span_basis(loading); }

double FeatureDistribution::smallest_nonzero_eigenvalue() const {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(loading);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return 0.0;
  double smallest = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) >= numerics::kDefaultRelTol * s(0)) smallest = s(i);
  }
  return smallest * smallest / 3.0;
}

Vector sample_features(const FeatureDistribution& features, Rng& rng) {
  Vector z(static_cast<Eigen::Index>(features.r()));
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = uniform(rng, -1.0, 1.0);
  return features.loading * z;
}

void CostModel::validate(std::size_t d) const {
  if (types.empty()) throw std::invalid_argument("cost model needs at least one type");
  double total = 0.0;
  for (const auto& t : types) {
    if (static_cast<std::size_t>(t.c.size()) != d) throw std::invalid_argument("cost vector has wrong dimension");
    if (!t.c.allFinite() || t.c.minCoeff() <= 0.0) throw std::invalid_argument("costs must be finite and > 0");
    if (!std::isfinite(t.budget) || t.budget <= 0.0) throw std::invalid_argument("budget must be finite and > 0");
    if (!std::isfinite(t.prob) || t.prob < 0.0) throw std::invalid_argument("type probability must be >= 0");
    total += t.prob;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("cost type probabilities must sum to 1");
}

double CostModel::max_ratio() const {
  double m = 0.0;
  for (const auto& t : types) m = std::max(m, t.budget / t.c.minCoeff());
  return m;
}

void Scenario::validate() const {
  model.validate();
  features.validate();
  if (features.d() != d()) throw std::invalid_argument("loading row count differs from beta_star length");
  costs.validate(d());
}

namespace {

Scenario make(std::string name, Vector beta, double sigma, Eigen::MatrixXd loading, Vector c, double budget) {
  Scenario s;
  s.name = std::move(name);
  s.model.beta_star = std::move(beta);
  s.model.sigma = sigma;
  s.model.noise_kind = NoiseKind::uniform;
  s.features.loading = std::move(loading);
  s.costs.types.push_back(CostType{std::move(c), budget, 1.0});
  s.validate();
  return s;
}

}  // namespace

ExampleScenario build_example(int id) {
  ExampleScenario ex;
  switch (id) {
    case 1:
      ex.scenario = make("example1", Vector{{1.0, 0.0}}, 0.0, Eigen::MatrixXd::Ones(2, 1), Vector{{1.0, 1.0}}, 1.0);
      ex.notes.push_back("feature 2 duplicates feature 1 (x(2) = x(1)); beta* = (1, 0); noiseless");
      ex.notes.push_back("cost model not fixed by the example; using c = (1, 1), B = 1");
      break;
    case 2:
      ex.scenario = make("example2", Vector{{1.0, 0.0}}, 0.0, Eigen::MatrixXd::Ones(2, 1), Vector{{10.0, 1.0}}, 1.0);
      ex.notes.push_back("example 1 with feature 2 much cheaper to modify");
      ex.notes.push_back("'much lower cost' instantiated as c = (10, 1), B = 1");
      break;
    case 3:
      ex.scenario =
          make("example3", Vector{{1.0, 0.0, 0.0}}, 0.0, Eigen::MatrixXd::Ones(3, 1), Vector{{1.0, 1.0, 1.0}}, 1.0);
      ex.notes.push_back("features 2 and 3 duplicate feature 1; beta* = (1, 0, 0); noiseless");
      ex.notes.push_back("cost model not fixed by the example; using c = (1, 1, 1), B = 1");
      break;
    case 4:
      ex.scenario = make("example4", Vector{{1.0, 2.0}}, 0.0, Eigen::MatrixXd::Zero(2, 1), Vector{{1.0, 1.0}}, 1.0);
      ex.beta0 = Vector{{0.9, 0.4}};
      ex.notes.push_back("unmodified features are always (0, 0); c = (1, 1), B = 1; noiseless");
      ex.notes.push_back("initial model beta0 = (0.9, 0.4), any beta0(1) > beta0(2) works");
      break;
    default:
      throw std::invalid_argument("example id must be 1, 2, 3 or 4");
  }
  return ex;
}

Scenario random_scenario(std::size_t d, std::size_t r, std::size_t l, double sigma, std::uint64_t seed) {
  if (d < 1 || r < 1 || r > d) throw std::invalid_argument("random_scenario: need 1 <= r <= d");
  if (l < 1) throw std::invalid_argument("random_scenario: need l >= 1");
  if (!std::isfinite(sigma) || sigma < 0.0) throw std::invalid_argument("random_scenario: sigma must be >= 0");

  Rng rng(seed);
  const auto di = static_cast<Eigen::Index>(d);
  const auto ri = static_cast<Eigen::Index>(r);

  Scenario s;
  s.name = "random_d" + std::to_string(d) + "_r" + std::to_string(r) + "_l" + std::to_string(l) + "_seed" +
           std::to_string(seed);
  s.model.sigma = sigma;
  s.model.beta_star.resize(di);
  for (Eigen::Index k = 0; k < di; ++k) s.model.beta_star(k) = uniform(rng, -1.0, 1.0);

  s.features.loading.resize(di, ri);
  for (Eigen::Index i = 0; i < di; ++i) {
    for (Eigen::Index j = 0; j < ri; ++j) s.features.loading(i, j) = uniform(rng, -1.0, 1.0);
    const double l1 = s.features.loading.row(i).lpNorm<1>();
    const double target = uniform(rng, 0.5, 1.0);
    if (l1 > 0.0) s.features.loading.row(i) *= target / l1;
  }

  double total = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    CostType t;
    t.budget = uniform(rng, 0.5, 1.5);
    t.c.resize(di);
    for (Eigen::Index k = 0; k < di; ++k) t.c(k) = t.budget / uniform(rng, 0.1, 2.0);
    t.prob = uniform(rng, 0.2, 1.0);
    total += t.prob;
    s.costs.types.push_back(std::move(t));
  }
  for (auto& t : s.costs.types) t.prob /= total;

  s.validate();
  return s;
}

namespace {

struct PairGeometry {
  Eigen::MatrixXd q;        // d x m orthonormal basis of D + Sigma
  Eigen::MatrixXd p_coord;  // diagonal projector onto span{e_k : k in D}
  Eigen::MatrixXd p_sigma;  // projector onto the covariance support

  // Gram matrices of the two projections in q-coordinates, zero-padded to 3 x 3.
  Eigen::Matrix3d g_coord = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d g_sigma = Eigen::Matrix3d::Zero();

  double objective(const Eigen::Vector3d& w) const {
    return std::sqrt(std::max(0.0, w.dot(g_coord * w))) + std::sqrt(std::max(0.0, w.dot(g_sigma * w)));
  }
};

PairGeometry pair_geometry(const FeatureDistribution& features, const std::vector<std::size_t>& coords) {
  const std::size_t d = features.d();
  PairGeometry g;
  const auto di = static_cast<Eigen::Index>(d);
  g.p_coord = Eigen::MatrixXd::Zero(di, di);
  for (auto k : coords) {
    if (k >= d) throw std::invalid_argument("lambda_pair: coordinate index out of range");
    g.p_coord(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = 1.0;
  }
  const Eigen::MatrixXd s = features.support_basis().columns();
  g.p_sigma = s * s.transpose();

  Eigen::MatrixXd generators(di, s.cols() + static_cast<Eigen::Index>(coords.size()));
  generators.leftCols(s.cols()) = s;
  for (std::size_t j = 0; j < coords.size(); ++j) {
    generators.col(s.cols() + static_cast<Eigen::Index>(j)) =
        Eigen::VectorXd::Unit(di, static_cast<Eigen::Index>(coords[j]));
  }
  g.q = numerics::span_basis(generators).columns();
  const auto m = std::min<Eigen::Index>(g.q.cols(), 3);
  const Eigen::MatrixXd a = g.p_coord * g.q.leftCols(m), b = g.p_sigma * g.q.leftCols(m);
  g.g_coord.topLeftCorner(m, m) = a.transpose() * a;
  g.g_sigma.topLeftCorner(m, m) = b.transpose() * b;
  return g;
}

constexpr double kGridTol = 1e-3;

// Lipschitz branch and bound on the unit circle; f(w) = f(-w) so theta in [0, pi].
double minimize_circle(const PairGeometry& g) {
  auto f = [&](double theta) { return g.objective(Eigen::Vector3d(std::cos(theta), std::sin(theta), 0.0)); };
  struct Cell {
    double lo, hi;
  };
  const int initial = 256;
  std::vector<Cell> stack;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < initial; ++i) {
    const double lo = std::numbers::pi * i / initial;
    stack.push_back({lo, lo + std::numbers::pi / initial});
  }
  while (!stack.empty()) {
    const Cell c = stack.back();
    stack.pop_back();
    const double mid = 0.5 * (c.lo + c.hi);
    const double half = 0.5 * (c.hi - c.lo);
    const double val = f(mid);
    best = std::min(best, val);
    // The objective is 2-Lipschitz in arc length.
    if (val - 2.0 * half >= best - kGridTol || 2.0 * half <= kGridTol) continue;
    stack.push_back({c.lo, mid});
    stack.push_back({mid, c.hi});
  }
  return best;
}

// Same on the sphere, parametrized by the three positive faces of the cube;
// radial projection from the cube surface onto the sphere is nonexpansive.
double minimize_sphere(const PairGeometry& g) {
  struct Cell {
    int axis;
    double u0, u1, v0, v1;
  };
  auto point = [](int axis, double u, double v) {
    Eigen::Vector3d p;
    p(axis) = 1.0;
    p((axis + 1) % 3) = u;
    p((axis + 2) % 3) = v;
    return Eigen::Vector3d(p.normalized());
  };
  const int initial = 32;
  std::vector<Cell> stack;
  for (int axis = 0; axis < 3; ++axis) {
    for (int i = 0; i < initial; ++i) {
      for (int j = 0; j < initial; ++j) {
        const double h = 2.0 / initial;
        stack.push_back({axis, -1.0 + i * h, -1.0 + (i + 1) * h, -1.0 + j * h, -1.0 + (j + 1) * h});
      }
    }
  }
  double best = std::numeric_limits<double>::infinity();
  while (!stack.empty()) {
    const Cell c = stack.back();
    stack.pop_back();
    const double um = 0.5 * (c.u0 + c.u1);
    const double vm = 0.5 * (c.v0 + c.v1);
    const double radius = 0.5 * std::hypot(c.u1 - c.u0, c.v1 - c.v0);
    const double val = g.objective(point(c.axis, um, vm));
    best = std::min(best, val);
    if (val - 2.0 * radius >= best - kGridTol || 2.0 * radius <= kGridTol) continue;
    stack.push_back({c.axis, c.u0, um, c.v0, vm});
    stack.push_back({c.axis, um, c.u1, c.v0, vm});
    stack.push_back({c.axis, c.u0, um, vm, c.v1});
    stack.push_back({c.axis, um, c.u1, vm, c.v1});
  }
  return best;
}

}  // namespace

double lambda_pair(const FeatureDistribution& features, const std::vector<std::size_t>& coords, LambdaMode mode) {
  features.validate();
  const PairGeometry g = pair_geometry(features, coords);
  const auto m = g.q.cols();
  if (m == 0) throw std::invalid_argument("lambda_pair: D + Sigma is the zero subspace");

  if (mode == LambdaMode::lower_bound) {
    const Eigen::MatrixXd restricted = g.q.transpose() * (g.p_coord + g.p_sigma) * g.q;
    const double mu = numerics::symmetric_eigenvalues(0.5 * (restricted + restricted.transpose()))(0);
    return std::sqrt(std::max(0.0, mu));
  }

  if (features.d() > 3) throw std::invalid_argument("grid_exact mode is limited to d <= 3");
  if (m == 1) return g.objective(Eigen::Vector3d(1.0, 0.0, 0.0));
  if (m == 2) return minimize_circle(g);
  return minimize_sphere(g);
}

double lambda_sigma(const FeatureDistribution& features, LambdaMode mode) {
  features.validate();
  const std::size_t d = features.d();
  if (mode == LambdaMode::grid_exact && d > 3) throw std::invalid_argument("grid_exact mode is limited to d <= 3");
  if (d > 20) throw std::invalid_argument("lambda_sigma enumerates 2^d subsets; d > 20 is not supported");

  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << d); ++mask) {
    std::vector<std::size_t> coords;
    for (std::size_t k = 0; k < d; ++k) {
      if (mask & (std::uint64_t{1} << k)) coords.push_back(k);
    }
    best = std::min(best, lambda_pair(features, coords, mode));
  }
  return best;
}

InstanceConstants instance_constants(const Scenario& s) {
  s.validate();
  InstanceConstants c;
  const auto d = static_cast<double>(s.d());

  c.max_ratio = s.costs.max_ratio();
  c.k_prime = (1.0 + c.max_ratio) * s.model.sigma;
  c.k_big = 4.0 * c.k_prime;

  c.lambda_sigma = lambda_sigma(s.features, LambdaMode::lower_bound);
  c.lambda_r = s.features.smallest_nonzero_eigenvalue();

  c.min_mod_moment = std::numeric_limits<double>::infinity();
  double max_cost_ratio = 0.0;
  for (const auto& t : s.costs.types) {
    const double ratio = t.budget / t.c.maxCoeff();
    c.min_mod_moment = std::min(c.min_mod_moment, t.prob * ratio * ratio);
    max_cost_ratio = std::max(max_cost_ratio, t.c.maxCoeff() / t.c.minCoeff());
  }
  // A point-mass feature distribution has no nonzero covariance eigenvalue;
  // only the modification term then constrains lambda.
  const double curvature = c.lambda_r > 0.0 ? std::min(c.lambda_r, c.min_mod_moment) : c.min_mod_moment;
  c.lambda = 0.5 * c.lambda_sigma * curvature;
  c.gamma = 1.0 + max_cost_ratio;

  const double m = c.max_ratio;
  const double c1 = 4.0 * m;
  const double c2 = std::sqrt(2.0) * m * m;
  const double c3 = 4.0 * m;
  c.kappa_prime = c.lambda_sigma + std::max(c1, 0.5 * c.lambda_sigma * c2 / d + c3);
  c.kappa = 4.0 * c.kappa_prime;
  return c;
}

namespace {

void check_threshold_args(const InstanceConstants& c, std::size_t d, double horizon, double delta) {
  if (!(c.lambda > 0.0)) throw std::invalid_argument("threshold requires lambda > 0");
  if (d < 1) throw std::invalid_argument("threshold requires d >= 1");
  if (!(horizon >= 1.0)) throw std::invalid_argument("threshold requires T >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("threshold requires 0 < delta < 1");
}

}  // namespace

double alpha_threshold(const InstanceConstants& c, std::size_t d, double horizon, double epoch_size, double delta) {
  check_threshold_args(c, d, horizon, delta);
  if (!(epoch_size >= 1.0)) throw std::invalid_argument("threshold requires n >= 1");
  const auto dd = static_cast<double>(d);
  return c.gamma *
         (std::sqrt(dd) + c.k_big * dd * std::sqrt(2.0 * horizon * std::log(8.0 * dd / delta)) / (c.lambda * epoch_size));
}

double epoch_size_threshold(const InstanceConstants& c, std::size_t d, double horizon, double delta) {
  check_threshold_args(c, d, horizon, delta);
  const auto dd = static_cast<double>(d);
  return c.kappa * dd * dd / c.lambda * std::sqrt(2.0 * horizon * std::log(24.0 * dd / delta));
}

std::size_t minimal_epoch_size(const InstanceConstants& c, std::size_t d, std::size_t num_epochs, double delta) {
  if (num_epochs < 1) throw std::invalid_argument("number of epochs must be >= 1");
  const auto e = static_cast<double>(num_epochs);
  auto ok = [&](double n) { return n >= epoch_size_threshold(c, d, e * n, delta); };
  // n >= a sqrt(2 E n L) is equivalent to n >= 2 a^2 E L; fix up rounding at the boundary.
  const double unit = epoch_size_threshold(c, d, e, delta);
  double n = std::max(1.0, std::ceil(unit * unit));
  if (!std::isfinite(n) || n > 9.0e15) throw std::overflow_error("epoch size threshold is not representable");
  while (n > 1.0 && ok(n - 1.0)) n -= 1.0;
  while (!ok(n)) n += 1.0;
  return static_cast<std::size_t>(n);
}

}  // namespace stratreg
