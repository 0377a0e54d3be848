#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stratreg/numerics.hpp"
#include "stratreg/random.hpp"

namespace stratreg {

enum class NoiseKind { uniform, truncated_gaussian, zero };

const char* to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& s);

/// Label model y = beta*^T x + eps with |eps| <= sigma and E[eps | x] = 0.
struct TrueModel {
  Vector beta_star;
  double sigma = 0.0;
  NoiseKind noise_kind = NoiseKind::uniform;

  void validate() const;
  // Mean-zero draw in [-sigma, sigma]; consumes the stream only when sigma > 0.
  double sample_noise(Rng& rng) const;
};

/// Unmodified features x = L z with z uniform on [-1,1]^r.
///
/// Rows of L have l1 norm at most 1, so every sample lies in [-1,1]^d, the
/// mean is zero and the covariance is L L^T / 3.
struct FeatureDistribution {
  Eigen::MatrixXd loading;  // d x r

  std::size_t d() const { return static_cast<std::size_t>(loading.rows()); }
  std::size_t r() const { return static_cast<std::size_t>(loading.cols()); }

  void validate() const;
  Vector from_latent(const Vector& z) const;
  Eigen::MatrixXd covariance() const;
  // Orthonormal basis of the support of the covariance.
  numerics::Basis support_basis() const;
  // Smallest nonzero covariance eigenvalue; 0 when the distribution is a point mass.
  double smallest_nonzero_eigenvalue() const;
};

Vector sample_features(const FeatureDistribution& features, Rng& rng);

struct CostType {
  Vector c;           // per-feature unit cost, all > 0
  double budget = 0;  // B > 0
  double prob = 0;    // pi
};

struct CostModel {
  std::vector<CostType> types;

  void validate(std::size_t d) const;
  // max over types i and features k of B^i / c^i(k).
  double max_ratio() const;
};

struct Scenario {
  std::string name;
  TrueModel model;
  FeatureDistribution features;
  CostModel costs;

  std::size_t d() const { return static_cast<std::size_t>(model.beta_star.size()); }
  void validate() const;
};

struct ExampleScenario {
  Scenario scenario;
  std::vector<std::string> notes;
  std::optional<Vector> beta0;
};

// The four worked examples; id outside 1..4 throws std::invalid_argument.
ExampleScenario build_example(int id);

Scenario random_scenario(std::size_t d, std::size_t r, std::size_t l, double sigma, std::uint64_t seed);

enum class LambdaMode { lower_bound, grid_exact };

// lambda(D, Sigma) for one coordinate set D (0-based indices).
double lambda_pair(const FeatureDistribution& features, const std::vector<std::size_t>& coords, LambdaMode mode);

// min over nonempty D of lambda(D, Sigma). grid_exact requires d <= 3.
double lambda_sigma(const FeatureDistribution& features, LambdaMode mode);

struct InstanceConstants {
  double k_prime = 0;       // (1 + max_ratio) sigma
  double k_big = 0;         // 4 k_prime
  double lambda_sigma = 0;  // lower-bound mode
  double lambda = 0;
  double gamma = 0;
  double kappa_prime = 0;
  double kappa = 0;         // 4 kappa_prime
  double max_ratio = 0;
  double lambda_r = 0;
  double min_mod_moment = 0;  // min_{i,k} pi^i (B^i / c^i(k))^2
};

InstanceConstants instance_constants(const Scenario& s);

// gamma (sqrt(d) + K d sqrt(2 T log(8d/delta)) / (lambda n))
double alpha_threshold(const InstanceConstants& c, std::size_t d, double horizon, double epoch_size, double delta);

// (kappa d^2 / lambda) sqrt(2 T log(24 d / delta))
double epoch_size_threshold(const InstanceConstants& c, std::size_t d, double horizon, double delta);

// Smallest n with n >= epoch_size_threshold(T = num_epochs * n).
std::size_t minimal_epoch_size(const InstanceConstants& c, std::size_t d, std::size_t num_epochs, double delta);

}  // namespace stratreg
