#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace stratreg {

using Vector = Eigen::VectorXd;
// Observation matrices are stacked one agent per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace numerics {

// Singular values below kDefaultRelTol * sigma_max count as zero.
inline constexpr double kDefaultRelTol = 1e-10;
// Orthonormality and sign-convention tolerance for Basis.
inline constexpr double kBasisTol = 1e-10;

/// Orthonormal list of vectors in R^d.
///
/// Construction validates orthonormality and flips each vector so that its
/// first entry with magnitude above kBasisTol is positive. The list may be
/// empty (the zero subspace).
class Basis {
 public:
  explicit Basis(std::size_t ambient_dim) : ambient_dim_(ambient_dim) {}
  Basis(std::size_t ambient_dim, std::vector<Vector> vectors);

  std::size_t ambient_dim() const { return ambient_dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool empty() const { return vectors_.empty(); }
  const std::vector<Vector>& vectors() const { return vectors_; }
  const Vector& operator[](std::size_t i) const { return vectors_[i]; }

  // d x |B| matrix with the basis vectors as columns.
  Eigen::MatrixXd columns() const;

 private:
  std::size_t ambient_dim_;
  std::vector<Vector> vectors_;
};

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what);

// Number of singular values above rel_tol * sigma_max.
std::size_t numerical_rank(const Matrix& x, double rel_tol = kDefaultRelTol);

/// Minimum-norm least-squares solution of X beta ~ Y.
///
/// Equivalent to the rank-truncated pseudoinverse applied to Y; the result
/// lies in the row space of X. Throws std::invalid_argument on a dimension
/// mismatch, an empty system, or non-finite input.
Vector min_norm_lse(const Matrix& x, const Vector& y, double rel_tol = kDefaultRelTol);

// Canonical orthonormal basis of the row space of X.
Basis row_space_basis(const Matrix& x, double rel_tol = kDefaultRelTol);

// Canonical orthonormal basis of the orthogonal complement of span(B).
Basis complement_basis(const Basis& basis);

// Canonical orthonormal basis of the span of the given column vectors.
Basis span_basis(const Eigen::MatrixXd& columns, double rel_tol = kDefaultRelTol);

Vector project(const Vector& z, const Basis& basis);

// Smallest eigenvalue of B^T M B for a symmetric M.
double min_eigenvalue_restricted(const Eigen::MatrixXd& m, const Basis& basis);

// Eigenvalues of a symmetric matrix in ascending order.
Vector symmetric_eigenvalues(const Eigen::MatrixXd& m);

}  // namespace numerics
}  // namespace stratreg
