#include "stratreg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stratreg::numerics {

namespace {

void canonicalize_sign(Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > kBasisTol) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

// Greedy pivoted Gram-Schmidt over the columns P e_j of an orthogonal
// projector P of known rank. Each step takes the candidate with the largest
// residual norm (lowest index on near-ties), so the result depends only on
// the subspace and not on how P was produced.
Basis basis_from_projector(const Eigen::MatrixXd& projector, std::size_t rank) {
  const auto d = static_cast<std::size_t>(projector.rows());
  std::vector<Vector> chosen;
  std::vector<bool> used(d, false);
  chosen.reserve(rank);

  auto residual = [&](std::size_t j) {
    Vector r = projector.col(static_cast<Eigen::Index>(j));
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : chosen) r -= q.dot(r) * q;
    }
    return r;
  };

  while (chosen.size() < rank) {
    std::size_t best = d;
    double best_norm = -1.0;
    Vector best_vec;
    for (std::size_t j = 0; j < d; ++j) {
      if (used[j]) continue;
      Vector r = residual(j);
      const double nr = r.norm();
      if (nr > best_norm * (1.0 + 1e-12)) {
        best = j;
        best_norm = nr;
        best_vec = std::move(r);
      }
    }
    if (best == d || best_norm <= 0.0) {
      throw std::runtime_error("projector rank is smaller than requested basis size");
    }
    used[best] = true;
    // Pull back into the subspace, then reorthogonalize once more.
    Vector q = projector * best_vec;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& prev : chosen) q -= prev.dot(q) * prev;
    }
    q.normalize();
    canonicalize_sign(q);
    chosen.push_back(std::move(q));
  }
  return Basis(d, std::move(chosen));
}

Eigen::JacobiSVD<Eigen::MatrixXd> thin_svd(const Matrix& x, unsigned int options) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(x), options);
}

std::size_t rank_from_singular_values(const Vector& s, double rel_tol) {
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  const double cutoff = rel_tol * s(0);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) >= cutoff) ++k;
  }
  return k;
}

}  // namespace

Basis::Basis(std::size_t ambient_dim, std::vector<Vector> vectors)
    : ambient_dim_(ambient_dim), vectors_(std::move(vectors)) {
  if (vectors_.size() > ambient_dim_) {
    throw std::invalid_argument("basis has more vectors than the ambient dimension");
  }
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    auto& v = vectors_[i];
    if (static_cast<std::size_t>(v.size()) != ambient_dim_) {
      throw std::invalid_argument("basis vector has wrong dimension");
    }
    if (!v.allFinite()) throw std::invalid_argument("basis vector is not finite");
    if (std::abs(v.norm() - 1.0) > kBasisTol) {
      throw std::invalid_argument("basis vector " + std::to_string(i) + " is not unit norm");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(v.dot(vectors_[j])) > kBasisTol) {
        throw std::invalid_argument("basis vectors are not orthogonal");
      }
    }
    canonicalize_sign(v);
  }
}

Eigen::MatrixXd Basis::columns() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(ambient_dim_), static_cast<Eigen::Index>(vectors_.size()));
  for (std::size_t i = 0; i < vectors_.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = vectors_[i];
  return m;
}

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " contains non-finite entries");
}

std::size_t numerical_rank(const Matrix& x, double rel_tol) {
  require_finite(x, "matrix");
  if (x.rows() == 0 || x.cols() == 0) return 0;
  return rank_from_singular_values(thin_svd(x, 0).singularValues(), rel_tol);
}

Vector min_norm_lse(const Matrix& x, const Vector& y, double rel_tol) {
  if (x.rows() != y.size()) throw std::invalid_argument("min_norm_lse: row count of X and length of Y differ");
  if (x.rows() < 1 || x.cols() < 1) throw std::invalid_argument("min_norm_lse: empty system");
  require_finite(x, "X");
  require_finite(y, "Y");

  const auto svd = thin_svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const std::size_t k = rank_from_singular_values(s, rel_tol);

  auto solve = [&](const Vector& rhs) {
    Vector out = Vector::Zero(x.cols());
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      out += (svd.matrixU().col(c).dot(rhs) / s(c)) * svd.matrixV().col(c);
    }
    return out;
  };
  // One refinement step on the residual; the correction also lies in the row space.
  Vector beta = solve(y);
  if (k > 0) beta += solve(y - x * beta);
  return beta;
}

Basis row_space_basis(const Matrix& x, double rel_tol) {
  if (x.rows() < 1 || x.cols() < 1) throw std::invalid_argument("row_space_basis: empty matrix");
  require_finite(x, "matrix");
  const auto svd = thin_svd(x, Eigen::ComputeThinV);
  const std::size_t k = rank_from_singular_values(svd.singularValues(), rel_tol);
  const auto d = static_cast<std::size_t>(x.cols());
  if (k == 0) return Basis(d);
  const Eigen::MatrixXd vk = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
  return basis_from_projector(vk * vk.transpose(), k);
}

Basis complement_basis(const Basis& basis) {
  const std::size_t d = basis.ambient_dim();
  if (d == 0) throw std::invalid_argument("complement_basis: zero ambient dimension");
  // Re-validate in case the vectors were produced elsewhere.
  Basis checked(d, basis.vectors());
  const std::size_t k = d - checked.size();
  if (k == 0) return Basis(d);
  const Eigen::MatrixXd b = checked.columns();
  Eigen::MatrixXd projector = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  if (!checked.empty()) projector -= b * b.transpose();
  return basis_from_projector(projector, k);
}

Basis span_basis(const Eigen::MatrixXd& columns, double rel_tol) {
  const auto d = static_cast<std::size_t>(columns.rows());
  if (columns.cols() == 0) return Basis(d);
  return row_space_basis(Matrix(columns.transpose()), rel_tol);
}

Vector project(const Vector& z, const Basis& basis) {
  if (static_cast<std::size_t>(z.size()) != basis.ambient_dim()) {
    throw std::invalid_argument("project: vector dimension differs from basis ambient dimension");
  }
  Vector out = Vector::Zero(z.size());
  for (const auto& q : basis.vectors()) out += z.dot(q) * q;
  return out;
}

Vector symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver failed");
  return solver.eigenvalues();
}

double min_eigenvalue_restricted(const Eigen::MatrixXd& m, const Basis& basis) {
  if (m.rows() != m.cols()) throw std::invalid_argument("min_eigenvalue_restricted: matrix is not square");
  if (static_cast<std::size_t>(m.rows()) != basis.ambient_dim()) {
    throw std::invalid_argument("min_eigenvalue_restricted: dimension mismatch");
  }
  if (basis.empty()) throw std::invalid_argument("min_eigenvalue_restricted: empty basis");
  require_finite(m, "matrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw std::invalid_argument("min_eigenvalue_restricted: matrix is not symmetric");
  }
  const Eigen::MatrixXd b = basis.columns();
  Eigen::MatrixXd restricted = b.transpose() * m * b;
  restricted = 0.5 * (restricted + restricted.transpose());
  return symmetric_eigenvalues(restricted)(0);
}

}  // namespace stratreg::numerics
