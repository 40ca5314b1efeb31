#pragma once

#include <memory>
#include <random>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace sestm {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Sparse LL^T of a symmetric positive definite matrix with a fill-reducing
/// (AMD) permutation. Holds the factor; immutable after construction, so it is
/// safe to share across threads for solves.
class SparseCholesky {
 public:
  /// Factorizes `a` (full symmetric storage; only the lower triangle is read).
  /// Throws NumericalError when `a` is not numerically positive definite.
  explicit SparseCholesky(const SparseMatrix& a);

  Eigen::Index size() const { return n_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  double log_determinant() const;

  /// Returns A^{-1/2}-style draw: x = P^T L^{-T} P z, so x ~ N(0, A^{-1}) when
  /// z ~ N(0, I). With A = I the result equals z exactly.
  Eigen::VectorXd correlate(const Eigen::VectorXd& z) const;

  /// Entries of A^{-1} on the sparsity pattern of L + L^T (Takahashi
  /// recursions), returned in the original ordering as a lower-triangular
  /// sparse matrix. Every structural nonzero of A is covered.
  SparseMatrix selected_inverse() const;

  /// diag(A^{-1}).
  Eigen::VectorXd inverse_diagonal() const;

 private:
  using Llt = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
  Eigen::Index n_ = 0;
  std::unique_ptr<Llt> llt_;

  // Takahashi values laid out exactly like the factor's CSC storage.
  std::vector<double> takahashi() const;
};

/// Draws x ~ N(0, A^{-1}) using `rng`.
template <class Rng>
Eigen::VectorXd sample_gaussian(const SparseCholesky& chol, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(chol.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return chol.correlate(z);
}

/// trace(A * B^{-1}) using the selected inverse of B. Requires the pattern of A
/// to be contained in the pattern of B; other columns fall back to solves.
double trace_product_inverse(const SparseMatrix& a, const SparseCholesky& b_chol);

}  // namespace sestm
