#include "sestm/sparse_cholesky.hpp"

#include <algorithm>
#include <cmath>

#include "sestm/errors.hpp"

namespace sestm {

SparseCholesky::SparseCholesky(const SparseMatrix& a) : n_(a.rows()), llt_(std::make_unique<Llt>()) {
  if (a.rows() != a.cols()) throw InvalidArgument("Cholesky of a non-square matrix");
  llt_->compute(a);
  if (llt_->info() != Eigen::Success) {
    throw NumericalError("sparse Cholesky failed: matrix is not positive definite");
  }
}

Eigen::VectorXd SparseCholesky::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = llt_->solve(b);
  return x;
}

double SparseCholesky::log_determinant() const {
  const SparseMatrix& l = llt_->matrixL().nestedExpression();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < l.outerSize(); ++j) {
    // Diagonal is the first stored entry of each column.
    acc += std::log(l.valuePtr()[l.outerIndexPtr()[j]]);
  }
  return 2.0 * acc;
}

Eigen::VectorXd SparseCholesky::correlate(const Eigen::VectorXd& z) const {
  const auto& perm = llt_->permutationP();
  Eigen::VectorXd w = perm * z;
  llt_->matrixU().solveInPlace(w);
  return perm.inverse() * w;
}

std::vector<double> SparseCholesky::takahashi() const {
  const SparseMatrix& l = llt_->matrixL().nestedExpression();
  const int* outer = l.outerIndexPtr();
  const int* rows = l.innerIndexPtr();
  const double* vals = l.valuePtr();
  const Eigen::Index n = l.outerSize();
  std::vector<double> z(static_cast<std::size_t>(l.nonZeros()), 0.0);

  for (Eigen::Index j = n - 1; j >= 0; --j) {
    const int begin = outer[j];
    const int end = outer[j + 1];
    const double ljj = vals[begin];
    // For each off-diagonal row i of column j: Z_ij = -(1/L_jj) sum_k L_kj Z_ik
    // over k in struct(j). Accumulated column by column over k: struct(j)
    // restricted to rows >= k is contained in struct(k) (chordal fill).
    for (int p = begin + 1; p < end; ++p) z[p] = 0.0;
    for (int pk = begin + 1; pk < end; ++pk) {
      const int k = rows[pk];
      const double lkj = vals[pk];
      // Rows i < k: Z_ik = Z_ki lives in column i, row k.
      for (int pi = begin + 1; pi < pk; ++pi) {
        const int i = rows[pi];
        const int* first = rows + outer[i];
        const int* last = rows + outer[i + 1];
        const int* hit = std::lower_bound(first, last, k);
        z[pi] += lkj * z[outer[i] + (hit - first)];
      }
      // Rows i >= k: merge scan down column k.
      int q = outer[k];
      const int qend = outer[k + 1];
      for (int pi = pk; pi < end; ++pi) {
        const int i = rows[pi];
        while (q < qend && rows[q] < i) ++q;
        z[pi] += lkj * z[q];
      }
    }
    double diag_acc = 0.0;
    for (int p = begin + 1; p < end; ++p) {
      z[p] = -z[p] / ljj;
      diag_acc += vals[p] * z[p];
    }
    z[begin] = 1.0 / (ljj * ljj) - diag_acc / ljj;
  }
  return z;
}

SparseMatrix SparseCholesky::selected_inverse() const {
  const SparseMatrix& l = llt_->matrixL().nestedExpression();
  const std::vector<double> z = takahashi();
  const auto& idx = llt_->permutationP().indices();
  // inverse permutation: permuted position -> original index
  std::vector<int> orig(static_cast<std::size_t>(n_));
  for (Eigen::Index a = 0; a < n_; ++a) orig[idx[a]] = static_cast<int>(a);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(z.size());
  for (Eigen::Index j = 0; j < l.outerSize(); ++j) {
    for (int p = l.outerIndexPtr()[j]; p < l.outerIndexPtr()[j + 1]; ++p) {
      const int a = orig[l.innerIndexPtr()[p]];
      const int b = orig[j];
      trips.emplace_back(std::max(a, b), std::min(a, b), z[p]);
    }
  }
  SparseMatrix out(n_, n_);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Eigen::VectorXd SparseCholesky::inverse_diagonal() const {
  const SparseMatrix& l = llt_->matrixL().nestedExpression();
  const std::vector<double> z = takahashi();
  const auto& idx = llt_->permutationP().indices();
  Eigen::VectorXd d(n_);
  for (Eigen::Index a = 0; a < n_; ++a) d[a] = z[l.outerIndexPtr()[idx[a]]];
  return d;
}

double trace_product_inverse(const SparseMatrix& a, const SparseCholesky& b_chol) {
  if (a.rows() != b_chol.size() || a.cols() != b_chol.size()) throw InvalidArgument("trace: dimension mismatch");
  const SparseMatrix sinv = b_chol.selected_inverse();  // lower, original order
  auto lookup = [&](Eigen::Index r, Eigen::Index c, double& out) {
    const Eigen::Index lo = std::min(r, c);
    const Eigen::Index hi = std::max(r, c);
    const int* first = sinv.innerIndexPtr() + sinv.outerIndexPtr()[lo];
    const int* last = sinv.innerIndexPtr() + sinv.outerIndexPtr()[lo + 1];
    const int* hit = std::lower_bound(first, last, static_cast<int>(hi));
    if (hit == last || *hit != hi) return false;
    out = sinv.valuePtr()[sinv.outerIndexPtr()[lo] + (hit - first)];
    return true;
  };
  double tr = 0.0;
  for (Eigen::Index col = 0; col < a.outerSize(); ++col) {
    double col_sum = 0.0;
    bool covered = true;
    for (SparseMatrix::InnerIterator it(a, col); it && covered; ++it) {
      double v = 0.0;
      covered = lookup(it.row(), col, v);
      col_sum += it.value() * v;
    }
    if (!covered) {
      // Entry outside the factor pattern: fall back to a column solve.
      const Eigen::VectorXd x = b_chol.solve(Eigen::VectorXd(a.col(col)));
      col_sum = x[col];
    }
    tr += col_sum;
  }
  return tr;
}

}  // namespace sestm
