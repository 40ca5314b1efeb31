#include "sestm/process_models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "sestm/errors.hpp"

namespace sestm {

LatentField::LatentField(int sites, int times, Eigen::VectorXd v)
    : n_sites(sites), n_time(times), values(std::move(v)) {
  if (values.size() != Eigen::Index(sites) * times) {
    throw InvalidArgument("latent field length does not match sites x times");
  }
}

namespace {

using Triplet = Eigen::Triplet<double>;

// Full, exactly symmetric matrix from lower-triangle triplets (row >= col).
SparseMatrix symmetric_from_lower(Eigen::Index n, const std::vector<Triplet>& lower) {
  SparseMatrix low(n, n);
  low.setFromTriplets(lower.begin(), lower.end());
  SparseMatrix strict = low.triangularView<Eigen::StrictlyLower>();
  SparseMatrix full = low;
  full += SparseMatrix(strict.transpose());
  return full;
}

bool inside(double v, double lo, double hi) {
  return v > lo + kParameterGuard && v < hi - kParameterGuard;
}

std::string fmt(double v) { return std::to_string(v); }

}  // namespace

void validate(const ScseParams& p, const Theta1Bounds& bounds) {
  if (!(p.sigma2 > 0.0) || !std::isfinite(p.sigma2)) {
    throw ParameterSpaceError("sigma2 must be positive, got " + fmt(p.sigma2));
  }
  if (!inside(p.theta1, bounds.lower, bounds.upper)) {
    throw ParameterSpaceError("theta1 = " + fmt(p.theta1) + " outside (" + fmt(bounds.lower) +
                              ", " + fmt(bounds.upper) + ")");
  }
}

void validate(const RdseParams& p) {
  if (!(p.sigma2 > 0.0) || !std::isfinite(p.sigma2)) {
    throw ParameterSpaceError("sigma2 must be positive, got " + fmt(p.sigma2));
  }
  if (!inside(p.alpha, 0.0, 1.0)) {
    throw ParameterSpaceError("alpha = " + fmt(p.alpha) + " outside (0, 1)");
  }
  if (!inside(p.kappa, kappa_lower(p.alpha), kappa_upper(p.alpha))) {
    throw ParameterSpaceError("kappa = " + fmt(p.kappa) + " outside (" + fmt(kappa_lower(p.alpha)) +
                              ", " + fmt(kappa_upper(p.alpha)) + ")");
  }
}

PrecisionOperator scse_precision(const SpatialGraph& g, const ScseParams& p, int n_time) {
  return scse_precision(g, p, n_time, theta1_bounds(g));
}

PrecisionOperator scse_precision(const SpatialGraph& g, const ScseParams& p, int n_time,
                                 const Theta1Bounds& bounds) {
  if (n_time < 1) throw InvalidArgument("n_time must be >= 1");
  validate(p, bounds);
  const int s = g.n_sites();

  // (I - theta H)^T (I - theta H) = I - 2 theta H + theta^2 H^2, lower triangle
  // of one time block. H^2 entries are integer path counts.
  std::vector<Triplet> block;
  const double inv = 1.0 / p.sigma2;
  const double th = p.theta1;
  std::vector<int> two_hop(s, 0);
  std::vector<int> touched;
  for (int i = 0; i < s; ++i) {
    touched.clear();
    for (int k : g.neighbors(i)) {
      for (int j : g.neighbors(k)) {
        if (j > i) continue;
        if (two_hop[j]++ == 0) touched.push_back(j);
      }
    }
    for (int j : g.neighbors(i)) {
      if (j < i && two_hop[j] == 0) touched.push_back(j);
    }
    if (two_hop[i] == 0 && std::find(touched.begin(), touched.end(), i) == touched.end()) {
      touched.push_back(i);
    }
    std::sort(touched.begin(), touched.end());
    for (int j : touched) {
      double v = th * th * two_hop[j];
      if (j == i) v += 1.0;
      else if (g.has_edge(i, j)) v -= 2.0 * th;
      block.emplace_back(i, j, v * inv);
      two_hop[j] = 0;
    }
  }

  std::vector<Triplet> lower;
  lower.reserve(block.size() * n_time);
  for (int t = 0; t < n_time; ++t) {
    const int off = t * s;
    for (const auto& e : block) lower.emplace_back(e.row() + off, e.col() + off, e.value());
  }
  PrecisionOperator q;
  q.n_sites = s;
  q.n_time = n_time;
  q.matrix = symmetric_from_lower(Eigen::Index(s) * n_time, lower);
  return q;
}

double scse_log_determinant(const Eigen::VectorXd& adjacency_eigs, const ScseParams& p, int n_time) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < adjacency_eigs.size(); ++i) {
    acc += std::log(std::abs(1.0 - p.theta1 * adjacency_eigs[i]));
  }
  const double n = double(adjacency_eigs.size()) * n_time;
  return 2.0 * n_time * acc - n * std::log(p.sigma2);
}

SparseMatrix rdse_propagator(const SpatialGraph& g, const RdseParams& p) {
  if (g.has_isolated_site()) {
    throw InvalidArgument("reaction-diffusion model needs every site to have a neighbor");
  }
  const int s = g.n_sites();
  std::vector<Triplet> trips;
  trips.reserve(s + 2 * g.n_edges());
  for (int i = 0; i < s; ++i) {
    // kappa * (-deg/deg) + (1 - alpha)
    trips.emplace_back(i, i, 1.0 - p.alpha - p.kappa);
    const double w = p.kappa / g.degree(i);
    for (int j : g.neighbors(i)) trips.emplace_back(i, j, w);
  }
  SparseMatrix m(s, s);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& m, double q) {
  if (m.rows() != m.cols()) throw InvalidArgument("Lyapunov: propagator must be square");
  const Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  const double radius = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(radius < 1.0)) {
    throw NumericalError("non-stationary propagator: spectral radius " + fmt(radius) + " >= 1");
  }
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd sigma = q * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd a = m;
  for (int it = 0; it < 200; ++it) {
    const Eigen::MatrixXd inc = a * sigma * a.transpose();
    sigma += inc;
    if (inc.cwiseAbs().maxCoeff() <= 1e-17 * sigma.cwiseAbs().maxCoeff()) break;
    a = a * a;
  }
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::MatrixXd rdse_stationary_cov(const SpatialGraph& g, const RdseParams& p) {
  validate(p);
  const Eigen::MatrixXd m = Eigen::MatrixXd(rdse_propagator(g, p));
  return solve_discrete_lyapunov(m, p.sigma2);
}

PrecisionOperator rdse_precision(const SpatialGraph& g, const RdseParams& p, int n_time,
                                 BoundaryAssembly assembly) {
  if (n_time < 2) throw InvalidArgument("reaction-diffusion precision needs n_time >= 2");
  validate(p);
  const int s = g.n_sites();
  const SparseMatrix m = rdse_propagator(g, p);
  const double inv = 1.0 / p.sigma2;

  // Lower triangle of M^T M: sum over rows k of M of M_ki M_kj.
  Eigen::MatrixXd mtm_dense;
  std::vector<Triplet> mtm;
  {
    const SparseMatrix mt = m.transpose();  // column k of mt = row k of M
    for (Eigen::Index k = 0; k < mt.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator a(mt, k); a; ++a) {
        for (SparseMatrix::InnerIterator b(mt, k); b; ++b) {
          if (a.row() >= b.row()) mtm.emplace_back(a.row(), b.row(), a.value() * b.value());
        }
      }
    }
  }
  SparseMatrix mtm_lower(s, s);
  mtm_lower.setFromTriplets(mtm.begin(), mtm.end());

  Eigen::MatrixXd first_block;  // full dense, stationary only
  if (assembly == BoundaryAssembly::Stationary) {
    const Eigen::MatrixXd sigma_s = solve_discrete_lyapunov(Eigen::MatrixXd(m), p.sigma2);
    const Eigen::MatrixXd mtm_full = Eigen::MatrixXd(SparseMatrix(m.transpose()) * m);
    Eigen::MatrixXd prec_s = sigma_s.llt().solve(Eigen::MatrixXd::Identity(s, s));
    first_block = prec_s + inv * mtm_full;
    first_block = 0.5 * (first_block + first_block.transpose()).eval();
  }

  std::vector<Triplet> lower;
  lower.reserve(std::size_t(n_time) * (mtm_lower.nonZeros() + m.nonZeros() + s));
  for (int t = 0; t < n_time; ++t) {
    const int off = t * s;
    if (t == 0 && assembly == BoundaryAssembly::Stationary) {
      for (int j = 0; j < s; ++j)
        for (int i = j; i < s; ++i) lower.emplace_back(off + i, off + j, first_block(i, j));
    } else if (t == 0 || t == n_time - 1) {
      for (int i = 0; i < s; ++i) lower.emplace_back(off + i, off + i, inv);
    } else {
      for (int i = 0; i < s; ++i) lower.emplace_back(off + i, off + i, inv);
      for (Eigen::Index k = 0; k < mtm_lower.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(mtm_lower, k); it; ++it) {
          lower.emplace_back(off + it.row(), off + it.col(), inv * it.value());
        }
      }
    }
    if (t + 1 < n_time) {
      const int next = off + s;
      for (Eigen::Index k = 0; k < m.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
          lower.emplace_back(next + it.row(), off + it.col(), -inv * it.value());
        }
      }
    }
  }
  PrecisionOperator q;
  q.n_sites = s;
  q.n_time = n_time;
  q.matrix = symmetric_from_lower(Eigen::Index(s) * n_time, lower);
  return q;
}

double rdse_log_determinant(const SpatialGraph& g, const RdseParams& p, int n_time,
                            BoundaryAssembly assembly) {
  validate(p);
  const int s = g.n_sites();
  const double n = double(s) * n_time;
  const Eigen::MatrixXd m = Eigen::MatrixXd(rdse_propagator(g, p));
  if (assembly == BoundaryAssembly::Stationary) {
    const Eigen::MatrixXd sigma_s = solve_discrete_lyapunov(m, p.sigma2);
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma_s);
    if (llt.info() != Eigen::Success) throw NumericalError("stationary covariance not positive definite");
    const double logdet_sigma = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return s * std::log(p.sigma2) - logdet_sigma - n * std::log(p.sigma2);
  }
  const Eigen::MatrixXd boundary = Eigen::MatrixXd::Identity(s, s) - m.transpose() * m;
  const Eigen::LLT<Eigen::MatrixXd> llt(boundary);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("printed boundary assembly is not positive definite (||M||_2 >= 1)");
  }
  const double logdet_b = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return logdet_b - n * std::log(p.sigma2);
}

}  // namespace sestm
