#pragma once

#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "sestm/sparse_cholesky.hpp"
#include "sestm/spatial_graph.hpp"

namespace sestm {

/// Guard margin applied to every open-interval parameter check.
inline constexpr double kParameterGuard = 1e-9;

/// Spatially correlated (SAR) process: X_t = theta1 * H X_t + eps_t.
struct ScseParams {
  double theta1 = 0.0;
  double sigma2 = 1.0;
};

/// Reaction-diffusion process: X_t = M X_{t-1} + eps_t with
/// M = kappa * diag(1/degree) * Gamma + (1 - alpha) * I.
struct RdseParams {
  double alpha = 0.5;
  double kappa = 0.0;
  double sigma2 = 1.0;
};

/// Upper end of the admissible kappa interval for a given alpha.
inline double kappa_upper(double alpha) { return (2.0 - alpha) / 2.0; }
inline double kappa_lower(double alpha) { return -alpha / 2.0; }

/// How the first time block of the reaction-diffusion precision is assembled.
enum class BoundaryAssembly {
  Printed,     ///< first and last diagonal blocks equal I / sigma2
  Stationary,  ///< x_1 ~ N(0, Sigma_s): first block Sigma_s^{-1} + M^T M / sigma2
};

/// Latent field values laid out site-major within each time block:
/// index(site, t) = t * n_sites + site, t = 0..n_time-1.
struct LatentField {
  int n_sites = 0;
  int n_time = 0;
  Eigen::VectorXd values;

  LatentField() = default;
  LatentField(int sites, int times) : n_sites(sites), n_time(times), values(Eigen::VectorXd::Zero(Eigen::Index(sites) * times)) {}
  LatentField(int sites, int times, Eigen::VectorXd v);

  Eigen::Index size() const { return values.size(); }
  double operator()(int site, int t) const { return values[Eigen::Index(t) * n_sites + site]; }
  double& operator()(int site, int t) { return values[Eigen::Index(t) * n_sites + site]; }
};

/// Sparse symmetric positive definite precision over a site x time field.
struct PrecisionOperator {
  int n_sites = 0;
  int n_time = 0;
  SparseMatrix matrix;

  Eigen::Index dimension() const { return matrix.rows(); }
};

void validate(const ScseParams& p, const Theta1Bounds& bounds);
void validate(const RdseParams& p);

/// (1/sigma2) (I - theta1 B)^T (I - theta1 B), B = I_{n_time} (x) H.
PrecisionOperator scse_precision(const SpatialGraph& g, const ScseParams& p, int n_time);
PrecisionOperator scse_precision(const SpatialGraph& g, const ScseParams& p, int n_time,
                                 const Theta1Bounds& bounds);

/// log|Q_sc| from the adjacency eigenvalues: 2 n_time sum log|1 - theta1 psi| - N log sigma2.
double scse_log_determinant(const Eigen::VectorXd& adjacency_eigs, const ScseParams& p, int n_time);

SparseMatrix rdse_propagator(const SpatialGraph& g, const RdseParams& p);

/// Solves Sigma = M Sigma M^T + q I by the doubling iteration. Throws
/// NumericalError("non-stationary") when the spectral radius of M is >= 1.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& m, double q);

/// Stationary one-period covariance Sigma_s of the reaction-diffusion process.
Eigen::MatrixXd rdse_stationary_cov(const SpatialGraph& g, const RdseParams& p);

/// Block-tridiagonal precision of the reaction-diffusion field over n_time >= 2
/// periods (blocks ordered by time, off-diagonal block (t+1, t) = -M / sigma2).
PrecisionOperator rdse_precision(const SpatialGraph& g, const RdseParams& p, int n_time,
                                 BoundaryAssembly assembly = BoundaryAssembly::Printed);

/// log|Q_rd| computed from s x s quantities without factorizing the full matrix.
double rdse_log_determinant(const SpatialGraph& g, const RdseParams& p, int n_time,
                            BoundaryAssembly assembly = BoundaryAssembly::Printed);

/// Draw from N(0, Q^{-1}).
template <class Rng>
LatentField sample_latent(const PrecisionOperator& q, Rng& rng) {
  const SparseCholesky chol(q.matrix);
  return LatentField(q.n_sites, q.n_time, sample_gaussian(chol, rng));
}

}  // namespace sestm
