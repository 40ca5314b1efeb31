#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sestm/hyperparams.hpp"
#include "sestm/likelihood.hpp"
#include "sestm/optimizer.hpp"
#include "sestm/process_models.hpp"
#include "sestm/sparse_cholesky.hpp"
#include "sestm/spatial_graph.hpp"

namespace sestm {

/// Value and first two derivatives of one cell's data log density in its
/// linear predictor.
struct CellTerm {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Data term for the inner solver: cell index and linear predictor -> CellTerm.
using CellLikelihood = std::function<CellTerm(Eigen::Index cell, double lambda)>;

/// Latent Gaussian vector u = (x, beta): x is the site x time field, beta the
/// fixed effects. The linear predictor of cell (site, t) is
/// x[t * n_sites + site] + design.row(site) * beta.
struct LatentStructure {
  int n_sites = 0;
  int n_time = 0;
  Eigen::MatrixXd design;  // n_sites x n_fixed

  Eigen::Index n_cells() const { return Eigen::Index(n_sites) * n_time; }
  Eigen::Index n_fixed() const { return design.cols(); }
  Eigen::Index dimension() const { return n_cells() + n_fixed(); }

  Eigen::VectorXd linear_predictor(const Eigen::VectorXd& u) const;
  /// J^T v where J = d lambda / d u.
  Eigen::VectorXd pullback(const Eigen::VectorXd& cell_values) const;
};

/// Gaussian approximation of pi(u | theta, Y) at its mode.
struct ModeResult {
  Eigen::VectorXd u;  // mode (x*, beta*)
  SparseMatrix q_star;  // lower triangle of the updated precision at the mode
  std::shared_ptr<const SparseCholesky> q_star_chol;
  double log_det_q_star = 0.0;
  double data_loglik = 0.0;     // sum of cell log densities at the mode
  double quadratic_form = 0.0;  // u^T P u
  double gradient_norm = 0.0;   // inf-norm of the exact full-conditional gradient
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_path;  // exact objective at the start and after every accepted step
  int n_sites = 0;
  int n_time = 0;

  LatentField field() const;
  Eigen::VectorXd beta() const;
};

/// Newton iteration Q*(u_k) u_{k+1} = B*(u_k) with step halving on the exact
/// objective -u^T P u / 2 + sum_k value_k. `prior` is the full symmetric prior
/// precision of u. Stops when the inf-norm of the accepted step falls below
/// the tolerance. Curvature entries are floored before assembly.
ModeResult solve_mode(const SparseMatrix& prior, const LatentStructure& structure, const CellLikelihood& term,
                      const Eigen::VectorXd& u_init, const SolverSettings& settings);

/// Gaussian approximation with one coordinate pinned at `value`; used by the
/// nested latent marginal. Returns -0.5 u^T P u + sum value_k - 0.5 log|Q*_{-i,-i}|.
double pinned_laplace_log_density(const SparseMatrix& prior, const LatentStructure& structure,
                                  const CellLikelihood& term, Eigen::Index coordinate, double value,
                                  const Eigen::VectorXd& u_init, const SolverSettings& settings);

struct PriorPrecision {
  SparseMatrix matrix;  // full symmetric, dimension of u
  double log_det = 0.0;
};

struct LogPosteriorTerms {
  double value = -std::numeric_limits<double>::infinity();
  double data_loglik = 0.0;
  double half_log_det_prior = 0.0;
  double half_quadratic = 0.0;
  double half_log_det_q_star = 0.0;
  double log_prior = 0.0;
  std::shared_ptr<const ModeResult> mode;
};

struct HyperMarginal {
  std::string name;
  double mode = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> abscissae;  // natural scale
  std::vector<double> density;
};

struct LatentMarginal {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

struct NestedMarginal {
  std::vector<double> values;
  std::vector<double> density;  // normalized to integrate to 1 (trapezoid)
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// A self-exciting spatio-temporal Poisson model bound to data: graph, panel,
/// model choice, priors and solver settings.
class LaplaceModel {
 public:
  LaplaceModel(SpatialGraph graph, ObservationPanel panel, ModelSpec spec, SolverSettings settings = {});

  const SpatialGraph& graph() const { return graph_; }
  const ObservationPanel& panel() const { return panel_; }
  const ModelSpec& spec() const { return spec_; }
  const SolverSettings& settings() const { return settings_; }
  const ParamLayout& layout() const { return layout_; }
  const LatentStructure& structure() const { return structure_; }

  Excitation excitation(const HyperParams& h) const;
  PriorPrecision prior_precision(const HyperParams& h) const;
  CellLikelihood cell_likelihood(const HyperParams& h) const;

  /// Deterministic starting point for the inner solver.
  Eigen::VectorXd default_latent_init() const;

  ModeResult gaussian_approx(const HyperParams& h, const Eigen::VectorXd* u_init = nullptr) const;

  /// Laplace approximation of log pi(phi | Y) up to a constant; -inf outside
  /// the parameter space.
  LogPosteriorTerms log_posterior_terms(const Eigen::VectorXd& phi, const Eigen::VectorXd* u_init = nullptr) const;
  double log_posterior_theta(const Eigen::VectorXd& phi, const Eigen::VectorXd* u_init = nullptr) const;

  /// n - tr(P Q*^{-1}) at a mode result.
  double effective_params(const HyperParams& h, const ModeResult& mode) const;

  /// Default starting hyperparameters.
  HyperParams default_start() const;

 private:
  SpatialGraph graph_;
  ObservationPanel panel_;
  ModelSpec spec_;
  SolverSettings settings_;
  Theta1Bounds bounds_{-1.0, 1.0};
  Eigen::VectorXd adjacency_eigs_;
  ParamLayout layout_;
  LatentStructure structure_;
};

struct ThetaMode {
  Eigen::VectorXd phi;
  HyperParams theta;
  Eigen::MatrixXd hessian;  // of log pi(phi | Y), unconstrained scale
  double log_posterior = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string trace;
  std::shared_ptr<const ModeResult> latent_mode;
};

/// Evaluates log pi(phi | Y) at batches of points on the model's worker pool.
/// Every evaluation starts its inner solve from the same anchor latent vector,
/// so results do not depend on scheduling.
class PosteriorEvaluator {
 public:
  explicit PosteriorEvaluator(const LaplaceModel& model);

  std::vector<LogPosteriorTerms> evaluate(const std::vector<Eigen::VectorXd>& phis) const;
  void set_anchor(Eigen::VectorXd u) { anchor_ = std::move(u); }
  const Eigen::VectorXd& anchor() const { return anchor_; }

 private:
  const LaplaceModel& model_;
  Eigen::VectorXd anchor_;
};

ThetaMode find_theta_mode(const LaplaceModel& model, const Eigen::VectorXd& phi_init);

/// Gaussian marginals from the approximation: mean = mode, sd = sqrt(diag Q*^{-1}).
LatentMarginal latent_marginals_gaussian(const ModeResult& mode);

/// Laplace-refined marginal density of one latent coordinate of u over `values`.
NestedMarginal latent_marginal_nested(const LaplaceModel& model, const HyperParams& h, Eigen::Index coordinate,
                                      std::vector<double> values = {});
NestedMarginal latent_marginal_nested(const SparseMatrix& prior, const LatentStructure& structure,
                                      const CellLikelihood& term, const SolverSettings& settings,
                                      Eigen::Index coordinate, std::vector<double> values);

/// Gaussian 95% interval for fixed effect `effect_index` (0 = intercept) at theta.
Interval fixed_effect_interval(const LaplaceModel& model, const HyperParams& h, int effect_index,
                               const ModeResult* mode = nullptr);

}  // namespace sestm
