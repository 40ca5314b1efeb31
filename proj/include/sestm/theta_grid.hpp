#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sestm/laplace.hpp"

namespace sestm {

/// Log density of the hyperparameters at a batch of unconstrained points.
using GridObjective = std::function<std::vector<double>(const std::vector<Eigen::VectorXd>&)>;

struct GridPoint {
  Eigen::VectorXd z;    // standardized coordinates (multiples of dz)
  Eigen::VectorXd phi;  // unconstrained hyperparameters
  double log_posterior = 0.0;
  double weight = 0.0;
  double p_eff = 0.0;
  std::shared_ptr<const ModeResult> mode;
};

struct GridSettings {
  double dz = 1.0;
  double dpi = 2.5;
  int max_points = 5000;
  int max_axis_steps = 30;
};

/// Explored hyperparameter grid: phi(z) = mode + scaling * z, z on the lattice dz * Z^d.
struct ThetaGrid {
  std::vector<std::string> names;
  Eigen::VectorXd mode_phi;
  Eigen::MatrixXd hessian;  // of the log posterior at the mode
  Eigen::MatrixXd scaling;
  double dz = 1.0;
  double dpi = 2.5;
  bool diagonal_fallback = false;
  std::string warning;
  std::vector<GridPoint> points;  // points[0] is the mode
  // Per principal axis: outermost kept step on the negative and positive side
  // (in units of dz) and the log-density drop there.
  Eigen::VectorXi axis_steps_lo, axis_steps_hi;
  Eigen::VectorXd axis_drop_lo, axis_drop_hi;

  std::size_t size() const { return points.size(); }
  int dimension() const { return static_cast<int>(mode_phi.size()); }
};

/// Grid walk for a generic log density; the hessian is that of `f` at `mode`.
ThetaGrid explore_grid(const GridObjective& f, const Eigen::VectorXd& mode, const Eigen::MatrixXd& hessian,
                       const GridSettings& settings = {});

/// Grid over the model's hyperparameters, starting from its mode. Every point
/// carries its latent mode and effective number of parameters.
ThetaGrid explore_theta_grid(const LaplaceModel& model, const ThetaMode& mode);

struct GridMoments {
  Eigen::VectorXd mean;        // unconstrained scale
  Eigen::MatrixXd covariance;  // includes the within-cell spread of each lattice cell
};

GridMoments grid_moments(const ThetaGrid& grid);

/// Marginal of one hyperparameter on its natural scale: the grid is summarized
/// by a split Gaussian along each principal axis, sampled deterministically and
/// mapped through `to_natural`.
using NaturalMap = std::function<double(const Eigen::VectorXd& phi)>;

HyperMarginal marginal_hyperparam(const ThetaGrid& grid, int index, const NaturalMap& to_natural,
                                  int n_samples = 100000);
HyperMarginal marginal_hyperparam(const ThetaGrid& grid, const ParamLayout& layout, int index,
                                  int n_samples = 100000);

/// p_eff averaged over the grid weights.
double grid_average_p_eff(const ThetaGrid& grid);

}  // namespace sestm
