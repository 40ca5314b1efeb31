#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sestm/likelihood.hpp"
#include "sestm/process_models.hpp"

namespace sestm {

enum class ProcessKind { Scse, Rdse };

std::string to_string(ProcessKind kind);
ProcessKind parse_process_kind(const std::string& s);

/// Priors on the hyperparameters and fixed effects.
///
/// sigma ~ Half-Cauchy(sigma_scale); theta1 ~ Uniform over its eigenvalue
/// bounds; eta, alpha ~ Uniform(0, 1); kappa | alpha ~ Uniform(-alpha/2,
/// (2 - alpha)/2); each fixed effect ~ Gaussian(0, beta_variance).
struct PriorSpec {
  double sigma_scale = 25.0;
  double beta_variance = 1000.0;
};

struct SolverSettings {
  double inner_tolerance = 1e-8;   // inf-norm of the Newton step
  int inner_max_iterations = 100;
  double curvature_floor = 1e-8;
  double outer_gradient_tolerance = 1e-4;
  double fd_step = 1e-4;
  int outer_max_iterations = 200;
  double grid_dz = 1.0;
  double grid_dpi = 2.5;
  int max_grid_points = 5000;
  int workers = 0;  // 0: hardware concurrency
};

struct ModelSpec {
  ProcessKind process = ProcessKind::Scse;
  bool excitation = true;
  /// When set (and excitation is on) eta is held at this value instead of
  /// being estimated.
  std::optional<double> fixed_eta;
  BoundaryAssembly boundary = BoundaryAssembly::Printed;
  InitialCounts initial = InitialCounts::Zero;
  PriorSpec priors;

  bool estimates_eta() const { return excitation && !fixed_eta.has_value(); }
  double eta_when_fixed() const { return excitation && fixed_eta ? *fixed_eta : 0.0; }
};

/// Hyperparameters on their natural scale. Fields not used by the process
/// model are ignored.
struct HyperParams {
  double sigma2 = 1.0;
  double theta1 = 0.0;
  double alpha = 0.5;
  double kappa = 0.0;
  double eta = 0.0;

  ScseParams scse() const { return {theta1, sigma2}; }
  RdseParams rdse() const { return {alpha, kappa, sigma2}; }
};

/// Maps HyperParams to an unconstrained vector phi and back:
/// sigma2 -> log; theta1, eta, alpha -> scaled logit on their intervals;
/// kappa -> scaled logit on (-alpha/2, (2 - alpha)/2) for the current alpha.
///
/// Coordinate order: SCSE (sigma2, theta1[, eta]); RDSE (sigma2, alpha, kappa[, eta]).
class ParamLayout {
 public:
  ParamLayout(const ModelSpec& spec, Theta1Bounds theta1_bounds);

  int dimension() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  int index_of(const std::string& name) const;  // -1 when absent

  Eigen::VectorXd to_unconstrained(const HyperParams& h) const;
  HyperParams from_unconstrained(const Eigen::VectorXd& phi) const;

  /// Natural-scale value of one named coordinate.
  static double value_of(const HyperParams& h, const std::string& name);

  /// Throws ParameterSpaceError when h lies outside the open parameter space.
  void validate(const HyperParams& h) const;

  /// log prior density of phi, including the Jacobian of the transform.
  double log_prior(const Eigen::VectorXd& phi) const;

  const Theta1Bounds& theta1_bounds() const { return bounds_; }
  const ModelSpec& spec() const { return spec_; }

 private:
  ModelSpec spec_;
  Theta1Bounds bounds_;
  std::vector<std::string> names_;
};

double logit_scaled(double x, double lo, double hi);
double inv_logit_scaled(double z, double lo, double hi);

}  // namespace sestm
