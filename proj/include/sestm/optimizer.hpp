#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sestm {

/// Evaluates an objective at a batch of points. Implementations may evaluate
/// the points concurrently; non-finite values mark infeasible points.
using BatchObjective = std::function<std::vector<double>(const std::vector<Eigen::VectorXd>&)>;

struct OptimizerSettings {
  double gradient_tolerance = 1e-4;
  double fd_step = 1e-4;
  int max_iterations = 200;
  double max_step = 2.0;  // inf-norm cap on a single step
  int max_halvings = 40;
};

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // central finite differences at x
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string trace;
};

/// Central finite-difference gradient.
Eigen::VectorXd fd_gradient(const BatchObjective& f, const Eigen::VectorXd& x, double h);

/// Central finite-difference Hessian (uses f(x) = fx).
Eigen::MatrixXd fd_hessian(const BatchObjective& f, const Eigen::VectorXd& x, double fx, double h);

/// Maximizes f by BFGS with finite-difference gradients and step halving.
/// The inverse-Hessian is seeded from a finite-difference Hessian at x0 when
/// that is negative definite. `on_accept` is called with every accepted
/// iterate before the next gradient evaluation. Throws ConvergenceError (with
/// the iterate trace) after max_iterations.
OptimizeResult maximize(const BatchObjective& f, const Eigen::VectorXd& x0, const OptimizerSettings& settings,
                        const std::function<void(const Eigen::VectorXd&)>& on_accept = {});

}  // namespace sestm
