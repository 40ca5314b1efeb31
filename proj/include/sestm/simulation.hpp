#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sestm/hyperparams.hpp"
#include "sestm/likelihood.hpp"
#include "sestm/panel_io.hpp"
#include "sestm/process_models.hpp"
#include "sestm/spatial_graph.hpp"

namespace sestm {

/// Generating values for a custom study.
struct GeneratorParams {
  HyperParams theta;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(1);  // intercept first
  Eigen::MatrixXd covariates;                       // n_sites x (beta.size() - 1)
  std::vector<int> y_init;                          // empty: zeros
};

struct SimulatedStudy {
  std::string name;
  SpatialGraph graph;
  ObservationPanel panel;
  LatentField latent;
  KeyValues truth;
};

/// SCSE design on an 8x8 torus with T = 100: theta1 = 0.22, eta = 0.2,
/// sigma2 = 0.4, beta0 = -1.
SimulatedStudy generate_scse_study(std::uint64_t seed);

/// RDSE design on an 8x8 torus with T = 100: alpha = 0.1, kappa = 0.2,
/// sigma2 = 0.25, eta = 0.4, beta0 = 0; stationary boundary assembly.
SimulatedStudy generate_rdse_study(std::uint64_t seed);

/// Either process model on any graph, with covariates. Uses spec.boundary for
/// the RDSE precision and spec.excitation / spec.fixed_eta for eta.
SimulatedStudy generate_custom(const ModelSpec& spec, const SpatialGraph& g, int n_time,
                               const GeneratorParams& params, std::uint64_t seed, std::string name = "custom");

/// Deterministic propagation x_{k+1} = M x_k for `steps` steps; row k of the
/// result is x_k.
Eigen::MatrixXd propagate_mean(const SpatialGraph& g, const RdseParams& p, const Eigen::VectorXd& x0, int steps);

/// Names of the built-in study designs.
std::vector<std::string> study_names();
SimulatedStudy generate_study(const std::string& name, std::uint64_t seed);

}  // namespace sestm
