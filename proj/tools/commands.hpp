#pragma once

#include <string>
#include <vector>

#include "sestm/panel_io.hpp"

namespace sestm::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

/// Resolved run configuration as ordered key-value records. Recognized keys:
///
///   model (scse|rdse), excitation (on|off), eta (fixed value), boundary
///   (printed|stationary), initial (zero|condition), adjacency, panel,
///   covariates, out, seed, n_rep, study, workers, dz, dpi, max_grid_points,
///   inner_tolerance, outer_gradient_tolerance, sigma_scale, beta_variance,
///   refine_sweeps, fit (comma separated fit directories), assess, name,
///   and for custom simulation rows, cols, n_time, sigma2, theta1, alpha,
///   kappa, beta0.
using Config = KeyValues;

/// Reads `path` when non-empty and overlays `flags` (flags win).
Config merge_config(const std::string& path, const Config& flags);

/// panel.csv, covariates.csv, truth.txt, adjacency.txt and config.txt in `out`.
int cmd_simulate(const Config& cfg);

/// parameters.txt / parameters.csv, latent.csv, grid.json, marginal_<name>.csv,
/// fit.txt and config.txt in `out`. Returns kExitNotConverged when the
/// hyperparameter search did not converge.
int cmd_fit(const Config& cfg);

/// assessment.csv (one row per fit directory) and config.txt in `out`.
int cmd_assess(const Config& cfg);

/// summary.txt and marginal_<label>_<name>.csv in `out`.
int cmd_report(const Config& cfg);

}  // namespace sestm::cli
