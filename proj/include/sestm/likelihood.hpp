#pragma once

#include <atomic>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sestm/process_models.hpp"

namespace sestm {

/// Counts Y(s, t) and static site covariates Z(s). Counts use the same
/// site-major-per-time layout as LatentField; time index 0 is the first
/// observed period (period 1 in files).
struct ObservationPanel {
  int n_sites = 0;
  int n_time = 0;
  std::vector<int> counts;
  Eigen::MatrixXd covariates;  // n_sites x n_covariates, possibly 0 columns
  std::vector<std::string> covariate_names;

  ObservationPanel() = default;
  ObservationPanel(int sites, int times)
      : n_sites(sites), n_time(times), counts(std::size_t(sites) * times, 0), covariates(sites, 0) {}

  std::size_t size() const { return counts.size(); }
  int n_covariates() const { return static_cast<int>(covariates.cols()); }
  int count(int site, int t) const { return counts[std::size_t(t) * n_sites + site]; }
  int& count(int site, int t) { return counts[std::size_t(t) * n_sites + site]; }

  /// Throws InvalidArgument on negative counts or inconsistent shapes.
  void validate() const;
};

/// How the pre-sample count Y(s, 0) feeding the first excitation term is set.
enum class InitialCounts {
  Zero,              ///< Y(s, 0) = 0 (or the explicit y_init vector when given)
  ConditionOnFirst,  ///< first observed period only conditions; it is dropped from the likelihood
};

/// Lag-1 self-excitation mu = exp(x) + eta * y_prev.
struct Excitation {
  double eta = 0.0;
  InitialCounts initial = InitialCounts::Zero;
  std::vector<int> y_init;  // per-site counts before period 1; empty means zeros

  int initial_count(int site) const { return y_init.empty() ? 0 : y_init[site]; }
};

/// Intercept followed by one coefficient per covariate column.
struct FixedEffects {
  Eigen::VectorXd beta;

  FixedEffects() : beta(Eigen::VectorXd::Zero(1)) {}
  explicit FixedEffects(Eigen::VectorXd b) : beta(std::move(b)) {}
  double intercept() const { return beta[0]; }
};

/// Upper clamp on the latent coordinate inside exp().
inline constexpr double kMaxLinearPredictor = 50.0;

/// Number of times the exp() guard has fired in this process.
long exp_clamp_count();

/// exp(x) + eta * y_prev with x clamped to kMaxLinearPredictor.
double mean_function(double x, double eta, int y_prev);

/// log Poisson(y; exp(x) + eta * y_prev), including -log y!.
double log_density(double x, int y, int y_prev, double eta);

struct LoglikDerivs {
  double d1 = 0.0;
  double d2 = 0.0;
};

/// First and second derivative of log_density in x.
LoglikDerivs loglik_derivs(double x, int y, int y_prev, double eta);

/// Pre-sample aware lagged count for cell (site, t).
int lagged_count(const ObservationPanel& panel, const Excitation& exc, int site, int t);

/// Whether the cell contributes to the likelihood under the initial-count rule.
inline bool cell_in_likelihood(const Excitation& exc, int t) {
  return !(exc.initial == InitialCounts::ConditionOnFirst && t == 0);
}

/// beta0 + Z(s)^T beta + X(s, t) per cell.
Eigen::VectorXd linear_predictor(const ObservationPanel& panel, const LatentField& field,
                                 const FixedEffects& fe);

/// sum over cells of log Poisson(Y; exp(lambda) + eta * Y_prev).
double loglik(const ObservationPanel& panel, const LatentField& field, const FixedEffects& fe,
              const Excitation& exc);

struct TaylorCoefficients {
  Eigen::VectorXd b_star;     ///< d1 - x0 * d2 per cell
  Eigen::VectorXd curvature;  ///< -d2 per cell (unfloored)
};

/// Second-order expansion of the data log density about the latent point mu0.
TaylorCoefficients taylor_coefficients(const ObservationPanel& panel, const FixedEffects& fe,
                                       const Excitation& exc, const LatentField& mu0);

/// Sequentially draws Y(s, t) ~ Poisson(exp(beta0 + Z^T beta + X) + eta * Y(s, t-1)).
template <class Rng>
ObservationPanel simulate_counts(const LatentField& field, const FixedEffects& fe,
                                 const Eigen::MatrixXd& covariates, const Excitation& exc, Rng& rng) {
  if (covariates.rows() != field.n_sites || fe.beta.size() != covariates.cols() + 1) {
    throw std::invalid_argument("simulate_counts: covariate/fixed-effect dimensions disagree");
  }
  ObservationPanel panel(field.n_sites, field.n_time);
  panel.covariates = covariates;
  for (int c = 0; c < covariates.cols(); ++c) panel.covariate_names.push_back("z" + std::to_string(c + 1));
  const Eigen::VectorXd site_offset =
      Eigen::VectorXd::Constant(field.n_sites, fe.beta[0]) + covariates * fe.beta.tail(covariates.cols());
  for (int t = 0; t < field.n_time; ++t) {
    for (int s = 0; s < field.n_sites; ++s) {
      const int prev = t == 0 ? exc.initial_count(s) : panel.count(s, t - 1);
      const double mu = mean_function(site_offset[s] + field(s, t), exc.eta, prev);
      std::poisson_distribution<int> pois(std::min(mu, 1e9));
      panel.count(s, t) = pois(rng);
    }
  }
  return panel;
}

}  // namespace sestm
