#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sestm/laplace.hpp"
#include "sestm/theta_grid.hpp"

namespace sestm {

/// n - trace(Q Q*^{-1}). Both matrices in full symmetric storage.
double effective_params(const SparseMatrix& q, const SparseMatrix& q_star);
double effective_params(const PrecisionOperator& q, const PrecisionOperator& q_star);

struct FitSummary {
  HyperParams theta_star;
  Eigen::VectorXd x_hat;  // latent mode (field then fixed effects) at theta*
  double p_eff = 0.0;
  double deviance_at_mode = 0.0;
  double dic = 0.0;
};

/// Deviance at the latent mode for theta* (the grid centre) plus twice the
/// grid-averaged effective number of parameters.
FitSummary dic(const LaplaceModel& model, const ThetaGrid& grid);

using Statistic = std::function<double(const ObservationPanel&)>;

/// Named test statistics; `max_count`, `zero_count` and `total_count` are built in.
class StatisticRegistry {
 public:
  StatisticRegistry();
  void add(const std::string& name, Statistic fn);
  const Statistic& get(const std::string& name) const;
  bool contains(const std::string& name) const { return stats_.count(name) > 0; }
  std::vector<std::string> names() const;

 private:
  std::map<std::string, Statistic> stats_;
};

enum class Replication {
  Posterior,  ///< latent field from the Gaussian approximation to pi(X | theta_m, Y)
  Prior,      ///< latent field from pi(X | theta_m); fixed effects at their mode
};

struct PPPSettings {
  int n_rep = 500;
  std::uint64_t seed = 1;
  Replication replication = Replication::Posterior;
  /// Exact single-site Metropolis-Hastings sweeps applied to each Gaussian
  /// latent draw under pi(X | theta_m, Y); 0 keeps the Gaussian draw.
  int refine_sweeps = 50;
  int workers = 0;
};

struct PPPResult {
  std::string statistic;
  double observed = 0.0;
  std::vector<double> replicates;
  double p_value = 0.0;
};

/// Draws one replicate panel per m; all statistics are evaluated on the same
/// replicates.
std::vector<PPPResult> posterior_predictive_pvalues(const LaplaceModel& model, const ThetaGrid& grid,
                                                    const std::vector<std::string>& statistics,
                                                    const PPPSettings& settings,
                                                    const StatisticRegistry& registry = StatisticRegistry());
PPPResult posterior_predictive_pvalue(const LaplaceModel& model, const ThetaGrid& grid, const std::string& statistic,
                                      const PPPSettings& settings,
                                      const StatisticRegistry& registry = StatisticRegistry());

/// Single-site Metropolis-Hastings sweeps over the field coordinates of u
/// targeting exp(-u^T P u / 2 + sum_k value_k). Each proposal is the local
/// Gaussian fitted at the conditional mode. Returns the acceptance rate.
double refine_latent_draw(const SparseMatrix& prior, const LatentStructure& structure, const CellLikelihood& term,
                          Eigen::VectorXd& u, int sweeps, std::mt19937_64& rng);

/// p = #{T(Y*_m) > T(Y)} / n_rep.
double exceedance_fraction(double observed, const std::vector<double>& replicates);

struct AssessmentRow {
  std::string model;
  double dic = 0.0;
  double p_eff = 0.0;
  double deviance = 0.0;
  double ppp_max = 0.0;
  double ppp_zeros = 0.0;
};

/// `model,dic,p_eff,deviance,ppp_max,ppp_zeros` with 17 significant digits.
void write_assessment_report(std::ostream& out, const std::vector<AssessmentRow>& rows);
std::vector<AssessmentRow> read_assessment_report(std::istream& in);

}  // namespace sestm
