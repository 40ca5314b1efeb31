#include "sestm/likelihood.hpp"

#include <cmath>

#include "sestm/errors.hpp"

namespace sestm {

namespace {
std::atomic<long> g_exp_clamps{0};

inline double guarded_exp(double x) {
  if (x > kMaxLinearPredictor) {
    g_exp_clamps.fetch_add(1, std::memory_order_relaxed);
    x = kMaxLinearPredictor;
  }
  return std::exp(x);
}
}  // namespace

long exp_clamp_count() { return g_exp_clamps.load(); }

void ObservationPanel::validate() const {
  if (n_sites <= 0 || n_time <= 0) throw InvalidArgument("panel must have sites and times");
  if (counts.size() != std::size_t(n_sites) * n_time) throw InvalidArgument("panel count vector has wrong length");
  if (covariates.rows() != n_sites) throw InvalidArgument("covariate rows must equal n_sites");
  if (int(covariate_names.size()) != covariates.cols()) {
    throw InvalidArgument("covariate names do not match covariate columns");
  }
  for (int c : counts) {
    if (c < 0) throw InvalidArgument("negative count in panel");
  }
}

double mean_function(double x, double eta, int y_prev) { return guarded_exp(x) + eta * y_prev; }

double log_density(double x, int y, int y_prev, double eta) {
  const double mu = mean_function(x, eta, y_prev);
  const double ylogmu = y == 0 ? 0.0 : y * std::log(mu);
  return ylogmu - mu - std::lgamma(y + 1.0);
}

LoglikDerivs loglik_derivs(double x, int y, int y_prev, double eta) {
  if (x > kMaxLinearPredictor) return {0.0, 0.0};
  const double a = std::exp(x);
  const double c = eta * y_prev;
  const double mu = a + c;
  // d/dx [y log(a + c) - a] = a (y/mu - 1)
  // d2/dx2 = y a c / mu^2 - a
  const double ratio = y / mu;
  return {a * (ratio - 1.0), ratio * a * c / mu - a};
}

int lagged_count(const ObservationPanel& panel, const Excitation& exc, int site, int t) {
  return t == 0 ? exc.initial_count(site) : panel.count(site, t - 1);
}

Eigen::VectorXd linear_predictor(const ObservationPanel& panel, const LatentField& field,
                                 const FixedEffects& fe) {
  if (field.n_sites != panel.n_sites || field.n_time != panel.n_time) {
    throw InvalidArgument("latent field and panel dimensions differ");
  }
  if (fe.beta.size() != panel.n_covariates() + 1) {
    throw InvalidArgument("fixed effects length must be 1 + number of covariates");
  }
  Eigen::VectorXd site_offset = Eigen::VectorXd::Constant(panel.n_sites, fe.beta[0]);
  if (panel.n_covariates() > 0) site_offset += panel.covariates * fe.beta.tail(panel.n_covariates());
  Eigen::VectorXd lambda = field.values;
  for (int t = 0; t < panel.n_time; ++t) {
    lambda.segment(Eigen::Index(t) * panel.n_sites, panel.n_sites) += site_offset;
  }
  return lambda;
}

double loglik(const ObservationPanel& panel, const LatentField& field, const FixedEffects& fe,
              const Excitation& exc) {
  const Eigen::VectorXd lambda = linear_predictor(panel, field, fe);
  double acc = 0.0;
  for (int t = 0; t < panel.n_time; ++t) {
    if (!cell_in_likelihood(exc, t)) continue;
    for (int s = 0; s < panel.n_sites; ++s) {
      acc += log_density(lambda[Eigen::Index(t) * panel.n_sites + s], panel.count(s, t),
                         lagged_count(panel, exc, s, t), exc.eta);
    }
  }
  return acc;
}

TaylorCoefficients taylor_coefficients(const ObservationPanel& panel, const FixedEffects& fe,
                                       const Excitation& exc, const LatentField& mu0) {
  const Eigen::VectorXd lambda = linear_predictor(panel, mu0, fe);
  TaylorCoefficients out{Eigen::VectorXd::Zero(lambda.size()), Eigen::VectorXd::Zero(lambda.size())};
  for (int t = 0; t < panel.n_time; ++t) {
    if (!cell_in_likelihood(exc, t)) continue;
    for (int s = 0; s < panel.n_sites; ++s) {
      const Eigen::Index k = Eigen::Index(t) * panel.n_sites + s;
      const LoglikDerivs d = loglik_derivs(lambda[k], panel.count(s, t), lagged_count(panel, exc, s, t), exc.eta);
      out.b_star[k] = d.d1 - mu0.values[k] * d.d2;
      out.curvature[k] = -d.d2;
    }
  }
  return out;
}

}  // namespace sestm
