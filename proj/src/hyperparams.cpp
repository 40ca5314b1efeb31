#include "sestm/hyperparams.hpp"

#include <cmath>
#include <numbers>

#include "sestm/errors.hpp"

namespace sestm {

std::string to_string(ProcessKind kind) { return kind == ProcessKind::Scse ? "scse" : "rdse"; }

ProcessKind parse_process_kind(const std::string& s) {
  if (s == "scse") return ProcessKind::Scse;
  if (s == "rdse") return ProcessKind::Rdse;
  throw InvalidArgument("unknown model '" + s + "' (expected scse or rdse)");
}

double logit_scaled(double x, double lo, double hi) { return std::log((x - lo) / (hi - x)); }

double inv_logit_scaled(double z, double lo, double hi) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return lo + (hi - lo) / (1.0 + e);
  }
  const double e = std::exp(z);
  return lo + (hi - lo) * e / (1.0 + e);
}

namespace {

// log of d/dz [lo + (hi - lo) sigmoid(z)] / (hi - lo) = log sigmoid(z) (1 - sigmoid(z))
double log_logistic_density(double z) { return -std::abs(z) - 2.0 * std::log1p(std::exp(-std::abs(z))); }

}  // namespace

ParamLayout::ParamLayout(const ModelSpec& spec, Theta1Bounds theta1_bounds)
    : spec_(spec), bounds_(theta1_bounds) {
  names_.push_back("sigma2");
  if (spec.process == ProcessKind::Scse) {
    names_.push_back("theta1");
  } else {
    names_.push_back("alpha");
    names_.push_back("kappa");
  }
  if (spec.estimates_eta()) names_.push_back("eta");
  if (!(spec.priors.sigma_scale > 0.0)) throw InvalidArgument("Half-Cauchy scale must be positive");
  if (!(spec.priors.beta_variance > 0.0)) throw InvalidArgument("fixed-effect prior variance must be positive");
  if (spec.excitation && spec.fixed_eta && !(*spec.fixed_eta >= 0.0 && *spec.fixed_eta < 1.0)) {
    throw ParameterSpaceError("fixed eta must lie in [0, 1)");
  }
}

int ParamLayout::index_of(const std::string& name) const {
  for (int i = 0; i < dimension(); ++i) {
    if (names_[i] == name) return i;
  }
  return -1;
}

double ParamLayout::value_of(const HyperParams& h, const std::string& name) {
  if (name == "sigma2") return h.sigma2;
  if (name == "theta1") return h.theta1;
  if (name == "alpha") return h.alpha;
  if (name == "kappa") return h.kappa;
  if (name == "eta") return h.eta;
  throw InvalidArgument("unknown hyperparameter '" + name + "'");
}

void ParamLayout::validate(const HyperParams& h) const {
  if (spec_.process == ProcessKind::Scse) {
    sestm::validate(h.scse(), bounds_);
  } else {
    sestm::validate(h.rdse());
  }
  if (spec_.estimates_eta() && !(h.eta > kParameterGuard && h.eta < 1.0 - kParameterGuard)) {
    throw ParameterSpaceError("eta = " + std::to_string(h.eta) + " outside (0, 1)");
  }
}

Eigen::VectorXd ParamLayout::to_unconstrained(const HyperParams& h) const {
  validate(h);
  Eigen::VectorXd phi(dimension());
  int i = 0;
  phi[i++] = std::log(h.sigma2);
  if (spec_.process == ProcessKind::Scse) {
    phi[i++] = logit_scaled(h.theta1, bounds_.lower, bounds_.upper);
  } else {
    phi[i++] = logit_scaled(h.alpha, 0.0, 1.0);
    phi[i++] = logit_scaled(h.kappa, kappa_lower(h.alpha), kappa_upper(h.alpha));
  }
  if (spec_.estimates_eta()) phi[i++] = logit_scaled(h.eta, 0.0, 1.0);
  return phi;
}

HyperParams ParamLayout::from_unconstrained(const Eigen::VectorXd& phi) const {
  if (phi.size() != dimension()) throw InvalidArgument("hyperparameter vector has wrong length");
  HyperParams h;
  int i = 0;
  h.sigma2 = std::exp(phi[i++]);
  if (spec_.process == ProcessKind::Scse) {
    h.theta1 = inv_logit_scaled(phi[i++], bounds_.lower, bounds_.upper);
  } else {
    h.alpha = inv_logit_scaled(phi[i++], 0.0, 1.0);
    h.kappa = inv_logit_scaled(phi[i++], kappa_lower(h.alpha), kappa_upper(h.alpha));
  }
  h.eta = spec_.estimates_eta() ? inv_logit_scaled(phi[i++], 0.0, 1.0) : spec_.eta_when_fixed();
  return h;
}

double ParamLayout::log_prior(const Eigen::VectorXd& phi) const {
  if (phi.size() != dimension()) throw InvalidArgument("hyperparameter vector has wrong length");
  for (Eigen::Index k = 0; k < phi.size(); ++k) {
    if (!std::isfinite(phi[k])) return -std::numeric_limits<double>::infinity();
  }
  // sigma ~ Half-Cauchy(A): log(2 / (pi A)) - log(1 + sigma^2 / A^2), with
  // |d sigma / d log sigma2| = sigma / 2.
  const double a = spec_.priors.sigma_scale;
  const double sigma2 = std::exp(phi[0]);
  double lp = std::log(2.0 / (std::numbers::pi * a)) - std::log1p(sigma2 / (a * a)) + 0.5 * phi[0] - std::log(2.0);
  // Uniform priors on bounded coordinates: density 1/(hi - lo) times the
  // scaled-logit Jacobian (hi - lo) s (1 - s).
  for (Eigen::Index k = 1; k < phi.size(); ++k) lp += log_logistic_density(phi[k]);
  return lp;
}

}  // namespace sestm
