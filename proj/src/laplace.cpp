#include "sestm/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include <Eigen/QR>

#include "sestm/errors.hpp"
#include "sestm/parallel.hpp"

namespace sestm {

Eigen::VectorXd LatentStructure::linear_predictor(const Eigen::VectorXd& u) const {
  const Eigen::Index n = n_cells();
  Eigen::VectorXd lambda = u.head(n);
  if (n_fixed() > 0) {
    const Eigen::VectorXd site_offset = design * u.tail(n_fixed());
    for (int t = 0; t < n_time; ++t) lambda.segment(Eigen::Index(t) * n_sites, n_sites) += site_offset;
  }
  return lambda;
}

Eigen::VectorXd LatentStructure::pullback(const Eigen::VectorXd& cell_values) const {
  const Eigen::Index n = n_cells();
  Eigen::VectorXd out(dimension());
  out.head(n) = cell_values;
  if (n_fixed() > 0) {
    Eigen::VectorXd per_site = Eigen::VectorXd::Zero(n_sites);
    for (int t = 0; t < n_time; ++t) per_site += cell_values.segment(Eigen::Index(t) * n_sites, n_sites);
    out.tail(n_fixed()) = design.transpose() * per_site;
  }
  return out;
}

LatentField ModeResult::field() const {
  return LatentField(n_sites, n_time, u.head(Eigen::Index(n_sites) * n_time));
}

Eigen::VectorXd ModeResult::beta() const { return u.tail(u.size() - Eigen::Index(n_sites) * n_time); }

namespace {

using Triplet = Eigen::Triplet<double>;

constexpr double kObjectiveSlack = 1e-12;

struct Pin {
  Eigen::Index coordinate;
  double value;
};

class InnerSolver {
 public:
  InnerSolver(const SparseMatrix& prior, const LatentStructure& st, const CellLikelihood& term,
              const SolverSettings& settings, std::optional<Pin> pin)
      : prior_(prior), st_(st), term_(term), settings_(settings), pin_(pin) {
    if (prior.rows() != st.dimension() || prior.cols() != st.dimension()) {
      throw InvalidArgument("prior precision dimension does not match the latent structure");
    }
    prior_lower_ = prior.triangularView<Eigen::Lower>();
  }

  double objective(const Eigen::VectorXd& u, double* data_out = nullptr, double* quad_out = nullptr) const {
    const Eigen::VectorXd lambda = st_.linear_predictor(u);
    double data = 0.0;
    for (Eigen::Index k = 0; k < lambda.size(); ++k) data += term_(k, lambda[k]).value;
    const double quad = u.dot(prior_ * u);
    if (data_out) *data_out = data;
    if (quad_out) *quad_out = quad;
    return data - 0.5 * quad;
  }

  void derivatives(const Eigen::VectorXd& u, Eigen::VectorXd& lambda, Eigen::VectorXd& d1, Eigen::VectorXd& d2) const {
    lambda = st_.linear_predictor(u);
    d1.resize(lambda.size());
    d2.resize(lambda.size());
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
      const CellTerm c = term_(k, lambda[k]);
      d1[k] = c.d1;
      d2[k] = c.d2;
    }
  }

  // Lower triangle of P + J^T W J.
  SparseMatrix assemble(const Eigen::VectorXd& w) const {
    const Eigen::Index n = st_.n_cells();
    const Eigen::Index p = st_.n_fixed();
    std::vector<Triplet> trips;
    trips.reserve(std::size_t(n * (1 + p) + p * p));
    for (Eigen::Index k = 0; k < n; ++k) trips.emplace_back(k, k, w[k]);
    if (p > 0) {
      for (Eigen::Index c = 0; c < p; ++c) {
        for (Eigen::Index k = 0; k < n; ++k) {
          trips.emplace_back(n + c, k, w[k] * st_.design(k % st_.n_sites, c));
        }
      }
      Eigen::VectorXd w_site = Eigen::VectorXd::Zero(st_.n_sites);
      for (Eigen::Index k = 0; k < n; ++k) w_site[k % st_.n_sites] += w[k];
      const Eigen::MatrixXd block = st_.design.transpose() * w_site.asDiagonal() * st_.design;
      for (Eigen::Index c = 0; c < p; ++c)
        for (Eigen::Index d = 0; d <= c; ++d) trips.emplace_back(n + c, n + d, block(c, d));
    }
    SparseMatrix coupling(st_.dimension(), st_.dimension());
    coupling.setFromTriplets(trips.begin(), trips.end());
    SparseMatrix q = prior_lower_ + coupling;
    return q;
  }

  // Replaces row/column `pin` of a lower-triangular matrix by the unit vector
  // and moves the pinned value into the right-hand side.
  void apply_pin(SparseMatrix& q, Eigen::VectorXd& rhs) const {
    const Eigen::Index i = pin_->coordinate;
    const double v = pin_->value;
    for (Eigen::Index col = 0; col < q.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(q, col); it; ++it) {
        const Eigen::Index r = it.row();
        if (r != i && col != i) continue;
        if (r == col) {
          it.valueRef() = 1.0;
        } else {
          rhs[r == i ? col : r] -= it.value() * v;
          it.valueRef() = 0.0;
        }
      }
    }
    rhs[i] = v;
  }

  Eigen::VectorXd curvature(const Eigen::VectorXd& d2) const {
    return (-d2).cwiseMax(settings_.curvature_floor);
  }

  ModeResult run(Eigen::VectorXd u) const {
    if (u.size() != st_.dimension()) throw InvalidArgument("inner solver: initial vector has wrong length");
    if (pin_) u[pin_->coordinate] = pin_->value;
    ModeResult res;
    res.n_sites = st_.n_sites;
    res.n_time = st_.n_time;
    double f = objective(u);
    res.objective_path.push_back(f);
    Eigen::VectorXd lambda, d1, d2;
    for (res.iterations = 0; res.iterations < settings_.inner_max_iterations;) {
      derivatives(u, lambda, d1, d2);
      const Eigen::VectorXd w = curvature(d2);
      Eigen::VectorXd rhs = st_.pullback(d1 + w.cwiseProduct(lambda));
      SparseMatrix q = assemble(w);
      if (pin_) apply_pin(q, rhs);
      const SparseCholesky chol = factor(q);
      const Eigen::VectorXd step = chol.solve(rhs) - u;
      ++res.iterations;

      const double full = step.cwiseAbs().maxCoeff();
      // Slack at the level of summation roundoff in the objective.
      const double slack = kObjectiveSlack * (1.0 + std::abs(f));
      double t = 1.0;
      bool accepted = false;
      Eigen::VectorXd u_try;
      double f_try = 0.0;
      for (int h = 0; h < 60; ++h, t *= 0.5) {
        u_try = u + t * step;
        f_try = objective(u_try);
        if (std::isfinite(f_try) && f_try >= f - slack) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        res.converged = full < std::sqrt(settings_.inner_tolerance);
        break;
      }
      u = std::move(u_try);
      f = f_try;
      res.objective_path.push_back(f);
      if (t == 1.0 && full < settings_.inner_tolerance) {
        res.converged = true;
        break;
      }
    }
    finalize(u, res);
    return res;
  }

  SparseCholesky factor(const SparseMatrix& q) const {
    try {
      return SparseCholesky(q);
    } catch (const NumericalError&) {
      throw NumericalError("indefinite updated precision Q*: Cholesky failed");
    }
  }

  void finalize(const Eigen::VectorXd& u, ModeResult& res) const {
    Eigen::VectorXd lambda, d1, d2;
    derivatives(u, lambda, d1, d2);
    const Eigen::VectorXd w = curvature(d2);
    SparseMatrix q = assemble(w);
    if (pin_) {
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(u.size());
      apply_pin(q, rhs);
    }
    auto chol = std::make_shared<const SparseCholesky>(factor(q));
    Eigen::VectorXd grad = st_.pullback(d1) - prior_ * u;
    if (pin_) grad[pin_->coordinate] = 0.0;
    res.u = u;
    res.q_star = std::move(q);
    res.log_det_q_star = chol->log_determinant();
    res.q_star_chol = std::move(chol);
    res.gradient_norm = grad.cwiseAbs().maxCoeff();
    objective(u, &res.data_loglik, &res.quadratic_form);
  }

 private:
  const SparseMatrix& prior_;
  const LatentStructure& st_;
  const CellLikelihood& term_;
  const SolverSettings& settings_;
  std::optional<Pin> pin_;
  SparseMatrix prior_lower_;
};

}  // namespace

ModeResult solve_mode(const SparseMatrix& prior, const LatentStructure& structure, const CellLikelihood& term,
                      const Eigen::VectorXd& u_init, const SolverSettings& settings) {
  return InnerSolver(prior, structure, term, settings, std::nullopt).run(u_init);
}

double pinned_laplace_log_density(const SparseMatrix& prior, const LatentStructure& structure,
                                  const CellLikelihood& term, Eigen::Index coordinate, double value,
                                  const Eigen::VectorXd& u_init, const SolverSettings& settings) {
  if (coordinate < 0 || coordinate >= structure.dimension()) throw InvalidArgument("pinned coordinate out of range");
  const ModeResult r = InnerSolver(prior, structure, term, settings, Pin{coordinate, value}).run(u_init);
  return r.data_loglik - 0.5 * r.quadratic_form - 0.5 * r.log_det_q_star;
}

// ---------------------------------------------------------------------------

namespace {

Theta1Bounds bounds_for(const SpatialGraph& g, const ModelSpec& spec) {
  if (spec.process == ProcessKind::Scse) return theta1_bounds(g);
  return {-1.0, 1.0};  // unused by the reaction-diffusion layout
}

}  // namespace

LaplaceModel::LaplaceModel(SpatialGraph graph, ObservationPanel panel, ModelSpec spec, SolverSettings settings)
    : graph_(std::move(graph)),
      panel_(std::move(panel)),
      spec_(std::move(spec)),
      settings_(settings),
      bounds_(bounds_for(graph_, spec_)),
      layout_(spec_, bounds_) {
  panel_.validate();
  if (panel_.n_sites != graph_.n_sites()) {
    throw InvalidArgument("panel has " + std::to_string(panel_.n_sites) + " sites but the graph has " +
                          std::to_string(graph_.n_sites()));
  }
  if (spec_.process == ProcessKind::Scse) {
    adjacency_eigs_ = adjacency_eigenvalues(graph_);
  } else {
    if (graph_.has_isolated_site()) throw InvalidArgument("reaction-diffusion model needs every site to have a neighbor");
    if (panel_.n_time < 2) throw InvalidArgument("reaction-diffusion model needs at least 2 periods");
  }
  structure_.n_sites = panel_.n_sites;
  structure_.n_time = panel_.n_time;
  structure_.design.resize(panel_.n_sites, 1 + panel_.n_covariates());
  structure_.design.col(0).setOnes();
  if (panel_.n_covariates() > 0) structure_.design.rightCols(panel_.n_covariates()) = panel_.covariates;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(structure_.design);
  if (qr.rank() < structure_.design.cols()) {
    throw InvalidArgument("singular fixed-effect augmentation: intercept and covariates are collinear");
  }
}

Excitation LaplaceModel::excitation(const HyperParams& h) const {
  Excitation exc;
  exc.eta = spec_.estimates_eta() ? h.eta : spec_.eta_when_fixed();
  exc.initial = spec_.initial;
  return exc;
}

PriorPrecision LaplaceModel::prior_precision(const HyperParams& h) const {
  const int n_time = panel_.n_time;
  PrecisionOperator q;
  double log_det = 0.0;
  if (spec_.process == ProcessKind::Scse) {
    q = scse_precision(graph_, h.scse(), n_time, bounds_);
    log_det = scse_log_determinant(adjacency_eigs_, h.scse(), n_time);
  } else {
    q = rdse_precision(graph_, h.rdse(), n_time, spec_.boundary);
    log_det = rdse_log_determinant(graph_, h.rdse(), n_time, spec_.boundary);
  }
  const Eigen::Index n = q.dimension();
  const Eigen::Index p = structure_.n_fixed();
  const double beta_prec = 1.0 / spec_.priors.beta_variance;
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(q.matrix.nonZeros() + p));
  for (Eigen::Index col = 0; col < q.matrix.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(q.matrix, col); it; ++it) trips.emplace_back(it.row(), col, it.value());
  }
  for (Eigen::Index c = 0; c < p; ++c) trips.emplace_back(n + c, n + c, beta_prec);
  PriorPrecision out;
  out.matrix.resize(n + p, n + p);
  out.matrix.setFromTriplets(trips.begin(), trips.end());
  out.log_det = log_det + double(p) * std::log(beta_prec);
  return out;
}

CellLikelihood LaplaceModel::cell_likelihood(const HyperParams& h) const {
  const Excitation exc = excitation(h);
  const ObservationPanel* panel = &panel_;
  return [panel, exc](Eigen::Index k, double lambda) -> CellTerm {
    const int s = int(k % panel->n_sites);
    const int t = int(k / panel->n_sites);
    if (!cell_in_likelihood(exc, t)) return {};
    const int y = panel->count(s, t);
    const int y_prev = lagged_count(*panel, exc, s, t);
    const LoglikDerivs d = loglik_derivs(lambda, y, y_prev, exc.eta);
    return {log_density(lambda, y, y_prev, exc.eta), d.d1, d.d2};
  };
}

Eigen::VectorXd LaplaceModel::default_latent_init() const {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(structure_.dimension());
  double total = 0.0;
  for (int c : panel_.counts) total += c;
  const double mean = total / double(panel_.counts.size());
  u[structure_.n_cells()] = std::log(mean + 0.1);
  return u;
}

ModeResult LaplaceModel::gaussian_approx(const HyperParams& h, const Eigen::VectorXd* u_init) const {
  layout_.validate(h);
  const PriorPrecision prior = prior_precision(h);
  const CellLikelihood term = cell_likelihood(h);
  const Eigen::VectorXd init = u_init ? *u_init : default_latent_init();
  try {
    return solve_mode(prior.matrix, structure_, term, init, settings_);
  } catch (const NumericalError& e) {
    std::ostringstream msg;
    msg << e.what() << " at sigma2=" << h.sigma2;
    if (spec_.process == ProcessKind::Scse) msg << " theta1=" << h.theta1;
    else msg << " alpha=" << h.alpha << " kappa=" << h.kappa;
    msg << " eta=" << excitation(h).eta;
    throw NumericalError(msg.str());
  }
}

LogPosteriorTerms LaplaceModel::log_posterior_terms(const Eigen::VectorXd& phi, const Eigen::VectorXd* u_init) const {
  LogPosteriorTerms out;
  if (phi.size() != layout_.dimension() || !phi.allFinite()) return out;
  const HyperParams h = layout_.from_unconstrained(phi);
  try {
    layout_.validate(h);
  } catch (const ParameterSpaceError&) {
    return out;
  }
  PriorPrecision prior;
  try {
    prior = prior_precision(h);
  } catch (const NumericalError&) {
    return out;  // e.g. printed boundary block not positive definite
  }
  const CellLikelihood term = cell_likelihood(h);
  const Eigen::VectorXd init = u_init ? *u_init : default_latent_init();
  auto mode = std::make_shared<ModeResult>(solve_mode(prior.matrix, structure_, term, init, settings_));
  out.data_loglik = mode->data_loglik;
  out.half_log_det_prior = 0.5 * prior.log_det;
  out.half_quadratic = 0.5 * mode->quadratic_form;
  out.half_log_det_q_star = 0.5 * mode->log_det_q_star;
  out.log_prior = layout_.log_prior(phi);
  out.value = out.data_loglik + out.half_log_det_prior - out.half_quadratic - out.half_log_det_q_star + out.log_prior;
  out.mode = std::move(mode);
  return out;
}

double LaplaceModel::log_posterior_theta(const Eigen::VectorXd& phi, const Eigen::VectorXd* u_init) const {
  return log_posterior_terms(phi, u_init).value;
}

double LaplaceModel::effective_params(const HyperParams& h, const ModeResult& mode) const {
  const PriorPrecision prior = prior_precision(h);
  return double(prior.matrix.rows()) - trace_product_inverse(prior.matrix, *mode.q_star_chol);
}

HyperParams LaplaceModel::default_start() const {
  HyperParams h;
  h.sigma2 = 1.0;
  h.theta1 = 0.5 * (bounds_.lower + bounds_.upper);
  h.alpha = 0.5;
  h.kappa = 0.1;
  h.eta = spec_.estimates_eta() ? 0.1 : spec_.eta_when_fixed();
  return h;
}

// ---------------------------------------------------------------------------

PosteriorEvaluator::PosteriorEvaluator(const LaplaceModel& model)
    : model_(model), anchor_(model.default_latent_init()) {}

std::vector<LogPosteriorTerms> PosteriorEvaluator::evaluate(const std::vector<Eigen::VectorXd>& phis) const {
  std::vector<LogPosteriorTerms> out(phis.size());
  parallel_for(
      phis.size(), [&](std::size_t i) { out[i] = model_.log_posterior_terms(phis[i], &anchor_); },
      model_.settings().workers);
  return out;
}

ThetaMode find_theta_mode(const LaplaceModel& model, const Eigen::VectorXd& phi_init) {
  PosteriorEvaluator evaluator(model);
  std::vector<std::pair<Eigen::VectorXd, std::shared_ptr<const ModeResult>>> last_batch;
  BatchObjective objective = [&](const std::vector<Eigen::VectorXd>& pts) {
    const auto terms = evaluator.evaluate(pts);
    last_batch.clear();
    std::vector<double> values(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      values[i] = terms[i].value;
      last_batch.emplace_back(pts[i], terms[i].mode);
    }
    return values;
  };
  std::shared_ptr<const ModeResult> accepted_mode;
  auto on_accept = [&](const Eigen::VectorXd& x) {
    for (const auto& [phi, mode] : last_batch) {
      if (mode && phi == x) {
        evaluator.set_anchor(mode->u);
        accepted_mode = mode;
        return;
      }
    }
  };
  OptimizerSettings os;
  os.gradient_tolerance = model.settings().outer_gradient_tolerance;
  os.fd_step = model.settings().fd_step;
  os.max_iterations = model.settings().outer_max_iterations;
  const OptimizeResult r = maximize(objective, phi_init, os, on_accept);

  ThetaMode out;
  out.phi = r.x;
  out.theta = model.layout().from_unconstrained(r.x);
  out.hessian = r.hessian;
  out.log_posterior = r.value;
  out.iterations = r.iterations;
  out.evaluations = r.evaluations;
  out.converged = r.converged;
  out.trace = r.trace;
  // Re-solve at the mode from the accepted anchor.
  const LogPosteriorTerms at_mode = model.log_posterior_terms(r.x, &evaluator.anchor());
  out.latent_mode = at_mode.mode;
  out.log_posterior = at_mode.value;
  return out;
}

LatentMarginal latent_marginals_gaussian(const ModeResult& mode) {
  if (!mode.q_star_chol) throw InvalidArgument("mode result carries no factorization");
  LatentMarginal m;
  m.mean = mode.u;
  m.sd = mode.q_star_chol->inverse_diagonal().cwiseSqrt();
  return m;
}

NestedMarginal latent_marginal_nested(const SparseMatrix& prior, const LatentStructure& structure,
                                      const CellLikelihood& term, const SolverSettings& settings,
                                      Eigen::Index coordinate, std::vector<double> values) {
  if (coordinate < 0 || coordinate >= structure.dimension()) throw InvalidArgument("latent coordinate out of range");
  const ModeResult base = solve_mode(prior, structure, term, Eigen::VectorXd::Zero(structure.dimension()), settings);
  if (!base.converged) throw ConvergenceError("nested marginal: baseline mode did not converge");
  if (values.empty()) {
    const double mean = base.u[coordinate];
    const double sd = std::sqrt(base.q_star_chol->inverse_diagonal()[coordinate]);
    for (int i = 0; i <= 60; ++i) values.push_back(mean + sd * (-5.0 + i * (10.0 / 60.0)));
  }
  if (!std::is_sorted(values.begin(), values.end()) || values.size() < 3) {
    throw InvalidArgument("nested marginal needs at least 3 ascending grid values");
  }
  std::vector<double> logd(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    logd[i] = pinned_laplace_log_density(prior, structure, term, coordinate, values[i], base.u, settings);
  }
  const double top = *std::max_element(logd.begin(), logd.end());
  NestedMarginal out;
  out.values = values;
  out.density.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.density[i] = std::exp(logd[i] - top);
  double area = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    area += 0.5 * (out.density[i] + out.density[i - 1]) * (values[i] - values[i - 1]);
  }
  for (double& d : out.density) d /= area;
  return out;
}

NestedMarginal latent_marginal_nested(const LaplaceModel& model, const HyperParams& h, Eigen::Index coordinate,
                                      std::vector<double> values) {
  const PriorPrecision prior = model.prior_precision(h);
  return latent_marginal_nested(prior.matrix, model.structure(), model.cell_likelihood(h), model.settings(),
                                coordinate, std::move(values));
}

Interval fixed_effect_interval(const LaplaceModel& model, const HyperParams& h, int effect_index,
                               const ModeResult* mode) {
  const Eigen::Index p = model.structure().n_fixed();
  if (effect_index < 0 || effect_index >= p) {
    throw InvalidArgument("fixed effect index " + std::to_string(effect_index) + " out of range");
  }
  ModeResult local;
  if (!mode) {
    local = model.gaussian_approx(h);
    mode = &local;
  }
  const Eigen::Index k = model.structure().n_cells() + effect_index;
  // Column solve against e_k gives the exact marginal variance of beta_k.
  Eigen::VectorXd e = Eigen::VectorXd::Zero(mode->u.size());
  e[k] = 1.0;
  const double var = mode->q_star_chol->solve(e)[k];
  const double sd = std::sqrt(var);
  return {mode->u[k] - 1.959963984540054 * sd, mode->u[k] + 1.959963984540054 * sd};
}

}  // namespace sestm
