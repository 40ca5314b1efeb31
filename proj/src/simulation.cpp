#include "sestm/simulation.hpp"

#include <random>

#include "sestm/errors.hpp"

namespace sestm {

namespace {

ModelSpec torus_spec(ProcessKind kind, BoundaryAssembly boundary) {
  ModelSpec spec;
  spec.process = kind;
  spec.excitation = true;
  spec.boundary = boundary;
  return spec;
}

}  // namespace

SimulatedStudy generate_custom(const ModelSpec& spec, const SpatialGraph& g, int n_time,
                               const GeneratorParams& params, std::uint64_t seed, std::string name) {
  if (n_time < 1) throw InvalidArgument("n_time must be positive");
  const int n_cov = static_cast<int>(params.beta.size()) - 1;
  if (n_cov < 0) throw InvalidArgument("beta needs an intercept");
  Eigen::MatrixXd cov = params.covariates;
  if (cov.size() == 0) cov.resize(g.n_sites(), 0);
  if (cov.rows() != g.n_sites() || cov.cols() != n_cov) {
    throw InvalidArgument("covariates must have one row per site and one column per slope");
  }
  if (!params.y_init.empty() && static_cast<int>(params.y_init.size()) != g.n_sites()) {
    throw InvalidArgument("y_init must have one entry per site");
  }

  Excitation exc;
  exc.eta = spec.estimates_eta() ? params.theta.eta : spec.eta_when_fixed();
  exc.y_init = params.y_init;
  if (exc.eta < 0.0 || exc.eta >= 1.0) throw ParameterSpaceError("eta must lie in [0, 1)");

  PrecisionOperator q;
  if (spec.process == ProcessKind::Scse) {
    q = scse_precision(g, params.theta.scse(), n_time);
  } else {
    q = rdse_precision(g, params.theta.rdse(), n_time, spec.boundary);
  }

  std::mt19937_64 rng(seed);
  SimulatedStudy out;
  out.name = std::move(name);
  out.graph = g;
  out.latent = sample_latent(q, rng);
  out.panel = simulate_counts(out.latent, FixedEffects(params.beta), cov, exc, rng);

  KeyValues& t = out.truth;
  t["study"] = out.name;
  t["seed"] = std::to_string(seed);
  t["graph_hash"] = g.hash();
  t["n_sites"] = std::to_string(g.n_sites());
  t["n_time"] = std::to_string(n_time);
  t["model"] = to_string(spec.process);
  t["excitation"] = spec.excitation ? "on" : "off";
  t["eta"] = format_exact(exc.eta);
  t["sigma2"] = format_exact(params.theta.sigma2);
  if (spec.process == ProcessKind::Scse) {
    t["theta1"] = format_exact(params.theta.theta1);
  } else {
    t["alpha"] = format_exact(params.theta.alpha);
    t["kappa"] = format_exact(params.theta.kappa);
    t["boundary"] = spec.boundary == BoundaryAssembly::Printed ? "printed" : "stationary";
  }
  for (Eigen::Index i = 0; i < params.beta.size(); ++i) t["beta" + std::to_string(i)] = format_exact(params.beta[i]);
  return out;
}

SimulatedStudy generate_scse_study(std::uint64_t seed) {
  GeneratorParams p;
  p.theta.theta1 = 0.22;
  p.theta.eta = 0.2;
  p.theta.sigma2 = 0.4;
  p.beta = Eigen::VectorXd::Constant(1, -1.0);
  return generate_custom(torus_spec(ProcessKind::Scse, BoundaryAssembly::Printed), build_torus_lattice(8, 8), 100,
                         p, seed, "scse-torus");
}

SimulatedStudy generate_rdse_study(std::uint64_t seed) {
  GeneratorParams p;
  p.theta.alpha = 0.1;
  p.theta.kappa = 0.2;
  p.theta.sigma2 = 0.25;
  p.theta.eta = 0.4;
  p.beta = Eigen::VectorXd::Zero(1);
  return generate_custom(torus_spec(ProcessKind::Rdse, BoundaryAssembly::Stationary), build_torus_lattice(8, 8), 100,
                         p, seed, "rdse-torus");
}

Eigen::MatrixXd propagate_mean(const SpatialGraph& g, const RdseParams& p, const Eigen::VectorXd& x0, int steps) {
  if (x0.size() != g.n_sites()) throw InvalidArgument("x0 must have one entry per site");
  const SparseMatrix m = rdse_propagator(g, p);
  Eigen::MatrixXd out(steps + 1, g.n_sites());
  Eigen::VectorXd x = x0;
  out.row(0) = x.transpose();
  for (int k = 1; k <= steps; ++k) {
    x = m * x;
    out.row(k) = x.transpose();
  }
  return out;
}

std::vector<std::string> study_names() { return {"scse-torus", "rdse-torus"}; }

SimulatedStudy generate_study(const std::string& name, std::uint64_t seed) {
  if (name == "scse-torus") return generate_scse_study(seed);
  if (name == "rdse-torus") return generate_rdse_study(seed);
  throw InvalidArgument("unknown study '" + name + "' (expected scse-torus or rdse-torus)");
}

}  // namespace sestm
