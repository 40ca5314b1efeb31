#include <cmath>
#include <random>

#include "doctest.h"
#include "quadrature.hpp"
#include "sestm/errors.hpp"
#include "sestm/laplace.hpp"
#include "sestm/simulation.hpp"

using namespace sestm;

namespace {

LatentStructure bare_structure(int sites, int times) {
  LatentStructure st;
  st.n_sites = sites;
  st.n_time = times;
  st.design.resize(sites, 0);
  return st;
}

SparseMatrix scaled_identity(int n, double v) {
  SparseMatrix m(n, n);
  m.setIdentity();
  return m * v;
}

CellLikelihood poisson_cells(std::vector<int> y) {
  return [y](Eigen::Index k, double lambda) -> CellTerm {
    const LoglikDerivs d = loglik_derivs(lambda, y[k], 0, 0.0);
    return {log_density(lambda, y[k], 0, 0.0), d.d1, d.d2};
  };
}

CellLikelihood gaussian_cells(Eigen::VectorXd y, double tau) {
  return [y, tau](Eigen::Index k, double lambda) -> CellTerm {
    const double r = y[k] - lambda;
    return {-0.5 * tau * r * r, tau * r, -tau};
  };
}

double bisect(const std::function<double(double)>& f, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

ObservationPanel small_panel() {
  ObservationPanel p(2, 2);
  p.counts = {8, 15, 11, 20};
  return p;
}

}  // namespace

TEST_SUITE("laplace") {

TEST_CASE("zero counts with identity prior solve x + exp(x) = 0") {
  const LatentStructure st = bare_structure(3, 2);
  const ModeResult r =
      solve_mode(scaled_identity(6, 1.0), st, poisson_cells(std::vector<int>(6, 0)), Eigen::VectorXd::Zero(6), {});
  const double root = bisect([](double x) { return x + std::exp(x); }, -2.0, 0.0);
  CHECK(root == doctest::Approx(-0.5671432904).epsilon(1e-9));
  CHECK(r.converged);
  CHECK((r.u.array() - root).abs().maxCoeff() < 1e-9);
}

TEST_CASE("single cell with a vague prior sits at the log count") {
  const LatentStructure st = bare_structure(1, 1);
  const ModeResult r = solve_mode(scaled_identity(1, 1e-6), st, poisson_cells({1}), Eigen::VectorXd::Zero(1), {});
  CHECK(std::abs(r.u[0]) < 1e-5);
  const ModeResult r7 =
      solve_mode(scaled_identity(1, 1e-6), st, poisson_cells({7}), Eigen::VectorXd::Constant(1, -4.0), {});
  CHECK(r7.u[0] == doctest::Approx(std::log(7.0)).epsilon(1e-5));
}

TEST_CASE("latent structure maps") {
  LatentStructure st;
  st.n_sites = 2;
  st.n_time = 3;
  st.design.resize(2, 2);
  st.design << 1, 0.5, 1, -2;
  Eigen::VectorXd u(8);
  u << 1, 2, 3, 4, 5, 6, 0.1, 1.0;
  const Eigen::VectorXd lam = st.linear_predictor(u);
  CHECK(lam[0] == doctest::Approx(1 + 0.1 + 0.5));
  CHECK(lam[5] == doctest::Approx(6 + 0.1 - 2));
  // pullback is the transpose of the linear map
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(6, -1, 2);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(8);
  for (int i = 0; i < 8; ++i) {
    e.setZero();
    e[i] = 1.0;
    CHECK(st.pullback(v)[i] == doctest::Approx(v.dot(st.linear_predictor(e))));
  }
}

TEST_CASE("converged mode zeroes the exact gradient and steps never decrease the objective") {
  const SimulatedStudy s = generate_scse_study(3);
  ModelSpec spec;
  LaplaceModel model(s.graph, s.panel, spec);
  HyperParams h;
  h.sigma2 = 0.4;
  h.theta1 = 0.22;
  h.eta = 0.2;
  const ModeResult r = model.gaussian_approx(h);
  CHECK(r.converged);
  CHECK(r.iterations <= 25);
  CHECK(r.gradient_norm < 1e-6);
  for (std::size_t i = 1; i < r.objective_path.size(); ++i) {
    CHECK(r.objective_path[i] >= r.objective_path[i - 1] - 1e-12 * (1.0 + std::abs(r.objective_path[i - 1])));
  }
  // independent gradient: -P u + J^T d1 from scratch
  const PriorPrecision prior = model.prior_precision(h);
  const CellLikelihood term = model.cell_likelihood(h);
  const Eigen::VectorXd lam = model.structure().linear_predictor(r.u);
  Eigen::VectorXd d1(lam.size());
  for (Eigen::Index k = 0; k < lam.size(); ++k) d1[k] = term(k, lam[k]).d1;
  const Eigen::VectorXd grad = model.structure().pullback(d1) - prior.matrix * r.u;
  CHECK(grad.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("indefinite curvature is floored and the fixed point still holds") {
  // strong excitation with large lagged counts gives positive d2 at the start
  ObservationPanel p(2, 3);
  p.counts = {0, 30, 25, 1, 40, 2};
  ModelSpec spec;
  spec.fixed_eta = 0.95;
  const SpatialGraph g(2, {{0, 1}});
  LaplaceModel model(g, p, spec);
  HyperParams h;
  h.sigma2 = 2.0;
  h.theta1 = 0.3;
  h.eta = 0.95;
  Eigen::VectorXd start = Eigen::VectorXd::Constant(model.structure().dimension(), -3.0);
  const ModeResult r = model.gaussian_approx(h, &start);
  CHECK(r.converged);
  CHECK(r.gradient_norm < 1e-6);
}

TEST_CASE("Laplace log posterior against Gauss-Hermite quadrature") {
  const SpatialGraph g(2, {{0, 1}});
  ModelSpec spec;
  spec.excitation = false;
  LaplaceModel model(g, small_panel(), spec);
  const ThetaMode mode = find_theta_mode(model, model.layout().to_unconstrained(model.default_start()));
  CHECK(mode.converged);
  const Eigen::VectorXd c = mode.phi;
  const std::vector<Eigen::VectorXd> pts{c, c + Eigen::Vector2d(0.5, 0), c - Eigen::Vector2d(0.5, 0),
                                         c + Eigen::Vector2d(0, 0.5), c - Eigen::Vector2d(0, 0.5)};
  const ObservationPanel& y = model.panel();
  for (const Eigen::VectorXd& phi : pts) {
    const HyperParams h = model.layout().from_unconstrained(phi);
    const LogPosteriorTerms t = model.log_posterior_terms(phi);
    const Eigen::MatrixXd prior = Eigen::MatrixXd(model.prior_precision(h).matrix);
    auto log_f = [&](const Eigen::VectorXd& u) {
      double acc = -0.5 * u.dot(prior * u);
      for (int k = 0; k < 4; ++k) {
        const double lam = u[k] + u[4];
        acc += y.counts[k] * lam - std::exp(lam) - std::lgamma(y.counts[k] + 1.0);
      }
      return acc;
    };
    Eigen::MatrixXd qs = Eigen::MatrixXd(t.mode->q_star);
    qs = qs.selfadjointView<Eigen::Lower>();
    const Eigen::MatrixXd a = Eigen::MatrixXd(qs.llt().matrixU()).inverse();
    const double li16 = log_integral_gh(log_f, t.mode->u, a, 14);
    const double li20 = log_integral_gh(log_f, t.mode->u, a, 18);
    CHECK(std::abs(li16 - li20) < 1e-4);
    const double quad = -2.5 * std::log(2.0 * M_PI) + 0.5 * std::log(prior.determinant()) + li20 +
                        model.layout().log_prior(phi);
    CHECK(std::abs(quad - t.value) < 0.05);
  }
}

TEST_CASE("log posterior outside the space is -inf and priors shift it linearly") {
  const SpatialGraph g(2, {{0, 1}});
  ModelSpec spec;
  spec.excitation = false;
  LaplaceModel model(g, small_panel(), spec);
  Eigen::VectorXd phi(2);
  phi << 0.0, std::numeric_limits<double>::infinity();
  CHECK(model.log_posterior_theta(phi) == -std::numeric_limits<double>::infinity());
  phi << 0.1, 0.2;
  const LogPosteriorTerms t = model.log_posterior_terms(phi);
  CHECK(t.value == doctest::Approx(t.data_loglik + t.half_log_det_prior - t.half_quadratic - t.half_log_det_q_star +
                                   t.log_prior));
  CHECK(model.log_posterior_theta(phi, nullptr) == t.value);
}

TEST_CASE("excitation off equals eta clamped to zero") {
  const SimulatedStudy s = generate_custom([] {
    ModelSpec m;
    m.excitation = false;
    return m;
  }(), build_torus_lattice(3, 3), 6, [] {
    GeneratorParams p;
    p.theta.sigma2 = 0.5;
    p.theta.theta1 = 0.1;
    p.beta = Eigen::VectorXd::Constant(1, 0.5);
    return p;
  }(), 4);
  ModelSpec off;
  off.excitation = false;
  ModelSpec clamped;
  clamped.fixed_eta = 0.0;
  LaplaceModel a(s.graph, s.panel, off), b(s.graph, s.panel, clamped);
  CHECK(a.layout().names() == b.layout().names());
  const Eigen::VectorXd phi0 = a.layout().to_unconstrained(a.default_start());
  const ThetaMode ma = find_theta_mode(a, phi0);
  const ThetaMode mb = find_theta_mode(b, phi0);
  CHECK((ma.phi - mb.phi).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(std::abs(ma.log_posterior - mb.log_posterior) <= 1e-10);
  CHECK((ma.latent_mode->u - mb.latent_mode->u).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("gaussian latent marginals") {
  const LatentStructure st = bare_structure(2, 1);
  SparseMatrix p(2, 2);
  p.insert(0, 0) = 2.0;
  p.insert(1, 0) = 0.5;
  p.insert(0, 1) = 0.5;
  p.insert(1, 1) = 1.0;
  const ModeResult r = solve_mode(p, st, gaussian_cells(Eigen::Vector2d(1.0, -1.0), 1.0), Eigen::VectorXd::Zero(2), {});
  const LatentMarginal m = latent_marginals_gaussian(r);
  Eigen::Matrix2d q = Eigen::Matrix2d(Eigen::MatrixXd(p)) + Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d inv = q.inverse();
  CHECK(m.sd[0] == doctest::Approx(std::sqrt(inv(0, 0))));
  CHECK(m.sd[1] == doctest::Approx(std::sqrt(inv(1, 1))));
  CHECK((m.mean - inv * Eigen::Vector2d(1.0, -1.0)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("nested marginal is exact for a Gaussian data model") {
  const LatentStructure st = bare_structure(3, 1);
  SparseMatrix p(3, 3);
  std::vector<Eigen::Triplet<double>> tr{{0, 0, 2.0}, {1, 1, 2.0}, {2, 2, 2.0}, {1, 0, -0.7},
                                         {0, 1, -0.7}, {2, 1, 0.4}, {1, 2, 0.4}};
  p.setFromTriplets(tr.begin(), tr.end());
  const CellLikelihood term = gaussian_cells(Eigen::Vector3d(0.5, 1.5, -0.3), 0.8);
  const ModeResult r = solve_mode(p, st, term, Eigen::VectorXd::Zero(3), {});
  const double mean = r.u[1];
  const double sd = latent_marginals_gaussian(r).sd[1];
  std::vector<double> grid;
  for (int i = 0; i <= 200; ++i) grid.push_back(mean + sd * (-6.0 + 0.06 * i));
  const NestedMarginal nm = latent_marginal_nested(p, st, term, SolverSettings{}, 1, grid);
  double area = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) area += 0.5 * (nm.density[i] + nm.density[i - 1]) * (grid[i] - grid[i - 1]);
  CHECK(area == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double z = (grid[i] - mean) / sd;
    const double gauss = std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
    CHECK(std::abs(nm.density[i] - gauss) < 1e-6);
  }
}

TEST_CASE("nested marginal skewness against quadrature") {
  // one Poisson cell plus a vague intercept-like coordinate: lambda = x + b
  LatentStructure st;
  st.n_sites = 1;
  st.n_time = 1;
  st.design = Eigen::MatrixXd::Ones(1, 1);
  SparseMatrix p(2, 2);
  p.insert(0, 0) = 1.0;
  p.insert(1, 1) = 0.01;
  const CellLikelihood term = poisson_cells({2});
  std::vector<double> grid;
  for (int i = 0; i <= 400; ++i) grid.push_back(-5.0 + 0.02 * i);
  const NestedMarginal nm = latent_marginal_nested(p, st, term, SolverSettings{}, 0, grid);

  // brute force: integrate b out on a fine grid for every x
  std::vector<double> exact(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double acc = 0.0;
    for (double b = -40.0; b <= 40.0; b += 0.005) {
      const double lam = grid[i] + b;
      acc += std::exp(-0.5 * grid[i] * grid[i] - 0.005 * b * b + 2.0 * lam - std::exp(lam));
    }
    exact[i] = acc;
  }
  auto skewness = [&](const std::vector<double>& d) {
    double m0 = 0, m1 = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      m0 += d[i];
      m1 += d[i] * grid[i];
    }
    const double mu = m1 / m0;
    double m2 = 0, m3 = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      m2 += d[i] * std::pow(grid[i] - mu, 2);
      m3 += d[i] * std::pow(grid[i] - mu, 3);
    }
    m2 /= m0;
    m3 /= m0;
    return m3 / std::pow(m2, 1.5);
  };
  const double s_nested = skewness(nm.density);
  const double s_exact = skewness(exact);
  CHECK(s_exact != 0.0);
  CHECK((s_nested > 0) == (s_exact > 0));
  CHECK(std::abs(s_nested - s_exact) <= 0.1 * std::abs(s_exact));
}

TEST_CASE("fixed effect intervals") {
  const SpatialGraph g = build_torus_lattice(3, 3);
  ObservationPanel p(9, 4);
  for (std::size_t i = 0; i < p.counts.size(); ++i) p.counts[i] = int(i % 4);
  p.covariates.resize(9, 2);
  for (int s = 0; s < 9; ++s) p.covariates(s, 0) = p.covariates(s, 1) = 0.1 * s;
  p.covariate_names = {"a", "b"};
  ModelSpec spec;
  CHECK_THROWS_AS(LaplaceModel(g, p, spec), InvalidArgument);
  p.covariates.col(1).setOnes();
  CHECK_THROWS_AS(LaplaceModel(g, p, spec), InvalidArgument);
  p.covariates.resize(9, 0);
  p.covariate_names.clear();
  LaplaceModel model(g, p, spec);
  HyperParams h = model.default_start();
  const Interval iv = fixed_effect_interval(model, h, 0);
  const ModeResult r = model.gaussian_approx(h);
  const double sd = latent_marginals_gaussian(r).sd[r.u.size() - 1];
  CHECK(iv.upper - iv.lower == doctest::Approx(2 * 1.959963984540054 * sd).epsilon(1e-10));
  CHECK(0.5 * (iv.upper + iv.lower) == doctest::Approx(r.u[r.u.size() - 1]));
  CHECK_THROWS_AS(fixed_effect_interval(model, h, 1), InvalidArgument);
}

TEST_CASE("intercept intervals cover the generating value with strong data") {
  GeneratorParams gp;
  gp.theta.sigma2 = 0.3;
  gp.theta.theta1 = 0.2;
  gp.theta.eta = 0.2;
  gp.beta = Eigen::VectorXd::Constant(1, 2.0);
  const SpatialGraph g = build_torus_lattice(4, 4);
  int covered = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const SimulatedStudy s = generate_custom(ModelSpec{}, g, 10, gp, seed);
    LaplaceModel model(s.graph, s.panel, ModelSpec{});
    const Interval iv = fixed_effect_interval(model, gp.theta, 0);
    covered += iv.lower <= 2.0 && 2.0 <= iv.upper;
  }
  CHECK(covered >= 45);
}

TEST_CASE("model construction checks") {
  ObservationPanel p(3, 2);
  ModelSpec rd;
  rd.process = ProcessKind::Rdse;
  CHECK_THROWS_AS(LaplaceModel(SpatialGraph(3, {{0, 1}}), p, rd), InvalidArgument);
  CHECK_THROWS_AS(LaplaceModel(build_torus_lattice(3, 3), p, ModelSpec{}), InvalidArgument);
  ObservationPanel one(9, 1);
  CHECK_THROWS_AS(LaplaceModel(build_torus_lattice(3, 3), one, rd), InvalidArgument);
}

}
