#include <cmath>
#include <sstream>

#include "doctest.h"
#include "sestm/errors.hpp"
#include "sestm/simulation.hpp"

using namespace sestm;

namespace {

std::string panel_bytes(const ObservationPanel& p) {
  std::ostringstream os;
  write_panel(os, p);
  return os.str();
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = double(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("SCSE study design") {
  const SimulatedStudy s = generate_scse_study(7);
  CHECK(s.panel.size() == 6400);
  CHECK(s.panel.n_sites == 64);
  CHECK(s.panel.n_time == 100);
  CHECK(s.graph.hash() == build_torus_lattice(8, 8).hash());
  double total = 0.0;
  for (int c : s.panel.counts) {
    CHECK(c >= 0);
    total += c;
  }
  const double mean = total / 6400.0;
  CHECK(mean >= 0.2);
  CHECK(mean <= 2.0);
  CHECK(s.latent.values.allFinite());
  CHECK(s.truth.at("theta1") == format_exact(0.22));
  CHECK(s.truth.at("eta") == format_exact(0.2));
  CHECK(s.truth.at("sigma2") == format_exact(0.4));
  CHECK(s.truth.at("beta0") == format_exact(-1.0));
  CHECK(s.truth.at("seed") == "7");
  CHECK(s.truth.at("graph_hash") == s.graph.hash());
}

TEST_CASE("studies are byte-identical across reruns") {
  for (const std::string& name : study_names()) {
    const SimulatedStudy a = generate_study(name, 7);
    const SimulatedStudy b = generate_study(name, 7);
    const SimulatedStudy c = generate_study(name, 8);
    CHECK(panel_bytes(a.panel) == panel_bytes(b.panel));
    CHECK(a.latent.values == b.latent.values);
    CHECK(a.truth == b.truth);
    CHECK(panel_bytes(a.panel) != panel_bytes(c.panel));
  }
  CHECK_THROWS_AS(generate_study("nope", 1), InvalidArgument);
}

TEST_CASE("RDSE study design") {
  const SimulatedStudy s = generate_rdse_study(3);
  CHECK(s.panel.size() == 6400);
  CHECK(s.truth.at("alpha") == format_exact(0.1));
  CHECK(s.truth.at("kappa") == format_exact(0.2));
  CHECK(s.truth.at("sigma2") == format_exact(0.25));
  CHECK(s.truth.at("eta") == format_exact(0.4));
  CHECK(s.truth.at("beta0") == format_exact(0.0));
  CHECK(s.truth.at("boundary") == "stationary");
  for (int c : s.panel.counts) CHECK(c >= 0);
  CHECK(s.latent.values.allFinite());
}

TEST_CASE("without diffusion the sites are independent") {
  const SpatialGraph g = build_torus_lattice(3, 3);
  RdseParams p;
  p.alpha = 0.1;
  p.kappa = 0.0;
  p.sigma2 = 0.25;
  const PrecisionOperator q = rdse_precision(g, p, 4, BoundaryAssembly::Stationary);
  const SparseCholesky chol(q.matrix);
  std::mt19937_64 rng(21);
  std::vector<double> a, b, c;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::VectorXd x = sample_gaussian(chol, rng);
    a.push_back(x[0]);
    b.push_back(x[1]);
    c.push_back(x[9 + 1]);
  }
  CHECK(std::abs(correlation(a, b)) < 0.05);
  CHECK(std::abs(correlation(a, c)) < 0.05);
}

TEST_CASE("three-node diffusion toward equilibrium") {
  const SpatialGraph path(3, {{0, 1}, {1, 2}});
  const Eigen::Vector3d x0(0.0, 4.0, 0.0);
  auto spread = [](const Eigen::RowVectorXd& x) { return x.maxCoeff() - x.minCoeff(); };
  Eigen::MatrixXd slow, fast;
  for (double kappa : {0.03, 0.07}) {
    RdseParams p;
    p.alpha = 0.01;
    p.kappa = kappa;
    p.sigma2 = 0.1;
    const Eigen::MatrixXd traj = propagate_mean(path, p, x0, 12);
    CHECK(traj.rows() == 13);
    for (int k = 1; k <= 12; ++k) {
      CHECK(spread(traj.row(k)) < spread(traj.row(k - 1)));
      CHECK(traj(k, 0) > traj(k - 1, 0));
      CHECK(traj(k, 0) == doctest::Approx(traj(k, 2)));
    }
    (kappa < 0.05 ? slow : fast) = traj;
  }
  CHECK(spread(fast.row(12)) < spread(slow.row(12)));
  CHECK(fast(12, 0) > slow(12, 0));

  // full generator with a population covariate
  ModelSpec spec;
  spec.process = ProcessKind::Rdse;
  GeneratorParams gp;
  gp.theta.alpha = 0.01;
  gp.theta.kappa = 0.07;
  gp.theta.sigma2 = 0.1;
  gp.theta.eta = 0.2;
  gp.beta = Eigen::Vector2d(-19.0, 1.3);
  gp.covariates = Eigen::MatrixXd::Constant(3, 1, std::log(1000.0));
  gp.y_init = {0, 40, 0};
  const SimulatedStudy s = generate_custom(spec, path, 12, gp, 5);
  CHECK(s.truth.at("beta1") == format_exact(1.3));
  CHECK(s.panel.n_covariates() == 1);
  GeneratorParams wrong = gp;
  wrong.covariates.resize(3, 0);
  CHECK_THROWS_AS(generate_custom(spec, path, 12, wrong, 5), InvalidArgument);
  wrong = gp;
  wrong.theta.kappa = 2.0;
  CHECK_THROWS(generate_custom(spec, path, 12, wrong, 5));
}

TEST_CASE("eta zero equals the clamped and the switched-off generators") {
  const SpatialGraph g = build_torus_lattice(4, 4);
  GeneratorParams p;
  p.theta.sigma2 = 0.3;
  p.theta.theta1 = 0.2;
  p.theta.eta = 0.0;
  ModelSpec free_spec;
  ModelSpec clamped;
  clamped.fixed_eta = 0.0;
  ModelSpec off;
  off.excitation = false;
  const SimulatedStudy a = generate_custom(free_spec, g, 10, p, 99);
  const SimulatedStudy b = generate_custom(clamped, g, 10, p, 99);
  p.theta.eta = 0.7;
  const SimulatedStudy c = generate_custom(off, g, 10, p, 99);
  CHECK(a.panel.counts == b.panel.counts);
  CHECK(a.panel.counts == c.panel.counts);
  CHECK(a.latent.values == c.latent.values);
}

TEST_CASE("SCSE with theta1 zero gives independent counts") {
  GeneratorParams p;
  p.theta.sigma2 = 0.4;
  p.theta.theta1 = 0.0;
  p.beta = Eigen::VectorXd::Constant(1, 0.5);
  ModelSpec spec;
  spec.excitation = false;
  const SimulatedStudy s = generate_custom(spec, build_torus_lattice(8, 8), 100, p, 12);
  std::vector<double> here, right, later;
  for (int t = 0; t + 1 < 100; ++t) {
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        here.push_back(s.panel.count(r * 8 + c, t));
        right.push_back(s.panel.count(r * 8 + (c + 1) % 8, t));
        later.push_back(s.panel.count(r * 8 + c, t + 1));
      }
    }
  }
  CHECK(std::abs(correlation(here, right)) < 0.05);
  CHECK(std::abs(correlation(here, later)) < 0.05);
}

}
