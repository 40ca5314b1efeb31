#include <cmath>
#include <random>

#include "doctest.h"
#include "sestm/errors.hpp"
#include "sestm/likelihood.hpp"

using namespace sestm;

namespace {

// Independent scalar oracle: log Poisson pmf written out directly.
double pmf_log(double x, int y, int y_prev, double eta) {
  const double mu = std::exp(x) + eta * y_prev;
  double log_fact = 0.0;
  for (int k = 2; k <= y; ++k) log_fact += std::log(double(k));
  return y * std::log(mu) - mu - log_fact;
}

ObservationPanel random_panel(int s, int t, std::mt19937_64& rng) {
  ObservationPanel p(s, t);
  std::poisson_distribution<int> pois(2.5);
  for (int& c : p.counts) c = pois(rng);
  return p;
}

}  // namespace

TEST_SUITE("likelihood") {

TEST_CASE("mean function") {
  CHECK(mean_function(0.0, 0.0, 7) == 1.0);
  CHECK(mean_function(0.0, 0.5, 2) == 2.0);
  CHECK(mean_function(-1.0 + 0.3, 0.2, 4) == doctest::Approx(std::exp(-0.7) + 0.8));
  const long before = exp_clamp_count();
  CHECK(mean_function(80.0, 0.0, 0) == doctest::Approx(std::exp(kMaxLinearPredictor)));
  CHECK(exp_clamp_count() == before + 1);
}

TEST_CASE("log density") {
  CHECK(log_density(std::log(2.0), 3, 0, 0.0) == doctest::Approx(3.0 * std::log(2.0) - 2.0 - std::log(6.0)));
  CHECK(log_density(0.0, 0, 0, 0.0) == doctest::Approx(-1.0));
  CHECK(log_density(1.0, 150, 3, 0.4) == doctest::Approx(pmf_log(1.0, 150, 3, 0.4)).epsilon(1e-12));
}

TEST_CASE("loglik of an all-zero panel") {
  ObservationPanel p(4, 3);
  const LatentField x(4, 3);
  CHECK(loglik(p, x, FixedEffects(), Excitation{}) == doctest::Approx(-12.0));
}

TEST_CASE("loglik equals a scalar-loop oracle") {
  std::mt19937_64 rng(4);
  ObservationPanel p = random_panel(16, 3, rng);
  p.covariates = Eigen::MatrixXd::Random(16, 2);
  p.covariate_names = {"a", "b"};
  LatentField x(16, 3);
  std::normal_distribution<double> n(0.0, 0.5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.values[i] = n(rng);
  Eigen::VectorXd beta(3);
  beta << 0.3, -0.2, 0.5;
  for (InitialCounts init : {InitialCounts::Zero, InitialCounts::ConditionOnFirst}) {
    Excitation exc;
    exc.eta = 0.35;
    exc.initial = init;
    double oracle = 0.0;
    for (int t = 0; t < 3; ++t) {
      if (init == InitialCounts::ConditionOnFirst && t == 0) continue;
      for (int s = 0; s < 16; ++s) {
        const double lin = beta[0] + p.covariates(s, 0) * beta[1] + p.covariates(s, 1) * beta[2] + x(s, t);
        oracle += pmf_log(lin, p.count(s, t), t == 0 ? 0 : p.count(s, t - 1), exc.eta);
      }
    }
    CHECK(loglik(p, x, FixedEffects(beta), exc) == doctest::Approx(oracle).epsilon(1e-12));
  }
  CHECK_THROWS_AS(loglik(p, LatentField(15, 3), FixedEffects(beta), Excitation{}), InvalidArgument);
  CHECK_THROWS_AS(loglik(p, x, FixedEffects(), Excitation{}), InvalidArgument);
}

TEST_CASE("explicit pre-sample counts feed the first period") {
  ObservationPanel p(2, 1);
  p.count(0, 0) = 3;
  p.count(1, 0) = 1;
  Excitation exc;
  exc.eta = 0.5;
  exc.y_init = {4, 0};
  const double expect = pmf_log(0.0, 3, 4, 0.5) + pmf_log(0.0, 1, 0, 0.5);
  CHECK(loglik(p, LatentField(2, 1), FixedEffects(), exc) == doctest::Approx(expect));
}

TEST_CASE("derivative examples") {
  LoglikDerivs d = loglik_derivs(0.0, 1, 0, 0.0);
  CHECK(d.d1 == doctest::Approx(0.0));
  CHECK(d.d2 == doctest::Approx(-1.0));
  d = loglik_derivs(0.0, 3, 2, 0.5);
  CHECK(d.d1 == doctest::Approx(0.5));
  CHECK(d.d2 == doctest::Approx(-0.25));
  d = loglik_derivs(1.3, 0, 5, 0.4);
  CHECK(d.d1 == doctest::Approx(-std::exp(1.3)));
  CHECK(d.d2 == doctest::Approx(-std::exp(1.3)));
}

TEST_CASE("derivatives match central finite differences") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ux(-3.0, 3.0), ueta(0.0, 0.95);
  std::uniform_int_distribution<int> uy(0, 30);
  const double h = 1e-5;
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const double x = ux(rng), eta = ueta(rng);
    const int y = uy(rng), yp = uy(rng);
    const LoglikDerivs d = loglik_derivs(x, y, yp, eta);
    // the oracle differentiates the independent pmf; the first derivative is
    // differenced once, the second is the difference of analytic first
    // derivatives so both reach ~1e-10 accuracy
    const double fd1 = (pmf_log(x + h, y, yp, eta) - pmf_log(x - h, y, yp, eta)) / (2 * h);
    const double fd2 = (loglik_derivs(x + h, y, yp, eta).d1 - loglik_derivs(x - h, y, yp, eta).d1) / (2 * h);
    const auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    if (rel(d.d1, fd1) > 1e-6 || rel(d.d2, fd2) > 1e-6) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("second derivative can be positive with excitation") {
  // y large relative to exp(x), strong excitation share
  CHECK(loglik_derivs(-2.0, 20, 10, 0.9).d2 > 0.0);
  CHECK(loglik_derivs(-2.0, 0, 10, 0.9).d2 < 0.0);
}

TEST_CASE("taylor coefficients") {
  ObservationPanel p(3, 1);
  p.count(0, 0) = 1;
  p.count(1, 0) = 3;
  p.count(2, 0) = 0;
  LatentField mu0(3, 1);
  mu0(2, 0) = 2.0;
  Excitation exc;
  exc.eta = 0.5;
  exc.y_init = {0, 2, 0};
  const TaylorCoefficients tc = taylor_coefficients(p, FixedEffects(), exc, mu0);
  CHECK(tc.b_star[1] == doctest::Approx(0.5));
  CHECK(tc.curvature[1] == doctest::Approx(0.25));
  CHECK(tc.b_star[2] == doctest::Approx(-std::exp(2.0) + 2.0 * std::exp(2.0)));
  CHECK(tc.curvature[2] == doctest::Approx(std::exp(2.0)));

  // eta = 0 reduces to the Poisson log-link working quantities
  Excitation plain;
  plain.y_init = {0, 0, 0};
  const TaylorCoefficients t0 = taylor_coefficients(p, FixedEffects(), plain, mu0);
  CHECK(t0.b_star[0] == doctest::Approx(0.0));
  CHECK(t0.curvature[0] == doctest::Approx(1.0));
  for (int s = 0; s < 3; ++s) {
    const double e = std::exp(mu0(s, 0));
    CHECK(t0.curvature[s] == doctest::Approx(e));
    CHECK(t0.b_star[s] == doctest::Approx(p.count(s, 0) - e + mu0(s, 0) * e));
  }
}

TEST_CASE("simulate counts: mean, excitation inflation, determinism") {
  const LatentField zero(100, 100);
  Excitation none;
  std::mt19937_64 rng(7);
  const ObservationPanel p = simulate_counts(zero, FixedEffects(Eigen::VectorXd::Constant(1, std::log(4.0))),
                                             Eigen::MatrixXd(100, 0), none, rng);
  double mean = 0.0;
  for (int c : p.counts) mean += c;
  mean /= p.counts.size();
  CHECK(std::abs(mean - 4.0) < 3.0 * std::sqrt(4.0 / 10000.0));

  // long-run mean exp(xbar) / (1 - eta)
  const LatentField flat(20, 2000);
  Excitation exc;
  exc.eta = 0.4;
  std::mt19937_64 r2(8);
  const ObservationPanel q = simulate_counts(flat, FixedEffects(Eigen::VectorXd::Constant(1, 0.5)),
                                             Eigen::MatrixXd(20, 0), exc, r2);
  double m2 = 0.0;
  for (int t = 100; t < 2000; ++t)
    for (int s = 0; s < 20; ++s) m2 += q.count(s, t);
  m2 /= 20.0 * 1900.0;
  CHECK(std::abs(m2 - std::exp(0.5) / 0.6) / (std::exp(0.5) / 0.6) < 0.05);

  std::mt19937_64 a(3), b(3);
  const auto pa = simulate_counts(flat, FixedEffects(), Eigen::MatrixXd(20, 0), exc, a);
  const auto pb = simulate_counts(flat, FixedEffects(), Eigen::MatrixXd(20, 0), exc, b);
  CHECK(pa.counts == pb.counts);
}

TEST_CASE("panel validation") {
  ObservationPanel p(2, 2);
  CHECK_NOTHROW(p.validate());
  p.counts[1] = -1;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

}
