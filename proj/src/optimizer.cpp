#include "sestm/optimizer.hpp"

#include <cmath>
#include <sstream>

#include "sestm/errors.hpp"

namespace sestm {

Eigen::VectorXd fd_gradient(const BatchObjective& f, const Eigen::VectorXd& x, double h) {
  const Eigen::Index d = x.size();
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(2 * d);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    pts.push_back(up);
    pts.push_back(dn);
  }
  const std::vector<double> v = f(pts);
  Eigen::VectorXd g(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double fu = v[2 * i], fd = v[2 * i + 1];
    if (std::isfinite(fu) && std::isfinite(fd)) {
      g[i] = (fu - fd) / (2.0 * h);
    } else {
      g[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return g;
}

Eigen::MatrixXd fd_hessian(const BatchObjective& f, const Eigen::VectorXd& x, double fx, double h) {
  const Eigen::Index d = x.size();
  std::vector<Eigen::VectorXd> pts;
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    pts.push_back(up);
    pts.push_back(dn);
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          Eigen::VectorXd p = x;
          p[i] += si * h;
          p[j] += sj * h;
          pts.push_back(p);
        }
      }
    }
  }
  const std::vector<double> v = f(pts);
  Eigen::MatrixXd hess(d, d);
  for (Eigen::Index i = 0; i < d; ++i) hess(i, i) = (v[2 * i] - 2.0 * fx + v[2 * i + 1]) / (h * h);
  std::size_t k = 2 * d;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double fpp = v[k], fpm = v[k + 1], fmp = v[k + 2], fmm = v[k + 3];
      k += 4;
      hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    }
  }
  return hess;
}

namespace {

bool negative_definite(const Eigen::MatrixXd& h) {
  if (!h.allFinite()) return false;
  const Eigen::LLT<Eigen::MatrixXd> llt(-h);
  return llt.info() == Eigen::Success;
}

}  // namespace

OptimizeResult maximize(const BatchObjective& f, const Eigen::VectorXd& x0, const OptimizerSettings& settings,
                        const std::function<void(const Eigen::VectorXd&)>& on_accept) {
  const Eigen::Index d = x0.size();
  const double h = settings.fd_step;
  OptimizeResult res;
  std::ostringstream trace;
  trace.precision(10);

  Eigen::VectorXd x = x0;
  double fx = f({x})[0];
  res.evaluations = 1;
  if (!std::isfinite(fx)) throw NumericalError("optimizer: objective is not finite at the starting point");
  if (on_accept) on_accept(x);
  Eigen::VectorXd g = fd_gradient(f, x, h);
  res.evaluations += int(2 * d);
  if (!g.allFinite()) throw NumericalError("optimizer: gradient is not finite at the starting point");

  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  auto scaled_identity = [&](const Eigen::VectorXd& grad) {
    return identity * (1.0 / std::max(1.0, grad.cwiseAbs().maxCoeff()));
  };
  Eigen::MatrixXd inv_hess;  // approximates (-Hessian)^{-1}
  {
    const Eigen::MatrixXd h0 = fd_hessian(f, x, fx, h);
    res.evaluations += int(2 * d + 2 * d * (d - 1));
    inv_hess = negative_definite(h0) ? Eigen::MatrixXd((-h0).inverse()) : scaled_identity(g);
  }

  bool reset_once = false;
  for (res.iterations = 0; res.iterations < settings.max_iterations; ++res.iterations) {
    trace << "iter " << res.iterations << " f=" << fx << " |g|=" << g.cwiseAbs().maxCoeff() << " x=" << x.transpose()
          << '\n';
    if (g.cwiseAbs().maxCoeff() < settings.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd p = inv_hess * g;
    if (!(g.dot(p) > 0.0)) {
      inv_hess = scaled_identity(g);
      p = inv_hess * g;
    }
    const double pmax = p.cwiseAbs().maxCoeff();
    if (pmax > settings.max_step) p *= settings.max_step / pmax;

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    for (int k = 0; k < settings.max_halvings; ++k, step *= 0.5) {
      x_new = x + step * p;
      f_new = f({x_new})[0];
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new >= fx + 1e-4 * step * g.dot(p)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!reset_once) {
        reset_once = true;
        inv_hess = scaled_identity(g);
        continue;
      }
      trace << "line search failed\n";
      break;
    }
    reset_once = false;
    if (on_accept) on_accept(x_new);
    const Eigen::VectorXd g_new = fd_gradient(f, x_new, h);
    res.evaluations += int(2 * d);
    if (!g_new.allFinite()) {
      trace << "non-finite gradient\n";
      x = x_new;
      fx = f_new;
      break;
    }
    // BFGS on -f.
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g - g_new;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = identity - rho * s * y.transpose();
      inv_hess = left * inv_hess * left.transpose() + rho * s * s.transpose();
    }
    x = x_new;
    fx = f_new;
    g = g_new;
  }
  res.x = x;
  res.value = fx;
  res.gradient = g;
  res.trace = trace.str();
  if (res.iterations >= settings.max_iterations) {
    throw ConvergenceError("hyperparameter optimizer hit the iteration cap (" +
                               std::to_string(settings.max_iterations) + ")",
                           res.trace);
  }
  res.hessian = fd_hessian(f, x, fx, h);
  res.evaluations += int(2 * d + 2 * d * (d - 1));
  return res;
}

}  // namespace sestm
