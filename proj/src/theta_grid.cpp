#include "sestm/theta_grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "sestm/errors.hpp"
#include "sestm/parallel.hpp"

namespace sestm {

namespace {

using BatchTerms = std::function<std::vector<LogPosteriorTerms>(const std::vector<Eigen::VectorXd>&)>;

struct AxisRecord {
  int steps = 0;        // outermost kept step
  double drop = 0.0;    // drop at the calibration point
  int calib_step = 0;   // step used to calibrate the split-Gaussian scale
  std::vector<double> drops;  // drops[k-1] at step k for kept steps
};

ThetaGrid explore(const BatchTerms& f, const Eigen::VectorXd& mode, const Eigen::MatrixXd& hessian,
                  const GridSettings& settings) {
  const Eigen::Index d = mode.size();
  if (hessian.rows() != d || hessian.cols() != d) throw InvalidArgument("grid: hessian has the wrong shape");
  if (settings.dz <= 0.0 || settings.dpi <= 0.0) throw InvalidArgument("grid: dz and dpi must be positive");

  ThetaGrid grid;
  grid.mode_phi = mode;
  grid.hessian = hessian;
  grid.dz = settings.dz;
  grid.dpi = settings.dpi;

  const Eigen::MatrixXd neg = -0.5 * (hessian + hessian.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg);
  const Eigen::VectorXd lam = es.eigenvalues();
  if (neg.allFinite() && lam.minCoeff() > 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff())) {
    grid.scaling = es.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal();
  } else {
    grid.diagonal_fallback = true;
    grid.warning = "mode hessian is not negative definite; grid uses diagonal scaling";
    grid.scaling = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double hii = neg(i, i);
      grid.scaling(i, i) = (std::isfinite(hii) && hii > 0.0) ? 1.0 / std::sqrt(hii) : 1.0;
    }
  }
  const double cutoff = settings.dpi - 1e-9 * (1.0 + settings.dpi);
  auto phi_of = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd { return mode + grid.scaling * z; };

  const LogPosteriorTerms centre = f({mode})[0];
  if (!std::isfinite(centre.value)) throw NumericalError("grid: log density is not finite at the mode");
  const double lp0 = centre.value;
  grid.points.push_back({Eigen::VectorXd::Zero(d), mode, lp0, 0.0, 0.0, centre.mode});

  // Walk every principal axis in both directions, one step per round.
  std::vector<AxisRecord> rec(std::size_t(2 * d));
  std::vector<bool> active(std::size_t(2 * d), true);
  for (int k = 1; k <= settings.max_axis_steps; ++k) {
    std::vector<std::size_t> which;
    std::vector<Eigen::VectorXd> pts, zs;
    for (std::size_t a = 0; a < rec.size(); ++a) {
      if (!active[a]) continue;
      Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
      z[Eigen::Index(a / 2)] = (a % 2 == 0 ? -1.0 : 1.0) * k * settings.dz;
      which.push_back(a);
      zs.push_back(z);
      pts.push_back(phi_of(z));
    }
    if (pts.empty()) break;
    const auto res = f(pts);
    for (std::size_t i = 0; i < which.size(); ++i) {
      AxisRecord& r = rec[which[i]];
      const double drop = lp0 - res[i].value;
      if (!std::isfinite(res[i].value) || drop >= cutoff) {
        active[which[i]] = false;
        if (r.steps == 0 && std::isfinite(drop) && drop > 0.0) {
          r.calib_step = k;
          r.drop = drop;
        }
        continue;
      }
      r.steps = k;
      r.drops.push_back(drop);
      if (drop > 0.0) {
        r.calib_step = k;
        r.drop = drop;
      }
      grid.points.push_back({zs[i], pts[i], res[i].value, 0.0, 0.0, res[i].mode});
    }
  }

  grid.axis_steps_lo.resize(d);
  grid.axis_steps_hi.resize(d);
  grid.axis_drop_lo.resize(d);
  grid.axis_drop_hi.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const AxisRecord& lo = rec[std::size_t(2 * j)];
    const AxisRecord& hi = rec[std::size_t(2 * j + 1)];
    grid.axis_steps_lo[j] = lo.calib_step;
    grid.axis_steps_hi[j] = hi.calib_step;
    grid.axis_drop_lo[j] = lo.drop;
    grid.axis_drop_hi[j] = hi.drop;
  }

  // Combination points whose additively predicted drop stays below dpi.
  struct Candidate {
    double predicted;
    std::vector<int> k;
  };
  std::vector<Candidate> cands;
  std::vector<int> k(std::size_t(d), 0);
  std::vector<int> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    lo[j] = -rec[std::size_t(2 * j)].steps;
    hi[j] = rec[std::size_t(2 * j + 1)].steps;
    k[j] = lo[j];
  }
  if (d >= 2) {
    for (;;) {
      int nonzero = 0;
      double pred = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        if (k[j] == 0) continue;
        ++nonzero;
        const AxisRecord& r = rec[std::size_t(2 * j + (k[j] > 0 ? 1 : 0))];
        pred += std::max(0.0, r.drops[std::size_t(std::abs(k[j]) - 1)]);
      }
      if (nonzero >= 2 && pred < cutoff) cands.push_back({pred, k});
      Eigen::Index j = 0;
      while (j < d && k[j] == hi[j]) {
        k[j] = lo[j];
        ++j;
      }
      if (j == d) break;
      ++k[j];
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.predicted < b.predicted; });
  const std::size_t room =
      settings.max_points > int(grid.points.size()) ? std::size_t(settings.max_points) - grid.points.size() : 0;
  if (cands.size() > room) {
    cands.resize(room);
    if (!grid.warning.empty()) grid.warning += "; ";
    grid.warning += "grid truncated at " + std::to_string(settings.max_points) + " points";
  }
  std::vector<Eigen::VectorXd> pts, zs;
  for (const Candidate& c : cands) {
    Eigen::VectorXd z(d);
    for (Eigen::Index j = 0; j < d; ++j) z[j] = c.k[std::size_t(j)] * settings.dz;
    zs.push_back(z);
    pts.push_back(phi_of(z));
  }
  if (!pts.empty()) {
    const auto res = f(pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (!std::isfinite(res[i].value) || lp0 - res[i].value >= cutoff) continue;
      grid.points.push_back({zs[i], pts[i], res[i].value, 0.0, 0.0, res[i].mode});
    }
  }

  double top = lp0;
  for (const GridPoint& p : grid.points) top = std::max(top, p.log_posterior);
  double total = 0.0;
  for (GridPoint& p : grid.points) total += (p.weight = std::exp(p.log_posterior - top));
  for (GridPoint& p : grid.points) p.weight /= total;
  return grid;
}

}  // namespace

ThetaGrid explore_grid(const GridObjective& f, const Eigen::VectorXd& mode, const Eigen::MatrixXd& hessian,
                       const GridSettings& settings) {
  BatchTerms terms = [&f](const std::vector<Eigen::VectorXd>& pts) {
    const std::vector<double> v = f(pts);
    std::vector<LogPosteriorTerms> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i].value = v[i];
    return out;
  };
  return explore(terms, mode, hessian, settings);
}

ThetaGrid explore_theta_grid(const LaplaceModel& model, const ThetaMode& mode) {
  PosteriorEvaluator evaluator(model);
  if (mode.latent_mode) evaluator.set_anchor(mode.latent_mode->u);
  const SolverSettings& s = model.settings();
  GridSettings gs;
  gs.dz = s.grid_dz;
  gs.dpi = s.grid_dpi;
  gs.max_points = s.max_grid_points;
  BatchTerms terms = [&evaluator](const std::vector<Eigen::VectorXd>& pts) { return evaluator.evaluate(pts); };
  ThetaGrid grid = explore(terms, mode.phi, mode.hessian, gs);
  grid.names = model.layout().names();
  parallel_for(
      grid.points.size(),
      [&](std::size_t i) {
        GridPoint& p = grid.points[i];
        p.p_eff = model.effective_params(model.layout().from_unconstrained(p.phi), *p.mode);
      },
      s.workers);
  return grid;
}

GridMoments grid_moments(const ThetaGrid& grid) {
  const Eigen::Index d = grid.dimension();
  GridMoments m;
  m.mean = Eigen::VectorXd::Zero(d);
  for (const GridPoint& p : grid.points) m.mean += p.weight * p.phi;
  m.covariance = Eigen::MatrixXd::Zero(d, d);
  for (const GridPoint& p : grid.points) {
    const Eigen::VectorXd c = p.phi - m.mean;
    m.covariance += p.weight * c * c.transpose();
  }
  m.covariance += (grid.dz * grid.dz / 12.0) * grid.scaling * grid.scaling.transpose();
  return m;
}

double grid_average_p_eff(const ThetaGrid& grid) {
  double s = 0.0;
  for (const GridPoint& p : grid.points) s += p.weight * p.p_eff;
  return s;
}

namespace {

double split_scale(int steps, double drop, double dz, double dpi) {
  if (steps > 0 && drop > 0.0) return steps * dz / std::sqrt(2.0 * drop);
  return dz / std::sqrt(2.0 * dpi);
}

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * double(v.size() - 1);
  const std::size_t i = std::size_t(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  const double frac = pos - double(i);
  return v[i] + frac * (v[i + 1] - v[i]);
}

}  // namespace

HyperMarginal marginal_hyperparam(const ThetaGrid& grid, int index, const NaturalMap& to_natural, int n_samples) {
  const Eigen::Index d = grid.dimension();
  if (index < 0 || index >= d) throw InvalidArgument("marginal: hyperparameter index out of range");
  if (n_samples < 100) throw InvalidArgument("marginal: too few samples");

  std::vector<double> abscissae;
  for (const GridPoint& p : grid.points) abscissae.push_back(to_natural(p.phi));
  std::sort(abscissae.begin(), abscissae.end());
  int distinct = abscissae.empty() ? 0 : 1;
  for (std::size_t i = 1; i < abscissae.size(); ++i) {
    if (abscissae[i] - abscissae[i - 1] > 1e-12 * std::max(1.0, std::abs(abscissae[i]))) ++distinct;
  }
  if (distinct < 3) {
    throw InvalidArgument("insufficient grid: fewer than 3 distinct values for hyperparameter " +
                          std::to_string(index));
  }

  Eigen::VectorXd s_lo(d), s_hi(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    s_lo[j] = split_scale(grid.axis_steps_lo[j], grid.axis_drop_lo[j], grid.dz, grid.dpi);
    s_hi[j] = split_scale(grid.axis_steps_hi[j], grid.axis_drop_hi[j], grid.dz, grid.dpi);
  }

  std::mt19937_64 rng(0x5eed5eedULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> draws;
  draws.reserve(std::size_t(n_samples));
  Eigen::VectorXd e(d), z(d);
  while (int(draws.size()) < n_samples) {
    for (Eigen::Index j = 0; j < d; ++j) e[j] = normal(rng);
    for (int sign : {1, -1}) {
      for (Eigen::Index j = 0; j < d; ++j) {
        const double v = sign * e[j];
        z[j] = v * (v > 0.0 ? s_hi[j] : s_lo[j]);
      }
      const double x = to_natural(grid.mode_phi + grid.scaling * z);
      if (std::isfinite(x)) draws.push_back(x);
    }
  }
  std::sort(draws.begin(), draws.end());

  HyperMarginal m;
  m.lower = quantile_sorted(draws, 0.025);
  m.upper = quantile_sorted(draws, 0.975);

  // Binned Gaussian kernel density estimate for the mode and the density curve.
  const double n = double(draws.size());
  double mean = 0.0;
  for (double x : draws) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : draws) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  const double iqr = quantile_sorted(draws, 0.75) - quantile_sorted(draws, 0.25);
  double bw = 0.9 * std::min(sd, iqr / 1.34) * std::pow(n, -0.2);
  if (!(bw > 0.0)) bw = std::max(1e-12, sd);
  constexpr int kGrid = 513;
  const double a = draws.front() - 3.0 * bw;
  const double b = draws.back() + 3.0 * bw;
  const double step = (b - a) / (kGrid - 1);
  std::vector<double> counts(kGrid, 0.0);
  for (double x : draws) {
    const double pos = (x - a) / step;
    const int i = std::min(kGrid - 2, int(std::floor(pos)));
    const double frac = pos - i;
    counts[std::size_t(i)] += 1.0 - frac;
    counts[std::size_t(i + 1)] += frac;
  }
  m.abscissae.resize(kGrid);
  m.density.assign(kGrid, 0.0);
  const double norm = 1.0 / (n * bw * std::sqrt(2.0 * M_PI));
  for (int i = 0; i < kGrid; ++i) {
    m.abscissae[std::size_t(i)] = a + i * step;
    double acc = 0.0;
    for (int k = 0; k < kGrid; ++k) {
      if (counts[std::size_t(k)] == 0.0) continue;
      const double u = (i - k) * step / bw;
      acc += counts[std::size_t(k)] * std::exp(-0.5 * u * u);
    }
    m.density[std::size_t(i)] = acc * norm;
  }
  const auto top = std::max_element(m.density.begin(), m.density.end());
  const std::size_t im = std::size_t(top - m.density.begin());
  m.mode = m.abscissae[im];
  if (im > 0 && im + 1 < m.density.size()) {
    const double f0 = m.density[im - 1], f1 = m.density[im], f2 = m.density[im + 1];
    const double denom = f0 - 2.0 * f1 + f2;
    if (denom < 0.0) m.mode += 0.5 * step * (f0 - f2) / denom;
  }
  m.mode = std::clamp(m.mode, m.lower, m.upper);
  return m;
}

HyperMarginal marginal_hyperparam(const ThetaGrid& grid, const ParamLayout& layout, int index, int n_samples) {
  if (index < 0 || index >= layout.dimension()) throw InvalidArgument("marginal: hyperparameter index out of range");
  const std::string name = layout.names()[std::size_t(index)];
  HyperMarginal m = marginal_hyperparam(
      grid, index, [&](const Eigen::VectorXd& phi) { return ParamLayout::value_of(layout.from_unconstrained(phi), name); },
      n_samples);
  m.name = name;
  return m;
}

}  // namespace sestm
