#include "sestm/assessment.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "sestm/errors.hpp"
#include "sestm/panel_io.hpp"
#include "sestm/parallel.hpp"

namespace sestm {

double effective_params(const SparseMatrix& q, const SparseMatrix& q_star) {
  if (q.rows() != q_star.rows() || q.rows() != q.cols() || q_star.rows() != q_star.cols()) {
    throw InvalidArgument("effective_params: matrices must be square and of equal size");
  }
  const SparseCholesky chol(q_star);
  return double(q.rows()) - trace_product_inverse(q, chol);
}

double effective_params(const PrecisionOperator& q, const PrecisionOperator& q_star) {
  return effective_params(q.matrix, q_star.matrix);
}

FitSummary dic(const LaplaceModel& model, const ThetaGrid& grid) {
  if (grid.points.empty() || !grid.points.front().mode) throw InvalidArgument("dic: grid carries no latent modes");
  const GridPoint& centre = grid.points.front();
  FitSummary s;
  s.theta_star = model.layout().from_unconstrained(centre.phi);
  s.x_hat = centre.mode->u;
  s.deviance_at_mode = -2.0 * centre.mode->data_loglik;
  s.p_eff = grid_average_p_eff(grid);
  s.dic = s.deviance_at_mode + 2.0 * s.p_eff;
  return s;
}

StatisticRegistry::StatisticRegistry() {
  add("max_count", [](const ObservationPanel& p) {
    return double(p.counts.empty() ? 0 : *std::max_element(p.counts.begin(), p.counts.end()));
  });
  add("zero_count",
      [](const ObservationPanel& p) { return double(std::count(p.counts.begin(), p.counts.end(), 0)); });
  add("total_count", [](const ObservationPanel& p) {
    double s = 0.0;
    for (int c : p.counts) s += c;
    return s;
  });
}

void StatisticRegistry::add(const std::string& name, Statistic fn) {
  if (name.empty() || !fn) throw InvalidArgument("statistic needs a name and a function");
  stats_[name] = std::move(fn);
}

const Statistic& StatisticRegistry::get(const std::string& name) const {
  const auto it = stats_.find(name);
  if (it == stats_.end()) throw InvalidArgument("unknown statistic '" + name + "'");
  return it->second;
}

std::vector<std::string> StatisticRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& kv : stats_) out.push_back(kv.first);
  return out;
}

double exceedance_fraction(double observed, const std::vector<double>& replicates) {
  if (replicates.empty()) throw InvalidArgument("no replicates");
  std::size_t above = 0;
  for (double v : replicates) above += v > observed ? 1 : 0;
  return double(above) / double(replicates.size());
}

double refine_latent_draw(const SparseMatrix& prior, const LatentStructure& structure, const CellLikelihood& term,
                          Eigen::VectorXd& u, int sweeps, std::mt19937_64& rng) {
  if (prior.rows() != u.size() || u.size() != structure.dimension()) {
    throw InvalidArgument("refine: dimension mismatch");
  }
  if (sweeps <= 0) return 1.0;
  const Eigen::Index n = structure.n_cells();
  Eigen::VectorXd r = prior * u;  // kept equal to P u
  const Eigen::VectorXd offset = structure.linear_predictor(u) - u.head(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  long accepted = 0;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double qii = prior.coeff(i, i);
      const double m = u[i] - r[i] / qii;
      const double o = offset[i];
      auto log_target = [&](double x) { return -0.5 * qii * (x - m) * (x - m) + term(i, x + o).value; };
      double xm = u[i];
      double h = qii;
      for (int it = 0; it < 6; ++it) {
        const CellTerm c = term(i, xm + o);
        h = qii + std::max(-c.d2, 0.0);
        const double step = (-qii * (xm - m) + c.d1) / h;
        xm += std::clamp(step, -2.0, 2.0);
        if (std::abs(step) < 1e-10) break;
      }
      const double sd = 1.0 / std::sqrt(h);
      auto log_q = [&](double x) { return -0.5 * (x - xm) * (x - xm) / (sd * sd); };
      const double x_old = u[i];
      const double x_new = xm + sd * normal(rng);
      const double log_alpha = log_target(x_new) - log_target(x_old) + log_q(x_old) - log_q(x_new);
      if (std::log(unif(rng)) < log_alpha) {
        const double delta = x_new - x_old;
        u[i] = x_new;
        for (SparseMatrix::InnerIterator it(prior, i); it; ++it) r[it.row()] += delta * it.value();
        ++accepted;
      }
    }
  }
  return double(accepted) / double(n * sweeps);
}

namespace {

ObservationPanel replicate_panel(const LaplaceModel& model, const GridPoint& point, const PPPSettings& settings,
                                 std::mt19937_64& rng) {
  const ObservationPanel& obs = model.panel();
  const LatentStructure& st = model.structure();
  const HyperParams h = model.layout().from_unconstrained(point.phi);
  const ModeResult& mode = *point.mode;

  Eigen::VectorXd u;
  if (settings.replication == Replication::Posterior) {
    u = mode.u + sample_gaussian(*mode.q_star_chol, rng);
    if (settings.refine_sweeps > 0) {
      const PriorPrecision prior = model.prior_precision(h);
      refine_latent_draw(prior.matrix, st, model.cell_likelihood(h), u, settings.refine_sweeps, rng);
    }
  } else {
    const PriorPrecision prior = model.prior_precision(h);
    const SparseMatrix q = prior.matrix.topLeftCorner(st.n_cells(), st.n_cells());
    u = mode.u;
    u.head(st.n_cells()) = sample_gaussian(SparseCholesky(q), rng);
  }
  const Eigen::VectorXd lambda = st.linear_predictor(u);
  const Excitation exc = model.excitation(h);

  ObservationPanel rep = obs;
  for (int t = 0; t < obs.n_time; ++t) {
    if (!cell_in_likelihood(exc, t)) continue;  // conditioning period stays observed
    for (int s = 0; s < obs.n_sites; ++s) {
      const int prev = lagged_count(rep, exc, s, t);
      const double mu = mean_function(lambda[Eigen::Index(t) * obs.n_sites + s], exc.eta, prev);
      std::poisson_distribution<int> pois(std::min(mu, 1e9));
      rep.count(s, t) = pois(rng);
    }
  }
  return rep;
}

}  // namespace

std::vector<PPPResult> posterior_predictive_pvalues(const LaplaceModel& model, const ThetaGrid& grid,
                                                    const std::vector<std::string>& statistics,
                                                    const PPPSettings& settings, const StatisticRegistry& registry) {
  if (settings.n_rep < 100) throw InvalidArgument("posterior predictive check needs n_rep >= 100");
  if (grid.points.empty()) throw InvalidArgument("posterior predictive check needs a non-empty grid");
  for (const GridPoint& p : grid.points) {
    if (!p.mode) throw InvalidArgument("grid point carries no latent mode");
  }
  std::vector<const Statistic*> fns;
  for (const std::string& name : statistics) fns.push_back(&registry.get(name));

  std::vector<double> cumulative;
  double acc = 0.0;
  for (const GridPoint& p : grid.points) cumulative.push_back(acc += p.weight);

  const std::size_t n_rep = std::size_t(settings.n_rep);
  std::vector<std::vector<double>> values(fns.size(), std::vector<double>(n_rep));
  parallel_for(
      n_rep,
      [&](std::size_t m) {
        std::seed_seq seq{std::uint32_t(settings.seed & 0xffffffffu), std::uint32_t(settings.seed >> 32),
                          std::uint32_t(m), std::uint32_t(m >> 32)};
        std::mt19937_64 rng(seq);
        const double draw = std::uniform_real_distribution<double>(0.0, acc)(rng);
        const std::size_t k = std::min<std::size_t>(
            std::size_t(std::upper_bound(cumulative.begin(), cumulative.end(), draw) - cumulative.begin()),
            grid.points.size() - 1);
        const ObservationPanel rep = replicate_panel(model, grid.points[k], settings, rng);
        for (std::size_t i = 0; i < fns.size(); ++i) values[i][m] = (*fns[i])(rep);
      },
      settings.workers);

  std::vector<PPPResult> out;
  for (std::size_t i = 0; i < fns.size(); ++i) {
    PPPResult r;
    r.statistic = statistics[i];
    r.observed = (*fns[i])(model.panel());
    r.replicates = std::move(values[i]);
    r.p_value = exceedance_fraction(r.observed, r.replicates);
    out.push_back(std::move(r));
  }
  return out;
}

PPPResult posterior_predictive_pvalue(const LaplaceModel& model, const ThetaGrid& grid, const std::string& statistic,
                                      const PPPSettings& settings, const StatisticRegistry& registry) {
  return posterior_predictive_pvalues(model, grid, {statistic}, settings, registry).front();
}

void write_assessment_report(std::ostream& out, const std::vector<AssessmentRow>& rows) {
  out << "model,dic,p_eff,deviance,ppp_max,ppp_zeros\n";
  for (const AssessmentRow& r : rows) {
    out << r.model << ',' << format_exact(r.dic) << ',' << format_exact(r.p_eff) << ',' << format_exact(r.deviance)
        << ',' << format_exact(r.ppp_max) << ',' << format_exact(r.ppp_zeros) << '\n';
  }
}

std::vector<AssessmentRow> read_assessment_report(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "model,dic,p_eff,deviance,ppp_max,ppp_zeros") {
    throw ParseError("assessment report: unexpected header");
  }
  std::vector<AssessmentRow> rows;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw ParseError("assessment report line " + std::to_string(n) + ": expected 6 fields");
    AssessmentRow r;
    r.model = cells[0];
    try {
      r.dic = std::stod(cells[1]);
      r.p_eff = std::stod(cells[2]);
      r.deviance = std::stod(cells[3]);
      r.ppp_max = std::stod(cells[4]);
      r.ppp_zeros = std::stod(cells[5]);
    } catch (const std::exception&) {
      throw ParseError("assessment report line " + std::to_string(n) + ": bad number");
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace sestm
