#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "sestm/assessment.hpp"
#include "sestm/errors.hpp"
#include "sestm/laplace.hpp"
#include "sestm/parallel.hpp"
#include "sestm/simulation.hpp"
#include "sestm/theta_grid.hpp"

namespace sestm::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void log(const std::string& msg) { std::cerr << "[sestm] " << msg << std::endl; }

std::string get(const Config& cfg, const std::string& key, const std::string& fallback = "") {
  const auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

std::string require(const Config& cfg, const std::string& key, const std::string& command) {
  const std::string v = get(cfg, key);
  if (v.empty()) throw InvalidArgument(command + ": '" + key + "' is required");
  return v;
}

double to_double(const Config& cfg, const std::string& key, double fallback) {
  const std::string v = get(cfg, key);
  if (v.empty()) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidArgument("config '" + key + "': expected a number, got '" + v + "'");
  }
}

long long to_int(const Config& cfg, const std::string& key, long long fallback) {
  const std::string v = get(cfg, key);
  if (v.empty()) return fallback;
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw InvalidArgument("config '" + key + "': expected an integer, got '" + v + "'");
  }
}

std::uint64_t require_seed(const Config& cfg, const std::string& command) {
  const long long s = to_int(cfg, "seed", -1);
  if (get(cfg, "seed").empty()) throw InvalidArgument(command + ": 'seed' is required");
  if (s < 0) throw InvalidArgument(command + ": seed must be non-negative");
  return std::uint64_t(s);
}

fs::path output_dir(const Config& cfg, const std::string& command) {
  const fs::path out = require(cfg, "out", command);
  if (!fs::is_directory(out)) throw InvalidArgument("output directory '" + out.string() + "' does not exist");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw InvalidArgument("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

template <class Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_text(path, ss.str());
}

std::string human(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ModelSpec model_spec(const Config& cfg) {
  ModelSpec spec;
  spec.process = parse_process_kind(get(cfg, "model", "scse"));
  const std::string exc = get(cfg, "excitation", "on");
  if (exc != "on" && exc != "off") throw InvalidArgument("excitation must be 'on' or 'off'");
  spec.excitation = exc == "on";
  if (!get(cfg, "eta").empty()) spec.fixed_eta = to_double(cfg, "eta", 0.0);
  const std::string boundary = get(cfg, "boundary", "printed");
  if (boundary == "printed") {
    spec.boundary = BoundaryAssembly::Printed;
  } else if (boundary == "stationary") {
    spec.boundary = BoundaryAssembly::Stationary;
  } else {
    throw InvalidArgument("boundary must be 'printed' or 'stationary'");
  }
  const std::string initial = get(cfg, "initial", "zero");
  if (initial == "zero") {
    spec.initial = InitialCounts::Zero;
  } else if (initial == "condition") {
    spec.initial = InitialCounts::ConditionOnFirst;
  } else {
    throw InvalidArgument("initial must be 'zero' or 'condition'");
  }
  spec.priors.sigma_scale = to_double(cfg, "sigma_scale", spec.priors.sigma_scale);
  spec.priors.beta_variance = to_double(cfg, "beta_variance", spec.priors.beta_variance);
  return spec;
}

SolverSettings solver_settings(const Config& cfg) {
  SolverSettings s;
  s.inner_tolerance = to_double(cfg, "inner_tolerance", s.inner_tolerance);
  s.outer_gradient_tolerance = to_double(cfg, "outer_gradient_tolerance", s.outer_gradient_tolerance);
  s.grid_dz = to_double(cfg, "dz", s.grid_dz);
  s.grid_dpi = to_double(cfg, "dpi", s.grid_dpi);
  s.max_grid_points = int(to_int(cfg, "max_grid_points", s.max_grid_points));
  s.workers = int(to_int(cfg, "workers", s.workers));
  if (s.workers < 0) throw InvalidArgument("workers must be non-negative");
  return s;
}

std::string model_label(const Config& cfg) {
  const std::string name = get(cfg, "name");
  if (!name.empty()) return name;
  std::string label = get(cfg, "model", "scse");
  if (get(cfg, "excitation", "on") == "off") {
    label += "-noexc";
  } else if (!get(cfg, "eta").empty()) {
    label += "-eta" + get(cfg, "eta");
  }
  return label;
}

LaplaceModel load_model(const Config& cfg, const std::string& command) {
  const SpatialGraph g = load_adjacency_file(require(cfg, "adjacency", command));
  ObservationPanel panel = read_panel_file(require(cfg, "panel", command), g.n_sites());
  const std::string cov = get(cfg, "covariates");
  if (!cov.empty()) read_covariates_file(cov, panel);
  return LaplaceModel(g, panel, model_spec(cfg), solver_settings(cfg));
}

Config absolute_paths(Config cfg) {
  for (const char* key : {"adjacency", "panel", "covariates"}) {
    const std::string v = get(cfg, key);
    if (!v.empty()) cfg[key] = fs::absolute(v).lexically_normal().string();
  }
  return cfg;
}

void write_config(const fs::path& out, const Config& cfg) {
  write_with(out / "config.txt", [&](std::ostream& os) { write_key_values(os, cfg); });
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd from_json_vector(const json& j) {
  const std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_vector(m.row(i).transpose()));
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index n = Eigen::Index(j.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd row = from_json_vector(j[std::size_t(i)]);
    if (row.size() != n) throw ParseError("grid dump: matrix is not square");
    m.row(i) = row.transpose();
  }
  return m;
}

json grid_json(const std::string& label, const ThetaGrid& grid, const Eigen::VectorXd& anchor) {
  json j;
  j["label"] = label;
  j["names"] = grid.names;
  j["mode_phi"] = to_vector(grid.mode_phi);
  j["hessian"] = matrix_json(grid.hessian);
  j["scaling"] = matrix_json(grid.scaling);
  j["dz"] = grid.dz;
  j["dpi"] = grid.dpi;
  j["diagonal_fallback"] = grid.diagonal_fallback;
  j["warning"] = grid.warning;
  j["axis_steps_lo"] = std::vector<int>(grid.axis_steps_lo.data(), grid.axis_steps_lo.data() + grid.axis_steps_lo.size());
  j["axis_steps_hi"] = std::vector<int>(grid.axis_steps_hi.data(), grid.axis_steps_hi.data() + grid.axis_steps_hi.size());
  j["axis_drop_lo"] = to_vector(grid.axis_drop_lo);
  j["axis_drop_hi"] = to_vector(grid.axis_drop_hi);
  j["anchor"] = to_vector(anchor);
  json pts = json::array();
  for (const GridPoint& p : grid.points) {
    pts.push_back({{"z", to_vector(p.z)},
                   {"phi", to_vector(p.phi)},
                   {"log_posterior", p.log_posterior},
                   {"weight", p.weight},
                   {"p_eff", p.p_eff}});
  }
  j["points"] = pts;
  return j;
}

struct StoredGrid {
  ThetaGrid grid;
  Eigen::VectorXd anchor;
  std::string label;
};

StoredGrid load_grid(const fs::path& fit_dir) {
  const fs::path path = fit_dir / "grid.json";
  if (!fs::exists(path)) {
    throw InvalidArgument("no grid dump in '" + fit_dir.string() + "'; run `sestm fit --out " + fit_dir.string() +
                          "` first");
  }
  StoredGrid s;
  try {
    const json j = json::parse(read_text(path));
    s.label = j.at("label").get<std::string>();
    ThetaGrid& g = s.grid;
    g.names = j.at("names").get<std::vector<std::string>>();
    g.mode_phi = from_json_vector(j.at("mode_phi"));
    g.hessian = matrix_from_json(j.at("hessian"));
    g.scaling = matrix_from_json(j.at("scaling"));
    g.dz = j.at("dz").get<double>();
    g.dpi = j.at("dpi").get<double>();
    g.diagonal_fallback = j.at("diagonal_fallback").get<bool>();
    g.warning = j.at("warning").get<std::string>();
    const auto lo = j.at("axis_steps_lo").get<std::vector<int>>();
    const auto hi = j.at("axis_steps_hi").get<std::vector<int>>();
    g.axis_steps_lo = Eigen::Map<const Eigen::VectorXi>(lo.data(), Eigen::Index(lo.size()));
    g.axis_steps_hi = Eigen::Map<const Eigen::VectorXi>(hi.data(), Eigen::Index(hi.size()));
    g.axis_drop_lo = from_json_vector(j.at("axis_drop_lo"));
    g.axis_drop_hi = from_json_vector(j.at("axis_drop_hi"));
    s.anchor = from_json_vector(j.at("anchor"));
    for (const json& p : j.at("points")) {
      GridPoint gp;
      gp.z = from_json_vector(p.at("z"));
      gp.phi = from_json_vector(p.at("phi"));
      gp.log_posterior = p.at("log_posterior").get<double>();
      gp.weight = p.at("weight").get<double>();
      gp.p_eff = p.at("p_eff").get<double>();
      g.points.push_back(std::move(gp));
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (s.grid.points.empty()) throw ParseError(path.string() + ": grid has no points");
  return s;
}

void write_marginal_csv(std::ostream& os, const HyperMarginal& m) {
  os << "value,density\n";
  for (std::size_t i = 0; i < m.abscissae.size(); ++i) {
    os << format_exact(m.abscissae[i]) << ',' << format_exact(m.density[i]) << '\n';
  }
}

struct ParamRow {
  std::string name;
  double mode = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

std::string parameter_table(const std::string& label, const std::vector<ParamRow>& rows, int n_beta) {
  std::vector<std::string> order;
  for (int i = 0; i < std::max(3, n_beta); ++i) order.push_back("beta" + std::to_string(i));
  for (const char* n : {"eta", "sigma2", "theta1", "alpha", "kappa"}) order.push_back(n);
  std::ostringstream os;
  os << "Model: " << label << "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %12s %26s\n", "parameter", "mode", "95% interval");
  os << line;
  for (const std::string& name : order) {
    const ParamRow* found = nullptr;
    for (const ParamRow& r : rows) {
      if (r.name == name) found = &r;
    }
    if (found) {
      const std::string ci = "(" + human(found->lower) + ", " + human(found->upper) + ")";
      std::snprintf(line, sizeof line, "%-10s %12s %26s\n", name.c_str(), human(found->mode).c_str(), ci.c_str());
    } else {
      std::snprintf(line, sizeof line, "%-10s %12s %26s\n", name.c_str(), "-", "-");
    }
    os << line;
  }
  return os.str();
}

}  // namespace

Config merge_config(const std::string& path, const Config& flags) {
  Config cfg;
  if (!path.empty()) cfg = read_key_values_file(path);
  for (const auto& [k, v] : flags) cfg[k] = v;
  return cfg;
}

int cmd_simulate(const Config& cfg_in) {
  Config cfg = cfg_in;
  const std::uint64_t seed = require_seed(cfg, "simulate");
  const fs::path out = output_dir(cfg, "simulate");
  SimulatedStudy study;
  const std::string name = get(cfg, "study");
  if (!name.empty()) {
    study = generate_study(name, seed);
  } else {
    const ModelSpec spec = model_spec(cfg);
    SpatialGraph g;
    if (!get(cfg, "adjacency").empty()) {
      g = load_adjacency_file(get(cfg, "adjacency"));
    } else {
      g = build_torus_lattice(int(to_int(cfg, "rows", 8)), int(to_int(cfg, "cols", 8)));
    }
    GeneratorParams p;
    p.theta.sigma2 = to_double(cfg, "sigma2", 0.4);
    p.theta.theta1 = to_double(cfg, "theta1", 0.2);
    p.theta.alpha = to_double(cfg, "alpha", 0.1);
    p.theta.kappa = to_double(cfg, "kappa", 0.2);
    p.theta.eta = spec.excitation ? to_double(cfg, "eta", 0.2) : 0.0;
    p.beta = Eigen::VectorXd::Constant(1, to_double(cfg, "beta0", -1.0));
    ModelSpec gen = spec;
    gen.fixed_eta.reset();
    study = generate_custom(gen, g, int(to_int(cfg, "n_time", 100)), p, seed, "custom");
  }
  log("simulated " + study.name + ": " + std::to_string(study.panel.n_sites) + " sites x " +
      std::to_string(study.panel.n_time) + " periods");
  write_with(out / "panel.csv", [&](std::ostream& os) { write_panel(os, study.panel); });
  write_with(out / "covariates.csv", [&](std::ostream& os) { write_covariates(os, study.panel); });
  write_with(out / "truth.txt", [&](std::ostream& os) { write_key_values(os, study.truth); });
  write_with(out / "adjacency.txt", [&](std::ostream& os) { write_adjacency(os, study.graph); });
  write_config(out, cfg);
  return kExitOk;
}

int cmd_fit(const Config& cfg_in) {
  const Config cfg = absolute_paths(cfg_in);
  const fs::path out = output_dir(cfg, "fit");
  const LaplaceModel model = load_model(cfg, "fit");
  const std::string label = model_label(cfg);
  const ParamLayout& layout = model.layout();
  log("fitting " + label + ": " + std::to_string(model.structure().dimension()) + " latent coordinates, " +
      std::to_string(layout.dimension()) + " hyperparameters");

  ThetaMode mode;
  try {
    mode = find_theta_mode(model, layout.to_unconstrained(model.default_start()));
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n" << e.trace();
    return kExitNotConverged;
  }
  if (!mode.converged || !mode.latent_mode || !mode.latent_mode->converged) {
    std::cerr << "error: hyperparameter search did not converge\n" << mode.trace;
    return kExitNotConverged;
  }
  log("mode found after " + std::to_string(mode.iterations) + " iterations; log posterior " +
      format_exact(mode.log_posterior));

  const ThetaGrid grid = explore_theta_grid(model, mode);
  log("grid: " + std::to_string(grid.size()) + " points");
  if (!grid.warning.empty()) log("warning: " + grid.warning);
  for (const GridPoint& p : grid.points) {
    if (!p.mode || !p.mode->converged) {
      std::cerr << "error: inner solver did not converge at a grid point\n";
      return kExitNotConverged;
    }
  }

  std::vector<ParamRow> rows;
  const int n_beta = int(model.structure().n_fixed());
  const ModeResult& centre = *grid.points.front().mode;
  for (int b = 0; b < n_beta; ++b) {
    const Interval iv = fixed_effect_interval(model, mode.theta, b, &centre);
    rows.push_back({"beta" + std::to_string(b), centre.beta()[b], iv.lower, iv.upper});
  }
  std::vector<HyperMarginal> marginals;
  for (int i = 0; i < layout.dimension(); ++i) {
    HyperMarginal m = marginal_hyperparam(grid, layout, i);
    rows.push_back({m.name, m.mode, m.lower, m.upper});
    marginals.push_back(std::move(m));
  }

  // Latent summaries: Gaussian mixture over the grid.
  const Eigen::Index n_cells = model.structure().n_cells();
  std::vector<Eigen::VectorXd> var_diag(grid.size());
  parallel_for(
      grid.size(), [&](std::size_t i) { var_diag[i] = grid.points[i].mode->q_star_chol->inverse_diagonal(); },
      model.settings().workers);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n_cells), second = Eigen::VectorXd::Zero(n_cells);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXd mu = grid.points[i].mode->u.head(n_cells);
    mean += grid.points[i].weight * mu;
    second += grid.points[i].weight * (var_diag[i].head(n_cells) + mu.cwiseAbs2());
  }
  const Eigen::VectorXd sd = (second - mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();

  write_text(out / "parameters.txt", parameter_table(label, rows, n_beta));
  write_with(out / "parameters.csv", [&](std::ostream& os) {
    os << "parameter,mode,lower,upper\n";
    for (const ParamRow& r : rows) {
      os << r.name << ',' << format_exact(r.mode) << ',' << format_exact(r.lower) << ',' << format_exact(r.upper)
         << '\n';
    }
  });
  write_with(out / "latent.csv", [&](std::ostream& os) {
    os << "site,time,mean,sd\n";
    const int ns = model.structure().n_sites;
    for (Eigen::Index k = 0; k < n_cells; ++k) {
      os << k % ns << ',' << k / ns + 1 << ',' << format_exact(mean[k]) << ',' << format_exact(sd[k]) << '\n';
    }
  });
  write_text(out / "grid.json", grid_json(label, grid, mode.latent_mode->u).dump(1) + "\n");
  for (const HyperMarginal& m : marginals) {
    write_with(out / ("marginal_" + m.name + ".csv"), [&](std::ostream& os) { write_marginal_csv(os, m); });
  }
  KeyValues summary;
  summary["label"] = label;
  summary["log_posterior"] = format_exact(mode.log_posterior);
  summary["iterations"] = std::to_string(mode.iterations);
  summary["evaluations"] = std::to_string(mode.evaluations);
  summary["grid_points"] = std::to_string(grid.size());
  summary["grid_warning"] = grid.warning;
  summary["inner_iterations_at_mode"] = std::to_string(mode.latent_mode->iterations);
  write_with(out / "fit.txt", [&](std::ostream& os) { write_key_values(os, summary); });
  write_config(out, cfg);
  std::cout << parameter_table(label, rows, n_beta);
  return kExitOk;
}

int cmd_assess(const Config& cfg_in) {
  Config cfg = cfg_in;
  const std::uint64_t seed = require_seed(cfg, "assess");
  const long long n_rep = to_int(cfg, "n_rep", 500);
  if (n_rep < 100) throw InvalidArgument("assess: n_rep must be at least 100 (got " + std::to_string(n_rep) + ")");
  const fs::path out = output_dir(cfg, "assess");
  std::vector<std::string> fits = split_list(get(cfg, "fit"));
  if (fits.empty()) fits.push_back(out.string());

  PPPSettings ppp;
  ppp.n_rep = int(n_rep);
  ppp.seed = seed;
  ppp.refine_sweeps = int(to_int(cfg, "refine_sweeps", ppp.refine_sweeps));
  ppp.workers = int(to_int(cfg, "workers", 0));
  const std::string repl = get(cfg, "replication", "posterior");
  if (repl == "prior") {
    ppp.replication = Replication::Prior;
  } else if (repl != "posterior") {
    throw InvalidArgument("replication must be 'posterior' or 'prior'");
  }

  std::vector<AssessmentRow> rows;
  for (const std::string& dir : fits) {
    StoredGrid stored = load_grid(dir);
    Config fit_cfg = read_key_values_file((fs::path(dir) / "config.txt").string());
    if (!get(cfg, "workers").empty()) fit_cfg["workers"] = get(cfg, "workers");
    const LaplaceModel model = load_model(fit_cfg, "assess");
    if (stored.anchor.size() != model.structure().dimension()) {
      throw InvalidArgument("grid dump in '" + dir + "' does not match its model");
    }
    ThetaGrid& grid = stored.grid;
    PosteriorEvaluator evaluator(model);
    evaluator.set_anchor(stored.anchor);
    std::vector<Eigen::VectorXd> phis;
    for (const GridPoint& p : grid.points) phis.push_back(p.phi);
    const auto terms = evaluator.evaluate(phis);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!terms[i].mode || !terms[i].mode->converged) {
        std::cerr << "error: inner solver did not converge at grid point " << i << "\n";
        return kExitNotConverged;
      }
      grid.points[i].mode = terms[i].mode;
    }
    log("assessing " + stored.label + " on " + std::to_string(grid.size()) + " grid points");
    const FitSummary fit = dic(model, grid);
    const auto res = posterior_predictive_pvalues(model, grid, {"max_count", "zero_count"}, ppp);
    rows.push_back({stored.label, fit.dic, fit.p_eff, fit.deviance_at_mode, res[0].p_value, res[1].p_value});
    write_with(out / ("ppp_" + stored.label + ".csv"), [&](std::ostream& os) {
      os << "replicate,max_count,zero_count\n";
      for (std::size_t m = 0; m < res[0].replicates.size(); ++m) {
        os << m << ',' << format_exact(res[0].replicates[m]) << ',' << format_exact(res[1].replicates[m]) << '\n';
      }
    });
  }
  write_with(out / "assessment.csv", [&](std::ostream& os) { write_assessment_report(os, rows); });
  write_config(out, cfg);
  for (const AssessmentRow& r : rows) {
    std::cout << r.model << ": DIC " << human(r.dic) << ", p_eff " << human(r.p_eff) << ", ppp(max) "
              << human(r.ppp_max) << ", ppp(zeros) " << human(r.ppp_zeros) << "\n";
  }
  return kExitOk;
}

int cmd_report(const Config& cfg) {
  const fs::path out = output_dir(cfg, "report");
  const fs::path assess_dir = require(cfg, "assess", "report");
  const fs::path report_path = assess_dir / "assessment.csv";
  if (!fs::exists(report_path)) {
    throw InvalidArgument("no assessment.csv in '" + assess_dir.string() + "'; run `sestm assess` first");
  }
  std::vector<AssessmentRow> rows;
  {
    std::istringstream in(read_text(report_path));
    rows = read_assessment_report(in);
  }
  if (rows.empty()) throw InvalidArgument("'" + report_path.string() + "' has no rows");

  std::ostringstream summary;
  for (const std::string& dir : split_list(get(cfg, "fit"))) {
    const fs::path fit_dir = dir;
    const KeyValues fit = read_key_values_file((fit_dir / "fit.txt").string());
    const std::string label = get(fit, "label");
    summary << read_text(fit_dir / "parameters.txt") << "\n";
    std::vector<fs::path> marginal_files;
    for (const auto& entry : fs::directory_iterator(fit_dir)) {
      const std::string fname = entry.path().filename().string();
      if (fname.rfind("marginal_", 0) == 0 && entry.path().extension() == ".csv") marginal_files.push_back(entry.path());
    }
    std::sort(marginal_files.begin(), marginal_files.end());
    for (const fs::path& p : marginal_files) {
      const std::string param = p.stem().string().substr(std::string("marginal_").size());
      write_text(out / ("marginal_" + label + "_" + param + ".csv"), read_text(p));
    }
  }

  char line[200];
  std::snprintf(line, sizeof line, "%-16s %12s %10s %12s %10s %10s\n", "model", "DIC", "p_eff", "deviance",
                "ppp_max", "ppp_zeros");
  summary << line;
  const AssessmentRow* best = &rows.front();
  for (const AssessmentRow& r : rows) {
    std::snprintf(line, sizeof line, "%-16s %12s %10s %12s %10s %10s\n", r.model.c_str(), human(r.dic).c_str(),
                  human(r.p_eff).c_str(), human(r.deviance).c_str(), human(r.ppp_max).c_str(),
                  human(r.ppp_zeros).c_str());
    summary << line;
    if (r.dic < best->dic) best = &r;
  }
  summary << "\nPreferred model by DIC: " << best->model << "\n";
  write_text(out / "summary.txt", summary.str());
  std::cout << summary.str();
  return kExitOk;
}

}  // namespace sestm::cli
