#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "sestm/errors.hpp"

namespace {

struct Flag {
  const char* name;
  const char* key;
  const char* help;
};

constexpr Flag kFlags[] = {
    {"--model", "model", "process model: scse or rdse"},
    {"--excitation", "excitation", "self-excitation: on or off"},
    {"--eta", "eta", "hold eta at this value (simulate: generating eta)"},
    {"--boundary", "boundary", "RDSE boundary assembly: printed or stationary"},
    {"--initial", "initial", "pre-sample counts: zero or condition"},
    {"--adjacency", "adjacency", "adjacency file"},
    {"--panel", "panel", "count panel CSV"},
    {"--covariates", "covariates", "site covariate CSV"},
    {"--out", "out", "output directory (must exist)"},
    {"--seed", "seed", "random seed"},
    {"--n-rep", "n_rep", "posterior predictive replicates (>= 100)"},
    {"--study", "study", "built-in study design: scse-torus or rdse-torus"},
    {"--fit", "fit", "fit directories, comma separated"},
    {"--assess", "assess", "assessment directory"},
    {"--name", "name", "model label used in reports"},
    {"--workers", "workers", "worker threads (0: all cores)"},
    {"--rows", "rows", "torus rows for a custom simulation"},
    {"--cols", "cols", "torus columns for a custom simulation"},
    {"--n-time", "n_time", "periods for a custom simulation"},
    {"--refine-sweeps", "refine_sweeps", "Metropolis sweeps per predictive latent draw"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-exciting spatio-temporal count models: simulate, fit, assess, report"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::string> values;
  app.add_option("--config", config_path, "key = value configuration file; flags override it");
  for (const Flag& f : kFlags) app.add_option(f.name, values[f.key], f.help);
  bool no_excitation = false;
  app.add_flag("--no-excitation", no_excitation, "same as --excitation off");

  auto* simulate = app.add_subcommand("simulate", "simulate a study and write panel, covariates and truth");
  auto* fit = app.add_subcommand("fit", "fit a model and write parameter tables and the grid dump");
  auto* assess = app.add_subcommand("assess", "DIC and posterior predictive p-values for fitted models");
  auto* report = app.add_subcommand("report", "merge fit and assessment outputs into a summary");
  for (auto* sub : {simulate, fit, assess, report}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  sestm::cli::Config flags;
  for (const auto& [k, v] : values) {
    if (!v.empty()) flags[k] = v;
  }
  if (no_excitation) flags["excitation"] = "off";
  try {
    const sestm::cli::Config cfg = sestm::cli::merge_config(config_path, flags);
    if (simulate->parsed()) return sestm::cli::cmd_simulate(cfg);
    if (fit->parsed()) return sestm::cli::cmd_fit(cfg);
    if (assess->parsed()) return sestm::cli::cmd_assess(cfg);
    return sestm::cli::cmd_report(cfg);
  } catch (const sestm::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n" << e.trace() << "\n";
    return sestm::cli::kExitNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sestm::cli::kExitError;
  }
}
