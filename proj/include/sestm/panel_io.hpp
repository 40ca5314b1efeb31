#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "sestm/likelihood.hpp"

namespace sestm {

/// Reads `site,time,count` rows. Sites are 0-based, times 1..n_time and must
/// be complete for every site. `n_sites` < 0 infers the site count from the
/// largest index. Covariates are left empty.
ObservationPanel read_panel(std::istream& in, int n_sites = -1);
ObservationPanel read_panel_file(const std::string& path, int n_sites = -1);
void write_panel(std::ostream& out, const ObservationPanel& panel);

/// Reads `site,<name1>,<name2>,...` into panel.covariates / covariate_names.
void read_covariates(std::istream& in, ObservationPanel& panel);
void read_covariates_file(const std::string& path, ObservationPanel& panel);
void write_covariates(std::ostream& out, const ObservationPanel& panel);

/// Ordered `key = value` records; `#` starts a comment line.
using KeyValues = std::map<std::string, std::string>;
KeyValues read_key_values(std::istream& in);
KeyValues read_key_values_file(const std::string& path);
void write_key_values(std::ostream& out, const KeyValues& kv);

/// Shortest round-tripping decimal for a double (17 significant digits).
std::string format_exact(double v);

}  // namespace sestm
