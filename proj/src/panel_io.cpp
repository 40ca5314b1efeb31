#include "sestm/panel_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "sestm/errors.hpp"

namespace sestm {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  if (s.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
  } else {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
  }
}

[[noreturn]] void fail(const char* what, int line_no, const std::string& msg) {
  throw ParseError(std::string(what) + " line " + std::to_string(line_no) + ": " + msg);
}

bool skip_line(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto first = line.find_first_not_of(" \t");
  return first == std::string::npos || line[first] == '#';
}

}  // namespace

ObservationPanel read_panel(std::istream& in, int n_sites) {
  struct Row {
    int site, time, count;
  };
  std::vector<Row> rows;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto fields = split_csv(line);
    if (!header) {
      if (fields != std::vector<std::string>{"site", "time", "count"}) {
        fail("panel", line_no, "expected header 'site,time,count'");
      }
      header = true;
      continue;
    }
    if (fields.size() != 3) fail("panel", line_no, "expected 3 fields, got " + std::to_string(fields.size()));
    Row r{};
    if (!parse_number(fields[0], r.site) || r.site < 0) fail("panel", line_no, "bad site '" + fields[0] + "'");
    if (!parse_number(fields[1], r.time) || r.time < 1) fail("panel", line_no, "bad time '" + fields[1] + "'");
    if (!parse_number(fields[2], r.count) || r.count < 0) fail("panel", line_no, "bad count '" + fields[2] + "'");
    if (n_sites >= 0 && r.site >= n_sites) fail("panel", line_no, "site index out of range");
    rows.push_back(r);
  }
  if (!header) throw ParseError("panel: missing header 'site,time,count'");
  if (rows.empty()) throw ParseError("panel: no observations");

  int max_site = 0, max_time = 0;
  for (const auto& r : rows) {
    max_site = std::max(max_site, r.site);
    max_time = std::max(max_time, r.time);
  }
  const int sites = n_sites >= 0 ? n_sites : max_site + 1;
  ObservationPanel panel(sites, max_time);
  std::vector<char> seen(panel.size(), 0);
  for (const auto& r : rows) {
    const std::size_t k = std::size_t(r.time - 1) * sites + r.site;
    if (seen[k]) {
      throw ParseError("panel: duplicate cell site " + std::to_string(r.site) + " time " + std::to_string(r.time));
    }
    seen[k] = 1;
    panel.counts[k] = r.count;
  }
  for (std::size_t k = 0; k < seen.size(); ++k) {
    if (!seen[k]) {
      throw ParseError("panel: missing cell site " + std::to_string(k % sites) + " time " +
                       std::to_string(k / sites + 1));
    }
  }
  return panel;
}

ObservationPanel read_panel_file(const std::string& path, int n_sites) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open panel file '" + path + "'");
  try {
    return read_panel(in, n_sites);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_panel(std::ostream& out, const ObservationPanel& panel) {
  out << "site,time,count\n";
  for (int s = 0; s < panel.n_sites; ++s) {
    for (int t = 0; t < panel.n_time; ++t) out << s << ',' << (t + 1) << ',' << panel.count(s, t) << '\n';
  }
}

void read_covariates(std::istream& in, ObservationPanel& panel) {
  std::string line;
  int line_no = 0;
  std::vector<std::string> names;
  bool header = false;
  std::vector<char> seen(panel.n_sites, 0);
  Eigen::MatrixXd z;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto fields = split_csv(line);
    if (!header) {
      if (fields.empty() || fields[0] != "site") fail("covariates", line_no, "expected header 'site,<name>,...'");
      names.assign(fields.begin() + 1, fields.end());
      for (const auto& n : names) {
        if (n.empty()) fail("covariates", line_no, "empty covariate name");
      }
      z = Eigen::MatrixXd::Zero(panel.n_sites, Eigen::Index(names.size()));
      header = true;
      continue;
    }
    if (fields.size() != names.size() + 1) {
      fail("covariates", line_no, "expected " + std::to_string(names.size() + 1) + " fields");
    }
    int site = 0;
    if (!parse_number(fields[0], site) || site < 0 || site >= panel.n_sites) {
      fail("covariates", line_no, "bad site '" + fields[0] + "'");
    }
    if (seen[site]) fail("covariates", line_no, "duplicate site " + fields[0]);
    seen[site] = 1;
    for (std::size_t c = 0; c < names.size(); ++c) {
      double v = 0.0;
      if (!parse_number(fields[c + 1], v) || !std::isfinite(v)) {
        fail("covariates", line_no, "bad value '" + fields[c + 1] + "'");
      }
      z(site, Eigen::Index(c)) = v;
    }
  }
  if (!header) throw ParseError("covariates: missing header");
  for (int s = 0; s < panel.n_sites; ++s) {
    if (!seen[s]) throw ParseError("covariates: missing site " + std::to_string(s));
  }
  panel.covariates = z;
  panel.covariate_names = names;
}

void read_covariates_file(const std::string& path, ObservationPanel& panel) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open covariate file '" + path + "'");
  try {
    read_covariates(in, panel);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_covariates(std::ostream& out, const ObservationPanel& panel) {
  out << "site";
  for (const auto& n : panel.covariate_names) out << ',' << n;
  out << '\n';
  for (int s = 0; s < panel.n_sites; ++s) {
    out << s;
    for (int c = 0; c < panel.n_covariates(); ++c) out << ',' << format_exact(panel.covariates(s, c));
    out << '\n';
  }
}

KeyValues read_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("key-value", line_no, "expected 'key = value'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail("key-value", line_no, "empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return read_key_values(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_key_values(std::ostream& out, const KeyValues& kv) {
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace sestm
