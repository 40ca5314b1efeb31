#include "sestm/spatial_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "sestm/errors.hpp"

namespace sestm {

SpatialGraph::SpatialGraph(int n_sites, const std::vector<std::pair<int, int>>& edges)
    : n_sites_(n_sites) {
  if (n_sites <= 0) throw InvalidArgument("graph must have at least one site");
  edges_.reserve(edges.size());
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n_sites || j >= n_sites) {
      throw InvalidArgument("edge (" + std::to_string(i) + "," + std::to_string(j) +
                            ") out of range for " + std::to_string(n_sites) + " sites");
    }
    if (i == j) throw InvalidArgument("self-loop at site " + std::to_string(i));
    edges_.emplace_back(std::min(i, j), std::max(i, j));
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  neighbors_.assign(n_sites, {});
  for (auto [i, j] : edges_) {
    neighbors_[i].push_back(j);
    neighbors_[j].push_back(i);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

std::vector<int> SpatialGraph::degrees() const {
  std::vector<int> d(n_sites_);
  for (int i = 0; i < n_sites_; ++i) d[i] = degree(i);
  return d;
}

bool SpatialGraph::has_edge(int i, int j) const {
  if (i < 0 || j < 0 || i >= n_sites_ || j >= n_sites_) return false;
  const auto& nb = neighbors_[i];
  return std::binary_search(nb.begin(), nb.end(), j);
}

bool SpatialGraph::has_isolated_site() const {
  return std::any_of(neighbors_.begin(), neighbors_.end(),
                     [](const auto& nb) { return nb.empty(); });
}

std::string SpatialGraph::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(n_sites_));
  for (auto [i, j] : edges_) {
    mix(static_cast<std::uint64_t>(i));
    mix(static_cast<std::uint64_t>(j));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SpatialGraph build_torus_lattice(int rows, int cols) {
  if (rows < 3 || cols < 3) {
    throw InvalidArgument("torus lattice needs at least 3 rows and 3 columns, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::vector<std::pair<int, int>> edges;
  edges.reserve(2 * static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int site = r * cols + c;
      edges.emplace_back(site, r * cols + (c + 1) % cols);
      edges.emplace_back(site, ((r + 1) % rows) * cols + c);
    }
  }
  return SpatialGraph(rows * cols, edges);
}

namespace {

[[noreturn]] void parse_fail(int line_no, const std::string& msg) {
  throw ParseError("adjacency line " + std::to_string(line_no) + ": " + msg);
}

}  // namespace

SpatialGraph load_adjacency(std::istream& in) {
  int n_sites = -1;
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;

    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "sites") {
      if (n_sites >= 0) parse_fail(line_no, "duplicate 'sites' declaration");
      if (!(ls >> n_sites) || n_sites <= 0) parse_fail(line_no, "expected 'sites <n>' with n > 0");
    } else if (keyword == "edge") {
      if (n_sites < 0) parse_fail(line_no, "'edge' before 'sites'");
      int i = 0, j = 0;
      if (!(ls >> i >> j)) parse_fail(line_no, "expected 'edge <i> <j>'");
      if (i < 0 || j < 0 || i >= n_sites || j >= n_sites) {
        parse_fail(line_no, "site index out of range");
      }
      if (i == j) parse_fail(line_no, "self-loop");
      edges.emplace_back(i, j);
    } else {
      parse_fail(line_no, "unknown keyword '" + keyword + "'");
    }
    std::string extra;
    if (ls >> extra && extra[0] != '#') parse_fail(line_no, "trailing content '" + extra + "'");
  }
  if (n_sites < 0) throw ParseError("adjacency: missing 'sites <n>' line");
  return SpatialGraph(n_sites, edges);
}

SpatialGraph load_adjacency_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open adjacency file '" + path + "'");
  try {
    return load_adjacency(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_adjacency(std::ostream& out, const SpatialGraph& g) {
  out << "sites " << g.n_sites() << '\n';
  for (auto [i, j] : g.edges()) out << "edge " << i << ' ' << j << '\n';
}

SparseMatrix neighborhood_matrix(const SpatialGraph& g) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * g.n_edges());
  for (auto [i, j] : g.edges()) {
    trips.emplace_back(i, j, 1.0);
    trips.emplace_back(j, i, 1.0);
  }
  SparseMatrix h(g.n_sites(), g.n_sites());
  h.setFromTriplets(trips.begin(), trips.end());
  return h;
}

SparseMatrix graph_laplacian(const SpatialGraph& g) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * g.n_edges() + g.n_sites());
  for (int i = 0; i < g.n_sites(); ++i) trips.emplace_back(i, i, -static_cast<double>(g.degree(i)));
  for (auto [i, j] : g.edges()) {
    trips.emplace_back(i, j, 1.0);
    trips.emplace_back(j, i, 1.0);
  }
  SparseMatrix lap(g.n_sites(), g.n_sites());
  lap.setFromTriplets(trips.begin(), trips.end());
  return lap;
}

Eigen::VectorXd adjacency_eigenvalues(const SpatialGraph& g) {
  const Eigen::MatrixXd h = Eigen::MatrixXd(neighborhood_matrix(g));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

namespace {

// Dominant eigenvalue of (shift*I + sign*H), which is PSD for shift >= max degree.
double shifted_power(const SparseMatrix& h, double shift, double sign) {
  const Eigen::Index n = h.rows();
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.37 * std::sin(1.0 + 3.0 * i);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Eigen::VectorXd w = shift * v + sign * (h * v);
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (std::abs(next - lambda) <= 1e-13 * std::max(1.0, std::abs(next))) return next;
    lambda = next;
  }
  return lambda;
}

}  // namespace

Theta1Bounds theta1_bounds(const SpatialGraph& g) {
  if (g.n_edges() == 0) throw InvalidArgument("graph has no edges: no valid theta1 bounds");
  double psi_min = 0.0;
  double psi_max = 0.0;
  if (g.n_sites() <= 2000) {
    const Eigen::VectorXd ev = adjacency_eigenvalues(g);
    psi_min = ev[0];
    psi_max = ev[ev.size() - 1];
  } else {
    const SparseMatrix h = neighborhood_matrix(g);
    double max_deg = 0.0;
    for (int i = 0; i < g.n_sites(); ++i) max_deg = std::max(max_deg, double(g.degree(i)));
    psi_max = shifted_power(h, max_deg, 1.0) - max_deg;
    psi_min = max_deg - shifted_power(h, max_deg, -1.0);
  }
  return {1.0 / psi_min, 1.0 / psi_max};
}

}  // namespace sestm
