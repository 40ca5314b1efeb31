#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace sestm {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Undirected areal adjacency over sites 0..n_sites-1.
///
/// Edges are stored once as (i, j) with i < j, sorted; neighbor lists are
/// sorted ascending. Isolated sites are allowed here; the reaction-diffusion
/// model rejects them separately.
class SpatialGraph {
 public:
  SpatialGraph() = default;

  /// Builds from an arbitrary edge list. Duplicates and reversed pairs collapse;
  /// self-loops and out-of-range indices throw InvalidArgument.
  SpatialGraph(int n_sites, const std::vector<std::pair<int, int>>& edges);

  int n_sites() const { return n_sites_; }
  std::size_t n_edges() const { return edges_.size(); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int site) const { return neighbors_[site]; }
  int degree(int site) const { return static_cast<int>(neighbors_[site].size()); }
  std::vector<int> degrees() const;
  bool has_edge(int i, int j) const;
  bool has_isolated_site() const;

  /// FNV-1a digest of (n_sites, sorted edges), hex encoded.
  std::string hash() const;

 private:
  int n_sites_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> neighbors_;
};

/// Rook neighborhoods on a rows x cols grid wrapped on a torus. Site index is
/// r * cols + c. Requires rows, cols >= 3.
SpatialGraph build_torus_lattice(int rows, int cols);

/// Reads the adjacency text format:
///
///     # comment
///     sites 3
///     edge 0 1
///     edge 1 2
SpatialGraph load_adjacency(std::istream& in);
SpatialGraph load_adjacency_file(const std::string& path);
void write_adjacency(std::ostream& out, const SpatialGraph& g);

/// H[i,j] = 1 iff (i,j) is an edge.
SparseMatrix neighborhood_matrix(const SpatialGraph& g);

/// Gamma = H - diag(degree).
SparseMatrix graph_laplacian(const SpatialGraph& g);

struct Theta1Bounds {
  double lower;
  double upper;
};

/// Admissible SAR coefficient interval (1/psi_min, 1/psi_max) where psi are the
/// extreme eigenvalues of H. Dense eigensolver up to 2000 sites, shifted power
/// iteration above.
Theta1Bounds theta1_bounds(const SpatialGraph& g);

/// All eigenvalues of H, ascending (dense; for small graphs).
Eigen::VectorXd adjacency_eigenvalues(const SpatialGraph& g);

}  // namespace sestm
