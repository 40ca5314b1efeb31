#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "sestm/errors.hpp"
#include "sestm/spatial_graph.hpp"

using namespace sestm;

namespace {

SpatialGraph path3() { return SpatialGraph(3, {{0, 1}, {1, 2}}); }

SpatialGraph random_connected(int n, std::mt19937_64& rng) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) edges.emplace_back(std::uniform_int_distribution<int>(0, i - 1)(rng), i);
  std::uniform_int_distribution<int> site(0, n - 1);
  const int extra = std::uniform_int_distribution<int>(0, n)(rng);
  for (int k = 0; k < extra; ++k) {
    const int a = site(rng), b = site(rng);
    if (a != b) edges.emplace_back(a, b);
  }
  return SpatialGraph(n, edges);
}

}  // namespace

TEST_SUITE("spatial_graph") {

TEST_CASE("torus lattice sizes and degrees") {
  const SpatialGraph g = build_torus_lattice(8, 8);
  CHECK(g.n_sites() == 64);
  for (int d : g.degrees()) CHECK(d == 4);

  const SpatialGraph small = build_torus_lattice(3, 3);
  CHECK(small.n_sites() == 9);
  CHECK(small.n_edges() == 18);
  for (int d : small.degrees()) CHECK(d == 4);

  CHECK_THROWS_AS(build_torus_lattice(2, 3), InvalidArgument);
  CHECK_THROWS_AS(build_torus_lattice(3, 2), InvalidArgument);
}

TEST_CASE("torus rook neighbors wrap around") {
  const SpatialGraph g = build_torus_lattice(4, 5);
  // site (0,0) = 0 touches (0,1)=1, (0,4)=4, (1,0)=5, (3,0)=15
  CHECK(g.neighbors(0) == std::vector<int>{1, 4, 5, 15});
  CHECK(g.has_edge(19, 15));
  CHECK_FALSE(g.has_edge(0, 6));
}

TEST_CASE("edge list normalisation") {
  const SpatialGraph g(2, {{0, 1}, {1, 0}, {0, 1}});
  CHECK(g.n_edges() == 1);
  CHECK(g.degrees() == std::vector<int>{1, 1});
  CHECK_THROWS_AS(SpatialGraph(2, {{0, 0}}), InvalidArgument);
  CHECK_THROWS_AS(SpatialGraph(2, {{0, 2}}), InvalidArgument);
  CHECK_THROWS_AS(SpatialGraph(2, {{-1, 1}}), InvalidArgument);
}

TEST_CASE("load adjacency") {
  std::istringstream in("# path graph\nsites 3\nedge 0 1\n\nedge 1 2\n");
  const SpatialGraph g = load_adjacency(in);
  CHECK(g.degrees() == std::vector<int>{1, 2, 1});

  std::istringstream dup("sites 2\nedge 0 1\nedge 1 0\n");
  CHECK(load_adjacency(dup).n_edges() == 1);

  auto fails_on_line = [](const std::string& text, const std::string& needle) {
    std::istringstream s(text);
    try {
      load_adjacency(s);
    } catch (const ParseError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_on_line("sites 2\nedge 0 0\n", "line 2"));
  CHECK(fails_on_line("sites 2\nedge 0 1\nedge 0 5\n", "line 3"));
  CHECK(fails_on_line("sites 2\nedge 0\n", "line 2"));
  CHECK(fails_on_line("edge 0 1\n", "line 1"));
  CHECK(fails_on_line("sites x\n", "line 1"));
}

TEST_CASE("adjacency round trip and hash") {
  const SpatialGraph g = build_torus_lattice(3, 4);
  std::stringstream buf;
  write_adjacency(buf, g);
  const SpatialGraph back = load_adjacency(buf);
  CHECK(back.edges() == g.edges());
  CHECK(back.hash() == g.hash());
  CHECK(build_torus_lattice(4, 3).hash() != g.hash());
}

TEST_CASE("neighborhood matrix") {
  const Eigen::MatrixXd h = Eigen::MatrixXd(neighborhood_matrix(path3()));
  Eigen::MatrixXd expect(3, 3);
  expect << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  CHECK(h == expect);

  CHECK(Eigen::MatrixXd(neighborhood_matrix(SpatialGraph(4, {}))).isZero());

  const Eigen::MatrixXd t = Eigen::MatrixXd(neighborhood_matrix(build_torus_lattice(3, 3)));
  for (Eigen::Index i = 0; i < t.rows(); ++i) CHECK(t.row(i).sum() == 4.0);
}

TEST_CASE("graph laplacian") {
  const Eigen::MatrixXd l = Eigen::MatrixXd(graph_laplacian(path3()));
  Eigen::MatrixXd expect(3, 3);
  expect << -1, 1, 0, 1, -2, 1, 0, 1, -1;
  CHECK(l == expect);

  const SpatialGraph torus = build_torus_lattice(8, 8);
  const Eigen::MatrixXd lt = Eigen::MatrixXd(graph_laplacian(torus));
  CHECK((lt * Eigen::VectorXd::Ones(64)).isZero(0.0));
  Eigen::VectorXd inv_deg(64);
  for (int i = 0; i < 64; ++i) inv_deg[i] = 1.0 / torus.degree(i);
  const Eigen::MatrixXd normalized = inv_deg.asDiagonal() * lt;
  const Eigen::VectorXcd ev = normalized.eigenvalues();
  CHECK(ev.real().maxCoeff() <= 1e-12);
  CHECK(ev.real().minCoeff() >= -2.0 - 1e-12);
}

TEST_CASE("theta1 bounds") {
  const Theta1Bounds torus = theta1_bounds(build_torus_lattice(8, 8));
  CHECK(torus.lower == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(torus.upper == doctest::Approx(0.25).epsilon(1e-12));

  const Theta1Bounds pair = theta1_bounds(SpatialGraph(2, {{0, 1}}));
  CHECK(pair.lower == doctest::Approx(-1.0));
  CHECK(pair.upper == doctest::Approx(1.0));

  const Theta1Bounds k3 = theta1_bounds(SpatialGraph(3, {{0, 1}, {1, 2}, {0, 2}}));
  CHECK(k3.lower == doctest::Approx(-1.0));
  CHECK(k3.upper == doctest::Approx(0.5));

  CHECK_THROWS_AS(theta1_bounds(SpatialGraph(3, {})), InvalidArgument);
}

TEST_CASE("random graphs: symmetry, zero row sums, spectra, bounds bracket zero") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = std::uniform_int_distribution<int>(2, 50)(rng);
    const SpatialGraph g = random_connected(n, rng);
    const SparseMatrix h = neighborhood_matrix(g);
    const Eigen::MatrixXd hd(h);
    CHECK(hd == hd.transpose());
    CHECK(hd.diagonal().isZero(0.0));
    const Eigen::MatrixXd l(graph_laplacian(g));
    CHECK((l * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() == 0.0);
    Eigen::VectorXd inv_deg(n);
    for (int i = 0; i < n; ++i) inv_deg[i] = 1.0 / g.degree(i);
    const Eigen::VectorXcd ev = Eigen::MatrixXd(inv_deg.asDiagonal() * l).eigenvalues();
    CHECK(ev.real().maxCoeff() <= 1e-10);
    CHECK(ev.real().minCoeff() >= -2.0 - 1e-10);
    const Theta1Bounds b = theta1_bounds(g);
    CHECK(b.lower < 0.0);
    CHECK(b.upper > 0.0);
  }
}

TEST_CASE("large graph bounds use the iterative path") {
  const SpatialGraph g = build_torus_lattice(50, 50);
  const Theta1Bounds b = theta1_bounds(g);
  CHECK(b.lower == doctest::Approx(-0.25).epsilon(1e-8));
  CHECK(b.upper == doctest::Approx(0.25).epsilon(1e-8));
}

}
