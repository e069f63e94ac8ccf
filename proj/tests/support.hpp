#ifndef GRAPHHEAT_TESTS_SUPPORT_HPP
#define GRAPHHEAT_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "graphheat/graphheat.hpp"

namespace testing_support {

using namespace graphheat;

// Seeded generators for property tests. Every property test draws from its
// own fixed seed so failures replay exactly.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

  WeightedGraph graph(std::size_t lo = 2, std::size_t hi = 200, double boundary_fraction = 0.0) {
    RandomGraphOptions o;
    o.min_vertices = lo;
    o.max_vertices = hi;
    o.boundary_fraction = boundary_fraction;
    return build_graph(random_connected_spec(rng, o));
  }

  VertexFunction function(const WeightedGraph& g, double lo = -1.0, double hi = 1.0) {
    VertexFunction f(g.size());
    for (Vertex x = 0; x < g.size(); ++x)
      f[x] = uniform(lo, hi);
    return f;
  }

  VertexFunction interior_function(const WeightedGraph& g) {
    VertexFunction f(g.size());
    for (Vertex x = 0; x < g.size(); ++x)
      f[x] = g.is_boundary(x) ? 0.0 : uniform(-1.0, 1.0);
    return f;
  }
};

inline WeightedGraph z_segment(int h) { return build_graph(z_segment_spec(h)); }

// Floyd-Warshall all-pairs distances from per-edge lengths; independent of
// the library's Dijkstra.
template <class Len>
std::vector<std::vector<double>> floyd_warshall(const WeightedGraph& g, Len length) {
  const std::size_t n = g.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> D(n, std::vector<double>(n, inf));
  for (Vertex x = 0; x < n; ++x) {
    D[x][x] = 0.0;
    for (const auto& nb : g.neighbors(x))
      D[x][nb.v] = std::min(D[x][nb.v], length(x, nb.v));
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (D[i][k] + D[k][j] < D[i][j])
          D[i][j] = D[i][k] + D[k][j];
  return D;
}

// Dense (n x n) Laplacian matrix with Dirichlet-zero exterior, built from
// the raw edge list.
inline std::vector<std::vector<double>> dense_operator(const WeightedGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
  for (Vertex x = 0; x < n; ++x) {
    A[x][x] += g.exterior_weight(x);
    for (const auto& nb : g.neighbors(x)) {
      A[x][x] += nb.w;
      A[x][nb.v] -= nb.w;
    }
  }
  return A;
}

// Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c]))
        piv = r;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k < n; ++k)
        A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t k = i + 1; k < n; ++k)
      acc -= A[i][k] * x[k];
    x[i] = acc / A[i][i];
  }
  return x;
}

// Two unit vertices joined by a unit edge, no exterior.
inline WeightedGraph two_vertex() {
  GraphSpec s;
  s.vertices = {{0, 1.0, 0.0, std::nullopt}, {1, 1.0, 0.0, std::nullopt}};
  s.edges = {{0, 1, 1.0}};
  return build_graph(s);
}

// Closed form for u0 = (1, 0) on the two-vertex graph with rho = mu = 1.
inline std::vector<double> two_vertex_exact(double t) {
  const double e = std::exp(-2.0 * t);
  return {0.5 * (1.0 + e), 0.5 * (1.0 - e)};
}

// Trajectory sampled from the closed form on a uniform grid.
inline Trajectory two_vertex_exact_trajectory(double T, std::size_t steps) {
  Trajectory tr;
  tr.rho = {1.0, 1.0};
  tr.mu = {1.0, 1.0};
  tr.dt = T / static_cast<double>(steps);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = T * static_cast<double>(i) / static_cast<double>(steps);
    tr.times.push_back(t);
    tr.states.push_back(two_vertex_exact(t));
  }
  return tr;
}

} // namespace testing_support

#endif
