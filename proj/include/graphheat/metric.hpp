#ifndef GRAPHHEAT_METRIC_HPP
#define GRAPHHEAT_METRIC_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "graphheat/error.hpp"
#include "graphheat/graph.hpp"

namespace graphheat {

enum class MetricKind { combinatorial, canonical_intrinsic, explicit_pairs };

inline std::string to_string(MetricKind k) {
  switch (k) {
  case MetricKind::combinatorial: return "combinatorial";
  case MetricKind::canonical_intrinsic: return "canonical-intrinsic";
  case MetricKind::explicit_pairs: return "explicit";
  }
  return "unknown";
}

inline MetricKind metric_kind_from_string(const std::string& s) {
  if (s == "combinatorial")
    return MetricKind::combinatorial;
  if (s == "canonical-intrinsic" || s == "canonical")
    return MetricKind::canonical_intrinsic;
  if (s == "explicit")
    return MetricKind::explicit_pairs;
  throw input_error("unknown metric kind '" + s + "'");
}

struct DistancePair {
  VertexId u;
  VertexId v;
  double d;
};

// Pseudo metric on a truncation, realised as the path metric of a
// nonnegative length graph. All-pairs distances are tabulated below
// `dense_limit` vertices; above it rows are computed on demand.
class PseudoMetric {
public:
  static constexpr std::size_t dense_limit = 5000;

  PseudoMetric() = default;

  MetricKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return n_; }
  bool tabulated() const noexcept { return !table_.empty() || n_ == 0; }

  double operator()(Vertex x, Vertex y) const {
    if (x == y)
      return 0.0;
    if (!table_.empty())
      return table_[x * n_ + y];
    return distances_from(x)[y];
  }

  std::vector<double> distances_from(Vertex x) const {
    if (!table_.empty())
      return {table_.begin() + static_cast<std::ptrdiff_t>(x * n_),
              table_.begin() + static_cast<std::ptrdiff_t>((x + 1) * n_)};
    return dijkstra(x);
  }

  // d(x, y) for the k-th adjacency entry of the underlying graph.
  double edge_distance(std::size_t k) const { return edge_dist_[k]; }
  const std::vector<double>& edge_distances() const noexcept { return edge_dist_; }

  // sup{d(x, y) : omega(x, y) > 0}
  double jump_size() const noexcept { return jump_; }

  // Builds the path metric of the length graph given in CSR form. The
  // resulting distances between graph-adjacent vertices are cached.
  static PseudoMetric from_lengths(const WeightedGraph& g, MetricKind kind,
                                   std::vector<std::size_t> offsets,
                                   std::vector<Vertex> targets,
                                   std::vector<double> lengths) {
    PseudoMetric m;
    m.kind_ = kind;
    m.n_ = g.size();
    m.offsets_ = std::move(offsets);
    m.targets_ = std::move(targets);
    m.lengths_ = std::move(lengths);
    if (m.n_ <= dense_limit) {
      m.table_.resize(m.n_ * m.n_);
      for (Vertex x = 0; x < m.n_; ++x) {
        auto row = m.dijkstra(x);
        std::copy(row.begin(), row.end(), m.table_.begin() + static_cast<std::ptrdiff_t>(x * m.n_));
      }
      // Enforce exact symmetry against rounding in path sums.
      for (Vertex x = 0; x < m.n_; ++x)
        for (Vertex y = x + 1; y < m.n_; ++y) {
          double v = std::min(m.table_[x * m.n_ + y], m.table_[y * m.n_ + x]);
          m.table_[x * m.n_ + y] = m.table_[y * m.n_ + x] = v;
        }
    }
    m.edge_dist_.resize(g.adjacency_size());
    m.jump_ = 0.0;
    for (Vertex x = 0; x < g.size(); ++x) {
      std::vector<double> row;
      if (m.table_.empty())
        row = m.dijkstra(x);
      std::size_t k = g.adjacency_offset(x);
      for (const auto& nb : g.neighbors(x)) {
        double d = m.table_.empty() ? row[nb.v] : m.table_[x * m.n_ + nb.v];
        if (!std::isfinite(d))
          throw graph_error("finite-jump", "no finite distance between adjacent vertices " +
                                               std::to_string(g.id(x)) + " and " +
                                               std::to_string(g.id(nb.v)));
        m.edge_dist_[k++] = d;
        m.jump_ = std::max(m.jump_, d);
      }
    }
    return m;
  }

private:
  std::vector<double> dijkstra(Vertex src) const {
    std::vector<double> dist(n_, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, Vertex>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[src] = 0.0;
    pq.push({0.0, src});
    while (!pq.empty()) {
      auto [d, x] = pq.top();
      pq.pop();
      if (d > dist[x])
        continue;
      for (std::size_t k = offsets_[x]; k < offsets_[x + 1]; ++k) {
        double nd = d + lengths_[k];
        Vertex y = targets_[k];
        if (nd < dist[y]) {
          dist[y] = nd;
          pq.push({nd, y});
        }
      }
    }
    return dist;
  }

  MetricKind kind_ = MetricKind::combinatorial;
  std::size_t n_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<Vertex> targets_;
  std::vector<double> lengths_;
  std::vector<double> table_;
  std::vector<double> edge_dist_;
  double jump_ = 0.0;
};

// Path metric of the graph with a per-adjacency-entry edge length.
inline PseudoMetric path_metric(const WeightedGraph& g, MetricKind kind,
                                const std::function<double(Vertex, const Neighbor&)>& length) {
  std::vector<std::size_t> offsets{0};
  std::vector<Vertex> targets;
  std::vector<double> lengths;
  for (Vertex x = 0; x < g.size(); ++x) {
    for (const auto& nb : g.neighbors(x)) {
      targets.push_back(nb.v);
      lengths.push_back(length(x, nb));
    }
    offsets.push_back(targets.size());
  }
  return PseudoMetric::from_lengths(g, kind, std::move(offsets), std::move(targets),
                                    std::move(lengths));
}

// Hop-count metric; on Z this is |x - y|.
inline PseudoMetric combinatorial_metric(const WeightedGraph& g) {
  return path_metric(g, MetricKind::combinatorial, [](Vertex, const Neighbor&) { return 1.0; });
}

// Path metric with edge length min(Deg(x)^{-1/2}, Deg(y)^{-1/2}). Deg uses the
// full degree of the untruncated graph (including exterior weight), so every
// vertex satisfies (1/mu) sum_y omega d^2 <= 1.
inline PseudoMetric canonical_intrinsic_metric(const WeightedGraph& g) {
  return path_metric(g, MetricKind::canonical_intrinsic, [&g](Vertex x, const Neighbor& nb) {
    double dx = g.total_degree(x) / g.mu(x);
    double dy = g.total_degree(nb.v) / g.mu(nb.v);
    return 1.0 / std::sqrt(std::max(dx, dy));
  });
}

// Metric given by explicit distances on a set of vertex pairs. The listed
// pairs must connect the graph and be consistent with the triangle
// inequality; the metric is the path closure of the listed values.
inline PseudoMetric explicit_metric(const WeightedGraph& g, const std::vector<DistancePair>& pairs) {
  std::vector<std::vector<std::pair<Vertex, double>>> lists(g.size());
  for (const auto& p : pairs) {
    if (!(p.d >= 0.0) || !std::isfinite(p.d))
      throw graph_error("nonnegative-distance", "pair (" + std::to_string(p.u) + "," +
                                                    std::to_string(p.v) + ")");
    Vertex a = g.index_of(p.u), b = g.index_of(p.v);
    if (a == b) {
      if (p.d != 0.0)
        throw graph_error("zero-diagonal", "vertex " + std::to_string(p.u));
      continue;
    }
    lists[a].push_back({b, p.d});
    lists[b].push_back({a, p.d});
  }
  std::vector<std::size_t> offsets{0};
  std::vector<Vertex> targets;
  std::vector<double> lengths;
  for (Vertex x = 0; x < g.size(); ++x) {
    for (auto [y, d] : lists[x]) {
      targets.push_back(y);
      lengths.push_back(d);
    }
    offsets.push_back(targets.size());
  }
  auto m = PseudoMetric::from_lengths(g, MetricKind::explicit_pairs, std::move(offsets),
                                      std::move(targets), std::move(lengths));
  for (const auto& p : pairs) {
    Vertex a = g.index_of(p.u), b = g.index_of(p.v);
    double closed = m(a, b);
    if (!std::isfinite(closed))
      throw graph_error("finite-distance", "pairs do not connect vertex " + std::to_string(p.u) +
                                               " to " + std::to_string(p.v));
    if (closed < p.d - 1e-12 * std::max(1.0, p.d))
      throw graph_error("triangle", "listed d(" + std::to_string(p.u) + "," +
                                        std::to_string(p.v) + ")=" + std::to_string(p.d) +
                                        " exceeds a path of length " + std::to_string(closed));
  }
  return m;
}

inline double jump_size(const WeightedGraph&, const PseudoMetric& d) { return d.jump_size(); }

// Smallest C0 with (1/mu(x)) sum_y omega(x, y) d^q(x, y) <= C0 for all x.
inline double intrinsic_bound(const WeightedGraph& g, const PseudoMetric& d, double q) {
  if (!(q > 0.0))
    throw precondition_error("intrinsic bound needs q > 0");
  double c0 = 0.0;
  for (Vertex x = 0; x < g.size(); ++x) {
    double acc = 0.0;
    std::size_t k = g.adjacency_offset(x);
    for (const auto& nb : g.neighbors(x))
      acc += nb.w * std::pow(d.edge_distance(k++), q);
    c0 = std::max(c0, acc / g.mu(x));
  }
  return c0;
}

// True when d is intrinsic in the usual sense (q = 2, C0 = 1).
inline bool is_intrinsic(const WeightedGraph& g, const PseudoMetric& d, double tol = 1e-12) {
  return intrinsic_bound(g, d, 2.0) <= 1.0 + tol;
}

struct Ball {
  Vertex center = 0;
  double radius = 0.0;
  std::vector<Vertex> members;

  bool contains(Vertex x) const {
    return std::binary_search(members.begin(), members.end(), x);
  }
};

// B_r(x0) = {x : d(x, x0) < r}
inline Ball ball(const WeightedGraph& g, const PseudoMetric& d, Vertex x0, double r) {
  if (x0 >= g.size())
    throw input_error("ball centre out of range");
  Ball b{x0, r, {}};
  auto row = d.distances_from(x0);
  for (Vertex x = 0; x < g.size(); ++x)
    if (row[x] < r)
      b.members.push_back(x);
  return b;
}

// Pseudo-metric axioms on the truncation: exhaustive triples below 300
// vertices, otherwise `samples` random triples.
template <class Rng>
ValidationReport check_metric_axioms(const PseudoMetric& d, Rng& rng, std::size_t samples = 100000) {
  ValidationReport rep;
  const std::size_t n = d.size();
  AxiomCheck diag{"zero-diagonal", true, {}}, sym{"symmetry", true, {}},
      nonneg{"nonnegative", true, {}}, tri{"triangle", true, {}};
  auto fail = [](AxiomCheck& c, std::string w) {
    if (c.passed) {
      c.passed = false;
      c.witness = std::move(w);
    }
  };
  std::vector<std::vector<double>> rows;
  if (n < 300) {
    rows.reserve(n);
    for (Vertex x = 0; x < n; ++x)
      rows.push_back(d.distances_from(x));
  }
  auto dist = [&](Vertex a, Vertex b) { return n < 300 ? rows[a][b] : d(a, b); };
  if (n < 300) {
    for (Vertex x = 0; x < n; ++x) {
      if (rows[x][x] != 0.0)
        fail(diag, std::to_string(x));
      for (Vertex y = 0; y < n; ++y) {
        if (rows[x][y] != rows[y][x])
          fail(sym, std::to_string(x) + "," + std::to_string(y));
        if (!(rows[x][y] >= 0.0))
          fail(nonneg, std::to_string(x) + "," + std::to_string(y));
      }
    }
    for (Vertex x = 0; x < n; ++x)
      for (Vertex z = 0; z < n; ++z)
        for (Vertex y = 0; y < n; ++y) {
          double lhs = rows[x][y], rhs = rows[x][z] + rows[z][y];
          if (lhs > rhs + 1e-12 * std::max(1.0, rhs))
            fail(tri, std::to_string(x) + "," + std::to_string(y) + " via " + std::to_string(z));
        }
  } else if (n > 0) {
    std::uniform_int_distribution<Vertex> vd(0, n - 1);
    for (std::size_t s = 0; s < samples; ++s) {
      Vertex x = vd(rng), y = vd(rng), z = vd(rng);
      double dxy = dist(x, y), dyx = dist(y, x);
      if (dist(x, x) != 0.0)
        fail(diag, std::to_string(x));
      if (dxy != dyx)
        fail(sym, std::to_string(x) + "," + std::to_string(y));
      if (!(dxy >= 0.0))
        fail(nonneg, std::to_string(x) + "," + std::to_string(y));
      double rhs = dist(x, z) + dist(z, y);
      if (dxy > rhs + 1e-12 * std::max(1.0, rhs))
        fail(tri, std::to_string(x) + "," + std::to_string(y) + " via " + std::to_string(z));
    }
  }
  rep.checks = {diag, sym, nonneg, tri};
  return rep;
}

} // namespace graphheat

#endif
