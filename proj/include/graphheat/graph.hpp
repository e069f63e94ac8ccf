#ifndef GRAPHHEAT_GRAPH_HPP
#define GRAPHHEAT_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "graphheat/error.hpp"

namespace graphheat {

using Vertex = std::size_t;
using VertexId = std::int64_t;

// Raw, unvalidated description of a weighted graph (G, omega, mu).
//
// Each edge entry sets omega(u, v) = w. If the reverse entry is absent the
// symmetric value is implied; when both directions are listed they must
// agree. `exterior` is the total weight from a truncation vertex to vertices
// that were cut away; a positive value tags the vertex as boundary layer and
// the cut neighbours carry the exterior value (zero) in the Laplacian.
struct VertexSpec {
  VertexId id = 0;
  double mu = 1.0;
  double exterior = 0.0;
  std::optional<double> rho;
};

struct EdgeSpec {
  VertexId u = 0;
  VertexId v = 0;
  double w = 0.0;
};

struct GraphSpec {
  std::vector<VertexSpec> vertices;
  std::vector<EdgeSpec> edges;
};

struct AxiomCheck {
  std::string axiom;
  bool passed = true;
  std::string witness;
};

struct ValidationReport {
  std::vector<AxiomCheck> checks;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const AxiomCheck& c) { return c.passed; });
  }

  const AxiomCheck* first_failure() const {
    for (const auto& c : checks)
      if (!c.passed)
        return &c;
    return nullptr;
  }

  const AxiomCheck* find(const std::string& axiom) const {
    for (const auto& c : checks)
      if (c.axiom == axiom)
        return &c;
    return nullptr;
  }
};

struct Neighbor {
  Vertex v;
  double w;
};

class WeightedGraph;
WeightedGraph build_graph(const GraphSpec& spec);

// Immutable locally finite weighted graph stored as symmetric adjacency
// lists. Vertices are addressed by dense indices 0..size()-1; `id()` maps an
// index back to the external vertex id.
class WeightedGraph {
public:
  WeightedGraph() = default;

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t edge_count() const noexcept { return adj_.size() / 2; }

  VertexId id(Vertex x) const { return ids_.at(x); }
  const std::vector<VertexId>& ids() const noexcept { return ids_; }

  bool contains(VertexId id) const { return index_.count(id) != 0; }

  Vertex index_of(VertexId id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw input_error("unknown vertex id " + std::to_string(id));
    return it->second;
  }

  std::span<const Neighbor> neighbors(Vertex x) const {
    return {adj_.data() + offsets_[x], offsets_[x + 1] - offsets_[x]};
  }

  // Position of the first adjacency entry of x; per-entry data (edge lengths)
  // is laid out in the same order as `neighbors`.
  std::size_t adjacency_offset(Vertex x) const { return offsets_[x]; }
  std::size_t adjacency_size() const noexcept { return adj_.size(); }

  double mu(Vertex x) const { return mu_[x]; }
  const std::vector<double>& measure() const noexcept { return mu_; }

  double exterior_weight(Vertex x) const { return exterior_[x]; }
  bool is_boundary(Vertex x) const { return exterior_[x] > 0.0; }
  bool has_boundary() const {
    return std::any_of(exterior_.begin(), exterior_.end(),
                       [](double e) { return e > 0.0; });
  }

  // deg(x) = sum_y omega(x, y) over the vertices present in the truncation.
  double degree(Vertex x) const { return degree_[x]; }
  // deg(x) plus the weight towards cut-away exterior vertices.
  double total_degree(Vertex x) const { return degree_[x] + exterior_[x]; }
  // Deg(x) = deg(x) / mu(x).
  double weighted_degree(Vertex x) const { return degree_[x] / mu_[x]; }

  double weight(Vertex x, Vertex y) const {
    for (const auto& nb : neighbors(x))
      if (nb.v == y)
        return nb.w;
    return 0.0;
  }

  // Densities listed in the source document, if any.
  const std::vector<std::optional<double>>& declared_rho() const noexcept { return rho_; }

private:
  friend WeightedGraph build_graph(const GraphSpec& spec);

  std::vector<VertexId> ids_;
  std::unordered_map<VertexId, Vertex> index_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Neighbor> adj_;
  std::vector<double> mu_;
  std::vector<double> exterior_;
  std::vector<double> degree_;
  std::vector<std::optional<double>> rho_;
};

namespace detail {

inline std::string pair_str(VertexId a, VertexId b) {
  return "(" + std::to_string(a) + "," + std::to_string(b) + ")";
}

struct ResolvedEdges {
  std::map<std::pair<VertexId, VertexId>, double> weight; // ordered pair -> w
};

inline std::vector<std::vector<Vertex>> components(std::size_t n,
                                                   const std::vector<std::vector<Vertex>>& adj) {
  std::vector<std::vector<Vertex>> out;
  std::vector<char> seen(n, 0);
  std::vector<Vertex> stack;
  for (Vertex s = 0; s < n; ++s) {
    if (seen[s])
      continue;
    out.emplace_back();
    stack.push_back(s);
    seen[s] = 1;
    while (!stack.empty()) {
      Vertex x = stack.back();
      stack.pop_back();
      out.back().push_back(x);
      for (Vertex y : adj[x])
        if (!seen[y]) {
          seen[y] = 1;
          stack.push_back(y);
        }
    }
  }
  return out;
}

} // namespace detail

// Checks every axiom of a weighted graph truncation and reports a witness for
// each failure. Never throws.
inline ValidationReport validate_graph(const GraphSpec& spec) {
  ValidationReport rep;
  rep.checks.reserve(16); // add() hands out references; no reallocation allowed
  auto add = [&](std::string axiom) -> AxiomCheck& {
    rep.checks.push_back({std::move(axiom), true, {}});
    return rep.checks.back();
  };
  auto fail = [](AxiomCheck& c, std::string witness) {
    if (c.passed) {
      c.passed = false;
      c.witness = std::move(witness);
    }
  };

  auto& unique = add("unique-ids");
  std::unordered_map<VertexId, Vertex> index;
  for (std::size_t i = 0; i < spec.vertices.size(); ++i)
    if (!index.emplace(spec.vertices[i].id, i).second)
      fail(unique, "vertex " + std::to_string(spec.vertices[i].id));

  auto& nonempty = add("nonempty");
  if (spec.vertices.empty())
    fail(nonempty, "no vertices");

  auto& measure = add("positive-measure");
  for (const auto& v : spec.vertices)
    if (!(v.mu > 0.0) || !std::isfinite(v.mu))
      fail(measure, "vertex " + std::to_string(v.id));

  auto& exterior = add("nonnegative-exterior");
  for (const auto& v : spec.vertices)
    if (!(v.exterior >= 0.0) || !std::isfinite(v.exterior))
      fail(exterior, "vertex " + std::to_string(v.id));

  auto& density = add("positive-density");
  for (const auto& v : spec.vertices)
    if (v.rho && (!(*v.rho > 0.0) || !std::isfinite(*v.rho)))
      fail(density, "vertex " + std::to_string(v.id));

  auto& known = add("known-endpoints");
  auto& nonneg = add("nonnegative-weights");
  auto& loops = add("no-loops");
  auto& simple = add("simple");
  auto& symmetry = add("symmetry");
  auto& finite = add("finite-degree");

  std::map<std::pair<VertexId, VertexId>, double> listed;
  for (const auto& e : spec.edges) {
    if (!index.count(e.u) || !index.count(e.v)) {
      fail(known, detail::pair_str(e.u, e.v));
      continue;
    }
    if (!(e.w >= 0.0))
      fail(nonneg, detail::pair_str(e.u, e.v));
    if (!std::isfinite(e.w))
      fail(finite, detail::pair_str(e.u, e.v));
    if (e.u == e.v && e.w != 0.0)
      fail(loops, "vertex " + std::to_string(e.u));
    if (!listed.emplace(std::make_pair(e.u, e.v), e.w).second)
      fail(simple, "duplicate entry " + detail::pair_str(e.u, e.v));
  }
  for (const auto& [key, w] : listed) {
    auto rev = listed.find({key.second, key.first});
    if (rev != listed.end() && rev->second != w)
      fail(symmetry, "omega" + detail::pair_str(key.first, key.second) + "=" +
                         std::to_string(w) + " but omega" +
                         detail::pair_str(key.second, key.first) + "=" +
                         std::to_string(rev->second));
  }

  // Degree finiteness: sums of finite weights over a finite truncation.
  std::unordered_map<VertexId, double> deg;
  for (const auto& [key, w] : listed)
    if (key.first != key.second && std::isfinite(w) && w > 0.0) {
      deg[key.first] += w;
      if (!listed.count({key.second, key.first}))
        deg[key.second] += w;
    }
  for (const auto& [id, d] : deg)
    if (!std::isfinite(d))
      fail(finite, "vertex " + std::to_string(id));

  auto& connected = add("connected");
  if (unique.passed && known.passed && !spec.vertices.empty()) {
    std::vector<std::vector<Vertex>> adj(spec.vertices.size());
    for (const auto& [key, w] : listed)
      if (w > 0.0 && key.first != key.second) {
        Vertex a = index[key.first], b = index[key.second];
        adj[a].push_back(b);
        adj[b].push_back(a);
      }
    auto comps = detail::components(spec.vertices.size(), adj);
    if (comps.size() > 1) {
      std::ostringstream os;
      os << comps.size() << " components; vertex " << spec.vertices[comps[0][0]].id
         << " cannot reach vertex " << spec.vertices[comps[1][0]].id;
      fail(connected, os.str());
    }
  }

  // A finite truncation is locally finite by construction.
  add("locally-finite");
  return rep;
}

// Builds an immutable graph; throws graph_error naming the first violated
// axiom.
inline WeightedGraph build_graph(const GraphSpec& spec) {
  auto rep = validate_graph(spec);
  if (const auto* f = rep.first_failure())
    throw graph_error(f->axiom, f->witness);

  WeightedGraph g;
  const std::size_t n = spec.vertices.size();
  g.ids_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = spec.vertices[i];
    g.ids_.push_back(v.id);
    g.index_.emplace(v.id, i);
    g.mu_.push_back(v.mu);
    g.exterior_.push_back(v.exterior);
    g.rho_.push_back(v.rho);
  }

  std::vector<std::vector<Neighbor>> lists(n);
  std::map<std::pair<Vertex, Vertex>, double> undirected;
  for (const auto& e : spec.edges) {
    if (e.w <= 0.0 || e.u == e.v)
      continue;
    Vertex a = g.index_.at(e.u), b = g.index_.at(e.v);
    undirected[{std::min(a, b), std::max(a, b)}] = e.w;
  }
  for (const auto& [key, w] : undirected) {
    lists[key.first].push_back({key.second, w});
    lists[key.second].push_back({key.first, w});
  }
  g.degree_.assign(n, 0.0);
  for (Vertex x = 0; x < n; ++x) {
    std::sort(lists[x].begin(), lists[x].end(),
              [](const Neighbor& a, const Neighbor& b) { return a.v < b.v; });
    for (const auto& nb : lists[x]) {
      g.adj_.push_back(nb);
      g.degree_[x] += nb.w;
    }
    g.offsets_.push_back(g.adj_.size());
  }
  return g;
}

// Rebuilds the document form of a graph (edges listed once, u < v by index).
inline GraphSpec to_spec(const WeightedGraph& g) {
  GraphSpec spec;
  for (Vertex x = 0; x < g.size(); ++x)
    spec.vertices.push_back({g.id(x), g.mu(x), g.exterior_weight(x), g.declared_rho()[x]});
  for (Vertex x = 0; x < g.size(); ++x)
    for (const auto& nb : g.neighbors(x))
      if (x < nb.v)
        spec.edges.push_back({g.id(x), g.id(nb.v), nb.w});
  return spec;
}

struct DegreeInfo {
  double deg;
  double Deg;
};

inline std::vector<DegreeInfo> degrees(const WeightedGraph& g) {
  std::vector<DegreeInfo> out(g.size());
  for (Vertex x = 0; x < g.size(); ++x)
    out[x] = {g.degree(x), g.weighted_degree(x)};
  return out;
}

// ---------------------------------------------------------------------------
// Builders for truncations of standard infinite graphs and small test graphs.

// The box {-h..h}^dim of the lattice Z^dim with constant weight and measure.
// Vertices on the box surface are tagged boundary with the weight of their
// missing lattice neighbours. In one dimension the vertex id is the integer
// coordinate; otherwise it is the row-major index of the shifted coordinates.
inline GraphSpec lattice_box_spec(int dim, int half_width, double weight = 1.0, double mu = 1.0) {
  if (dim < 1 || half_width < 0)
    throw input_error("lattice box needs dim >= 1 and half-width >= 0");
  const std::int64_t side = 2 * static_cast<std::int64_t>(half_width) + 1;
  std::int64_t count = 1;
  for (int k = 0; k < dim; ++k)
    count *= side;

  GraphSpec spec;
  auto id_of = [&](std::int64_t linear) { return dim == 1 ? linear - half_width : linear; };
  std::vector<std::int64_t> coord(dim);
  for (std::int64_t lin = 0; lin < count; ++lin) {
    std::int64_t rest = lin;
    int missing = 0;
    for (int k = dim - 1; k >= 0; --k) {
      coord[k] = rest % side;
      rest /= side;
    }
    for (int k = 0; k < dim; ++k) {
      if (coord[k] == 0)
        ++missing;
      if (coord[k] == side - 1)
        ++missing;
    }
    spec.vertices.push_back({id_of(lin), mu, missing * weight, std::nullopt});
    std::int64_t stride = 1;
    for (int k = dim - 1; k >= 0; --k) {
      if (coord[k] + 1 < side)
        spec.edges.push_back({id_of(lin), id_of(lin + stride), weight});
      stride *= side;
    }
  }
  return spec;
}

// The segment {-h..h} of Z with unit-like data.
inline GraphSpec z_segment_spec(int half_width, double weight = 1.0, double mu = 1.0) {
  return lattice_box_spec(1, half_width, weight, mu);
}

// Star with `leaves` leaves; centre id 0, leaves 1..leaves. No boundary layer.
inline GraphSpec star_spec(int leaves, double weight = 1.0, double mu = 1.0) {
  GraphSpec spec;
  spec.vertices.push_back({0, mu, 0.0, std::nullopt});
  for (int i = 1; i <= leaves; ++i) {
    spec.vertices.push_back({i, mu, 0.0, std::nullopt});
    spec.edges.push_back({0, i, weight});
  }
  return spec;
}

struct RandomGraphOptions {
  std::size_t min_vertices = 2;
  std::size_t max_vertices = 200;
  double extra_edge_factor = 1.0;   // extra edges ~ factor * n
  double weight_lo = 0.1, weight_hi = 2.0;
  double mu_lo = 0.2, mu_hi = 3.0;
  double boundary_fraction = 0.0;   // share of vertices given exterior weight
};

// Random connected graph: a random recursive tree plus extra random edges,
// with uniformly drawn weights and measures.
template <class Rng>
GraphSpec random_connected_spec(Rng& rng, const RandomGraphOptions& opt = {}) {
  std::uniform_int_distribution<std::size_t> nd(opt.min_vertices, opt.max_vertices);
  const std::size_t n = nd(rng);
  std::uniform_real_distribution<double> wd(opt.weight_lo, opt.weight_hi);
  std::uniform_real_distribution<double> md(opt.mu_lo, opt.mu_hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  GraphSpec spec;
  for (std::size_t i = 0; i < n; ++i) {
    double ext = unit(rng) < opt.boundary_fraction ? wd(rng) : 0.0;
    spec.vertices.push_back({static_cast<VertexId>(i), md(rng), ext, std::nullopt});
  }
  std::map<std::pair<std::size_t, std::size_t>, double> edges;
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> parent(0, i - 1);
    edges[{parent(rng), i}] = wd(rng);
  }
  if (n > 2) {
    const auto extra = static_cast<std::size_t>(opt.extra_edge_factor * static_cast<double>(n));
    std::uniform_int_distribution<std::size_t> vd(0, n - 1);
    for (std::size_t k = 0; k < extra; ++k) {
      std::size_t a = vd(rng), b = vd(rng);
      if (a == b)
        continue;
      edges.emplace(std::make_pair(std::min(a, b), std::max(a, b)), wd(rng));
    }
  }
  for (const auto& [key, w] : edges)
    spec.edges.push_back({static_cast<VertexId>(key.first), static_cast<VertexId>(key.second), w});
  return spec;
}

} // namespace graphheat

#endif
