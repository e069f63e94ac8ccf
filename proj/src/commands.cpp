#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "graphheat/graphheat.hpp"
#include "graphheat/io.hpp"

namespace graphheat::cli {

namespace fs = std::filesystem;

namespace {

struct Loaded {
  GraphDocument doc;
  WeightedGraph g;
  PseudoMetric d;
  DensityField rho;
  std::optional<double> truncation_radius;
};

GraphDocument graph_document(const GraphOptions& o, std::uint64_t seed,
                             std::optional<double>* truncation = nullptr) {
  GraphDocument doc;
  if (!o.file.empty()) {
    doc = load_graph_document(o.file);
  } else if (o.family == "z-segment") {
    doc.graph = z_segment_spec(o.half_width, o.weight, o.mu);
    if (truncation)
      *truncation = o.half_width;
  } else if (o.family == "lattice") {
    doc.graph = lattice_box_spec(o.dim, o.half_width, o.weight, o.mu);
    if (truncation)
      *truncation = o.half_width;
  } else if (o.family == "star") {
    doc.graph = star_spec(o.leaves, o.weight, o.mu);
  } else if (o.family == "random") {
    std::mt19937_64 rng(seed);
    RandomGraphOptions ro;
    ro.min_vertices = ro.max_vertices = static_cast<std::size_t>(std::max(1, o.vertices));
    doc.graph = random_connected_spec(rng, ro);
  } else {
    throw input_error("unknown family '" + o.family + "' (z-segment, lattice, star, random)");
  }
  if (!o.metric.empty())
    doc.metric = MetricSpec{metric_kind_from_string(o.metric), {}};
  if (!o.density_kind.empty())
    doc.density = DensitySpec{detail::profile_kind_from_string(o.density_kind), o.rho0, o.sigma, o.k, o.x0};
  return doc;
}

Loaded load(const GraphOptions& o, std::uint64_t seed) {
  std::optional<double> trunc;
  auto doc = graph_document(o, seed, &trunc);
  auto g = build_graph(doc.graph);
  auto d = make_metric(g, doc.metric);
  auto rho = make_density(g, d, doc.density);
  return Loaded{std::move(doc), std::move(g), std::move(d), std::move(rho), trunc};
}

fs::path out_path(const RunInfo& run, const std::string& name) { return fs::path(run.out_dir) / name; }

void write_json(const fs::path& p, const json& j) { write_file_atomic(p, j.dump(2) + "\n"); }

json run_stamp(const RunInfo& run) { return {{"seed", run.seed}, {"config_hash", run.config_hash}}; }

Vertex origin(const Loaded& L, std::int64_t x0) {
  if (!L.g.contains(x0))
    throw input_error("x0=" + std::to_string(x0) + " is not a vertex");
  return L.g.index_of(x0);
}

VertexFunction initial_data(const Loaded& L, const SimulateOptions& s, Vertex x0, std::uint64_t seed) {
  VertexFunction u(L.g.size());
  if (s.initial == "zero")
    return u;
  if (s.initial == "delta") {
    u[x0] = s.amplitude;
    return u;
  }
  if (s.initial == "random") {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> val(-s.amplitude, s.amplitude);
    auto row = L.d.distances_from(x0);
    for (Vertex x = 0; x < L.g.size(); ++x)
      if (row[x] < s.support && !L.g.is_boundary(x))
        u[x] = val(rng);
    return u;
  }
  if (s.initial == "file")
    return parse_vertex_function(L.g, read_file(s.initial_file), s.initial_file);
  throw input_error("unknown initial data '" + s.initial + "' (zero, delta, random, file)");
}

Trajectory simulate(const Loaded& L, const SimulateOptions& s, Vertex x0, std::uint64_t seed) {
  SolveOptions so;
  so.T = s.T;
  so.dt = s.dt;
  so.scheme = scheme_from_string(s.scheme);
  so.stride = s.stride;
  auto u0 = initial_data(L, s, x0, seed);
  auto tr = solve(L.g, L.rho, u0, so);
  tr.truncation_radius = L.truncation_radius;
  return tr;
}

std::vector<double> default_radii(const Loaded& L, Vertex x0) {
  double far = 0.0;
  for (double v : L.d.distances_from(x0))
    far = std::max(far, v);
  std::vector<double> radii;
  const double s = std::max(L.d.jump_size(), 1e-12);
  for (double r = 2.0 * s; r <= far + s; r *= 2.0)
    if (r > 1.0)
      radii.push_back(r);
  return radii;
}

} // namespace

// ---------------------------------------------------------------------------
// graph

int run_graph_build(const GraphOptions& o, const RunInfo& run, const std::string& output) {
  auto doc = graph_document(o, run.seed);
  auto g = build_graph(doc.graph); // rejects axiom violations
  json j = to_json(doc);
  const std::string text = j.dump(2) + "\n";
  if (output.empty() || output == "-")
    std::cout << text;
  else
    write_file_atomic(output, text);
  std::cerr << "graph: " << g.size() << " vertices, " << g.edge_count() << " edges\n";
  return exit_ok;
}

int run_graph_validate(const GraphOptions& o, const RunInfo& run) {
  auto doc = graph_document(o, run.seed);
  auto rep = validate_graph(doc.graph);
  for (const auto& c : rep.checks)
    std::cout << c.axiom << ": " << (c.passed ? "pass" : "FAIL") << (c.witness.empty() ? "" : " (" + c.witness + ")")
              << "\n";
  if (!rep.ok()) {
    std::cerr << "violated axiom: " << rep.first_failure()->axiom << "\n";
    return exit_violation;
  }
  auto g = build_graph(doc.graph);
  auto d = make_metric(g, doc.metric);
  std::mt19937_64 rng(run.seed);
  auto mrep = check_metric_axioms(d, rng);
  for (const auto& c : mrep.checks)
    std::cout << "metric-" << c.axiom << ": " << (c.passed ? "pass" : "FAIL")
              << (c.witness.empty() ? "" : " (" + c.witness + ")") << "\n";
  if (!mrep.ok()) {
    std::cerr << "violated axiom: metric-" << mrep.first_failure()->axiom << "\n";
    return exit_violation;
  }
  return exit_ok;
}

int run_graph_metric(const GraphOptions& o, const RunInfo& run, const std::string& output) {
  auto L = load(o, run.seed);
  json j{{"kind", to_string(L.d.kind())},
         {"vertices", L.g.size()},
         {"jump_size", L.d.jump_size()},
         {"intrinsic_bound_q1", intrinsic_bound(L.g, L.d, 1.0)},
         {"intrinsic_bound_q2", intrinsic_bound(L.g, L.d, 2.0)},
         {"intrinsic", is_intrinsic(L.g, L.d)},
         {"run", run_stamp(run)}};
  const std::string text = j.dump(2) + "\n";
  if (output.empty() || output == "-")
    std::cout << text;
  else
    write_file_atomic(output, text);
  return exit_ok;
}

// ---------------------------------------------------------------------------
// simulate

int run_simulate(const GraphOptions& o, const SimulateOptions& s, const RunInfo& run) {
  auto L = load(o, run.seed);
  const Vertex x0 = origin(L, o.x0);
  auto tr = simulate(L, s, x0, run.seed);
  write_file_atomic(out_path(run, "trajectory.csv"), trajectory_csv(L.g, tr));
  write_json(out_path(run, "trajectory.meta.json"), trajectory_metadata(tr, run.config_hash, run.seed));
  std::cerr << "trajectory: " << tr.samples() << " samples x " << L.g.size() << " vertices -> "
            << out_path(run, "trajectory.csv").string() << "\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------
// verify

namespace {

struct SuiteContext {
  const VerifyOptions& v;
  const GraphOptions& go;
  std::uint64_t seed;
  Mode mode;
  std::vector<MarginReport> rows;
  std::vector<double> tols;
};

// Interior-supported random function on g.
template <class Rng>
VertexFunction random_interior_function(const WeightedGraph& g, Rng& rng) {
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  VertexFunction f(g.size());
  for (Vertex x = 0; x < g.size(); ++x)
    f[x] = g.is_boundary(x) ? 0.0 : val(rng);
  return f;
}

template <class Rng>
VertexFunction random_function(const WeightedGraph& g, Rng& rng) {
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  VertexFunction f(g.size());
  for (Vertex x = 0; x < g.size(); ++x)
    f[x] = val(rng);
  return f;
}

WeightedGraph suite_segment(const GraphOptions& go) { return build_graph(z_segment_spec(go.half_width)); }

template <class Rng>
WeightedGraph suite_random_graph(Rng& rng, double boundary_fraction) {
  RandomGraphOptions ro;
  ro.min_vertices = 20;
  ro.max_vertices = 120;
  ro.boundary_fraction = boundary_fraction;
  return build_graph(random_connected_spec(rng, ro));
}

void add_residual_rows(SuiteContext& C, const std::string& name, const std::vector<IdentityResidual>& rs) {
  MarginReport r{name, "relative-residual", Sense::nonpositive};
  detail::MarginTracker t(r);
  for (std::size_t i = 0; i < rs.size(); ++i)
    t.observe(rs[i].residual, rs[i].scale, 0, static_cast<double>(i));
  t.finish();
  C.rows.push_back(r);
  C.tols.push_back(C.v.tol);
}

void suite_calculus(SuiteContext& C) {
  std::mt19937_64 rng(C.seed);
  std::vector<IdentityResidual> ibp, prod, lap;
  for (int gi = 0; gi < C.v.random_graphs; ++gi) {
    auto g = suite_random_graph(rng, 0.1);
    std::uniform_int_distribution<Vertex> vd(0, g.size() - 1);
    for (int k = 0; k < C.v.trials; ++k) {
      auto f = random_interior_function(g, rng);
      auto h = random_function(g, rng);
      ibp.push_back(integration_by_parts_residual(g, f, h));
      Vertex x = vd(rng);
      if (!g.neighbors(x).empty())
        prod.push_back(product_rule_residual(f, h, x, g.neighbors(x)[0].v));
      lap.push_back(laplacian_product_residual(g, f, h, x));
    }
  }
  add_residual_rows(C, "integration-by-parts", ibp);
  add_residual_rows(C, "product-rule", prod);
  add_residual_rows(C, "laplacian-product", lap);
}

void suite_convexity(SuiteContext& C) {
  std::mt19937_64 rng(C.seed + 1);
  for (double alpha : {1e-3, 1e-1, 1.0})
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      auto psi = half_power_regularization(p, alpha);
      std::ostringstream ps;
      ps << "alpha=" << alpha << ";p=" << p;
      MarginReport r{"convexity", ps.str(), Sense::nonnegative};
      detail::MarginTracker t(r);
      for (int gi = 0; gi < C.v.random_graphs; ++gi) {
        auto g = suite_random_graph(rng, 0.1);
        for (int k = 0; k < 4; ++k) {
          auto u = random_function(g, rng);
          auto margins = convexity_margins(g, u, psi);
          auto lu = laplacian(g, u);
          for (Vertex x = 0; x < g.size(); ++x) {
            VertexFunction pu(g.size());
            double scale = std::abs(psi.derivative(u[x]) * lu[x]);
            double lp = 0.0;
            for (const auto& nb : g.neighbors(x))
              lp += nb.w * std::abs(psi.value(u[nb.v]) - psi.value(u[x]));
            scale = std::max(scale, lp / g.mu(x));
            t.observe(margins[x], scale, x, 0.0);
          }
        }
      }
      t.finish();
      C.rows.push_back(r);
      C.tols.push_back(C.v.tol);
    }
}

struct SuiteGraph {
  std::string label;
  WeightedGraph g;
  PseudoMetric d;
};

std::vector<SuiteGraph> lemma_graphs(SuiteContext& C) {
  std::vector<SuiteGraph> out;
  {
    auto g = suite_segment(C.go);
    auto d = canonical_intrinsic_metric(g);
    out.push_back({"z-segment", std::move(g), std::move(d)});
  }
  std::mt19937_64 rng(C.seed + 2);
  for (int i = 0; i < C.v.random_graphs; ++i) {
    auto g = suite_random_graph(rng, 0.15);
    auto d = canonical_intrinsic_metric(g);
    out.push_back({"random-" + std::to_string(i), std::move(g), std::move(d)});
  }
  return out;
}

void push(SuiteContext& C, MarginReport r, const std::string& label) {
  r.params = label + ";" + r.params;
  C.rows.push_back(std::move(r));
  C.tols.push_back(C.v.tol);
}

double radius_of(const SuiteGraph& G, Vertex x0) {
  double far = 0.0;
  for (double v : G.d.distances_from(x0))
    far = std::max(far, v);
  return far;
}

Vertex centre(const SuiteGraph& G) { return G.label == "z-segment" ? G.g.index_of(0) : 0; }

void suite_cutoff(SuiteContext& C, std::vector<SuiteGraph>& graphs) {
  for (auto& G : graphs) {
    const Vertex x0 = centre(G);
    const double s = G.d.jump_size(), far = radius_of(G, x0);
    const double c0 = intrinsic_bound(G.g, G.d, 1.0);
    for (double delta : {0.1, 0.2, 0.3})
      for (double frac : {0.5, 0.9}) {
        CutoffParams cp{frac * far + s, delta, x0, s};
        auto m = cutoff_margins(G.g, G.d, cp, c0, C.mode);
        push(C, m.gradient, G.label);
        if (m.energy)
          push(C, *m.energy, G.label);
        if (m.laplacian)
          push(C, *m.laplacian, G.label);
      }
  }
}

DensityField bounded_density(const SuiteGraph& G, std::uint64_t seed) {
  if (G.label == "z-segment")
    return constant_density(G.g, 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rd(0.5, 3.0);
  std::vector<double> rho(G.g.size());
  for (auto& r : rho)
    r = rd(rng);
  return DensityField(rho, DensityProfile{ProfileKind::bounded_below, 0.5, 0.0, 1.0, 0});
}

void suite_exp(SuiteContext& C, std::vector<SuiteGraph>& graphs, bool supersolution) {
  const std::vector<double> times{0.0, 0.5, 1.0};
  for (auto& G : graphs) {
    const Vertex x0 = centre(G);
    const double s = G.d.jump_size(), far = radius_of(G, x0);
    auto rho = bounded_density(G, C.seed + 3);
    const double rho0 = rho.profile()->rho0;
    const double c0 = intrinsic_bound(G.g, G.d, 1.0);
    for (double alpha : C.v.alphas) {
      ExpTestParams p{alpha, 0.0, 0.2, far, x0};
      if (supersolution) {
        p.gamma = C.v.gamma.value_or(exp_supersolution_gamma_threshold(alpha, s, rho0, c0));
        push(C, exp_supersolution_margin(G.g, G.d, rho, p, c0, C.mode, times), G.label);
      } else {
        p.gamma = C.v.gamma.value_or(exp_energy_gamma_threshold(alpha, s, rho0));
        push(C, exp_energy_margin(G.g, G.d, rho, p, C.mode), G.label);
      }
    }
  }
}

void suite_poly(SuiteContext& C, std::vector<SuiteGraph>& graphs, bool supersolution) {
  const std::vector<double> times{0.0, 0.5, 1.0};
  const double sigma_max = supersolution ? 1.0 : 2.0;
  for (auto& G : graphs) {
    const Vertex x0 = centre(G);
    const double s = G.d.jump_size();
    const double k = G.label == "z-segment" ? 2.0 : 1.0 + s;
    const double c0 = intrinsic_bound(G.g, G.d, 1.0);
    for (double sigma : C.v.sigmas) {
      if (!C.v.exploratory && sigma > sigma_max)
        continue;
      auto rho = power_density(G.g, G.d, x0, 1.0, sigma, k);
      for (double alpha : C.v.alphas) {
        PolyTestParams p{alpha, 0.0, k, x0};
        if (supersolution) {
          p.gamma = C.v.gamma.value_or(poly_supersolution_gamma_threshold(alpha, k, s, 1.0, c0));
          push(C, poly_supersolution_margin(G.g, G.d, rho, p, c0, C.mode, times), G.label);
        } else {
          p.gamma = C.v.gamma.value_or(poly_energy_gamma_threshold(alpha, k, s, 1.0));
          push(C, poly_energy_margin(G.g, G.d, rho, p, C.mode, times), G.label);
        }
      }
    }
  }
}

void suite_difference(SuiteContext& C, std::vector<SuiteGraph>& graphs) {
  for (auto& G : graphs) {
    const Vertex x0 = centre(G);
    const double s = G.d.jump_size();
    const double k = G.label == "z-segment" ? 2.0 : 1.0 + s;
    for (double alpha : C.v.alphas)
      push(C, poly_difference_margins(G.g, G.d, x0, k, alpha), G.label);
  }
}

MarginReport residual_row(const std::string& name, const std::string& params,
                          const InequalityResidual& r) {
  MarginReport m{name, params, Sense::nonnegative};
  detail::MarginTracker t(m);
  t.observe(r.slack(), r.scale, 0, 0.0);
  t.finish();
  return m;
}

void suite_propositions(SuiteContext& C, bool cutoff_form) {
  auto g = suite_segment(C.go);
  auto d = canonical_intrinsic_metric(g);
  const double s = d.jump_size();
  const Vertex x0 = g.index_of(0);
  const double far = C.go.half_width * s;
  auto rho = constant_density(g, 1.0);
  std::mt19937_64 rng(C.seed + 4);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  SolveOptions so;
  so.T = 0.1;
  so.dt = 1e-3;
  const double R = far, delta = 0.2;
  Cutoff eta({R, delta, x0, s}, d);
  auto ev = eta.values();
  const double c0 = intrinsic_bound(g, d, 1.0);
  for (int trial = 0; trial < std::min(C.v.trials, 5); ++trial) {
    VertexFunction u0(g.size());
    for (Vertex x = 0; x < g.size(); ++x)
      if (d(x, x0) < 0.3 * far)
        u0[x] = val(rng);
    auto tr = solve(g, rho, u0, so);
    for (double alpha : C.v.alphas) {
      std::ostringstream ps;
      ps << "trial=" << trial << ";alpha=" << alpha;
      if (cutoff_form) {
        ExpTestFunction zeta({alpha, exp_energy_gamma_threshold(alpha, s, 1.0), delta, R, x0}, d);
        for (double p : {2.0, 3.0}) {
          auto r = cutoff_energy_residual(g, tr, ev, zeta, p, so.T);
          C.rows.push_back(residual_row("cutoff-energy-inequality", ps.str() + ";p=" + std::to_string(p), r));
          C.tols.push_back(1e-9);
        }
      } else {
        ExpTestFunction zeta({alpha, exp_supersolution_gamma_threshold(alpha, s, 1.0, c0), delta, R, x0}, d);
        ProductWeight<Cutoff, ExpTestFunction> v(eta, zeta);
        for (double p : {1.0, 1.5, 2.0, 3.0}) {
          auto r = weighted_mass_residual(g, tr, v, p, so.T);
          C.rows.push_back(residual_row("weighted-mass-inequality", ps.str() + ";p=" + std::to_string(p), r));
          C.tols.push_back(1e-9);
        }
      }
    }
  }
}

} // namespace

int run_verify(const GraphOptions& go, const VerifyOptions& v, const RunInfo& run) {
  std::vector<std::string> suites;
  for (const auto& s : v.suites)
    if (!s.empty() && s != "none")
      suites.push_back(s);
  if (suites.empty()) {
    std::cerr << "warning: empty verification suite; nothing checked\n";
    return exit_ok;
  }
  const std::vector<std::string> all{"calculus",          "convexity",           "cutoff",
                                     "exp-energy",        "exp-supersolution",   "poly-energy",
                                     "poly-supersolution", "poly-difference",    "weighted-mass",
                                     "cutoff-energy"};
  std::vector<std::string> expanded;
  for (const auto& s : suites) {
    if (s == "default" || s == "all")
      expanded.insert(expanded.end(), all.begin(), all.end());
    else if (std::find(all.begin(), all.end(), s) != all.end())
      expanded.push_back(s);
    else
      throw input_error("unknown suite '" + s + "'");
  }
  SuiteContext C{v, go, run.seed, v.exploratory ? Mode::exploratory : Mode::strict, {}, {}};
  std::optional<std::vector<SuiteGraph>> graphs;
  auto lemma = [&]() -> std::vector<SuiteGraph>& {
    if (!graphs)
      graphs = lemma_graphs(C);
    return *graphs;
  };
  for (const auto& s : expanded) {
    if (s == "calculus")
      suite_calculus(C);
    else if (s == "convexity")
      suite_convexity(C);
    else if (s == "cutoff")
      suite_cutoff(C, lemma());
    else if (s == "exp-energy")
      suite_exp(C, lemma(), false);
    else if (s == "exp-supersolution")
      suite_exp(C, lemma(), true);
    else if (s == "poly-energy")
      suite_poly(C, lemma(), false);
    else if (s == "poly-supersolution")
      suite_poly(C, lemma(), true);
    else if (s == "poly-difference")
      suite_difference(C, lemma());
    else if (s == "weighted-mass")
      suite_propositions(C, false);
    else if (s == "cutoff-energy")
      suite_propositions(C, true);
  }

  // Placeholder graph for witness ids: suites mix graphs, so witnesses are
  // reported as vertex indices.
  std::string csv = margin_csv_header();
  std::optional<std::string> first_violation;
  for (std::size_t i = 0; i < C.rows.size(); ++i) {
    const auto& r = C.rows[i];
    std::string row = r.lemma + "," + r.params + "," + fmt_double(r.margin) + "," + fmt_double(r.scale) + "," +
                      fmt_double(r.relative()) + "," + (r.evaluated ? std::to_string(r.witness) : "") + "," +
                      (r.evaluated && r.witness_y ? std::to_string(*r.witness_y) : "") + "," +
                      fmt_double(r.witness_time) + "," + std::to_string(r.evaluated) + "," +
                      std::to_string(r.excluded_boundary) + "," + (r.exploratory ? "1" : "0") + "," +
                      (r.holds(C.tols[i]) ? "1" : "0") + "\n";
    csv += row;
    if (!r.holds(C.tols[i]) && !first_violation)
      first_violation = r.lemma + " (" + r.params + "): relative margin " + fmt_double(r.relative());
  }
  write_file_atomic(out_path(run, "margins.csv"), csv);
  json meta{{"suites", expanded}, {"rows", C.rows.size()}, {"exploratory", v.exploratory}, {"run", run_stamp(run)}};
  write_json(out_path(run, "margins.meta.json"), meta);
  std::cout << C.rows.size() << " margin rows -> " << out_path(run, "margins.csv").string() << "\n";
  if (first_violation) {
    if (v.exploratory) {
      std::cout << "exploratory: margin outside tolerance: " << *first_violation << "\n";
      return exit_ok;
    }
    std::cerr << "violated: " << *first_violation << "\n";
    return exit_violation;
  }
  std::cout << "all margins within tolerance\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------
// certify

int run_certify(const GraphOptions& go, const SimulateOptions& so, const CertifyOptions& c,
                const RunInfo& run) {
  ClassContext ctx;
  ctx.p = c.p;
  std::vector<double> radii = c.radii, E;
  std::optional<double> tau;
  std::optional<double> rho0;
  if (!c.energies.empty()) {
    auto [R, En] = read_energy_csv(read_file(c.energies), c.energies);
    radii = R;
    E = En;
    ctx.s = c.s.value_or(1.0);
    ctx.intrinsic = !c.not_intrinsic;
    if (!c.not_one_intrinsic)
      ctx.c0_one = 1.0;
    DensityProfile prof;
    prof.kind = go.density_kind.empty() ? ProfileKind::bounded_below
                                        : detail::profile_kind_from_string(go.density_kind);
    prof.rho0 = go.rho0;
    prof.sigma = go.sigma;
    prof.k = go.k;
    ctx.profile = prof;
    rho0 = go.rho0;
  } else {
    // The classes need an intrinsic metric; built-in families default to the canonical one here.
    GraphOptions gopt = go;
    if (gopt.metric.empty() && gopt.file.empty())
      gopt.metric = "canonical-intrinsic";
    auto L = load(gopt, run.seed);
    const Vertex x0 = origin(L, go.x0);
    std::optional<Trajectory> tr;
    if (!c.trajectory.empty())
      tr = read_trajectory_csv(L.g, L.rho, read_file(c.trajectory), c.trajectory);
    else
      tr = simulate(L, so, x0, run.seed);
    if (radii.empty())
      radii = default_radii(L, x0);
    E = energy_curve(*tr, c.p, L.d, x0, radii);
    ctx.s = c.s.value_or(L.d.jump_size());
    ctx.intrinsic = !c.not_intrinsic && is_intrinsic(L.g, L.d);
    if (!c.not_one_intrinsic)
      ctx.c0_one = intrinsic_bound(L.g, L.d, 1.0);
    ctx.profile = L.rho.profile();
    if (!ctx.profile)
      ctx.profile = DensityProfile{ProfileKind::bounded_below,
                                   *std::min_element(L.rho.values().begin(), L.rho.values().end()), 0.0,
                                   1.0, x0};
    rho0 = ctx.profile->rho0;
    tau = tr->horizon();
  }
  std::optional<GrowthFit> ef = fit_exp_growth(radii, E), pf;
  if (ctx.profile->kind == ProfileKind::vanishing)
    pf = fit_poly_growth(radii, E, ctx.profile->k);
  auto cert = classify(ctx, ef, pf);

  // Decay exponent column for the bounded classes (empty when out of range).
  std::vector<std::optional<double>> expo(radii.size());
  if (ctx.profile->kind == ProfileKind::bounded_below && ctx.s > 0.0) {
    DecayParams dp;
    dp.K = c.K;
    dp.delta = c.delta;
    dp.s = ctx.s;
    dp.rho0 = *rho0;
    dp.beta = std::max(ef->beta, 1e-9);
    dp.tau = tau.value_or(1.0);
    dp.C0 = ctx.c0_one.value_or(1.0);
    for (std::size_t i = 0; i < radii.size(); ++i) {
      try {
        expo[i] = c.p >= 2.0 ? decay_exponent_f(radii[i], dp) : decay_exponent_g(radii[i], dp);
      } catch (const precondition_error&) {
      }
    }
  }
  const GrowthFit& shown = pf ? *pf : *ef;
  write_file_atomic(out_path(run, "energy.csv"), energy_csv(shown, expo));
  json j = to_json(cert);
  j["run"] = run_stamp(run);
  write_json(out_path(run, "certificate.json"), j);
  if (c.plot) {
    PlotOptions po;
    po.title = "ball energy vs fitted bound";
    po.xlabel = "R";
    po.ylabel = "energy";
    po.log_y = true;
    std::vector<double> bound;
    for (double R : radii)
      bound.push_back(shown.bound(R));
    write_file_atomic(out_path(run, "energy.svg"),
                      svg_line_plot({{"E(R)", radii, E}, {"bound", radii, bound}}, po));
  }
  std::cout << "verdict: " << to_string(cert.verdict);
  if (cert.pipeline)
    std::cout << " [" << to_string(*cert.pipeline) << "]";
  std::cout << "\nreason: " << cert.reason << "\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------
// report

int run_report_volume(const GraphOptions& go, const ReportOptions& r, const RunInfo& run) {
  auto L = load(go, run.seed);
  const Vertex x0 = origin(L, go.x0);
  auto radii = r.radii.empty() ? default_radii(L, x0) : r.radii;
  auto vg = volume_growth(L.g, L.d, x0, radii);
  std::string csv = "R,volume\n";
  for (std::size_t i = 0; i < radii.size(); ++i)
    csv += fmt_double(radii[i]) + "," + fmt_double(vg.volumes[i]) + "\n";
  write_file_atomic(out_path(run, "volume.csv"), csv);
  std::cout << "polynomial exponent: " << vg.poly_exponent << "\nexponential exponent: " << vg.exp_exponent
            << "\n(informational: finite truncations give no asymptotic guarantee)\n";
  return exit_ok;
}

int run_report_plot(const ReportOptions& r, const RunInfo& run) {
  if (r.csv.empty())
    throw input_error("report plot needs --csv");
  std::istringstream in(read_file(r.csv));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    std::string col;
    while (std::getline(h, col, ','))
      header.push_back(col);
  }
  auto col_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw input_error(r.csv + ": no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t xi = col_index(r.xcol);
  std::vector<PlotSeries> series;
  std::vector<std::size_t> yi;
  for (const auto& y : r.ycols) {
    yi.push_back(col_index(y));
    series.push_back({y, {}, {}});
  }
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ','))
      cells.push_back(cell);
    cells.resize(header.size());
    for (std::size_t k = 0; k < yi.size(); ++k) {
      if (cells[xi].empty() || cells[yi[k]].empty())
        continue;
      series[k].x.push_back(std::stod(cells[xi]));
      series[k].y.push_back(std::stod(cells[yi[k]]));
    }
  }
  PlotOptions po;
  po.title = r.title.empty() ? r.csv : r.title;
  po.xlabel = r.xcol;
  po.ylabel = r.ycols.size() == 1 ? r.ycols[0] : "value";
  po.log_y = r.log_y;
  auto out = out_path(run, fs::path(r.csv).stem().string() + ".svg");
  write_file_atomic(out, svg_line_plot(series, po));
  std::cout << "plot -> " << out.string() << "\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------
// command tree

namespace {

void add_graph_options(CLI::App* sub, GraphOptions& g, bool with_density = true) {
  sub->add_option("--graph", g.file, "Graph document (JSON); overrides --family");
  sub->add_option("--family", g.family, "Built-in family: z-segment, lattice, star, random");
  sub->add_option("--half-width", g.half_width, "Half width of z-segment / lattice box");
  sub->add_option("--dim", g.dim, "Lattice dimension");
  sub->add_option("--leaves", g.leaves, "Star leaves");
  sub->add_option("--vertices", g.vertices, "Vertex count of the random family");
  sub->add_option("--weight", g.weight, "Edge weight of built-in families");
  sub->add_option("--mu", g.mu, "Vertex measure of built-in families");
  sub->add_option("--metric", g.metric, "Metric: combinatorial, canonical-intrinsic, explicit");
  sub->add_option("--x0", g.x0, "Centre vertex id");
  if (with_density) {
    sub->add_option("--density-kind", g.density_kind, "Density profile: bounded-below, vanishing");
    sub->add_option("--rho0", g.rho0, "Density lower-bound constant");
    sub->add_option("--sigma", g.sigma, "Vanishing-density exponent");
    sub->add_option("--k", g.k, "Vanishing-density offset (k > s)");
  }
}

void add_run_options(CLI::App* sub, RunInfo& run) {
  sub->add_option("--seed", run.seed, "Seed for randomized parts");
  sub->add_option("--out-dir", run.out_dir, "Output directory");
}

void add_simulate_options(CLI::App* sub, SimulateOptions& s) {
  sub->add_option("--initial", s.initial, "Initial data: zero, delta, random, file");
  sub->add_option("--initial-file", s.initial_file, "Vertex function document for --initial file");
  sub->add_option("--amplitude", s.amplitude, "Delta mass / random amplitude");
  sub->add_option("--support", s.support, "Support radius of random initial data");
  sub->add_option("--T", s.T, "Horizon");
  sub->add_option("--dt", s.dt, "Time step (T/dt must be an integer)");
  sub->add_option("--scheme", s.scheme, "implicit, explicit, crank-nicolson");
  sub->add_option("--stride", s.stride, "Keep every n-th step");
}

} // namespace

Cli::Cli() {
  app.set_config("--config", "", "Config file (TOML/INI); command-line flags take precedence");
  app.require_subcommand(1);

  auto* graphc = app.add_subcommand("graph", "Build, validate or measure graphs");
  graphc->require_subcommand(1);
  auto* build = graphc->add_subcommand("build", "Write a graph document");
  add_graph_options(build, graph);
  add_run_options(build, run);
  build->add_option("-o,--output", output, "Output file (default stdout)");
  auto* validate = graphc->add_subcommand("validate", "Check the graph and metric axioms");
  add_graph_options(validate, graph, false);
  validate->add_option("file", graph.file, "Graph document");
  add_run_options(validate, run);
  auto* metric = graphc->add_subcommand("metric", "Jump size and intrinsic bounds");
  add_graph_options(metric, graph, false);
  metric->add_option("file", graph.file, "Graph document");
  metric->add_option("--kind", graph.metric, "Metric kind (alias of --metric)");
  metric->add_option("-o,--output", output, "Output file (default stdout)");
  add_run_options(metric, run);

  auto* sim = app.add_subcommand("simulate", "Time-step the heat equation");
  add_graph_options(sim, graph);
  add_simulate_options(sim, simulate);
  add_run_options(sim, run);

  auto* ver = app.add_subcommand("verify", "Run inequality verification suites");
  add_graph_options(ver, graph, false);
  add_run_options(ver, run);
  ver->add_option("--suite", verify.suites, "Suites: default, calculus, convexity, cutoff, exp-energy, "
                                            "exp-supersolution, poly-energy, poly-supersolution, "
                                            "poly-difference, weighted-mass, cutoff-energy, none");
  ver->add_option("--alpha", verify.alphas, "alpha grid");
  ver->add_option("--sigma", verify.sigmas, "sigma grid");
  ver->add_option("--gamma", verify.gamma, "Force gamma (below-threshold values need --exploratory)");
  ver->add_flag("--exploratory", verify.exploratory, "Allow out-of-range parameters; never fails");
  ver->add_option("--random-graphs", verify.random_graphs, "Random graphs per suite");
  ver->add_option("--trials", verify.trials, "Random functions per graph");
  ver->add_option("--tol", verify.tol, "Relative tolerance for lemma margins");

  auto* cert = app.add_subcommand("certify", "Fit growth and decide class membership");
  add_graph_options(cert, graph);
  add_simulate_options(cert, simulate);
  add_run_options(cert, run);
  cert->add_option("--trajectory", certify.trajectory, "Trajectory CSV (default: simulate inline)");
  cert->add_option("--energies", certify.energies, "Energy CSV with columns R,E (skips the graph)");
  cert->add_option("--p", certify.p, "Exponent p >= 1");
  cert->add_option("--radii", certify.radii, "Radii R_n > 1");
  cert->add_option("--s", certify.s, "Jump size override");
  cert->add_flag("--not-intrinsic", certify.not_intrinsic, "Treat the metric as not intrinsic");
  cert->add_flag("--not-one-intrinsic", certify.not_one_intrinsic, "Do not declare the metric 1-intrinsic");
  cert->add_option("--K", certify.K, "K for the decay-exponent column");
  cert->add_option("--delta", certify.delta, "delta for the decay-exponent column");
  cert->add_flag("--plot", certify.plot, "Also write energy.svg");

  auto* rep = app.add_subcommand("report", "Informational reports and plots");
  rep->require_subcommand(1);
  auto* vol = rep->add_subcommand("volume", "Measure mu(B_R)");
  add_graph_options(vol, graph, false);
  add_run_options(vol, run);
  vol->add_option("--radii", report.radii, "Radii");
  auto* plot = rep->add_subcommand("plot", "SVG line plot from a CSV");
  add_run_options(plot, run);
  plot->add_option("--csv", report.csv, "Input CSV")->required();
  plot->add_option("--x", report.xcol, "x column");
  plot->add_option("--y", report.ycols, "y columns");
  plot->add_option("--title", report.title, "Title");
  plot->add_flag("!--linear-y", report.log_y, "Linear y axis");
}

int Cli::dispatch() {
  run.config_hash = fnv1a_hex(app.config_to_str(true, false));
  auto* graphc = app.get_subcommand("graph");
  if (graphc->parsed()) {
    if (graphc->get_subcommand("build")->parsed())
      return run_graph_build(graph, run, output);
    if (graphc->get_subcommand("validate")->parsed())
      return run_graph_validate(graph, run);
    return run_graph_metric(graph, run, output);
  }
  if (app.get_subcommand("simulate")->parsed())
    return run_simulate(graph, simulate, run);
  if (app.get_subcommand("verify")->parsed())
    return run_verify(graph, verify, run);
  if (app.get_subcommand("certify")->parsed())
    return run_certify(graph, simulate, certify, run);
  auto* rep = app.get_subcommand("report");
  if (rep->get_subcommand("volume")->parsed())
    return run_report_volume(graph, report, run);
  return run_report_plot(report, run);
}

int main_entry(int argc, char** argv) {
  Cli cli;
  try {
    cli.app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = cli.app.exit(e);
    return code == 0 ? exit_ok : exit_input;
  }
  try {
    return cli.dispatch();
  } catch (const graph_error& e) {
    std::cerr << "error: axiom " << e.what() << "\n";
    return exit_input;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_input;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_input;
  }
}

} // namespace graphheat::cli
