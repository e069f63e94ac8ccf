#ifndef GRAPHHEAT_IO_HPP
#define GRAPHHEAT_IO_HPP

// File formats. Requires nlohmann/json (vendor/json.hpp).

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphheat/certify.hpp"
#include "graphheat/density.hpp"
#include "graphheat/error.hpp"
#include "graphheat/graph.hpp"
#include "graphheat/metric.hpp"
#include "graphheat/solver.hpp"
#include "graphheat/test_functions.hpp"

namespace graphheat {

using json = nlohmann::json;

// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

// %.17g: round-trips every double.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Write to a sibling temporary and rename over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out)
      throw input_error("cannot write " + tmp.string());
    out << content;
    if (!out)
      throw input_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw input_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// Graph document

struct MetricSpec {
  MetricKind kind = MetricKind::combinatorial;
  std::vector<DistancePair> pairs;
};

struct DensitySpec {
  ProfileKind kind = ProfileKind::bounded_below;
  double rho0 = 1.0;
  double sigma = 0.0;
  double k = 1.0;
  VertexId x0 = 0;
};

struct GraphDocument {
  GraphSpec graph;
  std::optional<MetricSpec> metric;
  std::optional<DensitySpec> density;
};

namespace detail {

inline std::string location(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

inline const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw input_error(where + ": missing field '" + key + "'");
  return obj.at(key);
}

inline double number(const json& v, const std::string& where) {
  if (!v.is_number())
    throw input_error(where + ": expected a number");
  return v.get<double>();
}

inline VertexId integer(const json& v, const std::string& where) {
  if (!v.is_number_integer())
    throw input_error(where + ": expected an integer vertex id");
  return v.get<VertexId>();
}

inline ProfileKind profile_kind_from_string(const std::string& s) {
  if (s == "bounded-below" || s == "bounded")
    return ProfileKind::bounded_below;
  if (s == "vanishing")
    return ProfileKind::vanishing;
  throw input_error("unknown density kind '" + s + "' (bounded-below, vanishing)");
}

} // namespace detail

inline GraphDocument parse_graph_document(const std::string& text, const std::string& source = "<input>") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw input_error(source + ":" + detail::location(text, e.byte) + ": parse error: " + e.what());
  }
  if (!doc.is_object())
    throw input_error(source + ": top level must be an object");
  GraphDocument out;
  const auto& verts = detail::field(doc, "vertices", source);
  if (!verts.is_array())
    throw input_error(source + ": 'vertices' must be an array");
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const std::string where = source + ": vertices[" + std::to_string(i) + "]";
    const auto& v = verts[i];
    VertexSpec vs;
    vs.id = detail::integer(detail::field(v, "id", where), where + ".id");
    vs.mu = v.contains("mu") ? detail::number(v["mu"], where + ".mu") : 1.0;
    if (v.contains("exterior"))
      vs.exterior = detail::number(v["exterior"], where + ".exterior");
    if (v.contains("rho"))
      vs.rho = detail::number(v["rho"], where + ".rho");
    out.graph.vertices.push_back(vs);
  }
  if (doc.contains("edges")) {
    const auto& edges = doc["edges"];
    if (!edges.is_array())
      throw input_error(source + ": 'edges' must be an array");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string where = source + ": edges[" + std::to_string(i) + "]";
      const auto& e = edges[i];
      out.graph.edges.push_back({detail::integer(detail::field(e, "u", where), where + ".u"),
                                 detail::integer(detail::field(e, "v", where), where + ".v"),
                                 detail::number(detail::field(e, "w", where), where + ".w")});
    }
  }
  if (doc.contains("metric")) {
    const auto& m = doc["metric"];
    const std::string where = source + ": metric";
    MetricSpec ms;
    const auto& kind = detail::field(m, "kind", where);
    if (!kind.is_string())
      throw input_error(where + ".kind: expected a string");
    try {
      ms.kind = metric_kind_from_string(kind.get<std::string>());
    } catch (const error& e) {
      throw input_error(where + ".kind: " + e.what());
    }
    if (m.contains("pairs")) {
      for (std::size_t i = 0; i < m["pairs"].size(); ++i) {
        const std::string pw = where + ".pairs[" + std::to_string(i) + "]";
        const auto& p = m["pairs"][i];
        ms.pairs.push_back({detail::integer(detail::field(p, "u", pw), pw + ".u"),
                            detail::integer(detail::field(p, "v", pw), pw + ".v"),
                            detail::number(detail::field(p, "d", pw), pw + ".d")});
      }
    }
    if (ms.kind == MetricKind::explicit_pairs && ms.pairs.empty() && out.graph.vertices.size() > 1)
      throw input_error(where + ": explicit metric needs 'pairs'");
    out.metric = ms;
  }
  if (doc.contains("density")) {
    const auto& dn = doc["density"];
    const std::string where = source + ": density";
    DensitySpec ds;
    const auto& kind = detail::field(dn, "kind", where);
    if (!kind.is_string())
      throw input_error(where + ".kind: expected a string");
    ds.kind = detail::profile_kind_from_string(kind.get<std::string>());
    if (dn.contains("rho0"))
      ds.rho0 = detail::number(dn["rho0"], where + ".rho0");
    if (dn.contains("sigma"))
      ds.sigma = detail::number(dn["sigma"], where + ".sigma");
    if (dn.contains("k"))
      ds.k = detail::number(dn["k"], where + ".k");
    if (dn.contains("x0"))
      ds.x0 = detail::integer(dn["x0"], where + ".x0");
    out.density = ds;
  }
  return out;
}

inline GraphDocument load_graph_document(const std::filesystem::path& path) {
  return parse_graph_document(read_file(path), path.string());
}

inline json to_json(const GraphDocument& doc) {
  json j;
  j["vertices"] = json::array();
  for (const auto& v : doc.graph.vertices) {
    json jv{{"id", v.id}, {"mu", v.mu}};
    if (v.exterior != 0.0)
      jv["exterior"] = v.exterior;
    if (v.rho)
      jv["rho"] = *v.rho;
    j["vertices"].push_back(jv);
  }
  j["edges"] = json::array();
  for (const auto& e : doc.graph.edges)
    j["edges"].push_back({{"u", e.u}, {"v", e.v}, {"w", e.w}});
  if (doc.metric) {
    json m{{"kind", to_string(doc.metric->kind)}};
    if (!doc.metric->pairs.empty()) {
      m["pairs"] = json::array();
      for (const auto& p : doc.metric->pairs)
        m["pairs"].push_back({{"u", p.u}, {"v", p.v}, {"d", p.d}});
    }
    j["metric"] = m;
  }
  if (doc.density) {
    const auto& d = *doc.density;
    j["density"] = {{"kind", to_string(d.kind)}, {"rho0", d.rho0}, {"x0", d.x0}};
    if (d.kind == ProfileKind::vanishing) {
      j["density"]["sigma"] = d.sigma;
      j["density"]["k"] = d.k;
    }
  }
  return j;
}

inline PseudoMetric make_metric(const WeightedGraph& g, const std::optional<MetricSpec>& spec,
                                std::optional<MetricKind> override_kind = {}) {
  MetricKind kind = override_kind ? *override_kind : (spec ? spec->kind : MetricKind::combinatorial);
  switch (kind) {
  case MetricKind::combinatorial: return combinatorial_metric(g);
  case MetricKind::canonical_intrinsic: return canonical_intrinsic_metric(g);
  case MetricKind::explicit_pairs:
    if (!spec || spec->pairs.empty())
      throw input_error("explicit metric requested but the document has no pairs");
    return explicit_metric(g, spec->pairs);
  }
  throw input_error("unknown metric kind");
}

// Density from the document: per-vertex rho when every vertex lists one,
// otherwise the extremal profile density (rho0, or rho0 (d + k)^-sigma).
inline DensityField make_density(const WeightedGraph& g, const PseudoMetric& d,
                                 const std::optional<DensitySpec>& spec) {
  std::optional<DensityProfile> prof;
  if (spec) {
    if (!g.contains(spec->x0))
      throw input_error("density x0=" + std::to_string(spec->x0) + " is not a vertex");
    prof = DensityProfile{spec->kind, spec->rho0, spec->sigma, spec->k, g.index_of(spec->x0)};
  }
  const auto& declared = g.declared_rho();
  bool all = !declared.empty();
  for (const auto& r : declared)
    all = all && r.has_value();
  if (all) {
    std::vector<double> rho(g.size());
    for (Vertex x = 0; x < g.size(); ++x)
      rho[x] = *declared[x];
    return DensityField(std::move(rho), prof);
  }
  if (!prof)
    return constant_density(g, 1.0);
  if (prof->kind == ProfileKind::bounded_below) {
    auto f = constant_density(g, prof->rho0);
    return DensityField(f.values(), prof);
  }
  return power_density(g, d, prof->x0, prof->rho0, prof->sigma, prof->k);
}

// Vertex function document: {"values": [{"id": 0, "value": 1.5}, ...]};
// unlisted vertices are zero.
inline VertexFunction parse_vertex_function(const WeightedGraph& g, const std::string& text,
                                            const std::string& source = "<input>") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw input_error(source + ":" + detail::location(text, e.byte) + ": parse error: " + e.what());
  }
  const auto& vals = detail::field(doc, "values", source);
  VertexFunction f(g.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const std::string where = source + ": values[" + std::to_string(i) + "]";
    VertexId id = detail::integer(detail::field(vals[i], "id", where), where + ".id");
    if (!g.contains(id))
      throw input_error(where + ": unknown vertex " + std::to_string(id));
    double v = detail::number(detail::field(vals[i], "value", where), where + ".value");
    if (!std::isfinite(v))
      throw input_error(where + ": value must be finite");
    f[g.index_of(id)] = v;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Trajectory CSV: header "t,vertex_id,value", one row per (sample, vertex),
// samples in time order and vertices in graph order, numbers as %.17g.

inline std::string trajectory_csv(const WeightedGraph& g, const Trajectory& tr) {
  std::string out = "t,vertex_id,value\n";
  out.reserve(out.size() + tr.samples() * g.size() * 32);
  for (std::size_t i = 0; i < tr.samples(); ++i) {
    const std::string t = fmt_double(tr.times[i]);
    for (Vertex x = 0; x < g.size(); ++x) {
      out += t;
      out += ',';
      out += std::to_string(g.id(x));
      out += ',';
      out += fmt_double(tr.states[i][x]);
      out += '\n';
    }
  }
  return out;
}

inline json trajectory_metadata(const Trajectory& tr, const std::string& config_hash,
                                std::optional<std::uint64_t> seed = {}) {
  json m{{"scheme", to_string(tr.scheme)},
         {"dt", tr.dt},
         {"T", tr.horizon()},
         {"stride", tr.stride},
         {"samples", tr.samples()},
         {"vertices", tr.mu.size()},
         {"source_free", tr.source_free},
         {"config_hash", config_hash}};
  m["truncation_radius"] = tr.truncation_radius ? json(*tr.truncation_radius) : json(nullptr);
  if (tr.profile) {
    const auto& p = *tr.profile;
    m["density_profile"] = {{"kind", to_string(p.kind)}, {"rho0", p.rho0}, {"sigma", p.sigma},
                            {"k", p.k}};
  } else {
    m["density_profile"] = nullptr;
  }
  if (seed)
    m["seed"] = *seed;
  return m;
}

// Reads a trajectory CSV against its graph; density values come from `rho`.
inline Trajectory read_trajectory_csv(const WeightedGraph& g, const DensityField& rho,
                                      const std::string& text, const std::string& source = "<csv>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "t,vertex_id,value")
    throw input_error(source + ":1: expected header 't,vertex_id,value'");
  Trajectory tr;
  tr.rho = rho.values();
  tr.mu.resize(g.size());
  for (Vertex x = 0; x < g.size(); ++x)
    tr.mu[x] = g.mu(x);
  tr.profile = rho.profile();
  std::size_t lineno = 1;
  std::vector<char> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c))
      throw input_error(source + ":" + std::to_string(lineno) + ": expected three fields");
    double t, v;
    VertexId id;
    try {
      std::size_t pos;
      t = std::stod(a, &pos);
      id = std::stoll(b);
      v = std::stod(c);
    } catch (const std::exception&) {
      throw input_error(source + ":" + std::to_string(lineno) + ": malformed number");
    }
    if (!g.contains(id))
      throw input_error(source + ":" + std::to_string(lineno) + ": unknown vertex " + std::to_string(id));
    if (tr.times.empty() || t != tr.times.back()) {
      if (!tr.times.empty() && !(t > tr.times.back()))
        throw input_error(source + ":" + std::to_string(lineno) + ": times must increase");
      tr.times.push_back(t);
      tr.states.emplace_back(g.size(), 0.0);
    }
    tr.states.back()[g.index_of(id)] = v;
  }
  if (tr.times.empty())
    throw input_error(source + ": no samples");
  if (tr.times.size() > 1) {
    tr.dt = tr.times[1] - tr.times[0];
    tr.stride = 1;
  }
  tr.scheme = Scheme::implicit_euler;
  return tr;
}

// ---------------------------------------------------------------------------
// Margin CSV:
// lemma,params,margin,scale,relative,witness_x,witness_y,time,evaluated,excluded,exploratory,holds

inline std::string margin_csv_header() {
  return "lemma,params,margin,scale,relative,witness_x,witness_y,time,evaluated,excluded,"
         "exploratory,holds\n";
}

inline std::string margin_csv_row(const WeightedGraph& g, const MarginReport& r, double tol) {
  std::string out = r.lemma + "," + r.params + "," + fmt_double(r.margin) + "," + fmt_double(r.scale) +
                    "," + fmt_double(r.relative()) + ",";
  if (r.evaluated > 0)
    out += std::to_string(g.id(r.witness));
  out += ",";
  if (r.evaluated > 0 && r.witness_y)
    out += std::to_string(g.id(*r.witness_y));
  out += "," + fmt_double(r.witness_time) + "," + std::to_string(r.evaluated) + "," +
         std::to_string(r.excluded_boundary) + "," + (r.exploratory ? "1" : "0") + "," +
         (r.holds(tol) ? "1" : "0") + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Energy CSV: R,E,bound,exponent  (exponent empty when not computed)

inline std::string energy_csv(const GrowthFit& fit, const std::vector<std::optional<double>>& exponent = {}) {
  std::string out = "R,E,bound,exponent\n";
  for (std::size_t i = 0; i < fit.radii.size(); ++i) {
    out += fmt_double(fit.radii[i]) + "," + fmt_double(fit.energies[i]) + "," +
           fmt_double(fit.bound(fit.radii[i])) + ",";
    if (i < exponent.size() && exponent[i])
      out += fmt_double(*exponent[i]);
    out += "\n";
  }
  return out;
}

// Reads "R,E" (extra columns ignored).
inline std::pair<std::vector<double>, std::vector<double>> read_energy_csv(const std::string& text,
                                                                           const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("R,E", 0) != 0)
    throw input_error(source + ":1: expected header starting with 'R,E'");
  std::vector<double> R, E;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ','))
      throw input_error(source + ":" + std::to_string(lineno) + ": expected R,E");
    try {
      R.push_back(std::stod(a));
      E.push_back(std::stod(b));
    } catch (const std::exception&) {
      throw input_error(source + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return {R, E};
}

// ---------------------------------------------------------------------------
// Certificate document

inline json to_json(const GrowthFit& f) {
  json j{{"form", to_string(f.form)}, {"beta_hat", f.beta}, {"C_hat", f.C},
         {"radii", f.radii}, {"energies", f.energies}};
  if (f.form == GrowthForm::poly)
    j["k"] = f.k;
  return j;
}

inline json to_json(const GrowthCertificate& c) {
  json j{{"p", c.p}, {"s", c.s}, {"verdict", to_string(c.verdict)}, {"reason", c.reason}};
  j["class"] = c.pipeline ? json(to_string(*c.pipeline)) : json(nullptr);
  j["exp_fit"] = c.exp_fit ? to_json(*c.exp_fit) : json(nullptr);
  j["poly_fit"] = c.poly_fit ? to_json(*c.poly_fit) : json(nullptr);
  j["checks"] = json::array();
  for (const auto& k : c.checks)
    j["checks"].push_back({{"class", to_string(k.pipeline)},
                           {"applicable", k.applicable},
                           {"satisfied", k.satisfied},
                           {"reason", k.reason}});
  return j;
}

// ---------------------------------------------------------------------------
// SVG line plot

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

struct PlotOptions {
  std::string title;
  std::string xlabel = "x";
  std::string ylabel = "y";
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

inline std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotOptions& opt) {
  auto tx = [&](double v) { return opt.log_x ? std::log10(std::max(v, 1e-300)) : v; };
  auto ty = [&](double v) { return opt.log_y ? std::log10(std::max(v, 1e-300)) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(tx(s.x[i])) || !std::isfinite(ty(s.y[i])))
        continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!std::isfinite(x0)) {
    x0 = 0;
    x1 = 1;
    y0 = 0;
    y1 = 1;
  }
  if (x1 == x0)
    x1 = x0 + 1;
  if (y1 == y0)
    y1 = y0 + 1;
  const double L = 70, R = 20, T = 40, B = 50;
  const double W = opt.width - L - R, H = opt.height - T - B;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * W; };
  auto py = [&](double v) { return T + H - (ty(v) - y0) / (y1 - y0) * H; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
     << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << opt.width / 2 << "\" y=\"20\" text-anchor=\"middle\">" << opt.title << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W << "\" height=\"" << H
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    double sx = L + W * i / 4.0, sy = T + H - H * i / 4.0;
    os << "<text x=\"" << sx << "\" y=\"" << T + H + 16 << "\" text-anchor=\"middle\">"
       << (opt.log_x ? "1e" : "") << fx << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">"
       << (opt.log_y ? "1e" : "") << fy << "</text>\n";
  }
  os << "<text x=\"" << L + W / 2 << "\" y=\"" << opt.height - 10 << "\" text-anchor=\"middle\">"
     << opt.xlabel << "</text>\n";
  os << "<text x=\"14\" y=\"" << T + H / 2 << "\" transform=\"rotate(-90 14 " << T + H / 2
     << ")\" text-anchor=\"middle\">" << opt.ylabel << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* col = colors[si % 6];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(tx(s.x[i])) && std::isfinite(ty(s.y[i])))
        os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << L + 8 << "\" y=\"" << T + 16 + 14 * si << "\" fill=\"" << col << "\">"
       << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

} // namespace graphheat

#endif
