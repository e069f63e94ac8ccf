#ifndef GRAPHHEAT_TEST_FUNCTIONS_HPP
#define GRAPHHEAT_TEST_FUNCTIONS_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "graphheat/calculus.hpp"
#include "graphheat/density.hpp"
#include "graphheat/error.hpp"
#include "graphheat/graph.hpp"
#include "graphheat/metric.hpp"

namespace graphheat {

// Space-time weight with an analytic time derivative.
template <class W>
concept SpaceTimeWeight = requires(const W& w, Vertex x, double t) {
  { w.value(x, t) } -> std::convertible_to<double>;
  { w.time_derivative(x, t) } -> std::convertible_to<double>;
};

enum class Mode { strict, exploratory };

namespace detail {

inline double positive_part(double v) { return v > 0.0 ? v : 0.0; }

// w(y, t)/w(x, t), through log values when the weight has them: e^{-gamma t}
// underflows long before the ratio loses meaning.
template <class W>
double weight_ratio(const W& w, Vertex y, Vertex x, double t) {
  if constexpr (requires { w.log_value(x, t); })
    return std::exp(w.log_value(y, t) - w.log_value(x, t));
  else
    return w.value(y, t) / w.value(x, t);
}

inline std::string fmt_params(std::initializer_list<std::pair<const char*, double>> kv) {
  std::ostringstream os;
  os.precision(6);
  bool first = true;
  for (const auto& [k, v] : kv) {
    if (!first)
      os << ';';
    os << k << '=' << v;
    first = false;
  }
  return os.str();
}

} // namespace detail

// ---------------------------------------------------------------------------
// Cut-off eta(x) = min{[R - s - d(x, x0)]_+ / (delta R), 1}

struct CutoffParams {
  double R = 1.0;
  double delta = 0.25;
  Vertex x0 = 0;
  double s = 1.0;

  void validate() const {
    if (!(R > 0.0))
      throw precondition_error("cut-off needs R > 0");
    if (!(delta > 0.0 && delta < 0.5))
      throw precondition_error("cut-off needs delta in (0, 1/2)");
    if (!(s >= 0.0))
      throw precondition_error("cut-off needs s >= 0");
  }

  // R > 2s/(1 - 2 delta) makes eta = 1 on B_{delta R}(x0).
  bool plateau_covers_inner_ball() const { return R > 2.0 * s / (1.0 - 2.0 * delta); }

  bool in_annulus(double dist) const {
    return dist >= (1.0 - delta) * R - 2.0 * s && dist <= R;
  }
};

class Cutoff {
public:
  Cutoff(const CutoffParams& p, std::vector<double> dist_to_x0) : p_(p), dist_(std::move(dist_to_x0)) {
    p_.validate();
  }
  Cutoff(const CutoffParams& p, const PseudoMetric& d) : Cutoff(p, d.distances_from(p.x0)) {}

  const CutoffParams& params() const noexcept { return p_; }
  double distance(Vertex x) const { return dist_[x]; }

  double operator()(Vertex x) const {
    return std::min(detail::positive_part(p_.R - p_.s - dist_[x]) / (p_.delta * p_.R), 1.0);
  }
  double value(Vertex x, double) const { return (*this)(x); }
  double time_derivative(Vertex, double) const { return 0.0; }

  VertexFunction values() const {
    VertexFunction f(dist_.size());
    for (Vertex x = 0; x < dist_.size(); ++x)
      f[x] = (*this)(x);
    return f;
  }

private:
  CutoffParams p_;
  std::vector<double> dist_;
};

inline Cutoff eta(const CutoffParams& p, const PseudoMetric& d) { return {p, d}; }

// ---------------------------------------------------------------------------
// zeta(x, t) = e^{xi(x, t)},  xi(x, t) = -gamma t - alpha [d(x, x0) - delta R]_+

struct ExpTestParams {
  double alpha = 0.0;
  double gamma = 0.0;
  double delta = 0.25;
  double R = 1.0;
  Vertex x0 = 0;
};

class ExpTestFunction {
public:
  ExpTestFunction(const ExpTestParams& p, std::vector<double> dist_to_x0)
      : p_(p), dist_(std::move(dist_to_x0)) {
    if (!(p.alpha >= 0.0) || !(p.gamma >= 0.0))
      throw precondition_error("zeta needs alpha >= 0 and gamma >= 0");
  }
  ExpTestFunction(const ExpTestParams& p, const PseudoMetric& d)
      : ExpTestFunction(p, d.distances_from(p.x0)) {}

  const ExpTestParams& params() const noexcept { return p_; }

  double xi(Vertex x, double t) const {
    return -p_.gamma * t - p_.alpha * detail::positive_part(dist_[x] - p_.delta * p_.R);
  }
  double value(Vertex x, double t) const { return std::exp(xi(x, t)); }
  double log_value(Vertex x, double t) const { return xi(x, t); }
  double time_derivative(Vertex x, double t) const { return -p_.gamma * value(x, t); }

private:
  ExpTestParams p_;
  std::vector<double> dist_;
};

// ---------------------------------------------------------------------------
// theta(x, t) = e^{-gamma t} [d(x, x0) + k]^{-alpha}

struct PolyTestParams {
  double alpha = 0.0;
  double gamma = 0.0;
  double k = 2.0;
  Vertex x0 = 0;
};

class PolyTestFunction {
public:
  PolyTestFunction(const PolyTestParams& p, std::vector<double> dist_to_x0, double s)
      : p_(p), dist_(std::move(dist_to_x0)) {
    if (!(p.k > s))
      throw precondition_error("theta needs k > s (k=" + std::to_string(p.k) +
                               ", s=" + std::to_string(s) + ")");
    if (!(p.alpha >= 0.0) || !(p.gamma >= 0.0))
      throw precondition_error("theta needs alpha >= 0 and gamma >= 0");
  }
  PolyTestFunction(const PolyTestParams& p, const PseudoMetric& d)
      : PolyTestFunction(p, d.distances_from(p.x0), d.jump_size()) {}

  const PolyTestParams& params() const noexcept { return p_; }

  double value(Vertex x, double t) const {
    return std::exp(-p_.gamma * t) * std::pow(dist_[x] + p_.k, -p_.alpha);
  }
  double log_value(Vertex x, double t) const { return -p_.gamma * t - p_.alpha * std::log(dist_[x] + p_.k); }
  double time_derivative(Vertex x, double t) const { return -p_.gamma * value(x, t); }

private:
  PolyTestParams p_;
  std::vector<double> dist_;
};

// v(x, t) = a(x, t) b(x, t)
template <SpaceTimeWeight A, SpaceTimeWeight B>
class ProductWeight {
public:
  ProductWeight(A a, B b) : a_(std::move(a)), b_(std::move(b)) {}
  double value(Vertex x, double t) const { return a_.value(x, t) * b_.value(x, t); }
  double time_derivative(Vertex x, double t) const {
    return a_.time_derivative(x, t) * b_.value(x, t) + a_.value(x, t) * b_.time_derivative(x, t);
  }
  const A& first() const { return a_; }
  const B& second() const { return b_; }

private:
  A a_;
  B b_;
};

// Tabulated space-time function on a strictly increasing time grid; values
// are linearly interpolated and the time derivative is the slope of the
// containing interval.
class SpaceTimeFunction {
public:
  SpaceTimeFunction(std::vector<double> times, std::vector<std::vector<double>> samples)
      : times_(std::move(times)), samples_(std::move(samples)) {
    if (times_.empty() || samples_.size() != times_.size())
      throw input_error("space-time function needs one sample per grid time");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (!(times_[i] > times_[i - 1]))
        throw input_error("time grid must be strictly increasing");
    for (const auto& s : samples_)
      if (s.size() != samples_.front().size())
        throw input_error("space-time samples must share one vertex set");
  }

  double value(Vertex x, double t) const {
    auto [i, w] = locate(t);
    if (w == 0.0)
      return samples_[i][x];
    return (1.0 - w) * samples_[i][x] + w * samples_[i + 1][x];
  }
  double time_derivative(Vertex x, double t) const {
    if (times_.size() < 2)
      return 0.0;
    auto [i, w] = locate(t);
    std::size_t j = std::min(i, times_.size() - 2);
    return (samples_[j + 1][x] - samples_[j][x]) / (times_[j + 1] - times_[j]);
  }

private:
  std::pair<std::size_t, double> locate(double t) const {
    if (t <= times_.front())
      return {0, 0.0};
    if (t >= times_.back())
      return {times_.size() - 1, 0.0};
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
    return {i, (t - times_[i]) / (times_[i + 1] - times_[i])};
  }

  std::vector<double> times_;
  std::vector<std::vector<double>> samples_;
};

// ---------------------------------------------------------------------------
// Constants of the polynomial test function.

struct ProfileConstants {
  double C1; // k^{alpha+1} / (k-s)^{alpha+1}
  double C2; // (k/(k-s))^alpha
  double C3; // k^alpha / (k-s)^{alpha+1}
};

inline ProfileConstants profile_constants(double alpha, double k, double s) {
  if (!(k > s))
    throw precondition_error("profile constants need k > s");
  if (!(alpha >= 0.0))
    throw precondition_error("profile constants need alpha >= 0");
  const double ratio = k / (k - s);
  return {std::pow(ratio, alpha + 1.0), std::pow(ratio, alpha),
          std::pow(k, alpha) / std::pow(k - s, alpha + 1.0)};
}

// g(z) = [z + k - s]^{-alpha-1} / [z + k]^{-alpha-1}, maximal at z = 0 where
// it equals C1.
inline double profile_ratio(double z, double alpha, double k, double s) {
  return std::pow((z + k) / (z + k - s), alpha + 1.0);
}

// min over vertices of C1 [d+k]^{-alpha-1} - [d+k-s]^{-alpha-1}, relative to
// the larger term. Nonnegative when the C1 bound holds everywhere.
inline double profile_bound_margin(const PseudoMetric& d, Vertex x0, double alpha, double k) {
  const double s = d.jump_size();
  const auto c = profile_constants(alpha, k, s);
  double worst = std::numeric_limits<double>::infinity();
  for (double r : d.distances_from(x0)) {
    double rhs = c.C1 * std::pow(r + k, -alpha - 1.0);
    double lhs = std::pow(r + k - s, -alpha - 1.0);
    worst = std::min(worst, (rhs - lhs) / std::max(rhs, lhs));
  }
  return worst;
}

// (e^a - 1)^2 <= e^{2|a|} a^2; returns the relative slack.
inline double exp_square_margin(double a) {
  double lhs = std::expm1(a) * std::expm1(a);
  double rhs = std::exp(2.0 * std::abs(a)) * a * a;
  double scale = std::max({lhs, rhs, std::numeric_limits<double>::min()});
  return (rhs - lhs) / scale;
}

// ---------------------------------------------------------------------------
// Margin reports.

enum class Sense {
  nonpositive, // worst value is a maximum of a quantity that must be <= 0
  nonnegative  // worst value is a minimum of a quantity that must be >= 0
};

struct MarginReport {
  std::string lemma;
  std::string params;
  Sense sense = Sense::nonpositive;
  double margin = 0.0;          // value at the worst-relative point
  double scale = 0.0;           // largest |summand| at that point
  double extreme = 0.0;         // worst raw value over all points
  Vertex witness = 0;
  std::optional<Vertex> witness_y;
  double witness_time = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded_boundary = 0;
  bool exploratory = false;

  double relative() const {
    if (scale <= 0.0)
      return margin == 0.0 ? 0.0 : margin / std::numeric_limits<double>::min();
    return margin / scale;
  }

  bool holds(double rel_tol = 1e-12) const {
    if (evaluated == 0)
      return true;
    return sense == Sense::nonpositive ? relative() <= rel_tol : relative() >= -rel_tol;
  }
};

namespace detail {

class MarginTracker {
public:
  MarginTracker(MarginReport& r) : r_(r) {
    worst_rel_ = r.sense == Sense::nonpositive ? -std::numeric_limits<double>::infinity()
                                               : std::numeric_limits<double>::infinity();
    r_.extreme = worst_rel_;
  }

  void observe(double value, double scale, Vertex x, double t, std::optional<Vertex> y = {}) {
    ++r_.evaluated;
    const bool up = r_.sense == Sense::nonpositive;
    double rel = scale > 0.0 ? value / scale : (value == 0.0 ? 0.0 : value * 1e300);
    if (up ? value > r_.extreme : value < r_.extreme)
      r_.extreme = value;
    if (up ? rel > worst_rel_ : rel < worst_rel_) {
      worst_rel_ = rel;
      r_.margin = value;
      r_.scale = scale;
      r_.witness = x;
      r_.witness_y = y;
      r_.witness_time = t;
    }
  }

  void finish() {
    if (r_.evaluated == 0) {
      r_.extreme = 0.0;
      r_.margin = 0.0;
    }
  }

private:
  MarginReport& r_;
  double worst_rel_;
};

inline void require(bool ok, Mode mode, const std::string& what) {
  if (!ok && mode == Mode::strict)
    throw precondition_error(what);
}

inline double require_rho0(const DensityField& rho, ProfileKind kind, Mode mode,
                           const PseudoMetric& d, std::optional<double> k = {},
                           std::optional<Vertex> x0 = {}) {
  if (!rho.profile()) {
    require(false, mode, "density profile must be declared");
    double m = *std::min_element(rho.values().begin(), rho.values().end());
    return m;
  }
  auto prof = *rho.profile();
  require(prof.kind == kind, mode,
          "lemma needs a " + to_string(kind) + " density, declared " + to_string(prof.kind));
  if (k)
    prof.k = *k;
  if (x0)
    prof.x0 = *x0;
  if (mode == Mode::strict) {
    auto check = density_profile_check(DensityField(rho.values(), prof), d);
    require(check.passed, mode, "density violates its declared lower bound: " + check.reason);
  }
  return prof.rho0;
}

inline void require_intrinsic(const WeightedGraph& g, const PseudoMetric& d, Mode mode) {
  require(is_intrinsic(g, d), mode,
          "metric must be intrinsic (q=2 bound " + std::to_string(intrinsic_bound(g, d, 2.0)) +
              " > 1)");
}

inline double resolve_c0(const WeightedGraph& g, const PseudoMetric& d, std::optional<double> c0,
                         Mode mode) {
  double computed = intrinsic_bound(g, d, 1.0);
  if (!c0)
    return computed;
  require(*c0 >= computed * (1.0 - 1e-12), mode,
          "C0=" + std::to_string(*c0) + " is below the 1-intrinsic bound " +
              std::to_string(computed));
  return *c0;
}

} // namespace detail

// Thresholds on gamma that make the test-function inequalities hold.
inline double exp_energy_gamma_threshold(double alpha, double s, double rho0) {
  return alpha * alpha * std::exp(2.0 * alpha * s) / (2.0 * rho0);
}
inline double exp_supersolution_gamma_threshold(double alpha, double s, double rho0, double c0) {
  return alpha * c0 * std::exp(alpha * s) / rho0;
}
inline double poly_energy_gamma_threshold(double alpha, double k, double s, double rho0) {
  double c1 = profile_constants(alpha, k, s).C1;
  return alpha * alpha * c1 * c1 / (2.0 * rho0);
}
inline double poly_supersolution_gamma_threshold(double alpha, double k, double s, double rho0, double c0) {
  return alpha * c0 * profile_constants(alpha, k, s).C1 / rho0;
}

struct CutoffMargins {
  MarginReport gradient;              // |nabla_xy eta| <= d(x,y)/(delta R) chi
  std::optional<MarginReport> energy; // sum_y (nabla_xy eta)^2 omega <= mu/(delta R)^2 chi
  std::optional<MarginReport> laplacian; // |Delta eta| <= C0/(delta R) chi
};

// Cut-off bounds. The gradient bound is checked on every truncation edge,
// the two vertex bounds on interior vertices. The energy bound needs an
// intrinsic metric (skipped otherwise in exploratory mode, an error in
// strict mode unless `gradient_only`); the Laplacian bound is only evaluated
// when a 1-intrinsic constant C0 is supplied.
inline CutoffMargins cutoff_margins(const WeightedGraph& g, const PseudoMetric& d,
                                     const CutoffParams& params, std::optional<double> c0 = {},
                                     Mode mode = Mode::strict, bool gradient_only = false) {
  Cutoff eta(params, d);
  const auto& p = eta.params();
  const double dr = p.delta * p.R;
  if (c0)
    c0 = detail::resolve_c0(g, d, c0, mode);
  const bool want_energy = !gradient_only && (is_intrinsic(g, d) || mode == Mode::exploratory);
  if (!gradient_only)
    detail::require_intrinsic(g, d, mode);
  const std::string ps = detail::fmt_params({{"R", p.R}, {"delta", p.delta}, {"s", p.s}});

  CutoffMargins out;
  out.gradient = {"cutoff-gradient", ps, Sense::nonnegative};
  out.gradient.exploratory = mode == Mode::exploratory;
  detail::MarginTracker tg(out.gradient);
  std::optional<detail::MarginTracker> te, tl;
  if (want_energy) {
    out.energy = MarginReport{"cutoff-energy", ps, Sense::nonnegative};
    out.energy->exploratory = mode == Mode::exploratory;
    te.emplace(*out.energy);
  }
  if (c0 && !gradient_only) {
    out.laplacian = MarginReport{"cutoff-laplacian", ps + ";C0=" + std::to_string(*c0),
                                 Sense::nonnegative};
    tl.emplace(*out.laplacian);
  }

  for (Vertex x = 0; x < g.size(); ++x) {
    const double chi = p.in_annulus(eta.distance(x)) ? 1.0 : 0.0;
    std::size_t k = g.adjacency_offset(x);
    double energy = 0.0, lap = 0.0;
    for (const auto& nb : g.neighbors(x)) {
      const double grad = eta(nb.v) - eta(x);
      const double bound = d.edge_distance(k++) / dr * chi;
      tg.observe(bound - std::abs(grad), std::max(bound, std::abs(grad)), x, 0.0, nb.v);
      energy += grad * grad * nb.w;
      lap += grad * nb.w;
    }
    if (g.is_boundary(x)) {
      if (out.energy)
        ++out.energy->excluded_boundary;
      if (out.laplacian)
        ++out.laplacian->excluded_boundary;
      continue;
    }
    if (te) {
      const double ebound = g.mu(x) / (dr * dr) * chi;
      te->observe(ebound - energy, std::max(ebound, energy), x, 0.0);
    }
    if (tl) {
      lap /= g.mu(x);
      const double lbound = *c0 / dr * chi;
      tl->observe(lbound - std::abs(lap), std::max(lbound, std::abs(lap)), x, 0.0);
    }
  }
  tg.finish();
  if (te)
    te->finish();
  if (tl) {
    tl->finish();
    out.laplacian->exploratory = mode == Mode::exploratory;
  }
  return out;
}

// rho d_t xi mu + 1/2 sum_y omega [1 - e^{xi(y) - xi(x)}]^2 <= 0, with
// gamma >= alpha^2 e^{2 alpha s} / (2 rho0). The left side does not depend on t.
inline MarginReport exp_energy_margin(const WeightedGraph& g, const PseudoMetric& d,
                                   const DensityField& rho, const ExpTestParams& params,
                                   Mode mode = Mode::strict) {
  const double s = d.jump_size();
  const double rho0 = detail::require_rho0(rho, ProfileKind::bounded_below, mode, d);
  detail::require_intrinsic(g, d, mode);
  const double thr = exp_energy_gamma_threshold(params.alpha, s, rho0);
  detail::require(params.gamma >= thr * (1.0 - 1e-15), mode,
                  "gamma=" + std::to_string(params.gamma) + " below threshold " + std::to_string(thr));
  ExpTestFunction zeta(params, d);

  MarginReport r{"exp-energy",
                 detail::fmt_params({{"alpha", params.alpha}, {"gamma", params.gamma},
                                     {"delta", params.delta}, {"R", params.R}, {"rho0", rho0}}),
                 Sense::nonpositive};
  r.exploratory = mode == Mode::exploratory;
  detail::MarginTracker tr(r);
  for (Vertex x = 0; x < g.size(); ++x) {
    if (g.is_boundary(x)) {
      ++r.excluded_boundary;
      continue;
    }
    const double time_term = -params.gamma * rho(x) * g.mu(x);
    detail::CompensatedSum acc;
    acc.add(time_term);
    double scale = std::abs(time_term);
    for (const auto& nb : g.neighbors(x)) {
      const double e = -std::expm1(zeta.xi(nb.v, 0.0) - zeta.xi(x, 0.0));
      const double term = 0.5 * nb.w * e * e;
      acc.add(term);
      scale = std::max(scale, term);
    }
    tr.observe(acc.value(), scale, x, 0.0);
  }
  tr.finish();
  return r;
}

// rho d_t zeta + Delta zeta <= 0, with gamma >= alpha C0 e^{alpha s} / rho0.
inline MarginReport exp_supersolution_margin(const WeightedGraph& g, const PseudoMetric& d,
                                   const DensityField& rho, const ExpTestParams& params,
                                   std::optional<double> c0 = {}, Mode mode = Mode::strict,
                                   const std::vector<double>& times = {0.0}) {
  const double s = d.jump_size();
  const double rho0 = detail::require_rho0(rho, ProfileKind::bounded_below, mode, d);
  const double C0 = detail::resolve_c0(g, d, c0, mode);
  const double thr = exp_supersolution_gamma_threshold(params.alpha, s, rho0, C0);
  detail::require(params.gamma >= thr * (1.0 - 1e-15), mode,
                  "gamma=" + std::to_string(params.gamma) + " below threshold " + std::to_string(thr));
  ExpTestFunction zeta(params, d);

  MarginReport r{"exp-supersolution",
                 detail::fmt_params({{"alpha", params.alpha}, {"gamma", params.gamma},
                                     {"delta", params.delta}, {"R", params.R}, {"rho0", rho0},
                                     {"C0", C0}}),
                 Sense::nonpositive};
  r.exploratory = mode == Mode::exploratory;
  detail::MarginTracker tr(r);
  for (double t : times)
    for (Vertex x = 0; x < g.size(); ++x) {
      if (g.is_boundary(x)) {
        if (t == times.front())
          ++r.excluded_boundary;
        continue;
      }
      // Divided through by zeta(x, t) > 0.
      const double time_term = -params.gamma * rho(x);
      detail::CompensatedSum acc;
      acc.add(time_term);
      double scale = std::abs(time_term);
      for (const auto& nb : g.neighbors(x)) {
        const double term = nb.w * std::expm1(zeta.xi(nb.v, t) - zeta.xi(x, t)) / g.mu(x);
        acc.add(term);
        scale = std::max(scale, std::abs(term));
      }
      tr.observe(acc.value(), scale, x, t);
    }
  tr.finish();
  return r;
}

// rho d_t theta mu + theta/2 sum_y omega [1 - theta(y)/theta(x)]^2 <= 0, with
// 0 < sigma <= 2 and gamma >= alpha^2 C1^2 / (2 rho0).
inline MarginReport poly_energy_margin(const WeightedGraph& g, const PseudoMetric& d,
                                   const DensityField& rho, const PolyTestParams& params,
                                   Mode mode = Mode::strict, const std::vector<double>& times = {0.0}) {
  const double s = d.jump_size();
  const double rho0 =
      detail::require_rho0(rho, ProfileKind::vanishing, mode, d, params.k, params.x0);
  const double sigma = rho.profile() ? rho.profile()->sigma : 0.0;
  detail::require(sigma > 0.0 && sigma <= 2.0, mode,
                  "sigma=" + std::to_string(sigma) + " outside (0, 2]");
  detail::require_intrinsic(g, d, mode);
  const double thr = poly_energy_gamma_threshold(params.alpha, params.k, s, rho0);
  detail::require(params.gamma >= thr * (1.0 - 1e-15), mode,
                  "gamma=" + std::to_string(params.gamma) + " below threshold " + std::to_string(thr));
  PolyTestFunction theta(params, d);

  MarginReport r{"poly-energy",
                 detail::fmt_params({{"alpha", params.alpha}, {"gamma", params.gamma},
                                     {"k", params.k}, {"sigma", sigma}, {"rho0", rho0}}),
                 Sense::nonpositive};
  r.exploratory = mode == Mode::exploratory;
  detail::MarginTracker tr(r);
  for (double t : times)
    for (Vertex x = 0; x < g.size(); ++x) {
      if (g.is_boundary(x)) {
        if (t == times.front())
          ++r.excluded_boundary;
        continue;
      }
      // Divided through by theta(x, t) > 0.
      const double time_term = -params.gamma * rho(x) * g.mu(x);
      detail::CompensatedSum acc;
      acc.add(time_term);
      double scale = std::abs(time_term);
      for (const auto& nb : g.neighbors(x)) {
        const double e = 1.0 - detail::weight_ratio(theta, nb.v, x, t);
        const double term = 0.5 * nb.w * e * e;
        acc.add(term);
        scale = std::max(scale, term);
      }
      tr.observe(acc.value(), scale, x, t);
    }
  tr.finish();
  return r;
}

// rho d_t theta + Delta theta <= 0, with 0 < sigma <= 1 and
// gamma >= alpha C0 C1 / rho0.
inline MarginReport poly_supersolution_margin(const WeightedGraph& g, const PseudoMetric& d,
                                   const DensityField& rho, const PolyTestParams& params,
                                   std::optional<double> c0 = {}, Mode mode = Mode::strict,
                                   const std::vector<double>& times = {0.0}) {
  const double s = d.jump_size();
  const double rho0 =
      detail::require_rho0(rho, ProfileKind::vanishing, mode, d, params.k, params.x0);
  const double sigma = rho.profile() ? rho.profile()->sigma : 0.0;
  detail::require(sigma > 0.0 && sigma <= 1.0, mode,
                  "sigma=" + std::to_string(sigma) + " outside (0, 1]");
  const double C0 = detail::resolve_c0(g, d, c0, mode);
  const double thr = poly_supersolution_gamma_threshold(params.alpha, params.k, s, rho0, C0);
  detail::require(params.gamma >= thr * (1.0 - 1e-15), mode,
                  "gamma=" + std::to_string(params.gamma) + " below threshold " + std::to_string(thr));
  PolyTestFunction theta(params, d);

  MarginReport r{"poly-supersolution",
                 detail::fmt_params({{"alpha", params.alpha}, {"gamma", params.gamma},
                                     {"k", params.k}, {"sigma", sigma}, {"rho0", rho0},
                                     {"C0", C0}}),
                 Sense::nonpositive};
  r.exploratory = mode == Mode::exploratory;
  detail::MarginTracker tr(r);
  for (double t : times)
    for (Vertex x = 0; x < g.size(); ++x) {
      if (g.is_boundary(x)) {
        if (t == times.front())
          ++r.excluded_boundary;
        continue;
      }
      // Divided through by theta(x, t) > 0.
      const double time_term = -params.gamma * rho(x);
      detail::CompensatedSum acc;
      acc.add(time_term);
      double scale = std::abs(time_term);
      for (const auto& nb : g.neighbors(x)) {
        const double term = nb.w * (detail::weight_ratio(theta, nb.v, x, t) - 1.0) / g.mu(x);
        acc.add(term);
        scale = std::max(scale, std::abs(term));
      }
      tr.observe(acc.value(), scale, x, t);
    }
  tr.finish();
  return r;
}

// alpha d(x,y) [d(x,x0)+k-s]^{-alpha-1} - |[d(y,x0)+k]^{-alpha} - [d(x,x0)+k]^{-alpha}|
inline double poly_difference_margin(double dist_x, double dist_y, double dist_xy, double k, double alpha,
                             double s) {
  if (!(k > s))
    throw precondition_error("difference bound needs k > s");
  if (!(alpha > 0.0))
    throw precondition_error("difference bound needs alpha > 0");
  double lhs = std::abs(std::pow(dist_y + k, -alpha) - std::pow(dist_x + k, -alpha));
  double rhs = alpha * dist_xy * std::pow(dist_x + k - s, -alpha - 1.0);
  return rhs - lhs;
}

// Vertex-indexed form; x and y must be adjacent.
inline double poly_difference_margin(const WeightedGraph& g, const PseudoMetric& d, Vertex x, Vertex y,
                             double k, double alpha, Vertex x0) {
  if (g.weight(x, y) <= 0.0)
    throw precondition_error("difference bound needs adjacent vertices");
  return poly_difference_margin(d(x, x0), d(y, x0), d(x, y), k, alpha, d.jump_size());
}

// Difference bound over every ordered truncation edge.
inline MarginReport poly_difference_margins(const WeightedGraph& g, const PseudoMetric& d, Vertex x0,
                                    double k, double alpha) {
  const double s = d.jump_size();
  auto row = d.distances_from(x0);
  MarginReport r{"poly-difference", detail::fmt_params({{"alpha", alpha}, {"k", k}, {"s", s}}),
                 Sense::nonnegative};
  detail::MarginTracker tr(r);
  for (Vertex x = 0; x < g.size(); ++x) {
    std::size_t kk = g.adjacency_offset(x);
    for (const auto& nb : g.neighbors(x)) {
      const double dxy = d.edge_distance(kk++);
      const double m = poly_difference_margin(row[x], row[nb.v], dxy, k, alpha, s);
      const double rhs = alpha * dxy * std::pow(row[x] + k - s, -alpha - 1.0);
      tr.observe(m, std::max(rhs, rhs - m), x, 0.0, nb.v);
    }
  }
  tr.finish();
  return r;
}

// min over adjacent pairs and sample times of [eta^2(y) - eta^2(x)][zeta(y,t) - zeta(x,t)].
template <SpaceTimeWeight W>
MarginReport admissibility_margin(const WeightedGraph& g, const VertexFunction& eta_values,
                                  const W& zeta, const std::vector<double>& times) {
  MarginReport r{"admissibility", "", Sense::nonnegative};
  detail::MarginTracker tr(r);
  for (double t : times)
    for (Vertex x = 0; x < g.size(); ++x)
      for (const auto& nb : g.neighbors(x)) {
        if (nb.v < x)
          continue;
        const double a = eta_values[nb.v] * eta_values[nb.v] - eta_values[x] * eta_values[x];
        const double b = zeta.value(nb.v, t) - zeta.value(x, t);
        tr.observe(a * b, std::abs(a * b), x, t, nb.v);
      }
  tr.finish();
  return r;
}

// ---------------------------------------------------------------------------
// Decay exponents of the bounded-density estimate chains.

struct DecayParams {
  double K = 0.8;
  double s = 1.0;
  double rho0 = 1.0;
  double beta = 0.25;
  double delta = 0.1;
  double tau = 1.0;
  double C0 = 1.0;
};

enum class RangeSet {
  statement, // beta in (0, 1/2s), the class gate
  proof      // wider alternates: beta in (0, 1/s), delta in (0, 1 - beta s)
};

namespace detail {

inline void require_open(double v, double lo, double hi, const std::string& name) {
  if (!(v > lo && v < hi)) {
    std::ostringstream os;
    os << name << "=" << v << " outside (" << lo << ", " << hi << ")";
    throw precondition_error(os.str());
  }
}

} // namespace detail

inline void validate_decay_f(const DecayParams& p) {
  if (!(p.s > 0.0) || !(p.rho0 > 0.0) || !(p.tau >= 0.0))
    throw precondition_error("decay exponent needs s > 0, rho0 > 0, tau >= 0");
  detail::require_open(p.beta, 0.0, 1.0 / (2.0 * p.s), "beta");
  detail::require_open(p.delta, 0.0, 0.5 - p.beta * p.s, "delta");
  detail::require_open(p.K, 2.0 * p.beta * p.s / (1.0 - 2.0 * p.delta), 1.0, "K");
}

inline void validate_decay_g(const DecayParams& p, RangeSet ranges = RangeSet::statement) {
  if (!(p.s > 0.0) || !(p.rho0 > 0.0) || !(p.tau >= 0.0) || !(p.C0 > 0.0))
    throw precondition_error("decay exponent needs s > 0, rho0 > 0, tau >= 0, C0 > 0");
  const double beta_hi = ranges == RangeSet::statement ? 1.0 / (2.0 * p.s) : 1.0 / p.s;
  detail::require_open(p.beta, 0.0, beta_hi, "beta");
  detail::require_open(p.delta, 0.0, std::min(0.5, 1.0 - p.beta * p.s), "delta");
  detail::require_open(p.K, p.beta * p.s / (1.0 - 2.0 * p.delta), 1.0, "K");
}

// f(R) = (1/rho0)(K^2/8s^2) tau R^K log^2 R + (3/2) K log R
//        - [(1-2 delta) K/(2s) - beta] R log R
inline double decay_exponent_f(double R, const DecayParams& p) {
  validate_decay_f(p);
  if (!(R > 1.0))
    throw precondition_error("decay exponent needs R > 1");
  const double L = std::log(R);
  return p.K * p.K / (8.0 * p.s * p.s * p.rho0) * p.tau * std::pow(R, p.K) * L * L +
         1.5 * p.K * L - ((1.0 - 2.0 * p.delta) * p.K / (2.0 * p.s) - p.beta) * R * L;
}

// g(R) = (C0 K/(rho0 s)) tau R^K log R + 2K log R - [(1-2 delta) K/s - beta] R log R
inline double decay_exponent_g(double R, const DecayParams& p, RangeSet ranges = RangeSet::statement) {
  validate_decay_g(p, ranges);
  if (!(R > 1.0))
    throw precondition_error("decay exponent needs R > 1");
  const double L = std::log(R);
  return p.C0 * p.K / (p.rho0 * p.s) * p.tau * std::pow(R, p.K) * L + 2.0 * p.K * L -
         ((1.0 - 2.0 * p.delta) * p.K / p.s - p.beta) * R * L;
}

// Smallest point R* of the log grid [r_min, r_max] (points_per_decade per
// decade) such that the exponent stays below `level` on every grid point
// from R* on. Returns nullopt when the last grid point is still above.
template <class Exponent>
std::optional<double> decay_threshold_radius(const Exponent& exponent, double level, double r_min,
                                             double r_max, int points_per_decade = 20) {
  std::vector<double> grid;
  const double step = std::pow(10.0, 1.0 / points_per_decade);
  for (double r = r_min; r <= r_max * (1.0 + 1e-12); r *= step)
    grid.push_back(r);
  std::optional<double> out;
  for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
    if (exponent(*it) < level)
      out = *it;
    else
      break;
  }
  return out;
}

// Parameter choices of the four uniqueness pipelines.
struct PipelineChoice {
  double alpha;
  double gamma;
};

inline PipelineChoice bounded_energy_choice(double K, double s, double rho0, double R) {
  double alpha = K / (2.0 * s) * std::log(R);
  return {alpha, exp_energy_gamma_threshold(alpha, s, rho0)};
}

inline PipelineChoice bounded_supersolution_choice(double K, double s, double rho0, double c0, double R) {
  double alpha = K / s * std::log(R);
  return {alpha, exp_supersolution_gamma_threshold(alpha, s, rho0, c0)};
}

inline PipelineChoice vanishing_energy_choice(double alpha, double k, double s, double rho0) {
  return {alpha, poly_energy_gamma_threshold(alpha, k, s, rho0)};
}

inline PipelineChoice vanishing_supersolution_choice(double alpha, double k, double s, double rho0, double c0) {
  return {alpha, poly_supersolution_gamma_threshold(alpha, k, s, rho0, c0)};
}

} // namespace graphheat

#endif
