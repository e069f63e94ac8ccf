#ifndef GRAPHHEAT_CALCULUS_HPP
#define GRAPHHEAT_CALCULUS_HPP

#include <cmath>
#include <concepts>
#include <span>
#include <utility>
#include <vector>

#include "graphheat/error.hpp"
#include "graphheat/graph.hpp"

namespace graphheat {

// Real function on the vertices of one graph.
class VertexFunction {
public:
  VertexFunction() = default;
  explicit VertexFunction(std::size_t n, double value = 0.0) : values_(n, value) {}
  explicit VertexFunction(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](Vertex x) const { return values_[x]; }
  double& operator[](Vertex x) { return values_[x]; }

  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& data() noexcept { return values_; }
  const std::vector<double>& data() const noexcept { return values_; }

  friend bool operator==(const VertexFunction&, const VertexFunction&) = default;

private:
  std::vector<double> values_;
};

namespace detail {

// Neumaier compensated summation.
class CompensatedSum {
public:
  void add(double v) {
    double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
    magnitude_ += std::abs(v);
  }
  double value() const { return sum_ + comp_; }
  // Sum of absolute values of all added terms.
  double magnitude() const { return magnitude_; }

private:
  double sum_ = 0.0, comp_ = 0.0, magnitude_ = 0.0;
};

inline void check_size(const WeightedGraph& g, const VertexFunction& f) {
  if (f.size() != g.size())
    throw input_error("vertex function has " + std::to_string(f.size()) +
                      " values, graph has " + std::to_string(g.size()) + " vertices");
}

} // namespace detail

// Value taken by functions on the vertices cut away from a truncation.
struct Exterior {
  double value = 0.0;
};

// nabla_xy f = f(y) - f(x)
inline double difference(const VertexFunction& f, Vertex x, Vertex y) {
  if (x >= f.size() || y >= f.size())
    throw input_error("unknown vertex in difference");
  return f[y] - f[x];
}

// |nabla f(x)|^2 = (1/mu(x)) sum_y omega(x, y) (nabla_xy f)^2, exterior
// neighbours included with the exterior value.
inline double gradient_squared(const WeightedGraph& g, const VertexFunction& f, Vertex x,
                               Exterior ext = {}) {
  double acc = 0.0;
  for (const auto& nb : g.neighbors(x)) {
    double df = f[nb.v] - f[x];
    acc += nb.w * df * df;
  }
  double de = ext.value - f[x];
  acc += g.exterior_weight(x) * de * de;
  return acc / g.mu(x);
}

// Delta f(x) = (1/mu(x)) sum_y [f(y) - f(x)] omega(x, y)
inline double laplacian(const WeightedGraph& g, const VertexFunction& f, Vertex x,
                        Exterior ext = {}) {
  double acc = 0.0;
  for (const auto& nb : g.neighbors(x))
    acc += nb.w * (f[nb.v] - f[x]);
  acc += g.exterior_weight(x) * (ext.value - f[x]);
  return acc / g.mu(x);
}

inline VertexFunction laplacian(const WeightedGraph& g, const VertexFunction& f,
                                Exterior ext = {}) {
  detail::check_size(g, f);
  VertexFunction out(g.size());
  for (Vertex x = 0; x < g.size(); ++x)
    out[x] = laplacian(g, f, x, ext);
  return out;
}

// True when f vanishes on every boundary-layer vertex.
inline bool supported_in_interior(const WeightedGraph& g, const VertexFunction& f) {
  for (Vertex x = 0; x < g.size(); ++x)
    if (g.is_boundary(x) && f[x] != 0.0)
      return false;
  return true;
}

struct IdentityResidual {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;  // |lhs - rhs|
  double scale = 1.0;     // max(1, sum of |summands|)
  bool support_warning = false;

  double relative() const { return residual / scale; }
};

// Integration by parts:
//   sum_x [Delta f](x) h(x) mu(x) = -1/2 sum_{x,y} (nabla_xy f)(nabla_xy h) omega(x, y).
// The identity is exact on the truncation when f or h vanishes on the
// boundary layer; otherwise `support_warning` is set.
inline IdentityResidual integration_by_parts_residual(const WeightedGraph& g, const VertexFunction& f,
                                                      const VertexFunction& h) {
  detail::check_size(g, f);
  detail::check_size(g, h);
  detail::CompensatedSum lhs, rhs;
  for (Vertex x = 0; x < g.size(); ++x) {
    for (const auto& nb : g.neighbors(x)) {
      lhs.add(nb.w * (f[nb.v] - f[x]) * h[x]);
      rhs.add(-0.5 * nb.w * (f[nb.v] - f[x]) * (h[nb.v] - h[x]));
    }
    lhs.add(-g.exterior_weight(x) * f[x] * h[x]);
  }
  IdentityResidual r;
  r.lhs = lhs.value();
  r.rhs = rhs.value();
  r.residual = std::abs(r.lhs - r.rhs);
  r.scale = std::max(1.0, std::max(lhs.magnitude(), rhs.magnitude()));
  r.support_warning = !supported_in_interior(g, f) && !supported_in_interior(g, h);
  return r;
}

// nabla_xy(fh) = f(x) nabla_xy h + (nabla_xy f) h(y)
inline IdentityResidual product_rule_residual(const VertexFunction& f, const VertexFunction& h,
                                              Vertex x, Vertex y) {
  IdentityResidual r;
  r.lhs = f[y] * h[y] - f[x] * h[x];
  double a = f[x] * (h[y] - h[x]), b = (f[y] - f[x]) * h[y];
  r.rhs = a + b;
  r.residual = std::abs(r.lhs - r.rhs);
  r.scale = std::max({1.0, std::abs(f[y] * h[y]), std::abs(f[x] * h[x]), std::abs(a), std::abs(b)});
  return r;
}

// Delta(fh)(x) = f Delta h + h Delta f + (1/mu) sum_y (nabla f)(nabla h) omega
inline IdentityResidual laplacian_product_residual(const WeightedGraph& g, const VertexFunction& f,
                                                   const VertexFunction& h, Vertex x,
                                                   Exterior ext = {}) {
  detail::CompensatedSum lhs, cross, lf, lh;
  auto visit = [&](double w, double fy, double hy) {
    lhs.add(w * (fy * hy - f[x] * h[x]));
    cross.add(w * (fy - f[x]) * (hy - h[x]));
    lf.add(w * (fy - f[x]));
    lh.add(w * (hy - h[x]));
  };
  for (const auto& nb : g.neighbors(x))
    visit(nb.w, f[nb.v], h[nb.v]);
  if (g.exterior_weight(x) > 0.0)
    visit(g.exterior_weight(x), ext.value, ext.value);
  const double m = g.mu(x);
  IdentityResidual r;
  r.lhs = lhs.value() / m;
  double t1 = f[x] * lh.value() / m, t2 = h[x] * lf.value() / m, t3 = cross.value() / m;
  r.rhs = t1 + t2 + t3;
  r.residual = std::abs(r.lhs - r.rhs);
  r.scale = std::max({1.0, lhs.magnitude() / m, std::abs(f[x]) * lh.magnitude() / m,
                      std::abs(h[x]) * lf.magnitude() / m, cross.magnitude() / m});
  return r;
}

// ---------------------------------------------------------------------------
// Scalar convex functions for the convexity inequality
//   Delta psi(u(x)) >= psi'(u(x)) Delta u(x).

template <class F>
concept ScalarFunction = requires(const F& f, double s) {
  { f.value(s) } -> std::convertible_to<double>;
  { f.derivative(s) } -> std::convertible_to<double>;
};

// s -> (s^2 + alpha)^{exponent/2}; convex for exponent >= 1 and alpha > 0.
struct RegularizedPower {
  double alpha;
  double exponent;

  double value(double s) const { return std::pow(s * s + alpha, 0.5 * exponent); }
  double derivative(double s) const {
    return exponent * s * std::pow(s * s + alpha, 0.5 * exponent - 1.0);
  }
};

// pi_alpha(s) = (s^2 + alpha)^{p/4}, used with p >= 2 in the single
// integration-by-parts estimate.
inline RegularizedPower quarter_power_regularization(double p, double alpha) {
  if (!(p >= 2.0))
    throw precondition_error("(s^2+alpha)^{p/4} is convex only for p >= 2");
  if (!(alpha > 0.0))
    throw precondition_error("regularization needs alpha > 0");
  return {alpha, 0.5 * p};
}

// pi_alpha(s) = (s^2 + alpha)^{p/2}, used with p >= 1 in the double
// integration-by-parts estimate.
inline RegularizedPower half_power_regularization(double p, double alpha) {
  if (!(p >= 1.0))
    throw precondition_error("(s^2+alpha)^{p/2} is convex only for p >= 1");
  if (!(alpha > 0.0))
    throw precondition_error("regularization needs alpha > 0");
  return {alpha, p};
}

struct Affine {
  double slope;
  double offset;
  double value(double s) const { return slope * s + offset; }
  double derivative(double) const { return slope; }
};

struct Square {
  double value(double s) const { return s * s; }
  double derivative(double s) const { return 2.0 * s; }
};

// Samples second differences of psi on [lo, hi]; throws when a clearly
// negative one is found.
template <ScalarFunction F>
void require_convex(const F& psi, double lo, double hi, int samples = 64) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double h = (hi - lo) / samples;
  for (int i = 1; i < samples; ++i) {
    double s = lo + i * h;
    double a = psi.value(s - h), b = psi.value(s), c = psi.value(s + h);
    double second = a - 2.0 * b + c;
    double mag = std::abs(a) + 2.0 * std::abs(b) + std::abs(c);
    if (second < -1e-9 * std::max(1.0, mag))
      throw precondition_error("function is not convex near s=" + std::to_string(s));
  }
}

// Delta psi(u(x)) - psi'(u(x)) Delta u(x); nonnegative for convex psi.
template <ScalarFunction F>
double convexity_inequality_margin(const WeightedGraph& g, const VertexFunction& u, const F& psi,
                                   Vertex x, Exterior ext = {}) {
  const double ux = u[x], pux = psi.value(ux), dpux = psi.derivative(ux);
  double acc = 0.0;
  auto visit = [&](double w, double uy) {
    // psi(uy) - psi(ux) - psi'(ux)(uy - ux) per edge; each term >= 0.
    acc += w * (psi.value(uy) - pux - dpux * (uy - ux));
  };
  for (const auto& nb : g.neighbors(x))
    visit(nb.w, u[nb.v]);
  if (g.exterior_weight(x) > 0.0)
    visit(g.exterior_weight(x), ext.value);
  return acc / g.mu(x);
}

// Checked variant: rejects psi that is detectably non-convex on the range of u.
template <ScalarFunction F>
std::vector<double> convexity_margins(const WeightedGraph& g, const VertexFunction& u, const F& psi,
                                      Exterior ext = {}) {
  detail::check_size(g, u);
  double lo = ext.value, hi = ext.value;
  for (double v : u.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  require_convex(psi, lo, hi);
  std::vector<double> out(g.size());
  for (Vertex x = 0; x < g.size(); ++x)
    out[x] = convexity_inequality_margin(g, u, psi, x, ext);
  return out;
}

} // namespace graphheat

#endif
