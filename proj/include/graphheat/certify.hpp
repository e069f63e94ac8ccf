#ifndef GRAPHHEAT_CERTIFY_HPP
#define GRAPHHEAT_CERTIFY_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "graphheat/calculus.hpp"
#include "graphheat/density.hpp"
#include "graphheat/error.hpp"
#include "graphheat/graph.hpp"
#include "graphheat/metric.hpp"
#include "graphheat/solver.hpp"
#include "graphheat/test_functions.hpp"

namespace graphheat {

// ---------------------------------------------------------------------------
// Ball energies

inline double ball_mass(const std::vector<double>& state, const std::vector<double>& mu, double p,
                        const std::vector<Vertex>& members) {
  detail::CompensatedSum acc;
  for (Vertex x : members)
    acc.add(std::pow(std::abs(state[x]), p) * mu[x]);
  return acc.value();
}

namespace detail {

inline void require_p(double p) {
  if (!(p >= 1.0))
    throw precondition_error("exponent p must be >= 1 (got " + std::to_string(p) + ")");
}

// Trapezoid rule over the stored samples up to sample index `last`.
template <class F>
double trapezoid(const Trajectory& tr, std::size_t last, F&& sample) {
  CompensatedSum acc;
  double prev = sample(0);
  for (std::size_t i = 1; i <= last; ++i) {
    double cur = sample(i);
    acc.add(0.5 * (tr.times[i] - tr.times[i - 1]) * (prev + cur));
    prev = cur;
  }
  return acc.value();
}

} // namespace detail

// int_0^tau sum_{x in B_R(x0)} |u|^p mu dt, trapezoidal in t. tau defaults to
// the trajectory horizon.
inline double ball_energy(const Trajectory& tr, double p, const PseudoMetric& d, Vertex x0, double R,
                          std::optional<double> tau = {}) {
  detail::require_p(p);
  if (!(R > 0.0))
    throw precondition_error("ball energy needs R > 0");
  std::vector<Vertex> members;
  auto row = d.distances_from(x0);
  for (Vertex x = 0; x < row.size(); ++x)
    if (row[x] < R)
      members.push_back(x);
  const std::size_t last = tau ? tr.index_of_time(*tau) : tr.samples() - 1;
  return detail::trapezoid(tr, last, [&](std::size_t i) { return ball_mass(tr.states[i], tr.mu, p, members); });
}

inline std::vector<double> energy_curve(const Trajectory& tr, double p, const PseudoMetric& d,
                                        Vertex x0, const std::vector<double>& radii,
                                        std::optional<double> tau = {}) {
  std::vector<double> out;
  out.reserve(radii.size());
  for (double R : radii)
    out.push_back(ball_energy(tr, p, d, x0, R, tau));
  return out;
}

// ---------------------------------------------------------------------------
// Growth fits

enum class GrowthForm {
  exp_rlogr, // C exp{beta R log R}
  poly       // C (R + k)^beta
};

inline std::string to_string(GrowthForm f) { return f == GrowthForm::exp_rlogr ? "exp-RlogR" : "poly"; }

struct GrowthFit {
  GrowthForm form = GrowthForm::exp_rlogr;
  double k = 0.0; // only for the polynomial form
  double beta = 0.0;
  double C = 1.0;
  std::vector<double> radii;
  std::vector<double> energies;

  double regressor(double R) const {
    return form == GrowthForm::exp_rlogr ? R * std::log(R) : std::log(R + k);
  }
  double bound(double R) const { return C * std::exp(beta * regressor(R)); }

  // E(R_n) <= C bound(R_n) at every sample, up to relative rounding.
  bool dominates(double rel_tol = 1e-12) const {
    for (std::size_t i = 0; i < radii.size(); ++i)
      if (energies[i] > bound(radii[i]) * (1.0 + rel_tol))
        return false;
    return true;
  }
};

namespace detail {

inline constexpr double log_floor = 1e-300;

// Slope of the last edge of the upper hull of (X_n, log E_n), clamped at 0,
// and the smallest C that makes the bound dominate every sample.
inline GrowthFit envelope_fit(GrowthFit fit) {
  const auto& R = fit.radii;
  const auto& E = fit.energies;
  if (R.size() < 3)
    throw precondition_error("growth fit needs at least 3 radii");
  if (E.size() != R.size())
    throw input_error("growth fit needs one energy per radius");
  for (std::size_t i = 0; i < R.size(); ++i) {
    if (!(R[i] > 1.0))
      throw precondition_error("growth fit needs radii > 1");
    if (i > 0 && !(R[i] > R[i - 1]))
      throw precondition_error("radii must be strictly increasing");
    if (!(E[i] >= 0.0) || !std::isfinite(E[i]))
      throw input_error("energies must be finite and nonnegative");
  }
  const std::size_t N = R.size() - 1;
  std::vector<double> X(R.size()), Y(R.size());
  for (std::size_t i = 0; i <= N; ++i) {
    X[i] = fit.regressor(R[i]);
    Y[i] = std::log(std::max(E[i], log_floor));
  }
  double slope = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < N; ++i)
    slope = std::min(slope, (Y[N] - Y[i]) / (X[N] - X[i]));
  fit.beta = std::max(0.0, slope);
  double logC = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= N; ++i)
    logC = std::max(logC, Y[i] - fit.beta * X[i]);
  fit.C = std::exp(logC);
  return fit;
}

} // namespace detail

inline GrowthFit fit_exp_growth(const std::vector<double>& radii, const std::vector<double>& energies) {
  GrowthFit f;
  f.form = GrowthForm::exp_rlogr;
  f.radii = radii;
  f.energies = energies;
  return detail::envelope_fit(std::move(f));
}

inline GrowthFit fit_poly_growth(const std::vector<double>& radii, const std::vector<double>& energies,
                                 double k) {
  if (!(k >= 0.0))
    throw precondition_error("polynomial growth fit needs k >= 0");
  GrowthFit f;
  f.form = GrowthForm::poly;
  f.k = k;
  f.radii = radii;
  f.energies = energies;
  return detail::envelope_fit(std::move(f));
}

// ---------------------------------------------------------------------------
// Classification

// The four uniqueness classes:
//   bounded-energy          density bounded below, p >= 2, intrinsic metric,
//                           growth C exp{beta R log R} with beta < 1/(2s)
//   bounded-supersolution   density bounded below, p >= 1, intrinsic and
//                           1-intrinsic metric, same growth condition
//   vanishing-energy        density >= rho0 (d + k)^-sigma with 0 < sigma <= 2,
//                           p >= 2, intrinsic metric, growth C (R + k)^beta
//   vanishing-supersolution same density with 0 < sigma <= 1, p >= 1,
//                           1-intrinsic metric, same growth condition
enum class Pipeline { bounded_energy, bounded_supersolution, vanishing_energy, vanishing_supersolution };

inline std::string to_string(Pipeline p) {
  switch (p) {
  case Pipeline::bounded_energy: return "bounded-energy";
  case Pipeline::bounded_supersolution: return "bounded-supersolution";
  case Pipeline::vanishing_energy: return "vanishing-energy";
  case Pipeline::vanishing_supersolution: return "vanishing-supersolution";
  }
  return "?";
}

enum class Verdict { in_class, out_of_class, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
  case Verdict::in_class: return "in-class";
  case Verdict::out_of_class: return "out-of-class";
  case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct ClassContext {
  double p = 2.0;
  double s = 1.0;
  bool intrinsic = true;              // q = 2 bound <= 1
  std::optional<double> c0_one;       // 1-intrinsic bound, when the metric is declared 1-intrinsic
  std::optional<DensityProfile> profile;
};

struct PipelineCheck {
  Pipeline pipeline;
  bool applicable = false;
  bool satisfied = false;
  std::string reason; // failed hypothesis, or the growth comparison made
};

struct GrowthCertificate {
  double p = 2.0;
  double s = 1.0;
  std::optional<GrowthFit> exp_fit;
  std::optional<GrowthFit> poly_fit;
  std::vector<PipelineCheck> checks;
  Verdict verdict = Verdict::inconclusive;
  std::optional<Pipeline> pipeline; // first satisfied (or first applicable) class
  std::string reason;
};

namespace detail {

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

} // namespace detail

inline GrowthCertificate classify(const ClassContext& ctx, const std::optional<GrowthFit>& exp_fit,
                                  const std::optional<GrowthFit>& poly_fit) {
  GrowthCertificate cert;
  cert.p = ctx.p;
  cert.s = ctx.s;
  cert.exp_fit = exp_fit;
  cert.poly_fit = poly_fit;
  if (!ctx.profile) {
    cert.reason = "no density profile declared";
    return cert;
  }
  const auto& prof = *ctx.profile;
  const bool one_intrinsic = ctx.c0_one.has_value();
  const double beta_max = ctx.s > 0.0 ? 1.0 / (2.0 * ctx.s) : std::numeric_limits<double>::infinity();

  auto exp_gate = [&](PipelineCheck& c) {
    if (!exp_fit) {
      c.applicable = false;
      c.reason = "no exp-RlogR growth fit available";
      return;
    }
    c.satisfied = exp_fit->beta < beta_max;
    c.reason = "beta_hat=" + detail::num(exp_fit->beta) + (c.satisfied ? " < " : " >= ") +
               "1/(2s)=" + detail::num(beta_max);
  };
  auto poly_gate = [&](PipelineCheck& c) {
    if (!poly_fit) {
      c.applicable = false;
      c.reason = "no polynomial growth fit available";
      return;
    }
    c.satisfied = std::isfinite(poly_fit->beta);
    c.reason = "beta_hat=" + detail::num(poly_fit->beta) + (c.satisfied ? " finite" : " not finite");
  };

  if (prof.kind == ProfileKind::bounded_below) {
    PipelineCheck a{Pipeline::bounded_energy};
    if (!(ctx.p >= 2.0))
      a.reason = "p=" + detail::num(ctx.p) + " < 2";
    else if (!ctx.intrinsic)
      a.reason = "metric is not intrinsic";
    else {
      a.applicable = true;
      exp_gate(a);
    }
    PipelineCheck b{Pipeline::bounded_supersolution};
    if (!(ctx.p >= 1.0))
      b.reason = "p=" + detail::num(ctx.p) + " < 1";
    else if (!ctx.intrinsic)
      b.reason = "metric is not intrinsic";
    else if (!one_intrinsic)
      b.reason = "metric is not declared 1-intrinsic";
    else {
      b.applicable = true;
      exp_gate(b);
    }
    cert.checks = {a, b};
  } else {
    PipelineCheck a{Pipeline::vanishing_energy};
    if (!(prof.sigma > 0.0 && prof.sigma <= 2.0))
      a.reason = "sigma=" + detail::num(prof.sigma) + (prof.sigma > 2.0 ? " > 2" : " <= 0") +
                 " outside the vanishing-energy class";
    else if (!(ctx.p >= 2.0))
      a.reason = "p=" + detail::num(ctx.p) + " < 2";
    else if (!ctx.intrinsic)
      a.reason = "metric is not intrinsic";
    else if (!(prof.k > ctx.s))
      a.reason = "k=" + detail::num(prof.k) + " <= s";
    else {
      a.applicable = true;
      poly_gate(a);
    }
    PipelineCheck b{Pipeline::vanishing_supersolution};
    if (!(prof.sigma > 0.0 && prof.sigma <= 1.0))
      b.reason = "sigma=" + detail::num(prof.sigma) + (prof.sigma > 1.0 ? " > 1" : " <= 0") +
                 " outside the vanishing-supersolution class";
    else if (!(ctx.p >= 1.0))
      b.reason = "p=" + detail::num(ctx.p) + " < 1";
    else if (!ctx.intrinsic)
      b.reason = "metric is not intrinsic";
    else if (!one_intrinsic)
      b.reason = "metric is not declared 1-intrinsic";
    else if (!(prof.k > ctx.s))
      b.reason = "k=" + detail::num(prof.k) + " <= s";
    else {
      b.applicable = true;
      poly_gate(b);
    }
    cert.checks = {a, b};
  }

  std::string why;
  for (const auto& c : cert.checks) {
    if (c.applicable && c.satisfied && !cert.pipeline) {
      cert.verdict = Verdict::in_class;
      cert.pipeline = c.pipeline;
      cert.reason = to_string(c.pipeline) + ": " + c.reason;
    }
    if (!why.empty())
      why += "; ";
    why += to_string(c.pipeline) + ": " + c.reason;
  }
  if (cert.verdict == Verdict::in_class)
    return cert;
  for (const auto& c : cert.checks)
    if (c.applicable) {
      cert.verdict = Verdict::out_of_class;
      cert.pipeline = c.pipeline;
      break;
    }
  cert.reason = why;
  return cert;
}

// Convenience: energies from a trajectory, both fits, then the class decision.
inline GrowthCertificate classify(const Trajectory& tr, double p, const WeightedGraph& g,
                                  const PseudoMetric& d, const DensityField& rho, Vertex x0,
                                  const std::vector<double>& radii,
                                  bool declare_one_intrinsic = true) {
  ClassContext ctx;
  ctx.p = p;
  ctx.s = d.jump_size();
  ctx.intrinsic = is_intrinsic(g, d);
  if (declare_one_intrinsic)
    ctx.c0_one = intrinsic_bound(g, d, 1.0);
  ctx.profile = rho.profile();
  auto E = energy_curve(tr, p, d, x0, radii);
  std::optional<GrowthFit> ef = fit_exp_growth(radii, E);
  std::optional<GrowthFit> pf;
  if (ctx.profile && ctx.profile->kind == ProfileKind::vanishing)
    pf = fit_poly_growth(radii, E, ctx.profile->k);
  return classify(ctx, ef, pf);
}

// ---------------------------------------------------------------------------
// A-priori inequalities on implicit-Euler trajectories (nonzero initial data
// kept on the bound side).

enum class Quadrature {
  // Step-by-step analogue that implicit Euler satisfies exactly: state at
  // t_{n+1}, weights at t_n, weight time increments instead of derivatives.
  scheme_consistent,
  // Trapezoid rule on the stored samples with analytic time derivatives;
  // satisfied up to O(dt).
  trapezoid
};

struct InequalityResidual {
  double state_side = 0.0; // weighted mass at tau
  double bound_side = 0.0; // initial term + time integral
  double initial_term = 0.0;
  double scale = 1.0;      // largest aggregate term
  double slack() const { return bound_side - state_side; }
  double relative() const { return slack() / scale; }
  bool holds(double rel_tol) const { return relative() >= -rel_tol; }
};

namespace detail {

inline void require_stepwise(const Trajectory& tr, Quadrature q) {
  if (q != Quadrature::scheme_consistent)
    return;
  if (tr.scheme != Scheme::implicit_euler || tr.stride != 1)
    throw precondition_error(
        "scheme-consistent quadrature needs an implicit Euler trajectory stored at every step");
}

inline void require_source_free(const Trajectory& tr) {
  if (!tr.source_free)
    throw precondition_error("a-priori inequalities need a source-free trajectory");
}

inline double finalize_scale(std::initializer_list<double> terms) {
  double s = 0.0;
  for (double t : terms)
    s = std::max(s, std::abs(t));
  return s > 0.0 ? s : 1.0;
}

} // namespace detail

// sum rho |u(tau)|^p v(tau) mu <= sum rho |u0|^p v(0) mu
//                                 + int_0^tau sum [rho d_t v + Delta v] |u|^p mu dt
// for v >= 0 vanishing on the boundary layer, p >= 1.
template <SpaceTimeWeight V>
InequalityResidual weighted_mass_residual(const WeightedGraph& g, const Trajectory& tr, const V& v,
                                          double p, double tau,
                                          Quadrature quad = Quadrature::scheme_consistent) {
  detail::require_p(p);
  detail::require_source_free(tr);
  detail::require_stepwise(tr, quad);
  for (Vertex x = 0; x < g.size(); ++x)
    if (g.is_boundary(x) && v.value(x, 0.0) != 0.0)
      throw precondition_error("weight must vanish on the boundary layer (vertex id " +
                               std::to_string(g.id(x)) + ")");
  const std::size_t last = tr.index_of_time(tau);
  const std::size_t n = g.size();
  auto upow = [&](std::size_t i, Vertex x) { return std::pow(std::abs(tr.states[i][x]), p); };

  // Delta v at time t via the graph Laplacian (exterior value 0).
  std::vector<double> vt(n);
  auto lap_v = [&](double t, std::vector<double>& out) {
    for (Vertex x = 0; x < n; ++x)
      vt[x] = v.value(x, t);
    out.assign(n, 0.0);
    for (Vertex x = 0; x < n; ++x) {
      double acc = -g.exterior_weight(x) * vt[x];
      for (const auto& nb : g.neighbors(x))
        acc += nb.w * (vt[nb.v] - vt[x]);
      out[x] = acc / g.mu(x);
    }
  };

  InequalityResidual r;
  detail::CompensatedSum init, state;
  for (Vertex x = 0; x < n; ++x) {
    init.add(tr.rho[x] * upow(0, x) * v.value(x, 0.0) * tr.mu[x]);
    state.add(tr.rho[x] * upow(last, x) * v.value(x, tr.times[last]) * tr.mu[x]);
  }
  detail::CompensatedSum time_part, lap_part;
  std::vector<double> lv;
  if (quad == Quadrature::scheme_consistent) {
    for (std::size_t i = 0; i < last; ++i) {
      const double t0 = tr.times[i], t1 = tr.times[i + 1];
      lap_v(t0, lv);
      for (Vertex x = 0; x < n; ++x) {
        const double w = upow(i + 1, x) * tr.mu[x];
        time_part.add(tr.rho[x] * (v.value(x, t1) - v.value(x, t0)) * w);
        lap_part.add((t1 - t0) * lv[x] * w);
      }
    }
  } else {
    auto integrand = [&](std::size_t i, double& tp, double& lp) {
      const double t = tr.times[i];
      lap_v(t, lv);
      tp = 0.0;
      lp = 0.0;
      for (Vertex x = 0; x < n; ++x) {
        const double w = upow(i, x) * tr.mu[x];
        tp += tr.rho[x] * v.time_derivative(x, t) * w;
        lp += lv[x] * w;
      }
    };
    double tp0, lp0, tp1, lp1;
    integrand(0, tp0, lp0);
    for (std::size_t i = 1; i <= last; ++i) {
      integrand(i, tp1, lp1);
      const double h = tr.times[i] - tr.times[i - 1];
      time_part.add(0.5 * h * (tp0 + tp1));
      lap_part.add(0.5 * h * (lp0 + lp1));
      tp0 = tp1;
      lp0 = lp1;
    }
  }
  r.initial_term = init.value();
  r.state_side = state.value();
  r.bound_side = r.initial_term + time_part.value() + lap_part.value();
  r.scale = detail::finalize_scale(
      {r.initial_term, r.state_side, time_part.value(), lap_part.value(), r.bound_side});
  return r;
}

// sum rho |u(tau)|^p zeta(tau) eta^2 mu
//   <= sum rho |u0|^p eta^2 zeta(0) mu
//    + int_0^tau sum_x |u|^p eta^2 { rho d_t zeta mu + zeta/2 sum_y [1 - zeta(y)/zeta(x)]^2 omega } dt
//    + 2 int_0^tau sum_{x,y} |u(x)|^p [eta(y) - eta(x)]^2 zeta(y) omega dt
// for p >= 2 and [eta^2(y) - eta^2(x)][zeta(y) - zeta(x)] >= 0 on every edge.
template <SpaceTimeWeight Z>
InequalityResidual cutoff_energy_residual(const WeightedGraph& g, const Trajectory& tr,
                                          const VertexFunction& eta, const Z& zeta, double p,
                                          double tau,
                                          Quadrature quad = Quadrature::scheme_consistent) {
  if (!(p >= 2.0))
    throw precondition_error("cut-off energy inequality needs p >= 2");
  detail::require_source_free(tr);
  detail::require_stepwise(tr, quad);
  detail::check_size(g, eta);
  for (Vertex x = 0; x < g.size(); ++x)
    if (g.is_boundary(x) && eta[x] != 0.0)
      throw precondition_error("cut-off must vanish on the boundary layer (vertex id " +
                               std::to_string(g.id(x)) + ")");
  const std::size_t last = tr.index_of_time(tau);
  {
    std::vector<double> grid(tr.times.begin(), tr.times.begin() + static_cast<long>(last) + 1);
    auto adm = admissibility_margin(g, eta, zeta, grid);
    if (!adm.holds(1e-12))
      throw precondition_error("cut-off and weight are not admissible: edge (" +
                               std::to_string(g.id(adm.witness)) + ", " +
                               std::to_string(g.id(adm.witness_y.value_or(adm.witness))) + ")");
  }
  const std::size_t n = g.size();
  auto upow = [&](std::size_t i, Vertex x) { return std::pow(std::abs(tr.states[i][x]), p); };

  InequalityResidual r;
  detail::CompensatedSum init, state, time_part, zeta_part, eta_part;
  for (Vertex x = 0; x < n; ++x) {
    const double e2 = eta[x] * eta[x];
    init.add(tr.rho[x] * upow(0, x) * e2 * zeta.value(x, 0.0) * tr.mu[x]);
    state.add(tr.rho[x] * upow(last, x) * e2 * zeta.value(x, tr.times[last]) * tr.mu[x]);
  }
  // Spatial terms with weights at time tw and state sample i.
  auto spatial = [&](std::size_t i, double tw, double& zp, double& ep) {
    detail::CompensatedSum za, ea;
    for (Vertex x = 0; x < n; ++x) {
      const double ux = upow(i, x);
      if (ux == 0.0)
        continue;
      const double zx = zeta.value(x, tw);
      for (const auto& nb : g.neighbors(x)) {
        const double zy = zeta.value(nb.v, tw);
        const double q = 1.0 - detail::weight_ratio(zeta, nb.v, x, tw);
        za.add(0.5 * ux * eta[x] * eta[x] * zx * q * q * nb.w);
        const double de = eta[nb.v] - eta[x];
        ea.add(2.0 * ux * de * de * zy * nb.w);
      }
    }
    zp = za.value();
    ep = ea.value();
  };

  if (quad == Quadrature::scheme_consistent) {
    for (std::size_t i = 0; i < last; ++i) {
      const double t0 = tr.times[i], t1 = tr.times[i + 1], h = t1 - t0;
      for (Vertex x = 0; x < n; ++x)
        time_part.add(tr.rho[x] * (zeta.value(x, t1) - zeta.value(x, t0)) * upow(i + 1, x) *
                      eta[x] * eta[x] * tr.mu[x]);
      double zp, ep;
      spatial(i + 1, t0, zp, ep);
      zeta_part.add(h * zp);
      eta_part.add(h * ep);
    }
  } else {
    auto integrand = [&](std::size_t i, double& tp, double& zp, double& ep) {
      const double t = tr.times[i];
      tp = 0.0;
      for (Vertex x = 0; x < n; ++x)
        tp += tr.rho[x] * zeta.time_derivative(x, t) * upow(i, x) * eta[x] * eta[x] * tr.mu[x];
      spatial(i, t, zp, ep);
    };
    double a0, b0, c0, a1, b1, c1;
    integrand(0, a0, b0, c0);
    for (std::size_t i = 1; i <= last; ++i) {
      integrand(i, a1, b1, c1);
      const double h = tr.times[i] - tr.times[i - 1];
      time_part.add(0.5 * h * (a0 + a1));
      zeta_part.add(0.5 * h * (b0 + b1));
      eta_part.add(0.5 * h * (c0 + c1));
      a0 = a1;
      b0 = b1;
      c0 = c1;
    }
  }
  r.initial_term = init.value();
  r.state_side = state.value();
  r.bound_side = r.initial_term + time_part.value() + zeta_part.value() + eta_part.value();
  r.scale = detail::finalize_scale({r.initial_term, r.state_side, time_part.value(),
                                    zeta_part.value(), eta_part.value(), r.bound_side});
  return r;
}

// ---------------------------------------------------------------------------
// Estimate chains: ball mass at tau on B_{delta R} against the ball energy on
// B_R, for the parameter choices of each class.

struct ChainParams {
  double R = 20.0;
  double delta = 0.1;
  double alpha = 0.0;
  double gamma = 0.0;
  double tau = 1.0;
  double p = 2.0;
  Vertex x0 = 0;
  std::optional<double> c0; // 1-intrinsic bound; computed when absent
};

struct ChainReport {
  Pipeline pipeline = Pipeline::bounded_energy;
  ChainParams params;
  double lhs = 0.0;           // sum_{B_{delta R}} |u(tau)|^p mu
  double energy = 0.0;        // int_0^tau sum_{B_R} |u|^p mu dt
  double initial_term = 0.0;
  double rhs = 0.0;           // rigorous bound
  double rhs_reference = 0.0; // bound with the coefficient printed in the source derivation
  double coefficient = 0.0;   // factor multiplying the energy in rhs
  double slack() const { return rhs - lhs; }
  double relative() const {
    double s = std::max({std::abs(lhs), std::abs(rhs), std::numeric_limits<double>::min()});
    return slack() / s;
  }
  bool holds(double rel_tol) const { return lhs == 0.0 && rhs >= 0.0 ? true : relative() >= -rel_tol; }
};

namespace detail {

inline double inner_ball_mass(const Trajectory& tr, const PseudoMetric& d, Vertex x0, double r,
                              double p, std::size_t idx) {
  std::vector<Vertex> members;
  auto row = d.distances_from(x0);
  for (Vertex x = 0; x < row.size(); ++x)
    if (row[x] < r)
      members.push_back(x);
  return ball_mass(tr.states[idx], tr.mu, p, members);
}

template <SpaceTimeWeight W>
double initial_weighted_term(const Trajectory& tr, const VertexFunction& eta, int eta_power,
                             const W& w, double p) {
  CompensatedSum acc;
  for (Vertex x = 0; x < tr.mu.size(); ++x) {
    const double e = eta_power == 2 ? eta[x] * eta[x] : eta[x];
    acc.add(tr.rho[x] * std::pow(std::abs(tr.states[0][x]), p) * e * w.value(x, 0.0) * tr.mu[x]);
  }
  return acc.value();
}

} // namespace detail

// Bounded-below density chains.
//   bounded-energy (p >= 2):
//     sum_{B_dR} |u(tau)|^p mu <= e^{gamma tau}/rho0 [2 e^{3 alpha s - (1-2 delta) alpha R}/(delta R)^2 E(R) + I0]
//   bounded-supersolution (p >= 1, 1-intrinsic with C0):
//     sum_{B_dR} |u(tau)|^p mu <= e^{gamma tau}/rho0 [(C0 e^{2 alpha s} + alpha e^{3 alpha s}) e^{-(1-2 delta) alpha R}/(delta R) E(R) + I0]
// I0 is the initial weighted mass (eta^2 zeta or eta zeta).
inline ChainReport estimate_chain_bounded(const WeightedGraph& g, const PseudoMetric& d,
                                          const DensityField& rho, const Trajectory& tr,
                                          Pipeline pipeline, const ChainParams& cp) {
  if (pipeline != Pipeline::bounded_energy && pipeline != Pipeline::bounded_supersolution)
    throw precondition_error("bounded chain needs a bounded-density class");
  const double s = d.jump_size();
  const double rho0 = detail::require_rho0(rho, ProfileKind::bounded_below, Mode::strict, d);
  detail::require_intrinsic(g, d, Mode::strict);
  if (pipeline == Pipeline::bounded_energy && !(cp.p >= 2.0))
    throw precondition_error("bounded-energy chain needs p >= 2");
  detail::require_p(cp.p);
  CutoffParams cut{cp.R, cp.delta, cp.x0, s};
  cut.validate();
  if (!cut.plateau_covers_inner_ball())
    throw precondition_error("chain needs R > 2s/(1 - 2 delta)");
  double C0 = 0.0, thr;
  if (pipeline == Pipeline::bounded_energy) {
    thr = exp_energy_gamma_threshold(cp.alpha, s, rho0);
  } else {
    C0 = detail::resolve_c0(g, d, cp.c0, Mode::strict);
    thr = exp_supersolution_gamma_threshold(cp.alpha, s, rho0, C0);
  }
  if (!(cp.gamma >= thr * (1.0 - 1e-15)))
    throw precondition_error("gamma=" + std::to_string(cp.gamma) + " below threshold " +
                             std::to_string(thr));

  ChainReport rep;
  rep.pipeline = pipeline;
  rep.params = cp;
  rep.params.c0 = pipeline == Pipeline::bounded_supersolution ? std::optional<double>(C0) : cp.c0;
  const std::size_t idx = tr.index_of_time(cp.tau);
  rep.lhs = detail::inner_ball_mass(tr, d, cp.x0, cp.delta * cp.R, cp.p, idx);
  rep.energy = ball_energy(tr, cp.p, d, cp.x0, cp.R, cp.tau);
  Cutoff eta(cut, d);
  ExpTestFunction zeta({cp.alpha, cp.gamma, cp.delta, cp.R, cp.x0}, d);
  const double dR = cp.delta * cp.R;
  const double decay = std::exp(-(1.0 - 2.0 * cp.delta) * cp.alpha * cp.R);
  const double pre = std::exp(cp.gamma * cp.tau) / rho0;
  double coeff, coeff_ref;
  if (pipeline == Pipeline::bounded_energy) {
    rep.initial_term = detail::initial_weighted_term(tr, eta.values(), 2, zeta, cp.p);
    coeff = 2.0 * std::exp(3.0 * cp.alpha * s) * decay / (dR * dR);
    coeff_ref = coeff;
  } else {
    rep.initial_term = detail::initial_weighted_term(tr, eta.values(), 1, zeta, cp.p);
    coeff = (C0 * std::exp(2.0 * cp.alpha * s) + cp.alpha * std::exp(3.0 * cp.alpha * s)) * decay / dR;
    coeff_ref = C0 * (1.0 + cp.alpha * std::exp(cp.alpha * s)) * std::exp(2.0 * cp.alpha * s) * decay / dR;
  }
  rep.coefficient = pre * coeff;
  rep.rhs = pre * (coeff * rep.energy + rep.initial_term);
  rep.rhs_reference = pre * (coeff_ref * rep.energy + rep.initial_term);
  return rep;
}

struct VanishingChainParams : ChainParams {
  double k = 1.5;
};

// Vanishing density chains (rho >= rho0 (d + k)^-sigma), with
// A = [(1 - delta) R - 2s + k]^-alpha and L = [delta R + k]^{alpha + sigma}:
//   vanishing-energy (p >= 2, 0 < sigma <= 2):
//     sum_{B_dR} |u(tau)|^p mu <= e^{gamma tau} L/rho0 [2 C2 A/(delta R)^2 E(R) + I0]
//   vanishing-supersolution (p >= 1, 0 < sigma <= 1, 1-intrinsic with C0):
//     sum_{B_dR} |u(tau)|^p mu <= e^{gamma tau} L/rho0 [(C0 + alpha C3) A/(delta R) E(R) + I0]
inline ChainReport estimate_chain_vanishing(const WeightedGraph& g, const PseudoMetric& d,
                                            const DensityField& rho, const Trajectory& tr,
                                            Pipeline pipeline, const VanishingChainParams& cp) {
  if (pipeline != Pipeline::vanishing_energy && pipeline != Pipeline::vanishing_supersolution)
    throw precondition_error("vanishing chain needs a vanishing-density class");
  const double s = d.jump_size();
  const double rho0 = detail::require_rho0(rho, ProfileKind::vanishing, Mode::strict, d, cp.k, cp.x0);
  const double sigma = rho.profile()->sigma;
  detail::require_intrinsic(g, d, Mode::strict);
  detail::require_p(cp.p);
  if (!(cp.k > s && cp.k < 1.0 + s))
    throw precondition_error("vanishing chain needs k in (s, 1 + s)");
  if (!(cp.delta * cp.R > 0.0 && cp.delta * cp.R < 1.0 + s - cp.k))
    throw precondition_error("vanishing chain needs 0 < delta R < 1 + s - k");
  CutoffParams cut{cp.R, cp.delta, cp.x0, s};
  cut.validate();
  if (!cut.plateau_covers_inner_ball())
    throw precondition_error("chain needs R > 2s/(1 - 2 delta)");
  const auto pc = profile_constants(cp.alpha, cp.k, s);
  double C0 = 0.0, thr;
  if (pipeline == Pipeline::vanishing_energy) {
    if (!(cp.p >= 2.0))
      throw precondition_error("vanishing-energy chain needs p >= 2");
    if (!(sigma > 0.0 && sigma <= 2.0))
      throw precondition_error("vanishing-energy chain needs 0 < sigma <= 2");
    thr = poly_energy_gamma_threshold(cp.alpha, cp.k, s, rho0);
  } else {
    if (!(sigma > 0.0 && sigma <= 1.0))
      throw precondition_error("vanishing-supersolution chain needs 0 < sigma <= 1");
    C0 = detail::resolve_c0(g, d, cp.c0, Mode::strict);
    thr = poly_supersolution_gamma_threshold(cp.alpha, cp.k, s, rho0, C0);
  }
  if (!(cp.gamma >= thr * (1.0 - 1e-15)))
    throw precondition_error("gamma=" + std::to_string(cp.gamma) + " below threshold " +
                             std::to_string(thr));

  ChainReport rep;
  rep.pipeline = pipeline;
  rep.params = cp;
  if (pipeline == Pipeline::vanishing_supersolution)
    rep.params.c0 = C0;
  const std::size_t idx = tr.index_of_time(cp.tau);
  const double dR = cp.delta * cp.R;
  rep.lhs = detail::inner_ball_mass(tr, d, cp.x0, dR, cp.p, idx);
  rep.energy = ball_energy(tr, cp.p, d, cp.x0, cp.R, cp.tau);
  Cutoff eta(cut, d);
  PolyTestFunction theta({cp.alpha, cp.gamma, cp.k, cp.x0}, d);
  const double A = std::pow((1.0 - cp.delta) * cp.R - 2.0 * s + cp.k, -cp.alpha);
  const double Lw = std::pow(dR + cp.k, cp.alpha + sigma);
  const double e = std::exp(cp.gamma * cp.tau);
  double coeff, coeff_ref;
  if (pipeline == Pipeline::vanishing_energy) {
    rep.initial_term = detail::initial_weighted_term(tr, eta.values(), 2, theta, cp.p);
    coeff = 2.0 * pc.C2 * A / (dR * dR);
    coeff_ref = pc.C2 * pc.C2 * A / (dR * dR);
  } else {
    rep.initial_term = detail::initial_weighted_term(tr, eta.values(), 1, theta, cp.p);
    coeff = (C0 + cp.alpha * pc.C3) * A / dR;
    coeff_ref = C0 * (1.0 + cp.alpha * pc.C3) * A / dR;
  }
  rep.coefficient = e * Lw / rho0 * coeff;
  rep.rhs = e * Lw / rho0 * (coeff * rep.energy + rep.initial_term);
  // The reference form drops the [delta R + k]^{alpha+sigma} factor.
  rep.rhs_reference = e / rho0 * (coeff_ref * rep.energy + rep.initial_term);
  return rep;
}

// Prefactor of the vanishing chains once the energy is bounded by
// C (R + k)^beta, for fixed delta (C = 1):
//   energy form:        C2^2 e^{gamma tau}/(rho0 delta^2 R^2) A (R + k)^beta  -> 0 iff alpha > beta - 2
//   supersolution form: C0 (1 + alpha C3) e^{gamma tau}/(rho0 delta R) A (R + k)^beta -> 0 iff alpha > beta - 1
inline double vanishing_prefactor(Pipeline pipeline, double R, double alpha, double beta, double k,
                                  double s, double delta, double rho0, double gamma, double tau,
                                  double c0 = 1.0) {
  const auto pc = profile_constants(alpha, k, s);
  const double A = std::pow((1.0 - delta) * R - 2.0 * s + k, -alpha);
  const double growth = std::pow(R + k, beta);
  const double e = std::exp(gamma * tau);
  if (pipeline == Pipeline::vanishing_energy)
    return pc.C2 * pc.C2 * e / (rho0 * delta * delta * R * R) * A * growth;
  if (pipeline == Pipeline::vanishing_supersolution)
    return c0 * (1.0 + alpha * pc.C3) * e / (rho0 * delta * R) * A * growth;
  throw precondition_error("vanishing prefactor needs a vanishing-density class");
}

// ---------------------------------------------------------------------------
// Informational reports

struct VolumeGrowth {
  std::vector<double> radii;
  std::vector<double> volumes;      // mu(B_R(x0))
  double poly_exponent = 0.0;       // fitted q in mu(B_R) <= C R^q
  double exp_exponent = 0.0;        // fitted q in mu(B_R) <= C e^{qR}
};

inline VolumeGrowth volume_growth(const WeightedGraph& g, const PseudoMetric& d, Vertex x0,
                                  const std::vector<double>& radii) {
  VolumeGrowth vg;
  vg.radii = radii;
  auto row = d.distances_from(x0);
  for (double R : radii) {
    double m = 0.0;
    for (Vertex x = 0; x < g.size(); ++x)
      if (row[x] < R)
        m += g.mu(x);
    vg.volumes.push_back(m);
  }
  if (radii.size() >= 2) {
    const std::size_t N = radii.size() - 1;
    double qp = std::numeric_limits<double>::infinity(), qe = qp;
    for (std::size_t i = 0; i < N; ++i) {
      if (vg.volumes[i] <= 0.0 || vg.volumes[N] <= 0.0)
        continue;
      const double dy = std::log(vg.volumes[N]) - std::log(vg.volumes[i]);
      if (radii[i] > 0.0)
        qp = std::min(qp, dy / (std::log(radii[N]) - std::log(radii[i])));
      qe = std::min(qe, dy / (radii[N] - radii[i]));
    }
    vg.poly_exponent = std::isfinite(qp) ? std::max(0.0, qp) : 0.0;
    vg.exp_exponent = std::isfinite(qe) ? std::max(0.0, qe) : 0.0;
  }
  return vg;
}

// int_0^T ( sum_x |u|^p w(x) mu(x) )^{1/p} dt for a radial weight w.
template <class W>
double weighted_norm_integral(const Trajectory& tr, const PseudoMetric& d, Vertex x0, double p,
                              const W& weight) {
  detail::require_p(p);
  auto row = d.distances_from(x0);
  return detail::trapezoid(tr, tr.samples() - 1, [&](std::size_t i) {
    double acc = 0.0;
    for (Vertex x = 0; x < row.size(); ++x)
      acc += std::pow(std::abs(tr.states[i][x]), p) * weight(row[x]) * tr.mu[x];
    return std::pow(acc, 1.0 / p);
  });
}

} // namespace graphheat

#endif
