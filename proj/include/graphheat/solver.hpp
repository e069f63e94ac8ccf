#ifndef GRAPHHEAT_SOLVER_HPP
#define GRAPHHEAT_SOLVER_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "graphheat/calculus.hpp"
#include "graphheat/density.hpp"
#include "graphheat/error.hpp"
#include "graphheat/graph.hpp"
#include "graphheat/linalg.hpp"

namespace graphheat {

// (L u)(x) = sum_y omega(x,y) (u(x) - u(y)) + omega_ext(x) u(x); the exterior
// is held at zero, so Delta u = -(1/mu) L u on the truncation.
struct DiscreteOperator {
  CsrMatrix L;
  std::vector<double> mass; // rho(x) mu(x)
  std::vector<double> mu;
};

inline DiscreteOperator assemble(const WeightedGraph& g, const DensityField& rho) {
  if (rho.size() != g.size())
    throw input_error("density has " + std::to_string(rho.size()) + " values, graph has " +
                      std::to_string(g.size()) + " vertices");
  const std::size_t n = g.size();
  std::vector<std::size_t> rp(n + 1, 0), cols;
  std::vector<double> vals;
  cols.reserve(g.adjacency_size() + n);
  vals.reserve(g.adjacency_size() + n);
  for (Vertex x = 0; x < n; ++x) {
    bool placed = false;
    auto put_diag = [&] {
      cols.push_back(x);
      vals.push_back(g.total_degree(x));
      placed = true;
    };
    for (const auto& nb : g.neighbors(x)) {
      if (!placed && nb.v > x)
        put_diag();
      cols.push_back(nb.v);
      vals.push_back(-nb.w);
    }
    if (!placed)
      put_diag();
    rp[x + 1] = cols.size();
  }
  DiscreteOperator op{CsrMatrix(n, std::move(rp), std::move(cols), std::move(vals)), {}, {}};
  op.mass.resize(n);
  op.mu.resize(n);
  for (Vertex x = 0; x < n; ++x) {
    op.mu[x] = g.mu(x);
    op.mass[x] = rho(x) * g.mu(x);
  }
  return op;
}

// Largest explicit Euler step that keeps the update a convex combination:
// min_x rho(x) mu(x) / Deg_total(x).
inline double cfl_limit(const WeightedGraph& g, const DensityField& rho) {
  double lim = std::numeric_limits<double>::infinity();
  for (Vertex x = 0; x < g.size(); ++x)
    if (g.total_degree(x) > 0.0)
      lim = std::min(lim, rho(x) * g.mu(x) / g.total_degree(x));
  return lim;
}

enum class Scheme { explicit_euler, implicit_euler, crank_nicolson };

inline std::string to_string(Scheme s) {
  switch (s) {
  case Scheme::explicit_euler: return "explicit";
  case Scheme::implicit_euler: return "implicit";
  case Scheme::crank_nicolson: return "crank-nicolson";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "explicit" || s == "explicit-euler")
    return Scheme::explicit_euler;
  if (s == "implicit" || s == "implicit-euler")
    return Scheme::implicit_euler;
  if (s == "crank-nicolson" || s == "cn")
    return Scheme::crank_nicolson;
  throw input_error("unknown scheme '" + s + "' (explicit, implicit, crank-nicolson)");
}

enum class LinearSolver { automatic, direct, cg };

using SourceFunction = std::function<double(Vertex, double)>;

struct SolveOptions {
  double T = 1.0;
  double dt = 1e-3;
  Scheme scheme = Scheme::implicit_euler;
  std::size_t stride = 1;  // keep every stride-th step (the final step is always kept)
  SourceFunction source;   // f(x, t); empty means f == 0
  LinearSolver linear_solver = LinearSolver::automatic;
  double cg_tol = 1e-12;
  std::size_t direct_limit = 2000;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  Scheme scheme = Scheme::implicit_euler;
  double dt = 0.0;
  std::size_t stride = 1;
  bool source_free = true;
  std::vector<double> rho;
  std::vector<double> mu;
  std::optional<DensityProfile> profile;
  std::optional<double> truncation_radius;
  std::size_t max_cg_iterations = 0;

  std::size_t samples() const noexcept { return times.size(); }
  double horizon() const { return times.empty() ? 0.0 : times.back(); }
  const std::vector<double>& final_state() const { return states.back(); }

  // Index of the sample at time t (must be a stored grid time).
  std::size_t index_of_time(double t) const {
    for (std::size_t i = 0; i < times.size(); ++i)
      if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t)))
        return i;
    throw input_error("time " + std::to_string(t) + " is not a stored grid time");
  }
};

inline Trajectory solve(const WeightedGraph& g, const DensityField& rho, const VertexFunction& u0,
                        const SolveOptions& opt) {
  detail::check_size(g, u0);
  if (!(opt.dt > 0.0) || !(opt.T > 0.0))
    throw input_error("solve needs dt > 0 and T > 0");
  if (opt.stride == 0)
    throw input_error("stride must be positive");
  const double steps_real = opt.T / opt.dt;
  const auto steps = static_cast<std::size_t>(std::llround(steps_real));
  if (steps == 0 || std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * steps_real)
    throw input_error("T/dt must be an integer (T=" + std::to_string(opt.T) +
                      ", dt=" + std::to_string(opt.dt) + ")");
  if (opt.scheme == Scheme::explicit_euler) {
    const double lim = cfl_limit(g, rho);
    if (opt.dt > lim * (1.0 + 1e-12))
      throw precondition_error("explicit step dt=" + std::to_string(opt.dt) +
                               " exceeds the stability limit " + std::to_string(lim) +
                               "; use dt <= " + std::to_string(lim));
  }

  const auto op = assemble(g, rho);
  const std::size_t n = g.size();
  const double dt = opt.dt;

  Trajectory tr;
  tr.scheme = opt.scheme;
  tr.dt = dt;
  tr.stride = opt.stride;
  tr.source_free = !static_cast<bool>(opt.source);
  tr.rho = rho.values();
  tr.mu = op.mu;
  tr.profile = rho.profile();
  tr.times.push_back(0.0);
  tr.states.push_back(u0.data());

  // System matrix for the implicit part: mass + c dt L.
  const double c = opt.scheme == Scheme::implicit_euler ? 1.0 : 0.5;
  std::optional<CsrMatrix> A;
  std::optional<SkylineCholesky> chol;
  bool use_direct = false;
  if (opt.scheme != Scheme::explicit_euler) {
    A = op.L.scaled_plus_diagonal(c * dt, op.mass);
    use_direct = opt.linear_solver == LinearSolver::direct ||
                 (opt.linear_solver == LinearSolver::automatic && n < opt.direct_limit);
    if (use_direct)
      chol.emplace(*A);
  }

  std::vector<double> u = u0.data(), rhs(n), Lu(n), fprev(n, 0.0), fnext(n, 0.0);
  auto eval_source = [&](double t, std::vector<double>& f) {
    if (!opt.source)
      return;
    for (Vertex x = 0; x < n; ++x)
      f[x] = op.mu[x] * opt.source(x, t);
  };
  eval_source(0.0, fprev);

  for (std::size_t step = 1; step <= steps; ++step) {
    const double t = static_cast<double>(step) * dt;
    eval_source(t, fnext);
    switch (opt.scheme) {
    case Scheme::explicit_euler:
      op.L.multiply(u, Lu);
      for (Vertex x = 0; x < n; ++x)
        u[x] += dt * (fprev[x] - Lu[x]) / op.mass[x];
      break;
    case Scheme::implicit_euler:
      for (Vertex x = 0; x < n; ++x)
        rhs[x] = op.mass[x] * u[x] + dt * fnext[x];
      break;
    case Scheme::crank_nicolson:
      op.L.multiply(u, Lu);
      for (Vertex x = 0; x < n; ++x)
        rhs[x] = op.mass[x] * u[x] - 0.5 * dt * Lu[x] + 0.5 * dt * (fprev[x] + fnext[x]);
      break;
    }
    if (opt.scheme != Scheme::explicit_euler) {
      if (use_direct) {
        u = chol->solve(rhs);
      } else {
        auto res = conjugate_gradient(*A, rhs, u, opt.cg_tol);
        if (!res.converged)
          throw error("conjugate gradient stalled at relative residual " +
                      std::to_string(res.relative_residual));
        tr.max_cg_iterations = std::max(tr.max_cg_iterations, res.iterations);
      }
    }
    std::swap(fprev, fnext);
    if (step % opt.stride == 0 || step == steps) {
      tr.times.push_back(t);
      tr.states.push_back(u);
    }
  }
  return tr;
}

inline double max_abs_difference(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct RichardsonResult {
  std::optional<double> order; // empty when the errors vanish
  bool exact = false;
  double coarse_error = 0.0;
  double fine_error = 0.0;
};

// Observed order from final states at dt, dt/2, dt/4 (no reference needed).
inline RichardsonResult richardson_check(const Trajectory& coarse, const Trajectory& mid,
                                         const Trajectory& fine) {
  RichardsonResult r;
  r.coarse_error = max_abs_difference(coarse.final_state(), mid.final_state());
  r.fine_error = max_abs_difference(mid.final_state(), fine.final_state());
  if (r.coarse_error == 0.0 || r.fine_error == 0.0) {
    r.exact = true;
    return r;
  }
  r.order = std::log2(r.coarse_error / r.fine_error);
  return r;
}

// Observed order against a known exact final state, from dt and dt/2 runs.
inline RichardsonResult richardson_check(const Trajectory& coarse, const Trajectory& fine,
                                         const std::vector<double>& exact) {
  RichardsonResult r;
  r.coarse_error = max_abs_difference(coarse.final_state(), exact);
  r.fine_error = max_abs_difference(fine.final_state(), exact);
  if (r.coarse_error == 0.0 || r.fine_error == 0.0) {
    r.exact = true;
    return r;
  }
  r.order = std::log2(r.coarse_error / r.fine_error);
  return r;
}

} // namespace graphheat

#endif
