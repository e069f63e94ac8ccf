#ifndef GRAPHHEAT_DENSITY_HPP
#define GRAPHHEAT_DENSITY_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "graphheat/error.hpp"
#include "graphheat/graph.hpp"
#include "graphheat/metric.hpp"

namespace graphheat {

enum class ProfileKind { bounded_below, vanishing };

inline std::string to_string(ProfileKind k) {
  return k == ProfileKind::bounded_below ? "bounded-below" : "vanishing";
}

// Declared lower bound for the density:
//   bounded_below: rho(x) >= rho0
//   vanishing:     rho(x) >= rho0 [d(x, x0) + k]^{-sigma}, with k > s.
struct DensityProfile {
  ProfileKind kind = ProfileKind::bounded_below;
  double rho0 = 1.0;
  double sigma = 0.0;
  double k = 1.0;
  Vertex x0 = 0;

  double lower_bound(double dist_to_x0) const {
    if (kind == ProfileKind::bounded_below)
      return rho0;
    return rho0 * std::pow(dist_to_x0 + k, -sigma);
  }
};

class DensityField {
public:
  DensityField() = default;
  DensityField(std::vector<double> rho, std::optional<DensityProfile> profile = std::nullopt)
      : rho_(std::move(rho)), profile_(profile) {
    for (std::size_t x = 0; x < rho_.size(); ++x)
      if (!(rho_[x] > 0.0) || !std::isfinite(rho_[x]))
        throw input_error("density must be positive at every vertex (index " +
                          std::to_string(x) + ")");
  }

  std::size_t size() const noexcept { return rho_.size(); }
  double operator()(Vertex x) const { return rho_[x]; }
  const std::vector<double>& values() const noexcept { return rho_; }
  const std::optional<DensityProfile>& profile() const noexcept { return profile_; }

private:
  std::vector<double> rho_;
  std::optional<DensityProfile> profile_;
};

// rho = rho0 everywhere, declared bounded below by rho0.
inline DensityField constant_density(const WeightedGraph& g, double rho0 = 1.0) {
  if (!(rho0 > 0.0))
    throw input_error("constant density needs rho0 > 0");
  return {std::vector<double>(g.size(), rho0),
          DensityProfile{ProfileKind::bounded_below, rho0, 0.0, 1.0, 0}};
}

// The extremal vanishing density rho0 [d(x, x0) + k]^{-sigma}.
inline DensityField power_density(const WeightedGraph& g, const PseudoMetric& d, Vertex x0,
                                  double rho0, double sigma, double k) {
  if (!(rho0 > 0.0) || !(sigma > 0.0))
    throw input_error("power density needs rho0 > 0 and sigma > 0");
  if (!(k > d.jump_size()))
    throw precondition_error("vanishing density needs k > s (k=" + std::to_string(k) +
                             ", s=" + std::to_string(d.jump_size()) + ")");
  DensityProfile prof{ProfileKind::vanishing, rho0, sigma, k, x0};
  auto row = d.distances_from(x0);
  std::vector<double> rho(g.size());
  for (Vertex x = 0; x < g.size(); ++x)
    rho[x] = prof.lower_bound(row[x]);
  return {std::move(rho), prof};
}

struct ProfileCheck {
  bool passed = true;
  std::string reason;
  std::optional<Vertex> witness;
  double worst_ratio = 0.0; // min_x rho(x) / lower_bound(x)
};

// Verifies the declared lower bound vertexwise (relative tolerance 1e-12).
inline ProfileCheck density_profile_check(const DensityField& rho, const PseudoMetric& d) {
  ProfileCheck out;
  if (!rho.profile()) {
    out.passed = false;
    out.reason = "no profile declared";
    return out;
  }
  const auto& prof = *rho.profile();
  if (prof.kind == ProfileKind::vanishing && !(prof.k > d.jump_size())) {
    out.passed = false;
    out.reason = "k must exceed the jump size s";
    return out;
  }
  auto row = d.distances_from(prof.x0);
  out.worst_ratio = std::numeric_limits<double>::infinity();
  for (Vertex x = 0; x < rho.size(); ++x) {
    double lb = prof.lower_bound(row[x]);
    double ratio = rho(x) / lb;
    if (ratio < out.worst_ratio) {
      out.worst_ratio = ratio;
      if (rho(x) < lb * (1.0 - 1e-12)) {
        out.passed = false;
        out.witness = x;
      }
    }
  }
  if (!out.passed)
    out.reason = "density below declared profile";
  return out;
}

// phi_beta(x) = exp{-beta d log d}, with the convention phi = 1 at d = 0.
inline double phi_weight(double beta, double dist) {
  if (dist <= 0.0)
    return 1.0;
  return std::exp(-beta * dist * std::log(dist));
}

// psi_beta(x) = (d + k)^{-beta}
inline double psi_weight(double beta, double k, double dist) { return std::pow(dist + k, -beta); }

} // namespace graphheat

#endif
