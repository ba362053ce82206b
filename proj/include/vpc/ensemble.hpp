#pragma once

#include <vector>

#include "vpc/bump.hpp"
#include "vpc/geometry.hpp"

namespace vpc {

/// Quadrature representation of the distribution function: cell-centered
/// phase-space samples of the analytic datum with Lebesgue weights
/// w_p = f0_p * dV. Weights never change; the flow transports the points.
struct ParticleEnsemble {
  std::vector<Vec6> z0;
  std::vector<double> f0;
  std::vector<Vec6> df0;
  std::vector<double> weights;
  double cell_volume = 0.0;
  double datum_mass = 0.0;        // analytic integral of f0
  double datum_l2_sq = 0.0;       // analytic squared L2 norm of f0
  double quadrature_l2_sq = 0.0;  // sum dV f0_p^2 over the kept samples

  std::size_t size() const { return z0.size(); }
};

/// Samples the datum on a uniform grid of spacing h over its support box.
/// Points with zero value or with |f0| dV below weight_floor are dropped.
/// Throws if nothing survives.
ParticleEnsemble sample_ensemble(const BumpSum& f0, double h, double weight_floor);

/// Particle-quadrature L^p norm of the transported datum, 1 <= p <= inf;
/// constant in time by construction.
double lp_norm(const ParticleEnsemble& ens, double p);

}  // namespace vpc
