#pragma once

#include <vector>

#include "vpc/control_field.hpp"
#include "vpc/cutoff.hpp"
#include "vpc/forward.hpp"

namespace vpc {

/// Costate values g and phase-space gradients G = grad_z g along the stored
/// forward trajectories, at every stored step.
struct CostateStore {
  double t0 = 0.0;
  double dt = 0.0;
  int steps = 0;
  std::size_t particles = 0;
  bool cutoff_warning = false;  // cutoff plateau smaller than the measured support

  std::vector<double> g;  // [step][particle]
  std::vector<Vec6> G;

  double g_at(int n, std::size_t p) const { return g[std::size_t(n) * particles + p]; }
  const Vec6& G_at(int n, std::size_t p) const { return G[std::size_t(n) * particles + p]; }
  bool aligned_with(const TrajectoryStore& traj) const;
};

/// Linearized state along the stored trajectories (zero initial datum).
struct TangentStore {
  double t0 = 0.0;
  double dt = 0.0;
  int steps = 0;
  std::size_t particles = 0;

  std::vector<double> df;  // [step][particle]
  double at(int n, std::size_t p) const { return df[std::size_t(n) * particles + p]; }
};

/// Terminal slice g(T) = f(T) - f_d, G(T) = grad(f(T) - f_d) along particles.
struct TerminalSlice {
  std::vector<double> g;
  std::vector<Vec6> G;
};

TerminalSlice terminal_costate(const TrajectoryStore& traj, const Datum& f_d);

/// Backward transport of the costate pair (g, grad g) with the kernel-coupled
/// source Phi (and its x-gradient) assembled from the same-stage costate
/// gradients of all particles, multiplied by the cutoff.
CostateStore run_backward(const TrajectoryStore& traj, const ControlField& B, const Datum& f_d,
                          const CutoffSpec& cutoff, double eps);

/// Same backward system solved for the auxiliary datum h(T) = f_d, then
/// g = f - h using the exactly transported f-part.
CostateStore run_backward_via_h(const TrajectoryStore& traj, const ControlField& B,
                                const Datum& f_d, const CutoffSpec& cutoff, double eps);

/// Linearized transport: d(df_p)/dt = grad psi_df . (grad_v f)_p
///                                    - (v x H) . (grad_v f)_p
/// with grad psi_df the kernel sum over the transported tangent weights.
TangentStore run_tangent(const TrajectoryStore& traj, const ControlField& H, double eps);

/// Discrete pairing <f(T) - f_d, df(T)> over the particle quadrature.
double tangent_terminal_pairing(const TrajectoryStore& traj, const Datum& f_d,
                                const TangentStore& tangent);

}  // namespace vpc
