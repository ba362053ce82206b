#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vpc/sensitivity.hpp"

namespace vpc {

struct CostBreakdown {
  double total = 0.0;
  double tracking = 0.0;        // 1/2 |f(T) - f_d|_2^2
  double regularization = 0.0;  // lambda/2 |D_x B|_2^2
};

struct OptimizeConfig {
  double alpha0 = 1.0;
  double armijo_c1 = 1e-4;
  double backtrack_ratio = 0.5;
  int max_iters = 30;
  double tol = 1e-6;   // relative J decrease
  double theta = 0.5;  // fixed-point damping
  int fp_max_iters = 60;
  double fp_tol = 1e-11;
  double fd_delta = 1e-4;
  int n_directions = 3;

  void validate() const;
};

/// Everything a cost evaluation needs besides the control itself.
struct TrackingProblem {
  ParticleEnsemble ensemble;
  RunConfig cfg;
  std::shared_ptr<const Datum> target;
};

/// Tracking term by the exact decomposition
///   |f(T)-f_d|^2 = |f0|^2 - 2 int f(T) f_d + |f_d|^2
/// with the cross term evaluated by the transported particle quadrature and
/// the squared norms taken analytically; regularization by the discrete
/// forward-difference energy of B with trapezoidal time weights.
CostBreakdown eval_cost(const TrajectoryStore& traj, const ControlField& B, const Datum& f_d,
                        double lambda);

double grid_reg_energy(const ControlField& B);

/// Time-weighted grid inner product <F,G> = sum_k w_k sum_nodes F.G cellvol;
/// the duality pairing the gradient field represents J'(B) in.
double dot_grid(const ControlField& F, const ControlField& G);

/// Riesz representative of J'(B): per knot -lambda Lap_h B minus the
/// hat-weighted cloud-in-cell deposition of w_p v_p x G_p^v over the stored
/// steps, divided by the time weight and cell volume.
ControlField assemble_gradient(const TrajectoryStore& traj, const CostateStore& costate,
                               const ControlField& B, double lambda);

/// Central difference (J(B+dH) - J(B-dH)) / 2d with fresh forward runs.
double fd_directional(const ControlField& B, const ControlField& H, double delta,
                      const std::function<CostBreakdown(const ControlField&)>& evaluate);
CostBreakdown fd_directional_parts(const ControlField& B, const ControlField& H, double delta,
                                   const std::function<CostBreakdown(const ControlField&)>& evaluate);

/// Full-pipeline cost evaluator for a problem (forward run + eval_cost).
std::function<CostBreakdown(const ControlField&)> make_cost_evaluator(const TrackingProblem& prob);

/// Discrete surrogate of the mixed control norm: L2-in-time of the grid
/// W^{2,beta} norm (central differences up to order two) plus L2-in-time of
/// the grid H^1 norm.
double discrete_V_norm(const ControlField& B, double beta);

/// Radial retraction onto the admissible ball |B|_V <= K.
ControlField project_admissible(const ControlField& B, const AdmissibleSpec& spec);

struct GdRow {
  int iter = 0;
  CostBreakdown cost;
  double grad_norm = 0.0;
  double step = 0.0;
  bool accepted = false;
};

struct GdResult {
  ControlField B;
  std::vector<GdRow> history;
  std::string status;  // converged | max_iters | line_search_failed
};

GdResult run_projected_gd(const TrackingProblem& prob, const ControlField& B0,
                          const OptimizeConfig& opt);

struct FixedPointResult {
  ControlField B;
  std::vector<double> residuals;  // sup |B_{k+1} - B_k| per iteration
  std::string status;             // converged | max_iters | diverged
};

/// Damped iteration on the optimality-system form of the control: the next
/// field is the softened vector Newton potential of -w_p v_p x G_p^v scaled
/// by -1/(4 pi lambda), evaluated at the grid nodes per time knot.
FixedPointResult fixed_point_iterate(const TrackingProblem& prob, const ControlField& B0,
                                     double theta, int max_iters, double tol);

/// One application of the optimality-system field map B -> Bhat(f_B, g_B).
ControlField optimality_field_map(const TrackingProblem& prob, const ControlField& B);

struct OptimalityReport {
  double fp_residual = 0.0;    // sup |B - Bhat|
  double fp_scale = 0.0;       // sup |B|
  double grad_residual = 0.0;  // sup |assemble_gradient|
  double grad_scale = 0.0;     // sup of the deposition part alone
};

OptimalityReport optimality_residuals(const TrackingProblem& prob, const ControlField& B);

}  // namespace vpc
