#pragma once

#include <stdexcept>
#include <vector>

#include "vpc/charflow.hpp"
#include "vpc/config.hpp"
#include "vpc/control_field.hpp"
#include "vpc/ensemble.hpp"
#include "vpc/kernels.hpp"

namespace vpc {

/// Full forward history: phase points (and optionally the forward and
/// inverse-flow Jacobians) of every particle at every step, plus the
/// measured sup-norm history of the self-consistent field.
class TrajectoryStore {
 public:
  ParticleEnsemble ensemble;
  double t0 = 0.0;
  double dt = 0.0;
  int steps = 0;
  bool has_matrices = false;
  bool left_field_grid = false;  // any particle left the control grid

  std::vector<Vec6> z;   // [step][particle]
  std::vector<Mat6> M;
  std::vector<Mat6> N;
  std::vector<double> e_sup;  // per stored step

  std::size_t np() const { return ensemble.size(); }
  int slices() const { return steps + 1; }
  double time(int n) const { return t0 + n * dt; }
  const Vec6& at(int n, std::size_t p) const { return z[std::size_t(n) * np() + p]; }
  const Mat6& m_at(int n, std::size_t p) const { return M[std::size_t(n) * np() + p]; }
  const Mat6& n_at(int n, std::size_t p) const { return N[std::size_t(n) * np() + p]; }

  /// Discrete L2(0,T;Linf) norm of the measured electric forcing.
  double electric_l2linf() const;
};

struct ForwardOptions {
  bool matrices = true;
  bool record_stage_positions = false;
};

/// Direct self-consistent solver: lockstep RK4 over all particles with the
/// field re-evaluated from the same-stage positions at every stage.
TrajectoryStore run_forward(const ParticleEnsemble& ens, const ControlField& B,
                            const RunConfig& cfg, ForwardOptions opts = {});

/// Same stepping from an arbitrary state slice over [t_begin, t_end] (either
/// direction); used for reversibility experiments.
TrajectoryStore run_forward_from(const ParticleEnsemble& ens, const std::vector<Vec6>& state,
                                 double t_begin, double t_end, const ControlField& B,
                                 const RunConfig& cfg, ForwardOptions opts = {});

struct PicardDivergence : std::runtime_error {
  explicit PicardDivergence(std::vector<double> hist)
      : std::runtime_error("picard iteration did not converge"), history(std::move(hist)) {}
  std::vector<double> history;
};

struct PicardResult {
  TrajectoryStore trajectory;
  std::vector<double> history;  // sup distances between successive iterates
};

/// Iterative solver mirroring the classical recursion: iterate k freezes the
/// self-consistent field on the stage positions of iterate k-1 (iterate 0
/// uses the untransported initial ensemble), integrates every characteristic
/// independently, and stops when successive trajectories agree within tol.
PicardResult run_forward_picard(const ParticleEnsemble& ens, const ControlField& B,
                                const RunConfig& cfg, int max_iters, double tol,
                                ForwardOptions opts = {});

double support_radius(const TrajectoryStore& traj, int step);

/// Cloud-in-cell re-deposition estimate of the L2 norm of a weighted sample.
double deposit_l2_estimate(const std::vector<Vec6>& points, const std::vector<double>& weights,
                           double spacing);
double deposit_l2_estimate(const TrajectoryStore& traj, int step, double spacing);

/// Field providers closing over a frozen particle snapshot (self-consistent
/// electric part; zero magnetic part).
FieldProviders self_consistent_field(const std::vector<Vec6>& snapshot,
                                     const std::vector<double>& weights, double eps);

/// Target datum sampled from a reference run: value/gradient of the
/// transported initial datum at the final particle positions, extended by
/// nearest-sample lookup. Realizes perfect-tracking scenarios.
class TransportedDatum final : public Datum {
 public:
  explicit TransportedDatum(const TrajectoryStore& reference);

  double value(const Vec6& z) const override;
  Vec6 grad(const Vec6& z) const override;
  double l2_norm_sq() const override { return l2_sq_; }

 private:
  std::size_t nearest(const Vec6& z) const;
  std::vector<Vec6> points_;
  std::vector<double> values_;
  std::vector<Vec6> grads_;
  double l2_sq_ = 0.0;
};

}  // namespace vpc
