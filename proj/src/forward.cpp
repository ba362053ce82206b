#include "vpc/forward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>

#include "vpc/parallel.hpp"

namespace vpc {

namespace {

using kernels::SourceCloud;

enum class FieldMode { self_consistent, frozen, off };

/// Frozen per-(step,stage) source clouds for the iterative solver.
struct FrozenFields {
  const std::vector<SourceCloud>* clouds = nullptr;  // [step*4 + stage] or a single entry
  bool constant = false;
  const SourceCloud& at(long step, int stage) const {
    return constant ? (*clouds)[0] : (*clouds)[std::size_t(step) * 4 + stage];
  }
};

struct StageLog {
  // positions actually used for the field at every stage, [step*4+stage]
  std::vector<std::vector<Vec3>> pos;
};

struct LockstepState {
  std::vector<Vec6> z;
  std::vector<Mat6> M, N;
};

struct StageDeriv {
  std::vector<Vec6> z;
  std::vector<Mat6> M, N;
};

struct Driver {
  const ParticleEnsemble& ens;
  const ControlField& B;
  double eps;
  bool matrices;
  FieldMode mode;
  const FrozenFields* frozen = nullptr;
  StageLog* log = nullptr;

  std::vector<Vec3> scratch_pos;
  std::vector<double> scratch_enorm;

  void eval_stage(long step, int stage, double t, const LockstepState& s, StageDeriv& d,
                  double* e_sup_out) {
    const std::size_t n = s.z.size();
    d.z.resize(n);
    if (matrices) {
      d.M.resize(n);
      d.N.resize(n);
    }
    scratch_pos.resize(n);
    for (std::size_t p = 0; p < n; ++p) scratch_pos[p] = s.z[p].x;

    SourceCloud own_cloud;
    const SourceCloud* cloud = nullptr;
    if (mode == FieldMode::self_consistent) {
      own_cloud = SourceCloud(scratch_pos, ens.weights);
      cloud = &own_cloud;
    } else if (mode == FieldMode::frozen) {
      cloud = &frozen->at(step, stage);
    }
    if (log) log->pos[std::size_t(step) * 4 + stage] = scratch_pos;

    const bool want_sup = e_sup_out != nullptr;
    if (want_sup) scratch_enorm.assign(n, 0.0);

    parallel_for(n, [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        const Vec3& x = s.z[p].x;
        const Vec3& v = s.z[p].v;
        Vec3 E;
        Mat3 dE;
        if (cloud) {
          const std::size_t skip = cloud->sorted_index(p);
          if (matrices) {
            const auto ej = kernels::eval_E_with_jacobian(*cloud, x, eps, skip);
            E = ej.E;
            dE = ej.J;
          } else {
            E = kernels::eval_E(*cloud, x, eps, skip);
          }
        }
        if (want_sup) scratch_enorm[p] = norm(E);
        const Vec3 Bv = B.value(t, x);
        d.z[p].x = v;
        d.z[p].v = E + cross(v, Bv);
        if (matrices) {
          Mat6 A;
          A.set_block(0, 3, Mat3::identity());
          Mat3 lower = dE;
          const Mat3 dB = B.jacobian(t, x);
          for (int j = 0; j < 3; ++j) {
            const Vec3 col = cross(v, dB.col(j));
            lower(0, j) += col.x;
            lower(1, j) += col.y;
            lower(2, j) += col.z;
          }
          A.set_block(3, 0, lower);
          A.set_block(3, 3, -1.0 * cross_matrix(Bv));
          d.M[p] = A * s.M[p];
          d.N[p] = -1.0 * (s.N[p] * A);
        }
      }
    });
    if (want_sup) {
      double m = 0.0;
      for (double v : scratch_enorm) m = std::max(m, v);
      *e_sup_out = m;
    }
  }
};

LockstepState advanced(const LockstepState& s, const StageDeriv& k, double a, bool matrices) {
  LockstepState out;
  const std::size_t n = s.z.size();
  out.z.resize(n);
  if (matrices) {
    out.M.resize(n);
    out.N.resize(n);
  }
  for (std::size_t p = 0; p < n; ++p) {
    out.z[p] = s.z[p] + a * k.z[p];
    if (matrices) {
      out.M[p] = s.M[p] + a * k.M[p];
      out.N[p] = s.N[p] + a * k.N[p];
    }
  }
  return out;
}

bool inside_grid(const FieldGridSpec& g, const Vec3& x) {
  for (int d = 0; d < 3; ++d) {
    const double u = (x[d] - g.origin[d]) / g.spacing[d];
    if (u < 0.0 || u > double(g.dims[d] - 1)) return false;
  }
  return true;
}

TrajectoryStore integrate_lockstep(const ParticleEnsemble& ens, const std::vector<Vec6>& state0,
                                   double t_begin, double t_end, const ControlField& B,
                                   const RunConfig& cfg, ForwardOptions opts, FieldMode mode,
                                   const FrozenFields* frozen, StageLog* log) {
  cfg.validate();
  if (state0.size() != ens.size())
    throw std::invalid_argument("run_forward: state size does not match ensemble");
  const double span = t_end - t_begin;
  const long nsteps = std::lround(std::abs(span) / cfg.dt);
  if (nsteps < 1) throw std::invalid_argument("run_forward: empty time interval");
  const double h = span / double(nsteps);
  const std::size_t n = ens.size();

  TrajectoryStore traj;
  traj.ensemble = ens;
  traj.t0 = t_begin;
  traj.dt = h;
  traj.steps = int(nsteps);
  traj.has_matrices = opts.matrices;
  traj.z.reserve((nsteps + 1) * n);
  if (opts.matrices) {
    traj.M.reserve((nsteps + 1) * n);
    traj.N.reserve((nsteps + 1) * n);
  }
  traj.e_sup.assign(nsteps + 1, 0.0);
  if (log) log->pos.resize(std::size_t(nsteps) * 4);

  LockstepState s;
  s.z = state0;
  if (opts.matrices) {
    s.M.assign(n, Mat6::identity());
    s.N.assign(n, Mat6::identity());
  }
  auto record = [&](const LockstepState& st) {
    traj.z.insert(traj.z.end(), st.z.begin(), st.z.end());
    if (opts.matrices) {
      traj.M.insert(traj.M.end(), st.M.begin(), st.M.end());
      traj.N.insert(traj.N.end(), st.N.begin(), st.N.end());
    }
    for (const Vec6& zp : st.z)
      if (!inside_grid(cfg.field_grid, zp.x)) {
        traj.left_field_grid = true;
        break;
      }
  };
  record(s);

  Driver drv{ens, B, cfg.epsilon(), opts.matrices,
             mode == FieldMode::self_consistent && !cfg.self_field ? FieldMode::off : mode,
             frozen, log, {}, {}};

  StageDeriv k1, k2, k3, k4;
  for (long nstep = 0; nstep < nsteps; ++nstep) {
    const double t = t_begin + nstep * h;
    drv.eval_stage(nstep, 0, t, s, k1, &traj.e_sup[nstep]);
    const LockstepState s2 = advanced(s, k1, h / 2, opts.matrices);
    drv.eval_stage(nstep, 1, t + h / 2, s2, k2, nullptr);
    const LockstepState s3 = advanced(s, k2, h / 2, opts.matrices);
    drv.eval_stage(nstep, 2, t + h / 2, s3, k3, nullptr);
    const LockstepState s4 = advanced(s, k3, h, opts.matrices);
    drv.eval_stage(nstep, 3, t + h, s4, k4, nullptr);

    for (std::size_t p = 0; p < n; ++p) {
      s.z[p] += (h / 6.0) * (k1.z[p] + 2.0 * k2.z[p] + 2.0 * k3.z[p] + k4.z[p]);
      if (opts.matrices) {
        s.M[p] += (h / 6.0) * (k1.M[p] + 2.0 * k2.M[p] + 2.0 * k3.M[p] + k4.M[p]);
        s.N[p] += (h / 6.0) * (k1.N[p] + 2.0 * k2.N[p] + 2.0 * k3.N[p] + k4.N[p]);
      }
    }
    for (std::size_t p = 0; p < n; ++p)
      if (!is_finite(s.z[p]))
        throw std::runtime_error("run_forward: non-finite state at step " +
                                 std::to_string(nstep + 1) + ", particle " + std::to_string(p));
    record(s);
  }

  // trailing entry of the field-norm history, measured at the final slice
  if (drv.mode != FieldMode::off && n > 0) {
    StageDeriv tail;
    drv.eval_stage(nsteps - 1, 3, t_begin + span, s, tail, &traj.e_sup[nsteps]);
  }
  return traj;
}

}  // namespace

double TrajectoryStore::electric_l2linf() const {
  double s = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    s += w * std::abs(dt) * e_sup[i] * e_sup[i];
  }
  return std::sqrt(s);
}

TrajectoryStore run_forward(const ParticleEnsemble& ens, const ControlField& B,
                            const RunConfig& cfg, ForwardOptions opts) {
  return integrate_lockstep(ens, ens.z0, 0.0, cfg.T, B, cfg, opts, FieldMode::self_consistent,
                            nullptr, nullptr);
}

TrajectoryStore run_forward_from(const ParticleEnsemble& ens, const std::vector<Vec6>& state,
                                 double t_begin, double t_end, const ControlField& B,
                                 const RunConfig& cfg, ForwardOptions opts) {
  return integrate_lockstep(ens, state, t_begin, t_end, B, cfg, opts,
                            FieldMode::self_consistent, nullptr, nullptr);
}

PicardResult run_forward_picard(const ParticleEnsemble& ens, const ControlField& B,
                                const RunConfig& cfg, int max_iters, double tol,
                                ForwardOptions opts) {
  cfg.validate();
  if (max_iters < 1) throw std::invalid_argument("run_forward_picard: max_iters must be >= 1");
  const std::size_t n = ens.size();

  // iterate 0: the untransported initial ensemble generates the field
  std::vector<Vec3> pos0(n);
  for (std::size_t p = 0; p < n; ++p) pos0[p] = ens.z0[p].x;
  std::vector<SourceCloud> base(1);
  base[0] = SourceCloud(pos0, ens.weights);
  FrozenFields frozen;
  frozen.clouds = &base;
  frozen.constant = true;

  std::vector<double> history;
  TrajectoryStore prev;
  std::vector<SourceCloud> clouds;

  for (int it = 0; it < max_iters; ++it) {
    StageLog log;
    TrajectoryStore cur = integrate_lockstep(ens, ens.z0, 0.0, cfg.T, B, cfg, opts,
                                             cfg.self_field ? FieldMode::frozen : FieldMode::off,
                                             &frozen, &log);
    if (it > 0) {
      double d = 0.0;
      for (std::size_t i = 0; i < cur.z.size(); ++i) d = std::max(d, norm(cur.z[i] - prev.z[i]));
      history.push_back(d);
      if (d < tol) return {std::move(cur), std::move(history)};
    }
    // freeze the just-computed stage positions for the next sweep
    clouds.clear();
    clouds.reserve(log.pos.size());
    for (const auto& stage_pos : log.pos) clouds.emplace_back(stage_pos, ens.weights);
    frozen.clouds = &clouds;
    frozen.constant = false;
    prev = std::move(cur);
  }
  throw PicardDivergence(std::move(history));
}

double support_radius(const TrajectoryStore& traj, int step) {
  double r = 0.0;
  for (std::size_t p = 0; p < traj.np(); ++p) r = std::max(r, norm(traj.at(step, p)));
  return r;
}

double deposit_l2_estimate(const std::vector<Vec6>& points, const std::vector<double>& weights,
                           double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("deposit_l2_estimate: bad spacing");
  const std::size_t n = points.size();
  if (n == 0) return 0.0;
  Vec6 lo = points[0];
  for (std::size_t p = 1; p < n; ++p)
    for (int i = 0; i < 6; ++i) lo[i] = std::min(lo[i], points[p][i]);

  // nearest-cell binning: exact on lattice-aligned samples and robust to
  // sub-half-cell flow distortion (the cell map stays one-to-one)
  std::unordered_map<std::uint64_t, double> cells;
  cells.reserve(n * 2);
  const double inv = 1.0 / spacing;
  for (std::size_t p = 0; p < n; ++p) {
    const Vec6& zp = points[p];
    std::uint64_t key = 0;
    for (int i = 0; i < 6; ++i) {
      const long c = std::lround((zp[i] - lo[i]) * inv);
      key = key * 2048 + std::uint64_t(c + 4);
    }
    cells[key] += weights[p];
  }
  const double cellvol = std::pow(spacing, 6);
  double l2sq = 0.0;
  for (const auto& [key, mass] : cells) l2sq += mass * mass / cellvol;
  return std::sqrt(l2sq);
}

double deposit_l2_estimate(const TrajectoryStore& traj, int step, double spacing) {
  std::vector<Vec6> pts(traj.np());
  for (std::size_t p = 0; p < traj.np(); ++p) pts[p] = traj.at(step, p);
  return deposit_l2_estimate(pts, traj.ensemble.weights, spacing);
}

FieldProviders self_consistent_field(const std::vector<Vec6>& snapshot,
                                     const std::vector<double>& weights, double eps) {
  std::vector<Vec3> pos(snapshot.size());
  for (std::size_t p = 0; p < snapshot.size(); ++p) pos[p] = snapshot[p].x;
  auto cloud = std::make_shared<SourceCloud>(pos, weights);
  FieldProviders fp = FieldProviders::free_streaming();
  fp.electric = [cloud, eps](double, const Vec3& x) { return kernels::eval_E(*cloud, x, eps); };
  fp.electric_jacobian = [cloud, eps](double, const Vec3& x) {
    return kernels::eval_E_jacobian(*cloud, x, eps);
  };
  return fp;
}

TransportedDatum::TransportedDatum(const TrajectoryStore& reference) {
  if (!reference.has_matrices)
    throw std::invalid_argument("TransportedDatum: reference run must carry Jacobians");
  const std::size_t n = reference.np();
  const int last = reference.steps;
  points_.resize(n);
  values_.resize(n);
  grads_.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    points_[p] = reference.at(last, p);
    values_[p] = reference.ensemble.f0[p];
    grads_[p] = transpose_mul(reference.n_at(last, p), reference.ensemble.df0[p]);
  }
  l2_sq_ = 0.0;
  for (std::size_t p = 0; p < n; ++p)
    l2_sq_ += reference.ensemble.cell_volume * values_[p] * values_[p];
}

std::size_t TransportedDatum::nearest(const Vec6& z) const {
  std::size_t best = 0;
  double bd = 1e300;
  for (std::size_t p = 0; p < points_.size(); ++p) {
    const double d = norm2(points_[p] - z);
    if (d < bd) {
      bd = d;
      best = p;
    }
  }
  return best;
}

double TransportedDatum::value(const Vec6& z) const { return values_[nearest(z)]; }
Vec6 TransportedDatum::grad(const Vec6& z) const { return grads_[nearest(z)]; }

}  // namespace vpc
