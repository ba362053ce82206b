#include "vpc/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vpc/parallel.hpp"

namespace vpc {

namespace {

/// Trapezoidal weight of time knot k (integral of its hat function).
double knot_weight(const ControlField& F, int k) {
  const double dk = (F.t_end() - F.t_begin()) / double(F.knots() - 1);
  return (k == 0 || k == F.knots() - 1) ? dk / 2.0 : dk;
}

/// Hat-function weights of the two knots bracketing time t.
struct KnotHat {
  int k0, k1;
  double w0, w1;
};

KnotHat knot_hat(const ControlField& F, double t) {
  const int K = F.knots();
  const double dk = (F.t_end() - F.t_begin()) / double(K - 1);
  double tau = (t - F.t_begin()) / dk;
  tau = std::clamp(tau, 0.0, double(K - 1));
  const int k = std::min(int(std::floor(tau)), K - 2);
  const double g = tau - k;
  return {k, k + 1, 1.0 - g, g};
}

Vec3 laplacian7(const ControlField& F, int k, int ix, int iy, int iz) {
  const auto& d = F.grid().dims;
  const Vec3 h = F.grid().spacing;
  const Vec3 c = F.node(k, ix, iy, iz);
  auto nb = [&](int jx, int jy, int jz) -> Vec3 {
    if (jx < 0 || jy < 0 || jz < 0 || jx >= d[0] || jy >= d[1] || jz >= d[2]) return {};
    return F.node(k, jx, jy, jz);
  };
  Vec3 out = (1.0 / (h.x * h.x)) * (nb(ix + 1, iy, iz) - 2.0 * c + nb(ix - 1, iy, iz));
  out += (1.0 / (h.y * h.y)) * (nb(ix, iy + 1, iz) - 2.0 * c + nb(ix, iy - 1, iz));
  out += (1.0 / (h.z * h.z)) * (nb(ix, iy, iz + 1) - 2.0 * c + nb(ix, iy, iz - 1));
  return out;
}

/// Interpolates a stored per-particle slice series at an arbitrary time by
/// cubic Lagrange over the four nearest slices.
struct SliceInterp {
  int base;
  double w[4];
};

SliceInterp slice_interp(double t, double t0, double dt, int steps) {
  double s = (t - t0) / dt;
  s = std::clamp(s, 0.0, double(steps));
  if (steps < 3) {  // linear fallback for very short runs
    const int k = std::min(int(std::floor(s)), std::max(steps - 1, 0));
    const double f = s - k;
    return {k, {1.0 - f, f, 0.0, 0.0}};
  }
  int base = int(std::floor(s)) - 1;
  base = std::clamp(base, 0, steps - 3);
  const double u = s - base;
  SliceInterp si;
  si.base = base;
  si.w[0] = -(u - 1) * (u - 2) * (u - 3) / 6.0;
  si.w[1] = u * (u - 2) * (u - 3) / 2.0;
  si.w[2] = -u * (u - 1) * (u - 3) / 2.0;
  si.w[3] = u * (u - 1) * (u - 2) / 6.0;
  return si;
}

}  // namespace

void OptimizeConfig::validate() const {
  if (!(alpha0 > 0.0)) throw std::invalid_argument("optimize.alpha0 must be positive");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0))
    throw std::invalid_argument("optimize.armijo_c1 must lie in (0,1)");
  if (!(backtrack_ratio > 0.0 && backtrack_ratio < 1.0))
    throw std::invalid_argument("optimize.backtrack_ratio must lie in (0,1)");
  if (max_iters < 1) throw std::invalid_argument("optimize.max_iters must be positive");
  if (!(tol >= 0.0)) throw std::invalid_argument("optimize.tol must be nonnegative");
  if (!(theta > 0.0 && theta <= 1.0))
    throw std::invalid_argument("optimize.theta must lie in (0,1]");
  if (fp_max_iters < 1) throw std::invalid_argument("optimize.fp_max_iters must be positive");
  if (!(fp_tol > 0.0)) throw std::invalid_argument("optimize.fp_tol must be positive");
  if (!(fd_delta > 0.0)) throw std::invalid_argument("optimize.fd_delta must be positive");
  if (n_directions < 1) throw std::invalid_argument("optimize.n_directions must be positive");
}

double grid_reg_energy(const ControlField& B) {
  const auto& d = B.grid().dims;
  const Vec3 h = B.grid().spacing;
  const double cellvol = B.grid().cell_volume();
  double total = 0.0;
  for (int k = 0; k < B.knots(); ++k) {
    double e = 0.0;
    for (int ix = 0; ix < d[0]; ++ix)
      for (int iy = 0; iy < d[1]; ++iy)
        for (int iz = 0; iz < d[2]; ++iz) {
          const Vec3 c = B.node(k, ix, iy, iz);
          if (ix + 1 < d[0]) e += norm2(B.node(k, ix + 1, iy, iz) - c) / (h.x * h.x);
          if (iy + 1 < d[1]) e += norm2(B.node(k, ix, iy + 1, iz) - c) / (h.y * h.y);
          if (iz + 1 < d[2]) e += norm2(B.node(k, ix, iy, iz + 1) - c) / (h.z * h.z);
        }
    total += knot_weight(B, k) * e * cellvol;
  }
  return total;
}

double dot_grid(const ControlField& F, const ControlField& G) {
  if (!F.compatible_with(G)) throw std::invalid_argument("dot_grid: grid mismatch");
  const std::size_t per = F.dof() / F.knots();
  const double cellvol = F.grid().cell_volume();
  double s = 0.0;
  for (int k = 0; k < F.knots(); ++k) {
    double e = 0.0;
    const double* f = F.data() + per * k;
    const double* g = G.data() + per * k;
    for (std::size_t i = 0; i < per; ++i) e += f[i] * g[i];
    s += knot_weight(F, k) * e * cellvol;
  }
  return s;
}

CostBreakdown eval_cost(const TrajectoryStore& traj, const ControlField& B, const Datum& f_d,
                        double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("eval_cost: lambda must be nonnegative");
  double cross = 0.0;
  const int last = traj.steps;
  for (std::size_t p = 0; p < traj.np(); ++p)
    cross += traj.ensemble.weights[p] * f_d.value(traj.at(last, p));
  CostBreakdown cb;
  // the f0 norm is the quadrature value: it matches the transported cross
  // term exactly, so a perfectly tracked target yields tracking == 0
  cb.tracking = 0.5 * (traj.ensemble.quadrature_l2_sq - 2.0 * cross + f_d.l2_norm_sq());
  cb.tracking = std::max(cb.tracking, 0.0);
  cb.regularization = 0.5 * lambda * grid_reg_energy(B);
  cb.total = cb.tracking + cb.regularization;
  return cb;
}

ControlField assemble_gradient(const TrajectoryStore& traj, const CostateStore& costate,
                               const ControlField& B, double lambda) {
  if (!costate.aligned_with(traj))
    throw std::invalid_argument("assemble_gradient: misaligned trajectory and costate stores");
  ControlField dep(B.grid(), B.t_begin(), B.t_end());

  // hat-weighted step-trapezoid deposition of w_p v_p x G_p^v
  for (int n = 0; n <= traj.steps; ++n) {
    const double t = traj.time(n);
    const double theta = (n == 0 || n == traj.steps) ? 0.5 : 1.0;
    const double coeff = theta * std::abs(traj.dt);
    const KnotHat hat = knot_hat(dep, t);
    for (std::size_t p = 0; p < traj.np(); ++p) {
      const Vec6& zp = traj.at(n, p);
      const Vec3 s =
          traj.ensemble.weights[p] * cross(zp.v, costate.G_at(n, p).v);
      if (hat.w0 != 0.0) dep.deposit_at_knot(hat.k0, zp.x, (coeff * hat.w0) * s);
      if (hat.w1 != 0.0) dep.deposit_at_knot(hat.k1, zp.x, (coeff * hat.w1) * s);
    }
  }

  ControlField out(B.grid(), B.t_begin(), B.t_end());
  const auto& d = B.grid().dims;
  const double cellvol = B.grid().cell_volume();
  for (int k = 0; k < out.knots(); ++k) {
    const double wk = knot_weight(out, k);
    for (int ix = 1; ix < d[0] - 1; ++ix)
      for (int iy = 1; iy < d[1] - 1; ++iy)
        for (int iz = 1; iz < d[2] - 1; ++iz) {
          const Vec3 lap = laplacian7(B, k, ix, iy, iz);
          const Vec3 val = -lambda * lap - (1.0 / (wk * cellvol)) * dep.node(k, ix, iy, iz);
          out.set_node(k, ix, iy, iz, val);
        }
  }
  return out;
}

double fd_directional(const ControlField& B, const ControlField& H, double delta,
                      const std::function<CostBreakdown(const ControlField&)>& evaluate) {
  return fd_directional_parts(B, H, delta, evaluate).total;
}

CostBreakdown fd_directional_parts(const ControlField& B, const ControlField& H, double delta,
                                   const std::function<CostBreakdown(const ControlField&)>& evaluate) {
  if (!(delta > 0.0)) throw std::invalid_argument("fd_directional: delta must be positive");
  ControlField Bp = B, Bm = B;
  Bp.axpy(delta, H);
  Bm.axpy(-delta, H);
  const CostBreakdown Jp = evaluate(Bp);
  const CostBreakdown Jm = evaluate(Bm);
  CostBreakdown out;
  out.total = (Jp.total - Jm.total) / (2.0 * delta);
  out.tracking = (Jp.tracking - Jm.tracking) / (2.0 * delta);
  out.regularization = (Jp.regularization - Jm.regularization) / (2.0 * delta);
  return out;
}

std::function<CostBreakdown(const ControlField&)> make_cost_evaluator(const TrackingProblem& prob) {
  return [&prob](const ControlField& B) {
    ForwardOptions opts;
    opts.matrices = false;
    const TrajectoryStore traj = run_forward(prob.ensemble, B, prob.cfg, opts);
    return eval_cost(traj, B, *prob.target, prob.cfg.lambda);
  };
}

double discrete_V_norm(const ControlField& B, double beta) {
  if (!(beta > 3.0)) throw std::invalid_argument("discrete_V_norm: beta must exceed 3");
  const auto& d = B.grid().dims;
  const Vec3 h = B.grid().spacing;
  const double cellvol = B.grid().cell_volume();

  double w_sq_sum = 0.0;  // sum_k w_k |B_k|_{W^{2,beta}}^2
  double h_sq_sum = 0.0;  // sum_k w_k |B_k|_{H^1}^2
  for (int k = 0; k < B.knots(); ++k) {
    double pow_sum = 0.0;  // sum over nodes/derivatives of |D^a B|^beta
    double h1 = 0.0;
    for (int ix = 0; ix < d[0]; ++ix)
      for (int iy = 0; iy < d[1]; ++iy)
        for (int iz = 0; iz < d[2]; ++iz) {
          auto nb = [&](int jx, int jy, int jz) -> Vec3 {
            if (jx < 0 || jy < 0 || jz < 0 || jx >= d[0] || jy >= d[1] || jz >= d[2]) return {};
            return B.node(k, jx, jy, jz);
          };
          const Vec3 c = nb(ix, iy, iz);
          const Vec3 dx = (1.0 / (2 * h.x)) * (nb(ix + 1, iy, iz) - nb(ix - 1, iy, iz));
          const Vec3 dy = (1.0 / (2 * h.y)) * (nb(ix, iy + 1, iz) - nb(ix, iy - 1, iz));
          const Vec3 dz = (1.0 / (2 * h.z)) * (nb(ix, iy, iz + 1) - nb(ix, iy, iz - 1));
          const Vec3 dxx = (1.0 / (h.x * h.x)) * (nb(ix + 1, iy, iz) - 2.0 * c + nb(ix - 1, iy, iz));
          const Vec3 dyy = (1.0 / (h.y * h.y)) * (nb(ix, iy + 1, iz) - 2.0 * c + nb(ix, iy - 1, iz));
          const Vec3 dzz = (1.0 / (h.z * h.z)) * (nb(ix, iy, iz + 1) - 2.0 * c + nb(ix, iy, iz - 1));
          const Vec3 dxy = (1.0 / (4 * h.x * h.y)) *
                           (nb(ix + 1, iy + 1, iz) - nb(ix + 1, iy - 1, iz) -
                            nb(ix - 1, iy + 1, iz) + nb(ix - 1, iy - 1, iz));
          const Vec3 dxz = (1.0 / (4 * h.x * h.z)) *
                           (nb(ix + 1, iy, iz + 1) - nb(ix + 1, iy, iz - 1) -
                            nb(ix - 1, iy, iz + 1) + nb(ix - 1, iy, iz - 1));
          const Vec3 dyz = (1.0 / (4 * h.y * h.z)) *
                           (nb(ix, iy + 1, iz + 1) - nb(ix, iy + 1, iz - 1) -
                            nb(ix, iy - 1, iz + 1) + nb(ix, iy - 1, iz - 1));
          for (const Vec3* dv : {&c, &dx, &dy, &dz, &dxx, &dyy, &dzz, &dxy, &dxz, &dyz})
            for (int i = 0; i < 3; ++i) pow_sum += std::pow(std::abs((*dv)[i]), beta);
          h1 += norm2(c) + norm2(dx) + norm2(dy) + norm2(dz);
        }
    const double w2b = std::pow(pow_sum * cellvol, 1.0 / beta);
    w_sq_sum += knot_weight(B, k) * w2b * w2b;
    h_sq_sum += knot_weight(B, k) * h1 * cellvol;
  }
  return std::sqrt(w_sq_sum) + std::sqrt(h_sq_sum);
}

ControlField project_admissible(const ControlField& B, const AdmissibleSpec& spec) {
  spec.validate();
  const double n = discrete_V_norm(B, spec.beta);
  if (n <= spec.K * (1.0 + 1e-12)) return B;
  ControlField out = B;
  out.scale(spec.K / n);
  return out;
}

GdResult run_projected_gd(const TrackingProblem& prob, const ControlField& B0,
                          const OptimizeConfig& opt) {
  opt.validate();
  GdResult res;
  res.B = project_admissible(B0, prob.cfg.admissible);
  res.B.zero_boundary_layer();

  TrajectoryStore traj = run_forward(prob.ensemble, res.B, prob.cfg);
  CostBreakdown cb = eval_cost(traj, res.B, *prob.target, prob.cfg.lambda);
  double alpha = opt.alpha0;
  res.status = "max_iters";

  for (int it = 1; it <= opt.max_iters; ++it) {
    const CostateStore costate =
        run_backward(traj, res.B, *prob.target, prob.cfg.cutoff, prob.cfg.epsilon());
    const ControlField grad = assemble_gradient(traj, costate, res.B, prob.cfg.lambda);
    const double gn = std::sqrt(std::max(dot_grid(grad, grad), 0.0));

    bool accepted = false;
    int fails = 0;
    ControlField Bt;
    TrajectoryStore trajt;
    CostBreakdown cbt;
    while (fails < 30) {
      Bt = res.B;
      Bt.axpy(-alpha, grad);
      Bt = project_admissible(Bt, prob.cfg.admissible);
      Bt.zero_boundary_layer();
      trajt = run_forward(prob.ensemble, Bt, prob.cfg);
      cbt = eval_cost(trajt, Bt, *prob.target, prob.cfg.lambda);
      ControlField diff = res.B;
      diff.axpy(-1.0, Bt);
      const double decrease = dot_grid(grad, diff);
      if (cbt.total <= cb.total - opt.armijo_c1 * decrease + 1e-300) {
        accepted = true;
        break;
      }
      alpha *= opt.backtrack_ratio;
      ++fails;
    }

    GdRow row;
    row.iter = it;
    row.grad_norm = gn;
    if (!accepted) {
      row.cost = cb;
      row.step = 0.0;
      row.accepted = false;
      res.history.push_back(row);
      res.status = "line_search_failed";
      break;
    }
    row.cost = cbt;
    row.step = alpha;
    row.accepted = true;
    res.history.push_back(row);

    const double rel = (cb.total - cbt.total) / std::max(std::abs(cb.total), 1e-300);
    res.B = std::move(Bt);
    traj = std::move(trajt);
    cb = cbt;
    alpha = std::min(alpha * 2.0, opt.alpha0 * 1e6);
    if (rel < opt.tol) {
      res.status = "converged";
      break;
    }
  }
  return res;
}

ControlField optimality_field_map(const TrackingProblem& prob, const ControlField& B) {
  if (!(prob.cfg.lambda > 0.0))
    throw std::invalid_argument("optimality_field_map: lambda must be positive");
  const TrajectoryStore traj = run_forward(prob.ensemble, B, prob.cfg);
  const CostateStore costate =
      run_backward(traj, B, *prob.target, prob.cfg.cutoff, prob.cfg.epsilon());

  ControlField out(B.grid(), B.t_begin(), B.t_end());
  const auto& d = B.grid().dims;
  const std::size_t np = traj.np();
  const double eps = prob.cfg.epsilon();
  std::vector<Vec3> pos(np), payload(np);

  for (int k = 0; k < out.knots(); ++k) {
    const double tk = out.knot_time(k);
    const SliceInterp si = slice_interp(tk, traj.t0, traj.dt, traj.steps);
    for (std::size_t p = 0; p < np; ++p) {
      Vec6 zp;
      Vec6 Gp;
      for (int j = 0; j < 4; ++j) {
        if (si.w[j] == 0.0) continue;
        zp += si.w[j] * traj.at(si.base + j, p);
        Gp += si.w[j] * costate.G_at(si.base + j, p);
      }
      pos[p] = zp.x;
      // integration by parts turns w x grad_v f g into -w_p v_p x G_p^v
      payload[p] = -traj.ensemble.weights[p] * cross(zp.v, Gp.v);
    }
    const kernels::SourceCloud cloud(pos, traj.ensemble.weights, payload);
    const double scale = -1.0 / (4.0 * M_PI * prob.cfg.lambda);
    parallel_for(std::size_t(d[0]), [&](std::size_t bx, std::size_t ex) {
      for (std::size_t ix = bx; ix < ex; ++ix)
        for (int iy = 0; iy < d[1]; ++iy)
          for (int iz = 0; iz < d[2]; ++iz) {
            const Vec3 xn = {B.grid().origin.x + double(ix) * B.grid().spacing.x,
                             B.grid().origin.y + double(iy) * B.grid().spacing.y,
                             B.grid().origin.z + double(iz) * B.grid().spacing.z};
            out.set_node(k, int(ix), iy, iz,
                         scale * kernels::eval_vector_newton(cloud, xn, eps));
          }
    });
  }
  out.zero_boundary_layer();
  return out;
}

FixedPointResult fixed_point_iterate(const TrackingProblem& prob, const ControlField& B0,
                                     double theta, int max_iters, double tol) {
  if (!(prob.cfg.lambda > 0.0))
    throw std::invalid_argument("fixed_point_iterate: lambda must be positive");
  if (!(theta > 0.0 && theta <= 1.0))
    throw std::invalid_argument("fixed_point_iterate: theta must lie in (0,1]");
  if (max_iters < 1) throw std::invalid_argument("fixed_point_iterate: max_iters must be >= 1");

  FixedPointResult res;
  res.B = B0;
  res.B.zero_boundary_layer();
  res.status = "max_iters";
  for (int it = 1; it <= max_iters; ++it) {
    ControlField Bhat = optimality_field_map(prob, res.B);
    ControlField diff = Bhat;
    diff.axpy(-1.0, res.B);
    double r = 0.0;
    for (int k = 0; k < diff.knots(); ++k) r = std::max(r, diff.knot_max_abs(k));
    r *= theta;  // the actually applied update
    res.residuals.push_back(r);

    res.B.scale(1.0 - theta);
    res.B.axpy(theta, Bhat);
    if (r < tol) {
      res.status = "converged";
      break;
    }
    if (r > 10.0 * res.residuals.front() && it > 1) {
      res.status = "diverged";
      break;
    }
  }
  return res;
}

OptimalityReport optimality_residuals(const TrackingProblem& prob, const ControlField& B) {
  OptimalityReport rep;
  const ControlField Bhat = optimality_field_map(prob, B);
  ControlField diff = Bhat;
  diff.axpy(-1.0, B);
  rep.fp_residual = diff.max_abs();
  rep.fp_scale = std::max(B.max_abs(), Bhat.max_abs());

  const TrajectoryStore traj = run_forward(prob.ensemble, B, prob.cfg);
  const CostateStore costate =
      run_backward(traj, B, *prob.target, prob.cfg.cutoff, prob.cfg.epsilon());
  const ControlField grad = assemble_gradient(traj, costate, B, prob.cfg.lambda);
  rep.grad_residual = grad.max_abs();
  const ControlField dep_only = assemble_gradient(traj, costate, ControlField(B.grid(), B.t_begin(), B.t_end()), prob.cfg.lambda);
  rep.grad_scale = dep_only.max_abs();
  return rep;
}

}  // namespace vpc
