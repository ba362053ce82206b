#include "vpc/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vpc/parallel.hpp"

namespace vpc {

namespace {

using kernels::SourceCloud;

/// Cubic Lagrange interpolation of stored per-particle slices at step
/// midpoints (the only off-slice times the RK4 stages visit).
struct MidpointWeights {
  int base;          // first slice of the 4-point window
  double w[4];
};

MidpointWeights midpoint_weights(int n, int steps) {
  // interpolation point sits between slices n and n+1
  MidpointWeights mw;
  if (n == 0 || steps < 3) {
    mw.base = 0;
    if (steps < 3) {  // short runs: quadratic/linear fallback windows
      if (steps == 1) {
        mw.base = 0;
        mw.w[0] = 0.5; mw.w[1] = 0.5; mw.w[2] = 0; mw.w[3] = 0;
        return mw;
      }
      // steps == 2: quadratic through 3 slices
      const double s = n + 0.5;
      mw.w[0] = (s - 1) * (s - 2) / 2.0;
      mw.w[1] = s * (2 - s);
      mw.w[2] = s * (s - 1) / 2.0;
      mw.w[3] = 0.0;
      return mw;
    }
    mw.w[0] = 0.3125; mw.w[1] = 0.9375; mw.w[2] = -0.3125; mw.w[3] = 0.0625;
  } else if (n >= steps - 1) {
    mw.base = steps - 3;
    mw.w[0] = 0.0625; mw.w[1] = -0.3125; mw.w[2] = 0.9375; mw.w[3] = 0.3125;
  } else {
    mw.base = n - 1;
    mw.w[0] = -0.0625; mw.w[1] = 0.5625; mw.w[2] = 0.5625; mw.w[3] = -0.0625;
  }
  return mw;
}

void require_matrices(const TrajectoryStore& traj, const char* op) {
  if (!traj.has_matrices)
    throw std::invalid_argument(std::string(op) + ": trajectory store lacks Jacobians");
}

/// States of all particles at a stage time: either a stored slice or the
/// cubic midpoint combination of four slices.
void gather_states(const TrajectoryStore& traj, int slice_or_mid, bool midpoint,
                   std::vector<Vec6>& out) {
  const std::size_t np = traj.np();
  out.resize(np);
  if (!midpoint) {
    const Vec6* s = &traj.z[std::size_t(slice_or_mid) * np];
    std::copy(s, s + np, out.begin());
    return;
  }
  const auto mw = midpoint_weights(slice_or_mid, traj.steps);
  for (std::size_t p = 0; p < np; ++p) {
    Vec6 acc;
    for (int j = 0; j < 4; ++j) {
      if (mw.w[j] == 0.0) continue;
      acc += mw.w[j] * traj.at(mw.base + j, p);
    }
    out[p] = acc;
  }
}

struct BackwardTerminal {
  std::vector<double> g;
  std::vector<Vec6> G;
};

/// Shared backward RK4 over the linear costate system. The Phi source is
/// evaluated from the same-stage costate gradients (lockstep), the transport
/// matrix A from the interpolated forward states and the control Jacobian.
CostateStore backward_core(const TrajectoryStore& traj, const ControlField& B,
                           BackwardTerminal terminal, const CutoffSpec& cutoff, double eps) {
  require_matrices(traj, "run_backward");
  const std::size_t np = traj.np();
  const int steps = traj.steps;
  const double h = -traj.dt;

  CostateStore store;
  store.t0 = traj.t0;
  store.dt = traj.dt;
  store.steps = steps;
  store.particles = np;
  store.g.assign(std::size_t(steps + 1) * np, 0.0);
  store.G.assign(std::size_t(steps + 1) * np, Vec6{});

  double max_support = 0.0;
  for (int n = 0; n <= steps; ++n) max_support = std::max(max_support, support_radius(traj, n));
  store.cutoff_warning = cutoff.inner < max_support;

  // state arrays
  std::vector<double> g = std::move(terminal.g);
  std::vector<Vec6> G = std::move(terminal.G);
  auto put = [&](int n) {
    std::copy(g.begin(), g.end(), store.g.begin() + std::size_t(n) * np);
    std::copy(G.begin(), G.end(), store.G.begin() + std::size_t(n) * np);
  };
  put(steps);

  std::vector<Vec6> zs;          // stage forward states
  std::vector<Vec3> pos(np);
  std::vector<Vec3> payload(np);
  std::vector<double> dg1(np), dg2(np), dg3(np), dg4(np);
  std::vector<Vec6> dG1(np), dG2(np), dG3(np), dG4(np);
  std::vector<double> gs(np);
  std::vector<Vec6> Gs(np);

  auto stage = [&](double t, int slice, bool midpoint, const std::vector<double>& gstage,
                   const std::vector<Vec6>& Gstage, std::vector<double>& out_dg,
                   std::vector<Vec6>& out_dG) {
    gather_states(traj, slice, midpoint, zs);
    for (std::size_t p = 0; p < np; ++p) {
      pos[p] = zs[p].x;
      payload[p] = Gstage[p].v;
    }
    const SourceCloud cloud(pos, traj.ensemble.weights, payload);
    parallel_for(np, [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        const Vec3& x = zs[p].x;
        const Vec3& v = zs[p].v;
        const auto bw = kernels::eval_backward_sample(cloud, x, eps, cloud.sorted_index(p));
        const Vec3 Bv = B.value(t, x);
        const Mat3 dB = B.jacobian(t, x);
        Mat6 A;
        A.set_block(0, 3, Mat3::identity());
        Mat3 lower = bw.e_jac;
        for (int j = 0; j < 3; ++j) {
          const Vec3 col = cross(v, dB.col(j));
          lower(0, j) += col.x;
          lower(1, j) += col.y;
          lower(2, j) += col.z;
        }
        A.set_block(3, 0, lower);
        A.set_block(3, 3, -1.0 * cross_matrix(Bv));

        const double chi = cutoff.eval(zs[p]);
        const Vec6 dchi = cutoff.eval_grad(zs[p]);
        out_dg[p] = bw.phi * chi;
        Vec6 rhs = -1.0 * transpose_mul(A, Gstage[p]);
        rhs.x += chi * bw.phi_grad;
        rhs += bw.phi * dchi;
        out_dG[p] = rhs;
      }
    });
  };

  for (int n = steps; n > 0; --n) {
    const double t = traj.time(n);
    stage(t, n, false, g, G, dg1, dG1);
    for (std::size_t p = 0; p < np; ++p) {
      gs[p] = g[p] + (h / 2) * dg1[p];
      Gs[p] = G[p] + (h / 2) * dG1[p];
    }
    stage(t + h / 2, n - 1, true, gs, Gs, dg2, dG2);
    for (std::size_t p = 0; p < np; ++p) {
      gs[p] = g[p] + (h / 2) * dg2[p];
      Gs[p] = G[p] + (h / 2) * dG2[p];
    }
    stage(t + h / 2, n - 1, true, gs, Gs, dg3, dG3);
    for (std::size_t p = 0; p < np; ++p) {
      gs[p] = g[p] + h * dg3[p];
      Gs[p] = G[p] + h * dG3[p];
    }
    stage(t + h, n - 1, false, gs, Gs, dg4, dG4);
    for (std::size_t p = 0; p < np; ++p) {
      g[p] += (h / 6.0) * (dg1[p] + 2 * dg2[p] + 2 * dg3[p] + dg4[p]);
      G[p] += (h / 6.0) * (dG1[p] + 2.0 * dG2[p] + 2.0 * dG3[p] + dG4[p]);
      if (!std::isfinite(g[p]) || !is_finite(G[p]))
        throw std::runtime_error("run_backward: non-finite costate at step " + std::to_string(n));
    }
    put(n - 1);
  }
  return store;
}

}  // namespace

bool CostateStore::aligned_with(const TrajectoryStore& traj) const {
  return particles == traj.np() && steps == traj.steps && t0 == traj.t0 && dt == traj.dt;
}

TerminalSlice terminal_costate(const TrajectoryStore& traj, const Datum& f_d) {
  require_matrices(traj, "terminal_costate");
  const std::size_t np = traj.np();
  TerminalSlice out;
  out.g.resize(np);
  out.G.resize(np);
  const int last = traj.steps;
  for (std::size_t p = 0; p < np; ++p) {
    const Vec6& zT = traj.at(last, p);
    out.g[p] = traj.ensemble.f0[p] - f_d.value(zT);
    out.G[p] = transpose_mul(traj.n_at(last, p), traj.ensemble.df0[p]) - f_d.grad(zT);
  }
  return out;
}

CostateStore run_backward(const TrajectoryStore& traj, const ControlField& B, const Datum& f_d,
                          const CutoffSpec& cutoff, double eps) {
  TerminalSlice term = terminal_costate(traj, f_d);
  return backward_core(traj, B, {std::move(term.g), std::move(term.G)}, cutoff, eps);
}

CostateStore run_backward_via_h(const TrajectoryStore& traj, const ControlField& B,
                                const Datum& f_d, const CutoffSpec& cutoff, double eps) {
  require_matrices(traj, "run_backward_via_h");
  const std::size_t np = traj.np();
  const int last = traj.steps;
  BackwardTerminal term;
  term.g.resize(np);
  term.G.resize(np);
  for (std::size_t p = 0; p < np; ++p) {
    const Vec6& zT = traj.at(last, p);
    term.g[p] = f_d.value(zT);
    term.G[p] = f_d.grad(zT);
  }
  CostateStore hstore = backward_core(traj, B, std::move(term), cutoff, eps);

  // g = f - h along trajectories; the f-part transports exactly
  for (int n = 0; n <= last; ++n) {
    for (std::size_t p = 0; p < np; ++p) {
      const std::size_t i = std::size_t(n) * np + p;
      hstore.g[i] = traj.ensemble.f0[p] - hstore.g[i];
      hstore.G[i] = transpose_mul(traj.n_at(n, p), traj.ensemble.df0[p]) - hstore.G[i];
    }
  }
  return hstore;
}

TangentStore run_tangent(const TrajectoryStore& traj, const ControlField& H, double eps) {
  require_matrices(traj, "run_tangent");
  const std::size_t np = traj.np();
  const int steps = traj.steps;
  const double h = traj.dt;

  TangentStore store;
  store.t0 = traj.t0;
  store.dt = traj.dt;
  store.steps = steps;
  store.particles = np;
  store.df.assign(std::size_t(steps + 1) * np, 0.0);

  // v-block of N^T grad f0 per slice (the transported velocity gradient of f)
  std::vector<Vec3> gv(std::size_t(steps + 1) * np);
  for (int n = 0; n <= steps; ++n)
    for (std::size_t p = 0; p < np; ++p)
      gv[std::size_t(n) * np + p] = transpose_mul(traj.n_at(n, p), traj.ensemble.df0[p]).v;

  std::vector<double> df(np, 0.0), dfs(np);
  std::vector<double> k1(np), k2(np), k3(np), k4(np);
  std::vector<Vec6> zs;
  std::vector<Vec3> pos(np), gvs(np);
  std::vector<double> wts(np);

  auto gather_gv = [&](int slice, bool midpoint) {
    if (!midpoint) {
      const Vec3* s = &gv[std::size_t(slice) * np];
      std::copy(s, s + np, gvs.begin());
      return;
    }
    const auto mw = midpoint_weights(slice, steps);
    for (std::size_t p = 0; p < np; ++p) {
      Vec3 acc;
      for (int j = 0; j < 4; ++j) {
        if (mw.w[j] == 0.0) continue;
        acc += mw.w[j] * gv[std::size_t(mw.base + j) * np + p];
      }
      gvs[p] = acc;
    }
  };

  auto stage = [&](double t, int slice, bool midpoint, const std::vector<double>& dfstage,
                   std::vector<double>& out) {
    gather_states(traj, slice, midpoint, zs);
    gather_gv(slice, midpoint);
    for (std::size_t p = 0; p < np; ++p) {
      pos[p] = zs[p].x;
      wts[p] = traj.ensemble.cell_volume * dfstage[p];
    }
    const SourceCloud cloud(pos, wts);
    parallel_for(np, [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        const Vec3 epert = kernels::eval_E(cloud, zs[p].x, eps, cloud.sorted_index(p));
        const Vec3 Hv = H.value(t, zs[p].x);
        out[p] = -dot(epert, gvs[p]) - dot(cross(zs[p].v, Hv), gvs[p]);
      }
    });
  };

  for (int n = 0; n < steps; ++n) {
    const double t = traj.time(n);
    stage(t, n, false, df, k1);
    for (std::size_t p = 0; p < np; ++p) dfs[p] = df[p] + (h / 2) * k1[p];
    stage(t + h / 2, n, true, dfs, k2);
    for (std::size_t p = 0; p < np; ++p) dfs[p] = df[p] + (h / 2) * k2[p];
    stage(t + h / 2, n, true, dfs, k3);
    for (std::size_t p = 0; p < np; ++p) dfs[p] = df[p] + h * k3[p];
    stage(t + h, n + 1, false, dfs, k4);
    for (std::size_t p = 0; p < np; ++p) {
      df[p] += (h / 6.0) * (k1[p] + 2 * k2[p] + 2 * k3[p] + k4[p]);
      if (!std::isfinite(df[p]))
        throw std::runtime_error("run_tangent: non-finite state at step " + std::to_string(n + 1));
    }
    std::copy(df.begin(), df.end(), store.df.begin() + std::size_t(n + 1) * np);
  }
  return store;
}

double tangent_terminal_pairing(const TrajectoryStore& traj, const Datum& f_d,
                                const TangentStore& tangent) {
  if (tangent.particles != traj.np() || tangent.steps != traj.steps)
    throw std::invalid_argument("tangent_terminal_pairing: misaligned stores");
  const int last = traj.steps;
  double s = 0.0;
  for (std::size_t p = 0; p < traj.np(); ++p) {
    const double gT = traj.ensemble.f0[p] - f_d.value(traj.at(last, p));
    s += traj.ensemble.cell_volume * gT * tangent.at(last, p);
  }
  return s;
}

}  // namespace vpc
