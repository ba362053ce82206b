#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vpc/charflow.hpp"
#include "vpc/parallel.hpp"

using namespace vpc;

TEST_CASE("sampling: empty datum errors, refinement scaling, quadrature accuracy") {
  BumpSum zero({fixture::bump(0.0)});
  CHECK_THROWS_AS(sample_ensemble(zero, 0.4, 0.0), std::runtime_error);

  BumpSum f0({fixture::bump(1.0)});
  const auto coarse = sample_ensemble(f0, 0.5, 0.0);
  const auto fine = sample_ensemble(f0, 0.25, 0.0);
  const double ratio = double(fine.size()) / double(coarse.size());
  CHECK(ratio > 40.0);
  CHECK(ratio < 90.0);

  for (const auto& zp : fine.z0) {
    CHECK(norm(zp.x) < 1.0);
    CHECK(norm(zp.v) < 1.0);
  }
  for (double v : fine.f0) CHECK(v > 0.0);
  for (std::size_t p = 0; p < fine.size(); ++p)
    CHECK(fine.weights[p] == fine.f0[p] * fine.cell_volume);
}

TEST_CASE("sampling and L^p norms at h = r/8 against analytic moments") {
  BumpSum f0({fixture::bump(1.0)});
  const auto ens = sample_ensemble(f0, 0.125, 0.0);
  double mass = 0.0;
  for (double w : ens.weights) mass += w;
  CHECK(std::abs(mass - ens.datum_mass) <= 0.01 * ens.datum_mass);

  const double l2 = lp_norm(ens, 2.0);
  const double l2_exact = std::sqrt(ens.datum_l2_sq);
  CHECK(std::abs(l2 - l2_exact) <= 0.01 * l2_exact);

  CHECK(lp_norm(ens, 1.0) == doctest::Approx(mass).epsilon(1e-12));
  CHECK(lp_norm(ens, std::numeric_limits<double>::infinity()) <= 1.0);
  CHECK(lp_norm(ens, std::numeric_limits<double>::infinity()) ==
        doctest::Approx(1.0).epsilon(0.05));
  CHECK_THROWS_AS((void)lp_norm(ens, 0.5), std::invalid_argument);
}

TEST_CASE("weight floor drops low-weight samples") {
  BumpSum f0({fixture::bump(1.0)});
  const auto all = sample_ensemble(f0, 0.5, 0.0);
  const double dV = all.cell_volume;
  const auto trimmed = sample_ensemble(f0, 0.5, 0.2 * dV);
  CHECK(trimmed.size() < all.size());
  for (double w : trimmed.weights) CHECK(w >= 0.2 * dV);
}

TEST_CASE("forward run: symmetry, determinism, store invariants") {
  BumpSum f0({fixture::bump(0.5)});
  RunConfig cfg = fixture::small_cfg(0.3, 0.01, 0.5);
  const auto ens = sample_ensemble(f0, cfg.sample_spacing, 0.0);
  const auto B = fixture::zero_field(cfg);
  const auto traj = run_forward(ens, B, cfg);

  // symmetric datum keeps the center of mass at the origin
  Vec3 com;
  double wsum = 0.0;
  for (std::size_t p = 0; p < traj.np(); ++p) {
    com += traj.ensemble.weights[p] * traj.at(traj.steps, p).x;
    wsum += traj.ensemble.weights[p];
  }
  CHECK(norm(com) / wsum <= 1e-6);

  // measure preservation and inverse-Jacobian consistency
  double det_dev = 0.0, inv_dev = 0.0;
  for (std::size_t p = 0; p < traj.np(); p += 7) {
    det_dev = std::max(det_dev, std::abs(det(traj.m_at(traj.steps, p)) - 1.0));
    const Mat6 I6 = traj.m_at(traj.steps, p) * traj.n_at(traj.steps, p);
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) inv_dev = std::max(inv_dev, std::abs(I6(r, c) - (r == c)));
  }
  CHECK(det_dev <= 1e-6);
  CHECK(inv_dev <= 1e-6);

  // deterministic under repetition and thread count
  set_worker_threads(1);
  const auto traj1 = run_forward(ens, B, cfg);
  set_worker_threads(0);
  const auto traj2 = run_forward(ens, B, cfg);
  REQUIRE(traj1.z.size() == traj.z.size());
  for (std::size_t i = 0; i < traj.z.size(); ++i) {
    CHECK(norm(traj.z[i] - traj1.z[i]) == 0.0);
    CHECK(norm(traj.z[i] - traj2.z[i]) == 0.0);
  }

  // support radius bounded by the zeta estimate with the measured field norm
  const double r0 = support_radius(traj, 0);
  const double bound = support_bound_zeta(r0, cfg.T, traj.electric_l2linf());
  for (int n = 0; n <= traj.steps; ++n) CHECK(support_radius(traj, n) <= bound);
}

TEST_CASE("massless tracer in a uniform field reduces to Larmor rotation") {
  // a tiny-amplitude datum makes the self-field negligible; disable it too
  BumpSum f0({fixture::bump(1.0, {{0, 0, 0}, {0.4, 0, 0}}, 0.3, 0.3)});
  RunConfig cfg = fixture::small_cfg(0.5, 0.005, 0.3);
  cfg.self_field = false;
  const double b = 1.4;
  const auto B = fixture::uniform_field(cfg, {0, 0, b});
  const auto ens = sample_ensemble(f0, cfg.sample_spacing, 0.0);
  const auto traj = run_forward(ens, B, cfg);

  FieldProviders ub = FieldProviders::free_streaming();
  ub.magnetic = [b](double, const Vec3&) { return Vec3{0, 0, b}; };
  for (std::size_t p = 0; p < ens.size(); p += 3) {
    const auto ref = integrate_flow(ens.z0[p], 0.0, cfg.T, cfg.dt, ub, {.matrices = false});
    CHECK(norm(ref.back().z - traj.at(traj.steps, p)) <= 1e-10);
  }
}

TEST_CASE("forward self-convergence is fourth order in dt") {
  BumpSum f0({fixture::bump(0.8)});
  RunConfig cfg = fixture::small_cfg(0.4, 0.04, 0.5);
  const auto ens = sample_ensemble(f0, cfg.sample_spacing, 0.0);
  const auto B = fixture::blob_field(cfg, {0.0, 0.0, 0.6});

  auto final_slice = [&](double dt) {
    RunConfig c = cfg;
    c.dt = dt;
    ForwardOptions opts;
    opts.matrices = false;
    const auto traj = run_forward(ens, B, c, opts);
    std::vector<Vec6> out(traj.np());
    for (std::size_t p = 0; p < traj.np(); ++p) out[p] = traj.at(traj.steps, p);
    return out;
  };
  const auto a = final_slice(0.04);
  const auto b2 = final_slice(0.02);
  const auto c4 = final_slice(0.01);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    e1 = std::max(e1, norm(a[p] - b2[p]));
    e2 = std::max(e2, norm(b2[p] - c4[p]));
  }
  CHECK(e1 / e2 >= 8.0);
  CHECK(e2 > 0.0);
}

TEST_CASE("momentum conservation under the self-field alone") {
  BumpSum f0({fixture::bump(1.0)});
  RunConfig cfg = fixture::small_cfg(0.5, 0.01, 0.5);
  const auto ens = sample_ensemble(f0, cfg.sample_spacing, 0.0);
  const auto traj = run_forward(ens, fixture::zero_field(cfg), cfg, {.matrices = false});

  auto momentum = [&](int n) {
    Vec3 s;
    for (std::size_t p = 0; p < traj.np(); ++p)
      s += traj.ensemble.weights[p] * traj.at(n, p).v;
    return s;
  };
  double scale = 0.0;
  for (std::size_t p = 0; p < traj.np(); ++p)
    scale += traj.ensemble.weights[p] * norm(traj.at(0, p).v);
  const double drift = norm(momentum(traj.steps) - momentum(0));
  CHECK(drift <= 1e-6 * scale * cfg.T);
}

TEST_CASE("forward-backward reversibility of the direct solver") {
  BumpSum f0({fixture::bump(0.6)});
  RunConfig cfg = fixture::small_cfg(0.5, 0.005, 0.5);
  const auto ens = sample_ensemble(f0, cfg.sample_spacing, 0.0);
  const auto B = fixture::blob_field(cfg, {0.0, 0.4, 0.3});
  ForwardOptions light;
  light.matrices = false;
  const auto fwd = run_forward(ens, B, cfg, light);
  std::vector<Vec6> final_state(fwd.np());
  for (std::size_t p = 0; p < fwd.np(); ++p) final_state[p] = fwd.at(fwd.steps, p);
  const auto back = run_forward_from(ens, final_state, cfg.T, 0.0, B, cfg, light);
  double worst = 0.0;
  for (std::size_t p = 0; p < fwd.np(); ++p)
    worst = std::max(worst, norm(back.at(back.steps, p) - ens.z0[p]));
  CHECK(worst <= 1e-7);
}

TEST_CASE("picard recursion: contraction, agreement with the direct solver, divergence error") {
  BumpSum f0({fixture::bump(0.5)});
  RunConfig cfg = fixture::small_cfg(0.3, 0.01, 0.5);
  const auto ens = sample_ensemble(f0, cfg.sample_spacing, 0.0);
  const auto B = fixture::blob_field(cfg, {0.0, 0.0, 0.5});
  ForwardOptions light;
  light.matrices = false;

  const auto res = run_forward_picard(ens, B, cfg, 25, 1e-12, light);
  REQUIRE(res.history.size() >= 2);
  for (std::size_t i = 1; i < res.history.size(); ++i) {
    if (res.history[i - 1] < 1e-13) break;
    CHECK(res.history[i] / res.history[i - 1] < 0.8);
  }

  const auto direct = run_forward(ens, B, cfg, light);
  double dist = 0.0;
  for (std::size_t i = 0; i < direct.z.size(); ++i)
    dist = std::max(dist, norm(direct.z[i] - res.trajectory.z[i]));
  CHECK(dist <= 1e-8);

  auto diverge = [&] { return run_forward_picard(ens, B, cfg, 1, 1e-14, light); };
  CHECK_THROWS_AS(diverge(), PicardDivergence);
  try {
    (void)run_forward_picard(ens, B, cfg, 2, 1e-14, light);
  } catch (const PicardDivergence& e) {
    CHECK(e.history.size() == 1);
  }
}

TEST_CASE("re-deposition estimate of the L2 norm") {
  // matching the sampling resolution keeps the estimate close to the
  // analytic norm at t = 0
  BumpSum f0({fixture::bump(1.0)});
  const auto fine = sample_ensemble(f0, 0.25, 0.0);
  const double exact = std::sqrt(fine.datum_l2_sq);
  const double at0 = deposit_l2_estimate(fine.z0, fine.weights, 0.25);
  CHECK(std::abs(at0 - exact) <= 0.05 * exact);

  // and survives a unit of transport on a weakly coupled run
  BumpSum weak({fixture::bump(0.05)});
  RunConfig cfg = fixture::small_cfg(1.0, 0.02, 0.5);
  const auto ens = sample_ensemble(weak, cfg.sample_spacing, 0.0);
  const auto traj = run_forward(ens, fixture::zero_field(cfg), cfg, {.matrices = false});
  const double exact_w = std::sqrt(ens.datum_l2_sq);
  const double dT = deposit_l2_estimate(traj, traj.steps, cfg.dep_spacing());
  CHECK(std::abs(dT - exact_w) <= 0.05 * exact_w);
}

TEST_CASE("transported datum reproduces the final slice exactly") {
  BumpSum f0({fixture::bump(0.7)});
  RunConfig cfg = fixture::small_cfg(0.3, 0.01, 0.5);
  const auto ens = sample_ensemble(f0, cfg.sample_spacing, 0.0);
  const auto traj = run_forward(ens, fixture::blob_field(cfg, {0.3, 0, 0}), cfg);
  const TransportedDatum datum(traj);
  for (std::size_t p = 0; p < traj.np(); p += 5) {
    const Vec6& zT = traj.at(traj.steps, p);
    CHECK(datum.value(zT) == traj.ensemble.f0[p]);
    const Vec6 expected = transpose_mul(traj.n_at(traj.steps, p), traj.ensemble.df0[p]);
    CHECK(norm(datum.grad(zT) - expected) == 0.0);
  }
  CHECK(datum.l2_norm_sq() == doctest::Approx(lp_norm(ens, 2.0) * lp_norm(ens, 2.0)).epsilon(1e-12));
}
