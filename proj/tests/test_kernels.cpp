#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <vector>

#include "oracles.hpp"
#include "vpc/kernels.hpp"

using namespace vpc;
using namespace vpc::kernels;

namespace {

struct RandomCloud {
  std::vector<Vec3> pos;
  std::vector<double> w;
  std::vector<Vec3> payload;
};

RandomCloud make_cloud(int n, std::uint64_t seed, bool signed_weights = true) {
  oracle::Rng rng(seed);
  RandomCloud c;
  for (int i = 0; i < n; ++i) {
    c.pos.push_back(rng.vec3(-1.0, 1.0));
    c.w.push_back(signed_weights ? rng.uniform(-1.0, 1.0) : rng.uniform(0.1, 1.0));
    c.payload.push_back(rng.vec3(-1.0, 1.0));
  }
  return c;
}

}  // namespace

TEST_CASE("psi: single source, empty source, two-term hand sum") {
  const double d = 1.7, eps = 0.3;
  SourceCloud one(std::vector<Vec3>{{0, 0, 0}}, std::vector<double>{1.0});
  CHECK(eval_psi(one, {d, 0, 0}, eps) ==
        doctest::Approx(1.0 / std::sqrt(d * d + eps * eps)).epsilon(1e-15));

  SourceCloud empty;
  CHECK(eval_psi(empty, {d, 0, 0}, eps) == 0.0);
  CHECK(norm(eval_E(empty, {d, 0, 0}, eps)) == 0.0);

  SourceCloud two(std::vector<Vec3>{{1, 0, 0}, {-1, 0, 0}}, std::vector<double>{1.0, 1.0});
  CHECK(eval_phi_prime_analytic == eval_phi_prime_analytic);  // silence unused warning path
  CHECK(eval_psi(two, {0, 0, 0}, 0.0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("E: Coulomb value, odd kernel at the source, psi-gradient identity") {
  const double d = 0.9;
  SourceCloud one(std::vector<Vec3>{{0, 0, 0}}, std::vector<double>{1.0});
  const Vec3 e = eval_E(one, {d, 0, 0}, 0.0);
  CHECK(e.x == doctest::Approx(1.0 / (d * d)).epsilon(1e-15));
  CHECK(e.y == 0.0);
  CHECK(e.z == 0.0);

  // at the source position the softened kernel is odd, hence zero
  CHECK(norm(eval_E(one, {0, 0, 0}, 0.5)) == 0.0);

  auto cloud = make_cloud(48, 11);
  SourceCloud src(cloud.pos, cloud.w);
  const double eps = 0.25;
  oracle::Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    const Vec3 x = rng.vec3(-1.5, 1.5);
    const Vec3 ek = eval_E(src, x, eps);
    const Vec3 fd = oracle::fd_grad3([&](const Vec3& p) { return eval_psi(src, p, eps); }, x, 1e-5);
    CHECK(oracle::rel_err(ek, -1.0 * fd) <= 1e-6);
  }
}

TEST_CASE("E jacobian: hand value on axis, FD identity, Plummer trace") {
  const double d = 1.3;
  SourceCloud one(std::vector<Vec3>{{0, 0, 0}}, std::vector<double>{1.0});
  const Mat3 J = eval_E_jacobian(one, {d, 0, 0}, 0.0);
  CHECK(J(0, 0) == doctest::Approx(-2.0 / (d * d * d)).epsilon(1e-14));
  CHECK(J(1, 1) == doctest::Approx(1.0 / (d * d * d)).epsilon(1e-14));
  CHECK(J(2, 2) == doctest::Approx(1.0 / (d * d * d)).epsilon(1e-14));
  CHECK(std::abs(J(0, 1)) == 0.0);

  SourceCloud empty;
  const Mat3 Z = eval_E_jacobian(empty, {d, 0, 0}, 0.1);
  for (double v : Z.a) CHECK(v == 0.0);

  auto cloud = make_cloud(40, 23);
  SourceCloud src(cloud.pos, cloud.w);
  const double eps = 0.3;
  oracle::Rng rng(29);
  for (int k = 0; k < 100; ++k) {
    const Vec3 x = rng.vec3(-1.4, 1.4);
    const Mat3 Jk = eval_E_jacobian(src, x, eps);
    const Mat3 fd =
        oracle::fd_jacobian3([&](const Vec3& p) { return eval_E(src, p, eps); }, x, 2e-5);
    double num = 0, den = 0;
    for (int i = 0; i < 9; ++i) {
      num += std::abs(Jk.a[i] - fd.a[i]);
      den += std::abs(Jk.a[i]);
    }
    CHECK(num <= 1e-5 * std::max(den, 1e-9));
    // divergence of the softened field: 3 eps^2 (r^2+eps^2)^(-5/2) per unit weight
    double expect = 0.0;
    for (std::size_t q = 0; q < cloud.pos.size(); ++q) {
      const double r2 = norm2(x - cloud.pos[q]) + eps * eps;
      expect += cloud.w[q] * 3.0 * eps * eps * std::pow(r2, -2.5);
    }
    CHECK(Jk.trace() == doctest::Approx(expect).epsilon(1e-10));
  }

  // far from every source the trace decays to zero with eps -> 0
  const Mat3 Jfar = eval_E_jacobian(src, {40, 0, 0}, 1e-4);
  CHECK(std::abs(Jfar.trace()) < 1e-12);
}

TEST_CASE("phi: zero payload, one-term hand sum, sign flip, length mismatch") {
  SourceCloud zeroed(std::vector<Vec3>{{0, 0, 0}, {0.3, 0, 0}}, std::vector<double>{1.0, 2.0},
                     std::vector<Vec3>{{0, 0, 0}, {0, 0, 0}});
  CHECK(eval_phi(zeroed, {1, 1, 0}, 0.0) == 0.0);

  const double d = 2.0;
  SourceCloud one(std::vector<Vec3>{{0, 0, 0}}, std::vector<double>{1.0},
                  std::vector<Vec3>{{1, 0, 0}});
  CHECK(eval_phi(one, {d, 0, 0}, 0.0) == doctest::Approx(1.0 / (d * d)).epsilon(1e-15));

  auto cloud = make_cloud(16, 31);
  SourceCloud a(cloud.pos, cloud.w, cloud.payload);
  std::vector<Vec3> flipped = cloud.payload;
  for (auto& g : flipped) g = -1.0 * g;
  SourceCloud b(cloud.pos, cloud.w, flipped);
  const Vec3 x{2.0, -1.0, 0.5};
  CHECK(eval_phi(a, x, 0.1) == doctest::Approx(-eval_phi(b, x, 0.1)).epsilon(1e-14));

  auto mismatched = [] {
    return SourceCloud(std::vector<Vec3>{{0, 0, 0}}, std::vector<double>{1.0, 2.0});
  };
  CHECK_THROWS_AS(mismatched(), std::invalid_argument);
  SourceCloud no_payload(cloud.pos, cloud.w);
  auto phi_no_payload = [&] { return eval_phi(no_payload, x, 0.1); };
  CHECK_THROWS_AS(phi_no_payload(), std::invalid_argument);
}

TEST_CASE("phi gradient: FD identity and hand value on axis") {
  auto cloud = make_cloud(32, 41);
  SourceCloud src(cloud.pos, cloud.w, cloud.payload);
  const double eps = 0.35;
  oracle::Rng rng(43);
  for (int k = 0; k < 100; ++k) {
    const Vec3 x = rng.vec3(-1.4, 1.4);
    const Vec3 g = eval_phi_grad(src, x, eps);
    const Vec3 fd =
        oracle::fd_grad3([&](const Vec3& p) { return eval_phi(src, p, eps); }, x, 2e-5);
    CHECK(oracle::rel_err(g, fd) <= 1e-5);
  }

  const double d = 1.1;
  SourceCloud one(std::vector<Vec3>{{0, 0, 0}}, std::vector<double>{1.0},
                  std::vector<Vec3>{{0.4, -0.2, 0.9}});
  const Vec3 g = eval_phi_grad(one, {d, 0, 0}, 0.0);
  const double inv3 = 1.0 / (d * d * d);
  CHECK(g.x == doctest::Approx(-2.0 * 0.4 * inv3).epsilon(1e-14));
  CHECK(g.y == doctest::Approx(-0.2 * inv3).epsilon(1e-14));
  CHECK(g.z == doctest::Approx(0.9 * inv3).epsilon(1e-14));
}

TEST_CASE("vector Newton potential: empty, one-term, linear in weights") {
  SourceCloud empty;
  CHECK(norm(eval_vector_newton(empty, {1, 0, 0}, 0.0)) == 0.0);

  const double d = 2.5;
  SourceCloud one(std::vector<Vec3>{{0, 0, 0}}, std::vector<double>{1.0},
                  std::vector<Vec3>{{0, 0, 1}});
  const Vec3 v = eval_vector_newton(one, {d, 0, 0}, 0.0);
  CHECK(v.x == 0.0);
  CHECK(v.y == 0.0);
  CHECK(v.z == doctest::Approx(1.0 / d).epsilon(1e-15));

  auto cloud = make_cloud(20, 53);
  SourceCloud a(cloud.pos, cloud.w, cloud.payload);
  std::vector<Vec3> doubled = cloud.payload;
  for (auto& g : doubled) g = 2.0 * g;
  SourceCloud b(cloud.pos, cloud.w, doubled);
  const Vec3 x{0.3, 2.2, -0.7};
  CHECK(oracle::rel_err(eval_vector_newton(b, x, 0.2), 2.0 * eval_vector_newton(a, x, 0.2)) <=
        1e-14);
}

TEST_CASE("far-field decay bound with factor-2 slack") {
  auto cloud = make_cloud(64, 61);
  SourceCloud src(cloud.pos, cloud.w);
  double wsum = 0.0;
  Vec3 centroid;
  for (std::size_t q = 0; q < cloud.w.size(); ++q) {
    wsum += std::abs(cloud.w[q]);
    centroid += (1.0 / cloud.w.size()) * cloud.pos[q];
  }
  double rad = 0.0;
  for (const auto& p : cloud.pos) rad = std::max(rad, norm(p - centroid));
  oracle::Rng rng(67);
  for (int k = 0; k < 20; ++k) {
    Vec3 x = rng.vec3(-1.0, 1.0);
    x *= (8.0 + k) / std::max(norm(x), 1e-9);
    const double hull_dist = norm(x - centroid) - rad;
    REQUIRE(hull_dist > 0.0);
    CHECK(std::abs(eval_psi(src, x, 0.1)) <= 2.0 * wsum / hull_dist);
  }
}

TEST_CASE("kernel sums are bit-identical under source permutations") {
  auto cloud = make_cloud(257, 71);
  SourceCloud base(cloud.pos, cloud.w, cloud.payload);

  oracle::Rng rng(73);
  std::vector<std::size_t> perm(cloud.pos.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.next() % i]);

  RandomCloud shuffled;
  for (std::size_t i : perm) {
    shuffled.pos.push_back(cloud.pos[i]);
    shuffled.w.push_back(cloud.w[i]);
    shuffled.payload.push_back(cloud.payload[i]);
  }
  SourceCloud permuted(shuffled.pos, shuffled.w, shuffled.payload);

  const double eps = 0.17;
  oracle::Rng rx(79);
  for (int k = 0; k < 10; ++k) {
    const Vec3 x = rx.vec3(-2.0, 2.0);
    CHECK(eval_psi(base, x, eps) == eval_psi(permuted, x, eps));
    const Vec3 e1 = eval_E(base, x, eps), e2 = eval_E(permuted, x, eps);
    CHECK(e1.x == e2.x);
    CHECK(e1.y == e2.y);
    CHECK(e1.z == e2.z);
    const auto b1 = eval_backward_sample(base, x, eps);
    const auto b2 = eval_backward_sample(permuted, x, eps);
    CHECK(b1.phi == b2.phi);
    for (int i = 0; i < 9; ++i) CHECK(b1.e_jac.a[i] == b2.e_jac.a[i]);
  }

  // self-exclusion follows the permutation through sorted_index
  const std::size_t orig = 13;
  std::size_t in_shuffled = 0;
  for (std::size_t i = 0; i < perm.size(); ++i)
    if (perm[i] == orig) in_shuffled = i;
  const Vec3 xp = cloud.pos[orig];
  CHECK(eval_psi(base, xp, eps, base.sorted_index(orig)) ==
        eval_psi(permuted, xp, eps, permuted.sorted_index(in_shuffled)));
}

TEST_CASE("self-exclusion equals summation over the remaining sources") {
  auto cloud = make_cloud(33, 83);
  SourceCloud all(cloud.pos, cloud.w, cloud.payload);
  const std::size_t p = 17;
  RandomCloud rest;
  for (std::size_t i = 0; i < cloud.pos.size(); ++i) {
    if (i == p) continue;
    rest.pos.push_back(cloud.pos[i]);
    rest.w.push_back(cloud.w[i]);
    rest.payload.push_back(cloud.payload[i]);
  }
  SourceCloud others(rest.pos, rest.w, rest.payload);
  const Vec3 x = cloud.pos[p];
  const double eps = 0.21;
  const std::size_t skip = all.sorted_index(p);
  CHECK(eval_psi(all, x, eps, skip) == doctest::Approx(eval_psi(others, x, eps)).epsilon(1e-14));
  CHECK(oracle::rel_err(eval_E(all, x, eps, skip), eval_E(others, x, eps)) <= 1e-14);
  const auto s1 = eval_backward_sample(all, x, eps, skip);
  const auto s2 = eval_backward_sample(others, x, eps);
  CHECK(s1.phi == doctest::Approx(s2.phi).epsilon(1e-13));
  CHECK(oracle::rel_err(s1.phi_grad, s2.phi_grad) <= 1e-13);

  // with eps = 0 the skipped self-term would be singular; exclusion keeps sums finite
  const auto s0 = eval_backward_sample(all, x, 0.0, skip);
  CHECK(std::isfinite(s0.phi));
  CHECK(std::isfinite(s0.e_jac.trace()));
}

TEST_CASE("scalar and avx2 backends agree") {
  if (!avx2_available()) return;
  auto cloud = make_cloud(1531, 89);
  oracle::Rng rng(97);
  for (int k = 0; k < 12; ++k) {
    const Vec3 x = rng.vec3(-1.6, 1.6);
    const double eps = 0.15;
    const std::size_t skip = (k % 3 == 0) ? std::size_t(k * 41) : kNoSkip;

    set_backend(Backend::scalar);
    SourceCloud src_s(cloud.pos, cloud.w, cloud.payload);
    const double psi_s = eval_psi(src_s, x, eps, skip);
    const Vec3 e_s = eval_E(src_s, x, eps, skip);
    const auto bw_s = eval_backward_sample(src_s, x, eps, skip);
    const Vec3 vn_s = eval_vector_newton(src_s, x, eps, skip);

    set_backend(Backend::avx2);
    const double psi_a = eval_psi(src_s, x, eps, skip);
    const Vec3 e_a = eval_E(src_s, x, eps, skip);
    const auto bw_a = eval_backward_sample(src_s, x, eps, skip);
    const Vec3 vn_a = eval_vector_newton(src_s, x, eps, skip);
    set_backend(Backend::auto_detect);

    CHECK(oracle::rel_err(psi_s, psi_a) <= 1e-12);
    CHECK(norm(e_s - e_a) <= 1e-12 * std::max(1.0, norm(e_s)));
    CHECK(std::abs(bw_s.phi - bw_a.phi) <= 1e-12 * std::max(1.0, std::abs(bw_s.phi)));
    CHECK(norm(bw_s.phi_grad - bw_a.phi_grad) <= 1e-11 * std::max(1.0, norm(bw_s.phi_grad)));
    double jn = 0;
    for (int i = 0; i < 9; ++i) jn = std::max(jn, std::abs(bw_s.e_jac.a[i]));
    for (int i = 0; i < 9; ++i)
      CHECK(std::abs(bw_s.e_jac.a[i] - bw_a.e_jac.a[i]) <= 1e-11 * std::max(1.0, jn));
    CHECK(norm(vn_s - vn_a) <= 1e-12 * std::max(1.0, norm(vn_s)));
  }
}

TEST_CASE("phi-prime quadrature: degenerate data, a = f cancellation, FD identity") {
  CompactBump ba;
  ba.center = {{-0.4, 0, 0}, {0.1, 0, 0}};
  ba.r_x = ba.r_v = 0.7;
  ba.amplitude = 1.0;
  ba.exponent = 3;
  CompactBump bf = ba;
  bf.center = {{0.4, 0.1, 0}, {0, -0.1, 0}};
  BumpSum a({ba}), f({bf});

  TensorGrid6 grid;
  for (int i = 0; i < 3; ++i) {
    grid.lo[i] = -1.2;
    grid.hi[i] = 1.2;
    grid.lo[i + 3] = -0.9;
    grid.hi[i + 3] = 0.9;
    grid.n[i] = 12;
    grid.n[i + 3] = 12;
  }

  // zero datum has no v-dependence at all
  BumpSum none;
  CHECK(norm(eval_phi_prime_analytic(none, f, {2, 0, 0}, grid, 0.0)) == 0.0);

  // a = f makes the integrand vanish pointwise
  CHECK(norm(eval_phi_prime_analytic(f, f, {2, 0, 0}, grid, 0.0)) == 0.0);
  CHECK(eval_phi_direct_quadrature(f, f, {2.0, 0.3, 0.0}, grid, 0.0) != 0.0);

  // identity d/dx Phi = Phi' against an FD of the direct quadrature
  for (const Vec3& x : {Vec3{1.9, 0.2, -0.1}, Vec3{0.1, -1.8, 0.4}}) {
    const Vec3 pp = eval_phi_prime_analytic(a, f, x, grid, 0.0);
    Vec3 fd;
    const double h = 1e-3;
    for (int i = 0; i < 3; ++i) {
      Vec3 xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      fd[i] = (eval_phi_direct_quadrature(a, f, xp, grid, 0.0) -
               eval_phi_direct_quadrature(a, f, xm, grid, 0.0)) /
              (2 * h);
    }
    CHECK(norm(pp - fd) <= 1e-3);
  }

  // grid that misses the support is rejected
  TensorGrid6 small = grid;
  small.hi[0] = 0.0;
  auto uncovered = [&] { return eval_phi_prime_analytic(a, f, {2, 0, 0}, small, 0.0); };
  CHECK_THROWS_AS(uncovered(), std::invalid_argument);
}
