#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "vpc/charflow.hpp"

using namespace vpc;

namespace {

/// Smooth bounded analytic fields with hand-coded Jacobians.
FieldProviders analytic_fields(double ea, double ba) {
  FieldProviders fp;
  fp.electric = [ea](double t, const Vec3& x) {
    return Vec3{ea * std::sin(x.y + 0.3 * t), ea * std::sin(x.z), ea * std::sin(x.x)};
  };
  fp.electric_jacobian = [ea](double t, const Vec3& x) {
    Mat3 J;
    J(0, 1) = ea * std::cos(x.y + 0.3 * t);
    J(1, 2) = ea * std::cos(x.z);
    J(2, 0) = ea * std::cos(x.x);
    return J;
  };
  fp.magnetic = [ba](double, const Vec3& x) {
    return Vec3{ba * std::cos(x.z), ba * std::cos(x.x), ba * std::cos(x.y)};
  };
  fp.magnetic_jacobian = [ba](double, const Vec3& x) {
    Mat3 J;
    J(0, 2) = -ba * std::sin(x.z);
    J(1, 0) = -ba * std::sin(x.x);
    J(2, 1) = -ba * std::sin(x.y);
    return J;
  };
  return fp;
}

FieldProviders uniform_b(double b) {
  FieldProviders fp = FieldProviders::free_streaming();
  fp.magnetic = [b](double, const Vec3&) { return Vec3{0, 0, b}; };
  return fp;
}

}  // namespace

TEST_CASE("characteristic right-hand side") {
  const auto free = FieldProviders::free_streaming();
  const Vec6 z{{0.3, -0.2, 1.0}, {0.5, -1.2, 0.25}};
  const Vec6 dz = char_rhs(0.7, z, free);
  CHECK(norm(dz.x - z.v) == 0.0);
  CHECK(norm(dz.v) == 0.0);

  const auto ub = uniform_b(2.0);
  const Vec6 zb{{0, 0, 0}, {1, 0, 0}};
  const Vec6 dzb = char_rhs(0.0, zb, ub);
  CHECK(dzb.v.x == 0.0);
  CHECK(dzb.v.y == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(dzb.v.z == 0.0);

  // at rest the magnetic force vanishes
  const auto fields = analytic_fields(0.4, 1.1);
  const Vec6 rest{{0.2, 0.1, -0.5}, {}};
  const Vec6 dr = char_rhs(0.3, rest, fields);
  CHECK(norm(dr.v - fields.electric(0.3, rest.x)) == 0.0);
}

TEST_CASE("variational matrix: free-streaming block, zero trace, uniform-B determinant") {
  const auto free = FieldProviders::free_streaming();
  const Vec6 z{{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}};
  const Mat6 A = variational_matrix(0.0, z, free);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) CHECK(A(r, c) == ((c == r + 3) ? 1.0 : 0.0));

  // free streaming: M(t) = [[I, tI], [0, I]] exactly (nilpotent generator)
  const auto path = integrate_flow(z, 0.0, 0.7, 0.07, free);
  const Mat6& M = path.back().M;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) {
      const double expect = (r == c) ? 1.0 : (c == r + 3 ? 0.7 : 0.0);
      CHECK(M(r, c) == doctest::Approx(expect).epsilon(1e-14));
    }

  oracle::Rng rng(5);
  const auto fields = analytic_fields(0.8, 0.9);
  for (int k = 0; k < 20; ++k) {
    const Vec6 zr = rng.vec6(-1.0, 1.0);
    const Mat6 Ar = variational_matrix(rng.uniform(0, 1), zr, fields);
    double tr = 0.0;
    for (int i = 0; i < 6; ++i) tr += Ar(i, i);
    CHECK(tr == 0.0);
  }

  const auto ub = uniform_b(1.3);
  const auto pb = integrate_flow({{0, 0, 0}, {1.0, 0.3, -0.2}}, 0.0, 1.0, 1e-3, ub);
  CHECK(std::abs(det(pb.back().M) - 1.0) <= 1e-12);
}

TEST_CASE("free streaming and Larmor rotation") {
  const auto free = FieldProviders::free_streaming();
  const Vec6 z0{{0.5, -1.0, 2.0}, {0.3, 0.7, -0.4}};
  const auto path = integrate_flow(z0, 0.0, 2.0, 0.1, free, {.matrices = false});
  CHECK(norm(path.back().z.x - (z0.x + 2.0 * z0.v)) <= 1e-14);
  CHECK(norm(path.back().z.v - z0.v) == 0.0);

  // velocity modulus conserved, gyro period recovered
  const double b = 1.7;
  const auto ub = uniform_b(b);
  const Vec6 zb{{0, 0, 0}, {0.9, 0, 0.2}};
  const double T = 1.0;
  const auto pb = integrate_flow(zb, 0.0, T, 1e-3, ub, {.matrices = false});
  double worst = 0.0;
  const double v0 = norm(zb.v);
  for (const auto& s : pb) worst = std::max(worst, std::abs(norm(s.z.v) - v0));
  CHECK(worst <= 1e-8 * T);

  // after one gyro period the perpendicular velocity returns
  const double period = 2.0 * M_PI / b;
  const auto pp = integrate_flow(zb, 0.0, period, period / 4000.0, ub, {.matrices = false});
  CHECK(norm(pp.back().z.v - zb.v) <= 1e-9);
}

TEST_CASE("reversibility and flow composition for smooth fields") {
  const auto fields = analytic_fields(0.5, 0.8);
  const Vec6 z0{{0.2, -0.1, 0.4}, {0.6, 0.1, -0.3}};
  const auto fwd = integrate_flow(z0, 0.0, 1.0, 1e-3, fields, {.matrices = false});
  const auto back = integrate_flow(fwd.back().z, 1.0, 0.0, 1e-3, fields, {.matrices = false});
  CHECK(norm(back.back().z - z0) <= 1e-8);

  // Z(t, s, Z(s, t, z)) = z for interior s, t
  const auto seg = integrate_flow(z0, 0.3, 0.9, 1e-3, fields, {.matrices = false});
  const auto ret = integrate_flow(seg.back().z, 0.9, 0.3, 1e-3, fields, {.matrices = false});
  CHECK(norm(ret.back().z - z0) <= 1e-7);
}

TEST_CASE("measure preservation and inverse Jacobian for smooth fields") {
  const auto fields = analytic_fields(0.6, 0.7);
  const Vec6 z0{{0.1, 0.3, -0.2}, {0.4, -0.5, 0.2}};
  const auto path = integrate_flow(z0, 0.0, 1.0, 1e-2, fields);
  for (const auto& s : {path[path.size() / 2], path.back()}) {
    CHECK(std::abs(det(s.M) - 1.0) <= 1e-6);
    const Mat6 I6 = s.M * s.N;
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c)
        CHECK(std::abs(I6(r, c) - (r == c ? 1.0 : 0.0)) <= 1e-6);
  }
}

TEST_CASE("flow integration rejects bad arguments and non-finite states") {
  const auto free = FieldProviders::free_streaming();
  CHECK_THROWS_AS(integrate_flow({}, 0.0, 1.0, -0.1, free), std::invalid_argument);

  FieldProviders bad = free;
  bad.electric = [](double t, const Vec3&) {
    return t > 0.5 ? Vec3{std::nan(""), 0, 0} : Vec3{};
  };
  bad.electric_jacobian = [](double, const Vec3&) { return Mat3{}; };
  CHECK_THROWS_AS(integrate_flow({}, 0.0, 1.0, 0.1, bad), std::runtime_error);
}

TEST_CASE("support bound zeta") {
  CHECK(support_bound_zeta(1.4, 0.0, 0.0) == doctest::Approx(1.4).epsilon(1e-15));
  CHECK(support_bound_zeta(1.0, 1.0, 0.0) == doctest::Approx(7.3890560989306495).epsilon(1e-12));
  CHECK(support_bound_zeta(1.0, 1.0, 2.0) > support_bound_zeta(1.0, 1.0, 0.0));
  CHECK(support_bound_zeta(1.0, 2.0, 1.0) > support_bound_zeta(1.0, 1.0, 1.0));
  CHECK(support_bound_zeta(2.0, 1.0, 1.0) > support_bound_zeta(1.0, 1.0, 1.0));
}
