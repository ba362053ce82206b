#include <cmath>

#include "kernels_backend.hpp"

// Reference backend: plain scalar loops in canonical source order. This is
// the semantics the SIMD variants are equivalence-tested against.

namespace vpc::kernels::detail {

namespace {

struct PsiAcc {
  double s = 0.0;
  PsiAcc& operator+=(const PsiAcc& o) { s += o.s; return *this; }
};

struct EAcc {
  double ex = 0.0, ey = 0.0, ez = 0.0;
  EAcc& operator+=(const EAcc& o) { ex += o.ex; ey += o.ey; ez += o.ez; return *this; }
};

struct EJAcc {
  double ex = 0, ey = 0, ez = 0;
  double jxx = 0, jyy = 0, jzz = 0, jxy = 0, jxz = 0, jyz = 0;
  EJAcc& operator+=(const EJAcc& o) {
    ex += o.ex; ey += o.ey; ez += o.ez;
    jxx += o.jxx; jyy += o.jyy; jzz += o.jzz;
    jxy += o.jxy; jxz += o.jxz; jyz += o.jyz;
    return *this;
  }
};

struct PhiAcc {
  double phi = 0, gx = 0, gy = 0, gz = 0;
  PhiAcc& operator+=(const PhiAcc& o) {
    phi += o.phi; gx += o.gx; gy += o.gy; gz += o.gz;
    return *this;
  }
};

struct BwdAcc {
  PhiAcc p;
  EJAcc ej;
  BwdAcc& operator+=(const BwdAcc& o) { p += o.p; ej += o.ej; return *this; }
};

struct VnAcc {
  double vx = 0, vy = 0, vz = 0;
  VnAcc& operator+=(const VnAcc& o) { vx += o.vx; vy += o.vy; vz += o.vz; return *this; }
};

template <class Acc, class Body>
Acc run_blocks(const CloudView& c, std::size_t skip, Body body) {
  std::vector<Acc> parts;
  parts.reserve((c.n + kBlock - 1) / kBlock);
  for (std::size_t b = 0; b < c.n; b += kBlock) {
    const std::size_t e = std::min(c.n, b + kBlock);
    Acc acc;
    for (std::size_t q = b; q < e; ++q) {
      if (q == skip) continue;
      body(acc, q);
    }
    parts.push_back(acc);
  }
  return pairwise_combine(parts);
}

double psi_impl(const CloudView& c, const Vec3& xt, double eps, std::size_t skip) {
  const double eps2 = eps * eps;
  auto acc = run_blocks<PsiAcc>(c, skip, [&](PsiAcc& a, std::size_t q) {
    const double dx = xt.x - c.x[q], dy = xt.y - c.y[q], dz = xt.z - c.z[q];
    const double r2 = dx * dx + dy * dy + dz * dz + eps2;
    a.s += c.w[q] / std::sqrt(r2);
  });
  return acc.s;
}

Vec3 efield_impl(const CloudView& c, const Vec3& xt, double eps, std::size_t skip) {
  const double eps2 = eps * eps;
  auto acc = run_blocks<EAcc>(c, skip, [&](EAcc& a, std::size_t q) {
    const double dx = xt.x - c.x[q], dy = xt.y - c.y[q], dz = xt.z - c.z[q];
    const double r2 = dx * dx + dy * dy + dz * dz + eps2;
    const double inv = 1.0 / std::sqrt(r2);
    const double winv3 = c.w[q] * inv * inv * inv;
    a.ex += winv3 * dx;
    a.ey += winv3 * dy;
    a.ez += winv3 * dz;
  });
  return {acc.ex, acc.ey, acc.ez};
}

EJSample efield_jac_impl(const CloudView& c, const Vec3& xt, double eps, std::size_t skip) {
  const double eps2 = eps * eps;
  auto acc = run_blocks<EJAcc>(c, skip, [&](EJAcc& a, std::size_t q) {
    const double dx = xt.x - c.x[q], dy = xt.y - c.y[q], dz = xt.z - c.z[q];
    const double r2 = dx * dx + dy * dy + dz * dz + eps2;
    const double inv = 1.0 / std::sqrt(r2);
    const double inv2 = inv * inv;
    const double winv3 = c.w[q] * inv * inv2;
    const double c5 = 3.0 * winv3 * inv2;
    a.ex += winv3 * dx;
    a.ey += winv3 * dy;
    a.ez += winv3 * dz;
    a.jxx += winv3 - c5 * dx * dx;
    a.jyy += winv3 - c5 * dy * dy;
    a.jzz += winv3 - c5 * dz * dz;
    a.jxy -= c5 * dx * dy;
    a.jxz -= c5 * dx * dz;
    a.jyz -= c5 * dy * dz;
  });
  EJSample out;
  out.E = {acc.ex, acc.ey, acc.ez};
  out.J(0, 0) = acc.jxx; out.J(1, 1) = acc.jyy; out.J(2, 2) = acc.jzz;
  out.J(0, 1) = out.J(1, 0) = acc.jxy;
  out.J(0, 2) = out.J(2, 0) = acc.jxz;
  out.J(1, 2) = out.J(2, 1) = acc.jyz;
  return out;
}

PhiSample phi_grad_impl(const CloudView& c, const Vec3& xt, double eps, std::size_t skip) {
  const double eps2 = eps * eps;
  auto acc = run_blocks<PhiAcc>(c, skip, [&](PhiAcc& a, std::size_t q) {
    const double dx = xt.x - c.x[q], dy = xt.y - c.y[q], dz = xt.z - c.z[q];
    const double r2 = dx * dx + dy * dy + dz * dz + eps2;
    const double inv = 1.0 / std::sqrt(r2);
    const double inv2 = inv * inv;
    const double winv3 = c.w[q] * inv * inv2;
    const double s = dx * c.gx[q] + dy * c.gy[q] + dz * c.gz[q];
    const double c5s = 3.0 * winv3 * inv2 * s;
    a.phi += winv3 * s;
    a.gx += winv3 * c.gx[q] - c5s * dx;
    a.gy += winv3 * c.gy[q] - c5s * dy;
    a.gz += winv3 * c.gz[q] - c5s * dz;
  });
  return {acc.phi, {acc.gx, acc.gy, acc.gz}};
}

BackwardSample backward_impl(const CloudView& c, const Vec3& xt, double eps, std::size_t skip) {
  const double eps2 = eps * eps;
  auto acc = run_blocks<BwdAcc>(c, skip, [&](BwdAcc& a, std::size_t q) {
    const double dx = xt.x - c.x[q], dy = xt.y - c.y[q], dz = xt.z - c.z[q];
    const double r2 = dx * dx + dy * dy + dz * dz + eps2;
    const double inv = 1.0 / std::sqrt(r2);
    const double inv2 = inv * inv;
    const double winv3 = c.w[q] * inv * inv2;
    const double c5 = 3.0 * winv3 * inv2;
    const double s = dx * c.gx[q] + dy * c.gy[q] + dz * c.gz[q];
    const double c5s = c5 * s;
    a.p.phi += winv3 * s;
    a.p.gx += winv3 * c.gx[q] - c5s * dx;
    a.p.gy += winv3 * c.gy[q] - c5s * dy;
    a.p.gz += winv3 * c.gz[q] - c5s * dz;
    a.ej.ex += winv3 * dx;
    a.ej.ey += winv3 * dy;
    a.ej.ez += winv3 * dz;
    a.ej.jxx += winv3 - c5 * dx * dx;
    a.ej.jyy += winv3 - c5 * dy * dy;
    a.ej.jzz += winv3 - c5 * dz * dz;
    a.ej.jxy -= c5 * dx * dy;
    a.ej.jxz -= c5 * dx * dz;
    a.ej.jyz -= c5 * dy * dz;
  });
  BackwardSample out;
  out.phi = acc.p.phi;
  out.phi_grad = {acc.p.gx, acc.p.gy, acc.p.gz};
  out.e_jac(0, 0) = acc.ej.jxx; out.e_jac(1, 1) = acc.ej.jyy; out.e_jac(2, 2) = acc.ej.jzz;
  out.e_jac(0, 1) = out.e_jac(1, 0) = acc.ej.jxy;
  out.e_jac(0, 2) = out.e_jac(2, 0) = acc.ej.jxz;
  out.e_jac(1, 2) = out.e_jac(2, 1) = acc.ej.jyz;
  return out;
}

Vec3 vnewton_impl(const CloudView& c, const Vec3& xt, double eps, std::size_t skip) {
  const double eps2 = eps * eps;
  auto acc = run_blocks<VnAcc>(c, skip, [&](VnAcc& a, std::size_t q) {
    const double dx = xt.x - c.x[q], dy = xt.y - c.y[q], dz = xt.z - c.z[q];
    const double r2 = dx * dx + dy * dy + dz * dz + eps2;
    const double inv = 1.0 / std::sqrt(r2);
    a.vx += inv * c.gx[q];
    a.vy += inv * c.gy[q];
    a.vz += inv * c.gz[q];
  });
  return {acc.vx, acc.vy, acc.vz};
}

}  // namespace

const BackendOps& scalar_ops() {
  static const BackendOps ops{psi_impl,      efield_impl, efield_jac_impl, phi_grad_impl,
                              backward_impl, vnewton_impl, "scalar"};
  return ops;
}

}  // namespace vpc::kernels::detail
