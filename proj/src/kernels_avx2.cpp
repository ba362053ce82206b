#if defined(__x86_64__)

#include <immintrin.h>

#include <cmath>

#include "kernels_backend.hpp"

// AVX2/FMA backend: 4-wide double lanes over the padded SoA cloud. Per block,
// each lane keeps its own accumulator; lanes are merged (l0+l2)+(l1+l3) and
// block partials combined pairwise, so results are deterministic and
// permutation-invariant for this backend (the cloud order is canonical).
// Self-exclusion masks the skipped lane's weight and clamps its radius, which
// keeps the arithmetic finite even at zero separation.

namespace vpc::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(s, s);
  return _mm_cvtsd_f64(_mm_add_sd(s, sh));
}

const __m256i kIota = _mm256_setr_epi64x(0, 1, 2, 3);

struct MaskCtx {
  __m256i skip;
};

template <bool Masked>
inline void lane_mask(std::size_t q, const MaskCtx& m, __m256d& w, __m256d& r2) {
  if constexpr (Masked) {
    const __m256i idx = _mm256_add_epi64(_mm256_set1_epi64x((long long)q), kIota);
    const __m256d hit = _mm256_castsi256_pd(_mm256_cmpeq_epi64(idx, m.skip));
    w = _mm256_andnot_pd(hit, w);
    r2 = _mm256_blendv_pd(r2, _mm256_set1_pd(1.0), hit);
  }
}

#define VPC_CLOUD_LOADS                                                  \
  const __m256d sx = _mm256_loadu_pd(c.x + q);                           \
  const __m256d sy = _mm256_loadu_pd(c.y + q);                           \
  const __m256d sz = _mm256_loadu_pd(c.z + q);                           \
  const __m256d dx = _mm256_sub_pd(xt, sx);                              \
  const __m256d dy = _mm256_sub_pd(yt, sy);                              \
  const __m256d dz = _mm256_sub_pd(zt, sz);                              \
  __m256d r2 = _mm256_fmadd_pd(dx, dx, eps2v);                           \
  r2 = _mm256_fmadd_pd(dy, dy, r2);                                      \
  r2 = _mm256_fmadd_pd(dz, dz, r2)

template <bool Masked>
double psi_block(const CloudView& c, std::size_t b, std::size_t e, const Vec3& x, double eps2,
                 const MaskCtx& m) {
  const __m256d xt = _mm256_set1_pd(x.x), yt = _mm256_set1_pd(x.y), zt = _mm256_set1_pd(x.z);
  const __m256d eps2v = _mm256_set1_pd(eps2);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t q = b; q < e; q += 4) {
    VPC_CLOUD_LOADS;
    __m256d w = _mm256_loadu_pd(c.w + q);
    lane_mask<Masked>(q, m, w, r2);
    const __m256d inv = _mm256_div_pd(one, _mm256_sqrt_pd(r2));
    acc = _mm256_fmadd_pd(w, inv, acc);
  }
  return hsum(acc);
}

struct EAccT {
  double ex = 0, ey = 0, ez = 0;
  EAccT& operator+=(const EAccT& o) { ex += o.ex; ey += o.ey; ez += o.ez; return *this; }
};

struct EJAccT {
  double ex = 0, ey = 0, ez = 0, jxx = 0, jyy = 0, jzz = 0, jxy = 0, jxz = 0, jyz = 0;
  EJAccT& operator+=(const EJAccT& o) {
    ex += o.ex; ey += o.ey; ez += o.ez;
    jxx += o.jxx; jyy += o.jyy; jzz += o.jzz;
    jxy += o.jxy; jxz += o.jxz; jyz += o.jyz;
    return *this;
  }
};

struct PhiAccT {
  double phi = 0, gx = 0, gy = 0, gz = 0;
  PhiAccT& operator+=(const PhiAccT& o) {
    phi += o.phi; gx += o.gx; gy += o.gy; gz += o.gz;
    return *this;
  }
};

struct BwdAccT {
  PhiAccT p;
  EJAccT ej;
  BwdAccT& operator+=(const BwdAccT& o) { p += o.p; ej += o.ej; return *this; }
};

struct VnAccT {
  double vx = 0, vy = 0, vz = 0;
  VnAccT& operator+=(const VnAccT& o) { vx += o.vx; vy += o.vy; vz += o.vz; return *this; }
};

template <bool Masked>
EAccT efield_block_impl(const CloudView& c, std::size_t b, std::size_t e, const Vec3& x,
                        double eps2, const MaskCtx& m) {
  const __m256d xt = _mm256_set1_pd(x.x), yt = _mm256_set1_pd(x.y), zt = _mm256_set1_pd(x.z);
  const __m256d eps2v = _mm256_set1_pd(eps2);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d ax = _mm256_setzero_pd(), ay = _mm256_setzero_pd(), az = _mm256_setzero_pd();
  for (std::size_t q = b; q < e; q += 4) {
    VPC_CLOUD_LOADS;
    __m256d w = _mm256_loadu_pd(c.w + q);
    lane_mask<Masked>(q, m, w, r2);
    const __m256d inv = _mm256_div_pd(one, _mm256_sqrt_pd(r2));
    const __m256d inv2 = _mm256_mul_pd(inv, inv);
    const __m256d winv3 = _mm256_mul_pd(w, _mm256_mul_pd(inv, inv2));
    ax = _mm256_fmadd_pd(winv3, dx, ax);
    ay = _mm256_fmadd_pd(winv3, dy, ay);
    az = _mm256_fmadd_pd(winv3, dz, az);
  }
  return {hsum(ax), hsum(ay), hsum(az)};
}

template <bool Masked>
EJAccT efield_jac_block(const CloudView& c, std::size_t b, std::size_t e, const Vec3& x,
                        double eps2, const MaskCtx& m) {
  const __m256d xt = _mm256_set1_pd(x.x), yt = _mm256_set1_pd(x.y), zt = _mm256_set1_pd(x.z);
  const __m256d eps2v = _mm256_set1_pd(eps2);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d three = _mm256_set1_pd(3.0);
  __m256d ax = _mm256_setzero_pd(), ay = _mm256_setzero_pd(), az = _mm256_setzero_pd();
  __m256d axx = _mm256_setzero_pd(), ayy = _mm256_setzero_pd(), azz = _mm256_setzero_pd();
  __m256d axy = _mm256_setzero_pd(), axz = _mm256_setzero_pd(), ayz = _mm256_setzero_pd();
  for (std::size_t q = b; q < e; q += 4) {
    VPC_CLOUD_LOADS;
    __m256d w = _mm256_loadu_pd(c.w + q);
    lane_mask<Masked>(q, m, w, r2);
    const __m256d inv = _mm256_div_pd(one, _mm256_sqrt_pd(r2));
    const __m256d inv2 = _mm256_mul_pd(inv, inv);
    const __m256d winv3 = _mm256_mul_pd(w, _mm256_mul_pd(inv, inv2));
    const __m256d c5 = _mm256_mul_pd(three, _mm256_mul_pd(winv3, inv2));
    ax = _mm256_fmadd_pd(winv3, dx, ax);
    ay = _mm256_fmadd_pd(winv3, dy, ay);
    az = _mm256_fmadd_pd(winv3, dz, az);
    const __m256d c5dx = _mm256_mul_pd(c5, dx);
    const __m256d c5dy = _mm256_mul_pd(c5, dy);
    axx = _mm256_add_pd(axx, _mm256_fnmadd_pd(c5dx, dx, winv3));
    ayy = _mm256_add_pd(ayy, _mm256_fnmadd_pd(c5dy, dy, winv3));
    azz = _mm256_add_pd(azz, _mm256_fnmadd_pd(_mm256_mul_pd(c5, dz), dz, winv3));
    axy = _mm256_fnmadd_pd(c5dx, dy, axy);
    axz = _mm256_fnmadd_pd(c5dx, dz, axz);
    ayz = _mm256_fnmadd_pd(c5dy, dz, ayz);
  }
  return {hsum(ax), hsum(ay), hsum(az), hsum(axx), hsum(ayy), hsum(azz),
          hsum(axy), hsum(axz), hsum(ayz)};
}

template <bool Masked>
PhiAccT phi_grad_block(const CloudView& c, std::size_t b, std::size_t e, const Vec3& x,
                       double eps2, const MaskCtx& m) {
  const __m256d xt = _mm256_set1_pd(x.x), yt = _mm256_set1_pd(x.y), zt = _mm256_set1_pd(x.z);
  const __m256d eps2v = _mm256_set1_pd(eps2);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d three = _mm256_set1_pd(3.0);
  __m256d aphi = _mm256_setzero_pd();
  __m256d agx = _mm256_setzero_pd(), agy = _mm256_setzero_pd(), agz = _mm256_setzero_pd();
  for (std::size_t q = b; q < e; q += 4) {
    VPC_CLOUD_LOADS;
    __m256d w = _mm256_loadu_pd(c.w + q);
    lane_mask<Masked>(q, m, w, r2);
    const __m256d gx = _mm256_loadu_pd(c.gx + q);
    const __m256d gy = _mm256_loadu_pd(c.gy + q);
    const __m256d gz = _mm256_loadu_pd(c.gz + q);
    const __m256d inv = _mm256_div_pd(one, _mm256_sqrt_pd(r2));
    const __m256d inv2 = _mm256_mul_pd(inv, inv);
    const __m256d winv3 = _mm256_mul_pd(w, _mm256_mul_pd(inv, inv2));
    __m256d s = _mm256_mul_pd(dx, gx);
    s = _mm256_fmadd_pd(dy, gy, s);
    s = _mm256_fmadd_pd(dz, gz, s);
    const __m256d c5s =
        _mm256_mul_pd(three, _mm256_mul_pd(_mm256_mul_pd(winv3, inv2), s));
    aphi = _mm256_fmadd_pd(winv3, s, aphi);
    agx = _mm256_add_pd(agx, _mm256_fnmadd_pd(c5s, dx, _mm256_mul_pd(winv3, gx)));
    agy = _mm256_add_pd(agy, _mm256_fnmadd_pd(c5s, dy, _mm256_mul_pd(winv3, gy)));
    agz = _mm256_add_pd(agz, _mm256_fnmadd_pd(c5s, dz, _mm256_mul_pd(winv3, gz)));
  }
  return {hsum(aphi), hsum(agx), hsum(agy), hsum(agz)};
}

template <bool Masked>
BwdAccT backward_block(const CloudView& c, std::size_t b, std::size_t e, const Vec3& x,
                       double eps2, const MaskCtx& m) {
  const __m256d xt = _mm256_set1_pd(x.x), yt = _mm256_set1_pd(x.y), zt = _mm256_set1_pd(x.z);
  const __m256d eps2v = _mm256_set1_pd(eps2);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d three = _mm256_set1_pd(3.0);
  __m256d aphi = _mm256_setzero_pd();
  __m256d agx = _mm256_setzero_pd(), agy = _mm256_setzero_pd(), agz = _mm256_setzero_pd();
  __m256d ax = _mm256_setzero_pd(), ay = _mm256_setzero_pd(), az = _mm256_setzero_pd();
  __m256d axx = _mm256_setzero_pd(), ayy = _mm256_setzero_pd(), azz = _mm256_setzero_pd();
  __m256d axy = _mm256_setzero_pd(), axz = _mm256_setzero_pd(), ayz = _mm256_setzero_pd();
  for (std::size_t q = b; q < e; q += 4) {
    VPC_CLOUD_LOADS;
    __m256d w = _mm256_loadu_pd(c.w + q);
    lane_mask<Masked>(q, m, w, r2);
    const __m256d gx = _mm256_loadu_pd(c.gx + q);
    const __m256d gy = _mm256_loadu_pd(c.gy + q);
    const __m256d gz = _mm256_loadu_pd(c.gz + q);
    const __m256d inv = _mm256_div_pd(one, _mm256_sqrt_pd(r2));
    const __m256d inv2 = _mm256_mul_pd(inv, inv);
    const __m256d winv3 = _mm256_mul_pd(w, _mm256_mul_pd(inv, inv2));
    const __m256d c5 = _mm256_mul_pd(three, _mm256_mul_pd(winv3, inv2));
    __m256d s = _mm256_mul_pd(dx, gx);
    s = _mm256_fmadd_pd(dy, gy, s);
    s = _mm256_fmadd_pd(dz, gz, s);
    const __m256d c5s = _mm256_mul_pd(c5, s);
    aphi = _mm256_fmadd_pd(winv3, s, aphi);
    agx = _mm256_add_pd(agx, _mm256_fnmadd_pd(c5s, dx, _mm256_mul_pd(winv3, gx)));
    agy = _mm256_add_pd(agy, _mm256_fnmadd_pd(c5s, dy, _mm256_mul_pd(winv3, gy)));
    agz = _mm256_add_pd(agz, _mm256_fnmadd_pd(c5s, dz, _mm256_mul_pd(winv3, gz)));
    ax = _mm256_fmadd_pd(winv3, dx, ax);
    ay = _mm256_fmadd_pd(winv3, dy, ay);
    az = _mm256_fmadd_pd(winv3, dz, az);
    const __m256d c5dx = _mm256_mul_pd(c5, dx);
    const __m256d c5dy = _mm256_mul_pd(c5, dy);
    axx = _mm256_add_pd(axx, _mm256_fnmadd_pd(c5dx, dx, winv3));
    ayy = _mm256_add_pd(ayy, _mm256_fnmadd_pd(c5dy, dy, winv3));
    azz = _mm256_add_pd(azz, _mm256_fnmadd_pd(_mm256_mul_pd(c5, dz), dz, winv3));
    axy = _mm256_fnmadd_pd(c5dx, dy, axy);
    axz = _mm256_fnmadd_pd(c5dx, dz, axz);
    ayz = _mm256_fnmadd_pd(c5dy, dz, ayz);
  }
  BwdAccT out;
  out.p = {hsum(aphi), hsum(agx), hsum(agy), hsum(agz)};
  out.ej = {hsum(ax), hsum(ay), hsum(az), hsum(axx), hsum(ayy), hsum(azz),
            hsum(axy), hsum(axz), hsum(ayz)};
  return out;
}

template <bool Masked>
VnAccT vnewton_block(const CloudView& c, std::size_t b, std::size_t e, const Vec3& x,
                     double eps2, const MaskCtx& m) {
  const __m256d xt = _mm256_set1_pd(x.x), yt = _mm256_set1_pd(x.y), zt = _mm256_set1_pd(x.z);
  const __m256d eps2v = _mm256_set1_pd(eps2);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d avx = _mm256_setzero_pd(), avy = _mm256_setzero_pd(), avz = _mm256_setzero_pd();
  for (std::size_t q = b; q < e; q += 4) {
    VPC_CLOUD_LOADS;
    __m256d gx = _mm256_loadu_pd(c.gx + q);
    __m256d gy = _mm256_loadu_pd(c.gy + q);
    __m256d gz = _mm256_loadu_pd(c.gz + q);
    if constexpr (Masked) {
      const __m256i idx = _mm256_add_epi64(_mm256_set1_epi64x((long long)q), kIota);
      const __m256d hit = _mm256_castsi256_pd(_mm256_cmpeq_epi64(idx, m.skip));
      gx = _mm256_andnot_pd(hit, gx);
      gy = _mm256_andnot_pd(hit, gy);
      gz = _mm256_andnot_pd(hit, gz);
      r2 = _mm256_blendv_pd(r2, one, hit);
    }
    const __m256d inv = _mm256_div_pd(one, _mm256_sqrt_pd(r2));
    avx = _mm256_fmadd_pd(inv, gx, avx);
    avy = _mm256_fmadd_pd(inv, gy, avy);
    avz = _mm256_fmadd_pd(inv, gz, avz);
  }
  return {hsum(avx), hsum(avy), hsum(avz)};
}

// Runs `Block` over kBlock-sized ranges, masking only the block that holds
// the skipped entry, and combines partials pairwise.
template <class Acc, class BlockFn, class BlockFnMasked>
Acc run_blocks(const CloudView& c, std::size_t skip, BlockFn plain, BlockFnMasked masked,
               const Vec3& x, double eps2) {
  MaskCtx m{_mm256_set1_epi64x((long long)skip)};
  std::vector<Acc> parts;
  parts.reserve((c.n_padded + kBlock - 1) / kBlock);
  for (std::size_t b = 0; b < c.n_padded; b += kBlock) {
    const std::size_t e = std::min(c.n_padded, b + kBlock);
    if (skip >= b && skip < e)
      parts.push_back(masked(c, b, e, x, eps2, m));
    else
      parts.push_back(plain(c, b, e, x, eps2, m));
  }
  return pairwise_combine(parts);
}

struct PsiAccW {
  double s = 0.0;
  PsiAccW& operator+=(const PsiAccW& o) { s += o.s; return *this; }
};

double psi_impl(const CloudView& c, const Vec3& x, double eps, std::size_t skip) {
  auto plain = [](const CloudView& cv, std::size_t b, std::size_t e, const Vec3& xt, double e2,
                  const MaskCtx& m) { return PsiAccW{psi_block<false>(cv, b, e, xt, e2, m)}; };
  auto masked = [](const CloudView& cv, std::size_t b, std::size_t e, const Vec3& xt, double e2,
                   const MaskCtx& m) { return PsiAccW{psi_block<true>(cv, b, e, xt, e2, m)}; };
  return run_blocks<PsiAccW>(c, skip, plain, masked, x, eps * eps).s;
}

Vec3 efield_impl(const CloudView& c, const Vec3& x, double eps, std::size_t skip) {
  auto acc = run_blocks<EAccT>(c, skip, efield_block_impl<false>, efield_block_impl<true>, x,
                               eps * eps);
  return {acc.ex, acc.ey, acc.ez};
}

EJSample efield_jac_impl(const CloudView& c, const Vec3& x, double eps, std::size_t skip) {
  auto acc =
      run_blocks<EJAccT>(c, skip, efield_jac_block<false>, efield_jac_block<true>, x, eps * eps);
  EJSample out;
  out.E = {acc.ex, acc.ey, acc.ez};
  out.J(0, 0) = acc.jxx; out.J(1, 1) = acc.jyy; out.J(2, 2) = acc.jzz;
  out.J(0, 1) = out.J(1, 0) = acc.jxy;
  out.J(0, 2) = out.J(2, 0) = acc.jxz;
  out.J(1, 2) = out.J(2, 1) = acc.jyz;
  return out;
}

PhiSample phi_grad_impl(const CloudView& c, const Vec3& x, double eps, std::size_t skip) {
  auto acc =
      run_blocks<PhiAccT>(c, skip, phi_grad_block<false>, phi_grad_block<true>, x, eps * eps);
  return {acc.phi, {acc.gx, acc.gy, acc.gz}};
}

BackwardSample backward_impl(const CloudView& c, const Vec3& x, double eps, std::size_t skip) {
  auto acc =
      run_blocks<BwdAccT>(c, skip, backward_block<false>, backward_block<true>, x, eps * eps);
  BackwardSample out;
  out.phi = acc.p.phi;
  out.phi_grad = {acc.p.gx, acc.p.gy, acc.p.gz};
  out.e_jac(0, 0) = acc.ej.jxx; out.e_jac(1, 1) = acc.ej.jyy; out.e_jac(2, 2) = acc.ej.jzz;
  out.e_jac(0, 1) = out.e_jac(1, 0) = acc.ej.jxy;
  out.e_jac(0, 2) = out.e_jac(2, 0) = acc.ej.jxz;
  out.e_jac(1, 2) = out.e_jac(2, 1) = acc.ej.jyz;
  return out;
}

Vec3 vnewton_impl(const CloudView& c, const Vec3& x, double eps, std::size_t skip) {
  auto acc =
      run_blocks<VnAccT>(c, skip, vnewton_block<false>, vnewton_block<true>, x, eps * eps);
  return {acc.vx, acc.vy, acc.vz};
}

}  // namespace

const BackendOps& avx2_ops() {
  static const BackendOps ops{psi_impl,      efield_impl, efield_jac_impl, phi_grad_impl,
                              backward_impl, vnewton_impl, "avx2"};
  return ops;
}

}  // namespace vpc::kernels::detail

#endif  // __x86_64__
