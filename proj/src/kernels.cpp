#include "vpc/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "kernels_backend.hpp"
#include "vpc/parallel.hpp"

namespace vpc::kernels {

namespace {

std::atomic<Backend> g_requested{Backend::auto_detect};

bool cpu_has_avx2() {
#if defined(__x86_64__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const detail::BackendOps& resolve() {
  Backend req = g_requested.load();
  if (req == Backend::auto_detect) {
    if (const char* env = std::getenv("VPC_KERNEL_BACKEND")) {
      if (!std::strcmp(env, "scalar")) req = Backend::scalar;
      else if (!std::strcmp(env, "avx2")) req = Backend::avx2;
    }
  }
#if defined(__x86_64__)
  if (req == Backend::avx2) {
    if (!cpu_has_avx2()) throw std::runtime_error("avx2 backend requested but not supported");
    return detail::avx2_ops();
  }
  if (req == Backend::auto_detect && cpu_has_avx2()) return detail::avx2_ops();
#else
  if (req == Backend::avx2) throw std::runtime_error("avx2 backend unavailable on this platform");
#endif
  return detail::scalar_ops();
}

detail::CloudView view_of(const SourceCloud& s) {
  detail::CloudView v;
  v.x = s.px(); v.y = s.py(); v.z = s.pz(); v.w = s.pw();
  v.gx = s.pgx(); v.gy = s.pgy(); v.gz = s.pgz();
  v.n = s.size();
  v.n_padded = s.padded_size();
  return v;
}

void require_payload(const SourceCloud& s, const char* op) {
  if (s.size() > 0 && !s.has_payload())
    throw std::invalid_argument(std::string(op) + ": source cloud has no vector payload");
}

}  // namespace

bool avx2_available() { return cpu_has_avx2(); }

void set_backend(Backend b) { g_requested.store(b); }

Backend active_backend() {
  const auto& ops = resolve();
  return std::strcmp(ops.name, "avx2") == 0 ? Backend::avx2 : Backend::scalar;
}

const char* active_backend_name() { return resolve().name; }

void SourceCloud::build(std::span<const Vec3> pos, std::span<const double> w,
                        std::span<const Vec3> payload) {
  if (pos.size() != w.size())
    throw std::invalid_argument("SourceCloud: positions and weights differ in length");
  if (!payload.empty() && payload.size() != pos.size())
    throw std::invalid_argument("SourceCloud: positions and payload differ in length");
  n_ = pos.size();
  has_payload_ = !payload.empty();

  std::vector<std::uint32_t> order(n_);
  std::iota(order.begin(), order.end(), 0u);
  auto key_less = [&](std::uint32_t a, std::uint32_t b) {
    const Vec3 &pa = pos[a], &pb = pos[b];
    if (pa.x != pb.x) return pa.x < pb.x;
    if (pa.y != pb.y) return pa.y < pb.y;
    if (pa.z != pb.z) return pa.z < pb.z;
    if (w[a] != w[b]) return w[a] < w[b];
    if (has_payload_) {
      const Vec3 &ga = payload[a], &gb = payload[b];
      if (ga.x != gb.x) return ga.x < gb.x;
      if (ga.y != gb.y) return ga.y < gb.y;
      if (ga.z != gb.z) return ga.z < gb.z;
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), key_less);

  const std::size_t padded = std::max<std::size_t>(4, (n_ + 3) & ~std::size_t(3));
  auto fill = [&](std::vector<double>& a, double pad) { a.assign(padded, pad); };
  fill(x_, 1e30); fill(y_, 1e30); fill(z_, 1e30);
  fill(w_, 0.0); fill(gx_, 0.0); fill(gy_, 0.0); fill(gz_, 0.0);
  inv_perm_.assign(n_, 0);
  for (std::size_t k = 0; k < n_; ++k) {
    const std::uint32_t o = order[k];
    x_[k] = pos[o].x; y_[k] = pos[o].y; z_[k] = pos[o].z;
    w_[k] = w[o];
    if (has_payload_) { gx_[k] = payload[o].x; gy_[k] = payload[o].y; gz_[k] = payload[o].z; }
    inv_perm_[o] = std::uint32_t(k);
  }
}

SourceCloud::SourceCloud(std::span<const Vec3> pos, std::span<const double> w) {
  build(pos, w, {});
}

SourceCloud::SourceCloud(std::span<const Vec3> pos, std::span<const double> w,
                         std::span<const Vec3> payload) {
  build(pos, w, payload);
}

double eval_psi(const SourceCloud& src, const Vec3& x, double eps, std::size_t skip) {
  if (src.size() == 0) return 0.0;
  return resolve().psi(view_of(src), x, eps, skip);
}

Vec3 eval_E(const SourceCloud& src, const Vec3& x, double eps, std::size_t skip) {
  if (src.size() == 0) return {};
  return resolve().efield(view_of(src), x, eps, skip);
}

EJSample eval_E_with_jacobian(const SourceCloud& src, const Vec3& x, double eps,
                              std::size_t skip) {
  if (src.size() == 0) return {};
  return resolve().efield_jac(view_of(src), x, eps, skip);
}

Mat3 eval_E_jacobian(const SourceCloud& src, const Vec3& x, double eps, std::size_t skip) {
  return eval_E_with_jacobian(src, x, eps, skip).J;
}

PhiSample eval_phi_with_grad(const SourceCloud& src, const Vec3& x, double eps,
                             std::size_t skip) {
  require_payload(src, "eval_phi");
  if (src.size() == 0) return {};
  return resolve().phi_grad(view_of(src), x, eps, skip);
}

double eval_phi(const SourceCloud& src, const Vec3& x, double eps, std::size_t skip) {
  return eval_phi_with_grad(src, x, eps, skip).phi;
}

Vec3 eval_phi_grad(const SourceCloud& src, const Vec3& x, double eps, std::size_t skip) {
  return eval_phi_with_grad(src, x, eps, skip).grad;
}

BackwardSample eval_backward_sample(const SourceCloud& src, const Vec3& x, double eps,
                                    std::size_t skip) {
  require_payload(src, "eval_backward_sample");
  if (src.size() == 0) return {};
  return resolve().backward(view_of(src), x, eps, skip);
}

Vec3 eval_vector_newton(const SourceCloud& src, const Vec3& x, double eps, std::size_t skip) {
  require_payload(src, "eval_vector_newton");
  if (src.size() == 0) return {};
  return resolve().vnewton(view_of(src), x, eps, skip);
}

namespace {

void check_grid_covers(const BumpSum& a, const BumpSum& f, const TensorGrid6& g) {
  auto check = [&](const Box6& box) {
    for (int i = 0; i < 6; ++i) {
      if (box.lo[i] < g.lo[i] - 1e-12 || box.hi[i] > g.hi[i] + 1e-12)
        throw std::invalid_argument("quadrature grid does not cover the data supports");
      if (g.n[i] < 2) throw std::invalid_argument("quadrature grid too coarse");
    }
  };
  if (!a.empty()) check(a.support_box());
  if (!f.empty()) check(f.support_box());
}

inline Vec3 kernel_K(const Vec3& d, double eps2) {
  const double r2 = norm2(d) + eps2;
  const double inv = 1.0 / std::sqrt(r2);
  return (inv * inv * inv) * d;
}

}  // namespace

double eval_phi_direct_quadrature(const BumpSum& a, const BumpSum& f, const Vec3& x,
                                  const TensorGrid6& g, double eps) {
  check_grid_covers(a, f, g);
  const double eps2 = eps * eps;
  Vec6 h;
  std::size_t total = 1;
  for (int i = 0; i < 6; ++i) {
    h[i] = (g.hi[i] - g.lo[i]) / g.n[i];
    total *= std::size_t(g.n[i]);
  }
  const double vol = h[0] * h[1] * h[2] * h[3] * h[4] * h[5];

  const unsigned nt = worker_threads();
  std::vector<double> partial(nt, 0.0);
  const std::size_t chunk = (total + nt - 1) / nt;
  parallel_for(nt, [&](std::size_t tb, std::size_t te) {
    for (std::size_t t = tb; t < te; ++t) {
      double acc = 0.0;
      const std::size_t b = t * chunk, e = std::min(total, b + chunk);
      for (std::size_t flat = b; flat < e; ++flat) {
        std::size_t rem = flat;
        Vec6 zpt;
        for (int i = 5; i >= 0; --i) {
          const std::size_t k = rem % std::size_t(g.n[i]);
          rem /= std::size_t(g.n[i]);
          zpt[i] = g.lo[i] + (double(k) + 0.5) * h[i];
        }
        const double fv = f.value(zpt);
        if (fv == 0.0 && a.value(zpt) == 0.0) continue;
        const Vec3 K = kernel_K(x - zpt.x, eps2);
        acc += dot(K, a.grad(zpt).v) * fv;
      }
      partial[t] += acc;
    }
  });
  double s = 0.0;
  for (double p : partial) s += p;
  return -vol * s;
}

Vec3 eval_phi_prime_analytic(const BumpSum& a, const BumpSum& f, const Vec3& x,
                             const TensorGrid6& g, double eps) {
  check_grid_covers(a, f, g);
  const double eps2 = eps * eps;
  Vec6 h;
  std::size_t total = 1;
  for (int i = 0; i < 6; ++i) {
    h[i] = (g.hi[i] - g.lo[i]) / g.n[i];
    total *= std::size_t(g.n[i]);
  }
  const double vol = h[0] * h[1] * h[2] * h[3] * h[4] * h[5];

  const unsigned nt = worker_threads();
  std::vector<Vec3> partial(nt);
  const std::size_t chunk = (total + nt - 1) / nt;
  parallel_for(nt, [&](std::size_t tb, std::size_t te) {
    for (std::size_t t = tb; t < te; ++t) {
      Vec3 acc;
      const std::size_t b = t * chunk, e = std::min(total, b + chunk);
      for (std::size_t flat = b; flat < e; ++flat) {
        std::size_t rem = flat;
        Vec6 zpt;
        for (int i = 5; i >= 0; --i) {
          const std::size_t k = rem % std::size_t(g.n[i]);
          rem /= std::size_t(g.n[i]);
          zpt[i] = g.lo[i] + (double(k) + 0.5) * h[i];
        }
        const Vec6 ga = a.grad(zpt);
        const Vec6 gf = f.grad(zpt);
        if (ga.x.x == 0 && ga.x.y == 0 && ga.x.z == 0 && ga.v.x == 0 && ga.v.y == 0 &&
            ga.v.z == 0 && gf.x.x == 0 && gf.x.y == 0 && gf.x.z == 0 && gf.v.x == 0 &&
            gf.v.y == 0 && gf.v.z == 0)
          continue;
        const Vec3 K = kernel_K(x - zpt.x, eps2);
        acc += dot(K, ga.v) * gf.x - dot(K, gf.v) * ga.x;
      }
      partial[t] += acc;
    }
  });
  Vec3 s;
  for (const Vec3& p : partial) s += p;
  return -vol * s;
}

}  // namespace vpc::kernels
