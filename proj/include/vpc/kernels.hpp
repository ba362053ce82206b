#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vpc/bump.hpp"
#include "vpc/geometry.hpp"

namespace vpc::kernels {

// All Newtonian sums use the softened kernels
//   psi_eps(xi) = (|xi|^2 + eps^2)^(-1/2),
//   K_eps(xi)   = xi (|xi|^2 + eps^2)^(-3/2),
// which reduce to 1/|xi| and xi/|xi|^3 as eps -> 0. Plasma sign convention:
// eval_E returns -grad psi, the repulsive forcing of the characteristic flow.

enum class Backend { auto_detect, scalar, avx2 };

/// Select the summation backend (auto_detect probes CPU features; the
/// VPC_KERNEL_BACKEND environment variable overrides auto detection).
void set_backend(Backend b);
Backend active_backend();
const char* active_backend_name();
bool avx2_available();

inline constexpr std::size_t kNoSkip = static_cast<std::size_t>(-1);

/// Immutable source cloud for kernel sums. Entries are re-ordered into a
/// canonical lexicographic order at construction so that every sum is
/// bit-identical under permutations of the input, and accumulation is
/// pairwise over fixed-size blocks for reproducibility.
class SourceCloud {
 public:
  SourceCloud() = default;

  /// Scalar weights only (charge-like sources).
  SourceCloud(std::span<const Vec3> pos, std::span<const double> w);
  /// Scalar weights plus a 3-vector payload per point (costate v-gradients
  /// for the phi sums, or vector weights for the Newton potential).
  SourceCloud(std::span<const Vec3> pos, std::span<const double> w,
              std::span<const Vec3> payload);

  std::size_t size() const { return n_; }
  bool has_payload() const { return has_payload_; }
  /// Canonical position of input entry `original`; pass as `skip` to exclude
  /// a particle's self-interaction.
  std::size_t sorted_index(std::size_t original) const { return inv_perm_[original]; }

  // SoA views (padded; valid for size() entries)
  const double* px() const { return x_.data(); }
  const double* py() const { return y_.data(); }
  const double* pz() const { return z_.data(); }
  const double* pw() const { return w_.data(); }
  const double* pgx() const { return gx_.data(); }
  const double* pgy() const { return gy_.data(); }
  const double* pgz() const { return gz_.data(); }
  std::size_t padded_size() const { return x_.size(); }

 private:
  void build(std::span<const Vec3> pos, std::span<const double> w,
             std::span<const Vec3> payload);

  std::size_t n_ = 0;
  bool has_payload_ = false;
  std::vector<double> x_, y_, z_, w_, gx_, gy_, gz_;
  std::vector<std::uint32_t> inv_perm_;
};

struct EJSample {
  Vec3 E;
  Mat3 J;
};

struct PhiSample {
  double phi = 0.0;
  Vec3 grad;
};

/// One fused pass for the costate stepper: Phi, its x-gradient and the
/// electric-field Jacobian from the same source cloud.
struct BackwardSample {
  double phi = 0.0;
  Vec3 phi_grad;
  Mat3 e_jac;
};

double eval_psi(const SourceCloud& src, const Vec3& x, double eps, std::size_t skip = kNoSkip);
Vec3 eval_E(const SourceCloud& src, const Vec3& x, double eps, std::size_t skip = kNoSkip);
Mat3 eval_E_jacobian(const SourceCloud& src, const Vec3& x, double eps,
                     std::size_t skip = kNoSkip);
EJSample eval_E_with_jacobian(const SourceCloud& src, const Vec3& x, double eps,
                              std::size_t skip = kNoSkip);
double eval_phi(const SourceCloud& src, const Vec3& x, double eps, std::size_t skip = kNoSkip);
Vec3 eval_phi_grad(const SourceCloud& src, const Vec3& x, double eps,
                   std::size_t skip = kNoSkip);
PhiSample eval_phi_with_grad(const SourceCloud& src, const Vec3& x, double eps,
                             std::size_t skip = kNoSkip);
BackwardSample eval_backward_sample(const SourceCloud& src, const Vec3& x, double eps,
                                    std::size_t skip = kNoSkip);
Vec3 eval_vector_newton(const SourceCloud& src, const Vec3& x, double eps,
                        std::size_t skip = kNoSkip);

/// Tensor-product midpoint grid over a phase-space box, for the analytic
/// quadratures below.
struct TensorGrid6 {
  Vec6 lo, hi;
  std::array<int, 6> n{12, 12, 12, 12, 12, 12};
};

/// Direct quadrature of Phi_{a,f}(x) = -II K_eps(x-y) . grad_w a(y,w) f(y,w) dw dy
/// for analytic bump data. Throws if the grid does not cover both supports.
double eval_phi_direct_quadrature(const BumpSum& a, const BumpSum& f, const Vec3& x,
                                  const TensorGrid6& grid, double eps);

/// Quadrature of the Phi' form,
///   -II K_eps(x-y) . (grad_w a grad_y f - grad_w f grad_y a)(y,w) dw dy,
/// which equals the x-gradient of Phi_{a,f} in the refinement limit.
Vec3 eval_phi_prime_analytic(const BumpSum& a, const BumpSum& f, const Vec3& x,
                             const TensorGrid6& grid, double eps);

}  // namespace vpc::kernels
