#pragma once

#include <vector>

#include "vpc/geometry.hpp"

namespace vpc {

/// Target/initial datum: anything with pointwise values, gradients and a
/// squared L2 norm over phase space.
struct Datum {
  virtual ~Datum() = default;
  virtual double value(const Vec6& z) const = 0;
  virtual Vec6 grad(const Vec6& z) const = 0;
  virtual double l2_norm_sq() const = 0;
};

/// Compactly supported C^2 bump, a product of two radial polynomial caps:
///   b(x,v) = A (1-|x-cx|^2/rx^2)^m (1-|v-cv|^2/rv^2)^m   inside both balls,
///   b = 0 outside. m >= 3 keeps it twice continuously differentiable.
struct CompactBump {
  Vec6 center;
  double r_x = 1.0;
  double r_v = 1.0;
  double amplitude = 1.0;
  int exponent = 3;

  void validate() const;
  double eval(const Vec6& z) const;
  Vec6 eval_grad(const Vec6& z) const;
};

double eval_bump(const CompactBump& b, const Vec6& z);
Vec6 eval_bump_grad(const CompactBump& b, const Vec6& z);

struct Box6 {
  Vec6 lo, hi;
};

/// Finite sum of bumps; the analytic initial/target data of the solver.
class BumpSum final : public Datum {
 public:
  BumpSum() = default;
  explicit BumpSum(std::vector<CompactBump> terms);

  const std::vector<CompactBump>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  double value(const Vec6& z) const override;
  Vec6 grad(const Vec6& z) const override;

  /// Integral over phase space (exact for nonnegative data: the L1 norm).
  double integral() const;
  /// Squared L2 norm, with analytic radial moments for the diagonal terms
  /// and bipolar overlap quadrature for cross terms.
  double l2_norm_sq() const override;

  Box6 support_box() const;

 private:
  std::vector<CompactBump> terms_;
};

/// int_{R^3} (1-|x|^2/r^2)^m dx over the ball of radius r (Beta moment).
double ball_cap_integral(double r, int m);

/// int_{R^3} g1(|y-c1|) g2(|y-c2|) dy for caps g_i = (1-s^2/r_i^2)^{m_i},
/// reduced to a 1d integral in bipolar coordinates.
double ball_cap_overlap(double r1, int m1, double r2, int m2, double center_dist);

}  // namespace vpc
