#include "vpc/bump.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vpc {

namespace {

inline double ipow(double b, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= b;
  return r;
}

/// Composite Simpson on [a,b] with n (even) intervals.
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

void CompactBump::validate() const {
  if (!(r_x > 0.0)) throw std::invalid_argument("CompactBump: r_x must be positive");
  if (!(r_v > 0.0)) throw std::invalid_argument("CompactBump: r_v must be positive");
  if (!(amplitude >= 0.0)) throw std::invalid_argument("CompactBump: amplitude must be nonnegative");
  if (exponent < 3) throw std::invalid_argument("CompactBump: exponent must be >= 3");
  if (!is_finite(center)) throw std::invalid_argument("CompactBump: center must be finite");
}

double CompactBump::eval(const Vec6& z) const {
  const double ux = norm2(z.x - center.x) / (r_x * r_x);
  if (ux >= 1.0) return 0.0;
  const double uv = norm2(z.v - center.v) / (r_v * r_v);
  if (uv >= 1.0) return 0.0;
  return amplitude * ipow(1.0 - ux, exponent) * ipow(1.0 - uv, exponent);
}

Vec6 CompactBump::eval_grad(const Vec6& z) const {
  const double ux = norm2(z.x - center.x) / (r_x * r_x);
  const double uv = norm2(z.v - center.v) / (r_v * r_v);
  if (ux >= 1.0 || uv >= 1.0) return {};
  const double px = ipow(1.0 - ux, exponent - 1);
  const double pv = ipow(1.0 - uv, exponent - 1);
  const double gx = px * (1.0 - ux);  // (1-ux)^m
  const double gv = pv * (1.0 - uv);
  Vec6 out;
  out.x = (-2.0 * amplitude * exponent / (r_x * r_x)) * px * gv * (z.x - center.x);
  out.v = (-2.0 * amplitude * exponent / (r_v * r_v)) * pv * gx * (z.v - center.v);
  return out;
}

double eval_bump(const CompactBump& b, const Vec6& z) { return b.eval(z); }
Vec6 eval_bump_grad(const CompactBump& b, const Vec6& z) { return b.eval_grad(z); }

BumpSum::BumpSum(std::vector<CompactBump> terms) : terms_(std::move(terms)) {
  for (const auto& t : terms_) t.validate();
}

double BumpSum::value(const Vec6& z) const {
  double s = 0.0;
  for (const auto& t : terms_) s += t.eval(z);
  return s;
}

Vec6 BumpSum::grad(const Vec6& z) const {
  Vec6 s;
  for (const auto& t : terms_) s += t.eval_grad(z);
  return s;
}

double ball_cap_integral(double r, int m) {
  // 4 pi r^3 int_0^1 s^2 (1-s^2)^m ds = 4 pi r^3 B(3/2, m+1)/2
  const double beta = std::tgamma(1.5) * std::tgamma(m + 1.0) / std::tgamma(m + 2.5);
  return 4.0 * M_PI * r * r * r * beta / 2.0;
}

double ball_cap_overlap(double r1, int m1, double r2, int m2, double d) {
  if (d >= r1 + r2) return 0.0;
  auto g1 = [&](double s) { return s < r1 ? ipow(1.0 - s * s / (r1 * r1), m1) : 0.0; };
  auto g2 = [&](double s) { return s < r2 ? ipow(1.0 - s * s / (r2 * r2), m2) : 0.0; };
  if (d < 1e-12) {
    if (r1 == r2) return ball_cap_integral(r1, m1 + m2);
    const double rm = std::min(r1, r2);
    return 4.0 * M_PI * simpson([&](double s) { return s * s * g1(s) * g2(s); }, 0.0, rm, 4096);
  }
  // Bipolar reduction: int g1(|y|) g2(|y - d e|) dy
  //   = (2 pi / d) int_0^{r1} u g1(u) [ int_{|u-d|}^{u+d} s g2(s) ds ] du
  // with the inner antiderivative in closed form:
  //   int s (1-s^2/r^2)^m ds = -(r^2/(2(m+1))) (1-s^2/r^2)^{m+1}.
  auto inner = [&](double a, double b) {
    a = std::clamp(a, 0.0, r2);
    b = std::clamp(b, 0.0, r2);
    if (b <= a) return 0.0;
    const double c = r2 * r2 / (2.0 * (m2 + 1));
    const double ta = ipow(1.0 - a * a / (r2 * r2), m2 + 1);
    const double tb = ipow(1.0 - b * b / (r2 * r2), m2 + 1);
    return c * (ta - tb);
  };
  auto f = [&](double u) { return u * g1(u) * inner(std::abs(u - d), u + d); };
  return (2.0 * M_PI / d) * simpson(f, 0.0, r1, 8192);
}

double BumpSum::integral() const {
  double s = 0.0;
  for (const auto& t : terms_)
    s += t.amplitude * ball_cap_integral(t.r_x, t.exponent) * ball_cap_integral(t.r_v, t.exponent);
  return s;
}

double BumpSum::l2_norm_sq() const {
  double s = 0.0;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    for (std::size_t j = 0; j < terms_.size(); ++j) {
      const auto& a = terms_[i];
      const auto& b = terms_[j];
      const double dx = norm(a.center.x - b.center.x);
      const double ix = ball_cap_overlap(a.r_x, a.exponent, b.r_x, b.exponent, dx);
      if (ix == 0.0) continue;
      const double dv = norm(a.center.v - b.center.v);
      const double iv = ball_cap_overlap(a.r_v, a.exponent, b.r_v, b.exponent, dv);
      s += a.amplitude * b.amplitude * ix * iv;
    }
  }
  return s;
}

Box6 BumpSum::support_box() const {
  if (terms_.empty()) return {};
  Box6 box;
  for (int i = 0; i < 6; ++i) {
    box.lo[i] = 1e300;
    box.hi[i] = -1e300;
  }
  for (const auto& t : terms_) {
    for (int i = 0; i < 3; ++i) {
      box.lo[i] = std::min(box.lo[i], t.center[i] - t.r_x);
      box.hi[i] = std::max(box.hi[i], t.center[i] + t.r_x);
      box.lo[i + 3] = std::min(box.lo[i + 3], t.center[i + 3] - t.r_v);
      box.hi[i + 3] = std::max(box.hi[i + 3], t.center[i + 3] + t.r_v);
    }
  }
  return box;
}

}  // namespace vpc
