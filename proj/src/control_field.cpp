#include "vpc/control_field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vpc {

ControlField::ControlField(const FieldGridSpec& grid, double t_begin, double t_end)
    : grid_(grid), t0_(t_begin), t1_(t_end) {
  grid_.validate();
  if (!(t1_ > t0_)) throw std::invalid_argument("ControlField: empty time interval");
  values_.assign(3 * grid_.nodes() * grid_.time_knots, 0.0);
}

bool ControlField::locate(const Vec3& x, int cell[3], double frac[3]) const {
  for (int d = 0; d < 3; ++d) {
    const double u = (x[d] - grid_.origin[d]) / grid_.spacing[d];
    if (u < 0.0 || u > double(grid_.dims[d] - 1)) return false;
    int c = int(std::floor(u));
    c = std::min(c, grid_.dims[d] - 2);
    cell[d] = c;
    frac[d] = u - c;
  }
  return true;
}

Vec3 ControlField::node(int k, int ix, int iy, int iz) const {
  const std::size_t i = node_index(k, ix, iy, iz);
  return {values_[i], values_[i + 1], values_[i + 2]};
}

void ControlField::set_node(int k, int ix, int iy, int iz, const Vec3& val) {
  const std::size_t i = node_index(k, ix, iy, iz);
  values_[i] = val.x;
  values_[i + 1] = val.y;
  values_[i + 2] = val.z;
}

Vec3 ControlField::value_at_knot(int k, const Vec3& x) const {
  int c[3];
  double f[3];
  if (!locate(x, c, f)) return {};
  Vec3 out;
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < 2; ++dy)
      for (int dz = 0; dz < 2; ++dz) {
        const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
        out += w * node(k, c[0] + dx, c[1] + dy, c[2] + dz);
      }
  return out;
}

void ControlField::deposit_at_knot(int k, const Vec3& x, const Vec3& amount) {
  int c[3];
  double f[3];
  if (!locate(x, c, f)) return;
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < 2; ++dy)
      for (int dz = 0; dz < 2; ++dz) {
        const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
        const std::size_t i = node_index(k, c[0] + dx, c[1] + dy, c[2] + dz);
        values_[i] += w * amount.x;
        values_[i + 1] += w * amount.y;
        values_[i + 2] += w * amount.z;
      }
}

namespace {
struct TimeWeights {
  int k0, k1;
  double w0, w1;
};
}  // namespace

static TimeWeights time_weights(double t, double t0, double t1, int knots) {
  const double dt = (t1 - t0) / double(knots - 1);
  double tau = (t - t0) / dt;
  tau = std::clamp(tau, 0.0, double(knots - 1));
  int k = std::min(int(std::floor(tau)), knots - 2);
  const double g = tau - k;
  return {k, k + 1, 1.0 - g, g};
}

Vec3 ControlField::value(double t, const Vec3& x) const {
  const auto tw = time_weights(t, t0_, t1_, grid_.time_knots);
  return tw.w0 * value_at_knot(tw.k0, x) + tw.w1 * value_at_knot(tw.k1, x);
}

Mat3 ControlField::jacobian(double t, const Vec3& x) const {
  int c[3];
  double f[3];
  if (!locate(x, c, f)) return {};
  const auto tw = time_weights(t, t0_, t1_, grid_.time_knots);
  Mat3 J;
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < 2; ++dy)
      for (int dz = 0; dz < 2; ++dz) {
        const double wx = dx ? f[0] : 1 - f[0], dwx = dx ? 1.0 : -1.0;
        const double wy = dy ? f[1] : 1 - f[1], dwy = dy ? 1.0 : -1.0;
        const double wz = dz ? f[2] : 1 - f[2], dwz = dz ? 1.0 : -1.0;
        const Vec3 val = tw.w0 * node(tw.k0, c[0] + dx, c[1] + dy, c[2] + dz) +
                         tw.w1 * node(tw.k1, c[0] + dx, c[1] + dy, c[2] + dz);
        const double gx = dwx * wy * wz / grid_.spacing.x;
        const double gy = wx * dwy * wz / grid_.spacing.y;
        const double gz = wx * wy * dwz / grid_.spacing.z;
        for (int i = 0; i < 3; ++i) {
          J(i, 0) += val[i] * gx;
          J(i, 1) += val[i] * gy;
          J(i, 2) += val[i] * gz;
        }
      }
  return J;
}

void ControlField::scale(double s) {
  for (double& v : values_) v *= s;
}

void ControlField::axpy(double a, const ControlField& other) {
  if (!compatible_with(other)) throw std::invalid_argument("ControlField::axpy: grid mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * other.values_[i];
}

void ControlField::zero_boundary_layer() {
  const auto& d = grid_.dims;
  for (int k = 0; k < grid_.time_knots; ++k)
    for (int ix = 0; ix < d[0]; ++ix)
      for (int iy = 0; iy < d[1]; ++iy)
        for (int iz = 0; iz < d[2]; ++iz) {
          const bool edge = ix == 0 || iy == 0 || iz == 0 || ix == d[0] - 1 || iy == d[1] - 1 ||
                            iz == d[2] - 1;
          if (edge) set_node(k, ix, iy, iz, {});
        }
}

bool ControlField::boundary_layer_is_zero() const {
  const auto& d = grid_.dims;
  for (int k = 0; k < grid_.time_knots; ++k)
    for (int ix = 0; ix < d[0]; ++ix)
      for (int iy = 0; iy < d[1]; ++iy)
        for (int iz = 0; iz < d[2]; ++iz) {
          const bool edge = ix == 0 || iy == 0 || iz == 0 || ix == d[0] - 1 || iy == d[1] - 1 ||
                            iz == d[2] - 1;
          if (edge && norm2(node(k, ix, iy, iz)) != 0.0) return false;
        }
  return true;
}

double ControlField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double ControlField::knot_max_abs(int k) const {
  const std::size_t per = 3 * grid_.nodes();
  double m = 0.0;
  for (std::size_t i = per * k; i < per * (k + 1); ++i) m = std::max(m, std::abs(values_[i]));
  return m;
}

bool ControlField::compatible_with(const ControlField& o) const {
  return grid_.dims == o.grid_.dims && grid_.time_knots == o.grid_.time_knots &&
         values_.size() == o.values_.size();
}

}  // namespace vpc
