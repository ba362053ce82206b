#pragma once

#include <vector>

#include "vpc/config.hpp"
#include "vpc/geometry.hpp"

namespace vpc {

/// Magnetic control (and gradient fields sharing its layout): 3-vector node
/// values on a uniform spatial lattice times uniformly spaced time knots.
/// Trilinear in space, linear in time, identically zero outside the grid and
/// on the outermost node layer (compact support).
class ControlField {
 public:
  ControlField() = default;
  ControlField(const FieldGridSpec& grid, double t_begin, double t_end);

  const FieldGridSpec& grid() const { return grid_; }
  double t_begin() const { return t0_; }
  double t_end() const { return t1_; }
  int knots() const { return grid_.time_knots; }
  double knot_time(int k) const {
    return t0_ + (t1_ - t0_) * double(k) / double(grid_.time_knots - 1);
  }
  std::size_t dof() const { return values_.size(); }

  Vec3 value(double t, const Vec3& x) const;
  Mat3 jacobian(double t, const Vec3& x) const;
  Vec3 value_at_knot(int k, const Vec3& x) const;

  Vec3 node(int k, int ix, int iy, int iz) const;
  void set_node(int k, int ix, int iy, int iz, const Vec3& val);

  /// Trilinear deposition weights of the node layer at knot k; the exact
  /// transpose of value_at_knot interpolation.
  void deposit_at_knot(int k, const Vec3& x, const Vec3& amount);

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  void fill(double v) { values_.assign(values_.size(), v); }
  void scale(double s);
  /// this += a * other (grids must match).
  void axpy(double a, const ControlField& other);
  void zero_boundary_layer();
  bool boundary_layer_is_zero() const;
  double max_abs() const;
  /// Sup-norm over the nodes of one knot slice.
  double knot_max_abs(int k) const;

  bool compatible_with(const ControlField& o) const;

 private:
  bool locate(const Vec3& x, int cell[3], double frac[3]) const;
  std::size_t node_index(int k, int ix, int iy, int iz) const {
    const auto& d = grid_.dims;
    return 3 * (((std::size_t(k) * d[0] + ix) * d[1] + iy) * d[2] + iz);
  }

  FieldGridSpec grid_;
  double t0_ = 0.0, t1_ = 1.0;
  std::vector<double> values_;  // [knot][ix][iy][iz][3]
};

}  // namespace vpc
