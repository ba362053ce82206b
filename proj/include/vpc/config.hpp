#pragma once

#include <array>
#include <cmath>

#include "vpc/cutoff.hpp"
#include "vpc/geometry.hpp"

namespace vpc {

/// Norm ball of the control space: bound K on the mixed discrete Sobolev
/// norm, integrability exponent beta > 3.
struct AdmissibleSpec {
  double K = 1.0;
  double beta = 4.0;

  void validate() const;
  /// Hoelder exponent gamma = 1 - 3/beta in (0,1); reported as metadata.
  double gamma() const { return 1.0 - 3.0 / beta; }
};

/// Space-time grid carrying the control field: uniform spatial lattice with
/// trilinear interpolation and uniformly spaced time knots with linear
/// interpolation. Fields vanish identically on the outermost node layer.
struct FieldGridSpec {
  Vec3 origin{-3.0, -3.0, -3.0};
  Vec3 spacing{0.4, 0.4, 0.4};
  std::array<int, 3> dims{16, 16, 16};
  int time_knots = 11;

  void validate() const;
  std::size_t nodes() const {
    return std::size_t(dims[0]) * std::size_t(dims[1]) * std::size_t(dims[2]);
  }
  double cell_volume() const { return spacing.x * spacing.y * spacing.z; }
};

struct RunConfig {
  double T = 1.0;
  double dt = 1e-2;
  double softening = 0.0;       // 0 selects the default 0.2 * sample_spacing
  double sample_spacing = 0.25;
  double weight_floor = 0.0;
  FieldGridSpec field_grid;
  double lambda = 0.0;
  AdmissibleSpec admissible;
  CutoffSpec cutoff{12.0, 24.0};
  bool self_field = true;
  double deposit_spacing = 0.0;  // 0 selects the sampling spacing

  void validate() const;
  int steps() const { return int(std::lround(T / dt)); }
  double epsilon() const { return softening > 0.0 ? softening : 0.2 * sample_spacing; }
  double dep_spacing() const {
    return deposit_spacing > 0.0 ? deposit_spacing : sample_spacing;
  }
};

}  // namespace vpc
