#pragma once

// Shared scenario builders for the solver-level tests.

#include "vpc/control_field.hpp"
#include "vpc/ensemble.hpp"
#include "vpc/forward.hpp"

namespace fixture {

inline vpc::CompactBump bump(double amplitude = 1.0, vpc::Vec6 center = {}, double rx = 1.0,
                             double rv = 1.0, int m = 3) {
  vpc::CompactBump b;
  b.center = center;
  b.r_x = rx;
  b.r_v = rv;
  b.amplitude = amplitude;
  b.exponent = m;
  return b;
}

inline vpc::RunConfig small_cfg(double T = 0.5, double dt = 0.01, double hs = 0.5,
                                double lambda = 1e-3) {
  vpc::RunConfig cfg;
  cfg.T = T;
  cfg.dt = dt;
  cfg.sample_spacing = hs;
  cfg.lambda = lambda;
  cfg.field_grid.origin = {-3.0, -3.0, -3.0};
  cfg.field_grid.spacing = {0.4, 0.4, 0.4};
  cfg.field_grid.dims = {16, 16, 16};
  cfg.field_grid.time_knots = 6;
  cfg.cutoff = vpc::CutoffSpec{12.0, 24.0};
  return cfg;
}

inline vpc::ControlField zero_field(const vpc::RunConfig& cfg) {
  return vpc::ControlField(cfg.field_grid, 0.0, cfg.T);
}

inline vpc::ControlField uniform_field(const vpc::RunConfig& cfg, const vpc::Vec3& b) {
  vpc::ControlField B = zero_field(cfg);
  const auto& d = cfg.field_grid.dims;
  for (int k = 0; k < B.knots(); ++k)
    for (int ix = 1; ix < d[0] - 1; ++ix)
      for (int iy = 1; iy < d[1] - 1; ++iy)
        for (int iz = 1; iz < d[2] - 1; ++iz) B.set_node(k, ix, iy, iz, b);
  return B;
}

/// Smooth compact nonzero control: one gaussian blob per component pattern.
inline vpc::ControlField blob_field(const vpc::RunConfig& cfg, const vpc::Vec3& amp,
                                    double sigma = 1.2) {
  vpc::ControlField B = zero_field(cfg);
  const auto& g = cfg.field_grid;
  for (int k = 0; k < B.knots(); ++k)
    for (int ix = 0; ix < g.dims[0]; ++ix)
      for (int iy = 0; iy < g.dims[1]; ++iy)
        for (int iz = 0; iz < g.dims[2]; ++iz) {
          const vpc::Vec3 x{g.origin.x + ix * g.spacing.x, g.origin.y + iy * g.spacing.y,
                            g.origin.z + iz * g.spacing.z};
          B.set_node(k, ix, iy, iz, std::exp(-norm2(x) / (2 * sigma * sigma)) * amp);
        }
  B.zero_boundary_layer();
  return B;
}

}  // namespace fixture
