#pragma once

#include <functional>
#include <vector>

#include "vpc/geometry.hpp"

namespace vpc {

/// Forcing fields of the magnetized characteristic system
///   x' = v,  v' = F(t,x) + v x G(t,x),
/// with F the electric forcing (-grad psi) and G the magnetic control.
/// Providers must be defined for all queried (t,x); zero outside grids.
struct FieldProviders {
  std::function<Vec3(double, const Vec3&)> electric;
  std::function<Mat3(double, const Vec3&)> electric_jacobian;
  std::function<Vec3(double, const Vec3&)> magnetic;
  std::function<Mat3(double, const Vec3&)> magnetic_jacobian;  // columns d B / d x_j

  static FieldProviders free_streaming();
};

/// Trajectory sample: phase point plus the forward Jacobian M = dZ(t,0,.)/dz
/// and the inverse-flow Jacobian N = dZ(0,t,.)/dz along the path. M N = I and
/// det M = 1 up to integration error.
struct FlowState {
  Vec6 z;
  Mat6 M = Mat6::identity();
  Mat6 N = Mat6::identity();
};

Vec6 char_rhs(double t, const Vec6& z, const FieldProviders& fields);

/// Linearization A(t,z) of the characteristic right-hand side:
/// [[0, I], [dF + v x dG, m(-G)]] with m(-G) the map v -> v x G.
Mat6 variational_matrix(double t, const Vec6& z, const FieldProviders& fields);

struct VariationalRates {
  Mat6 dM;
  Mat6 dN;
};

/// dM = A M, dN = -N A.
VariationalRates variational_rhs(double t, const FlowState& s, const FieldProviders& fields);

struct FlowOptions {
  bool matrices = true;
};

/// Classical RK4 with fixed step from t0 to t1 (either direction). Returns
/// the path including the initial state; throws on non-finite states with the
/// offending step in the message.
std::vector<FlowState> integrate_flow(const Vec6& z0, double t0, double t1, double dt,
                                      const FieldProviders& fields, FlowOptions opts = {});

/// Support growth bound e^{2T} (r + sqrt(T) |A|_{L2(0,T;Linf)}).
double support_bound_zeta(double r, double T, double A_norm);

}  // namespace vpc
