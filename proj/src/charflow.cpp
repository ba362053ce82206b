#include "vpc/charflow.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vpc {

FieldProviders FieldProviders::free_streaming() {
  FieldProviders fp;
  fp.electric = [](double, const Vec3&) { return Vec3{}; };
  fp.electric_jacobian = [](double, const Vec3&) { return Mat3{}; };
  fp.magnetic = [](double, const Vec3&) { return Vec3{}; };
  fp.magnetic_jacobian = [](double, const Vec3&) { return Mat3{}; };
  return fp;
}

Vec6 char_rhs(double t, const Vec6& z, const FieldProviders& fields) {
  Vec6 dz;
  dz.x = z.v;
  dz.v = fields.electric(t, z.x) + cross(z.v, fields.magnetic(t, z.x));
  return dz;
}

Mat6 variational_matrix(double t, const Vec6& z, const FieldProviders& fields) {
  const Mat3 dF = fields.electric_jacobian(t, z.x);
  const Vec3 G = fields.magnetic(t, z.x);
  const Mat3 dG = fields.magnetic_jacobian(t, z.x);

  Mat6 A;
  A.set_block(0, 3, Mat3::identity());
  Mat3 lower = dF;
  for (int j = 0; j < 3; ++j) {
    const Vec3 col = cross(z.v, dG.col(j));
    lower(0, j) += col.x;
    lower(1, j) += col.y;
    lower(2, j) += col.z;
  }
  A.set_block(3, 0, lower);
  A.set_block(3, 3, -1.0 * cross_matrix(G));  // v -> v x G
  return A;
}

VariationalRates variational_rhs(double t, const FlowState& s, const FieldProviders& fields) {
  const Mat6 A = variational_matrix(t, s.z, fields);
  return {A * s.M, -1.0 * (s.N * A)};
}

std::vector<FlowState> integrate_flow(const Vec6& z0, double t0, double t1, double dt,
                                      const FieldProviders& fields, FlowOptions opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_flow: dt must be positive");
  const double span = t1 - t0;
  const long nsteps = std::lround(std::abs(span) / dt);
  if (nsteps < 1) throw std::invalid_argument("integrate_flow: empty time interval");
  const double h = span / double(nsteps);

  std::vector<FlowState> path;
  path.reserve(nsteps + 1);
  FlowState s;
  s.z = z0;
  path.push_back(s);

  auto rhs = [&](double t, const FlowState& st) {
    FlowState k;
    k.z = char_rhs(t, st.z, fields);
    if (opts.matrices) {
      const auto vr = variational_rhs(t, st, fields);
      k.M = vr.dM;
      k.N = vr.dN;
    }
    return k;
  };
  auto advance = [&](const FlowState& st, const FlowState& k, double a) {
    FlowState out;
    out.z = st.z + a * k.z;
    if (opts.matrices) {
      out.M = st.M + a * k.M;
      out.N = st.N + a * k.N;
    }
    return out;
  };

  for (long n = 0; n < nsteps; ++n) {
    const double t = t0 + n * h;
    const FlowState k1 = rhs(t, s);
    const FlowState k2 = rhs(t + h / 2, advance(s, k1, h / 2));
    const FlowState k3 = rhs(t + h / 2, advance(s, k2, h / 2));
    const FlowState k4 = rhs(t + h, advance(s, k3, h));
    FlowState next;
    next.z = s.z + (h / 6.0) * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z);
    if (opts.matrices) {
      next.M = s.M + (h / 6.0) * (k1.M + 2.0 * k2.M + 2.0 * k3.M + k4.M);
      next.N = s.N + (h / 6.0) * (k1.N + 2.0 * k2.N + 2.0 * k3.N + k4.N);
    }
    if (!is_finite(next.z) || (opts.matrices && (!is_finite(next.M) || !is_finite(next.N))))
      throw std::runtime_error("integrate_flow: non-finite state at step " + std::to_string(n + 1));
    s = next;
    path.push_back(s);
  }
  return path;
}

double support_bound_zeta(double r, double T, double A_norm) {
  return std::exp(2.0 * T) * (r + std::sqrt(T) * A_norm);
}

}  // namespace vpc
