#include "vpc/ensemble.hpp"

#include <cmath>
#include <stdexcept>

namespace vpc {

ParticleEnsemble sample_ensemble(const BumpSum& f0, double h, double weight_floor) {
  if (!(h > 0.0)) throw std::invalid_argument("sample_ensemble: spacing must be positive");
  if (f0.empty()) throw std::invalid_argument("sample_ensemble: empty datum");
  const Box6 box = f0.support_box();
  int n[6];
  for (int i = 0; i < 6; ++i) {
    n[i] = int(std::ceil((box.hi[i] - box.lo[i]) / h - 1e-12));
    if (n[i] < 1) n[i] = 1;
  }
  const double dV = h * h * h * h * h * h;

  ParticleEnsemble ens;
  ens.cell_volume = dV;
  ens.datum_mass = f0.integral();
  ens.datum_l2_sq = f0.l2_norm_sq();

  // two passes: count, then fill exactly
  for (int pass = 0; pass < 2; ++pass) {
    std::size_t kept = 0;
    Vec6 z;
    for (int i0 = 0; i0 < n[0]; ++i0) {
      z[0] = box.lo[0] + (i0 + 0.5) * h;
      for (int i1 = 0; i1 < n[1]; ++i1) {
        z[1] = box.lo[1] + (i1 + 0.5) * h;
        for (int i2 = 0; i2 < n[2]; ++i2) {
          z[2] = box.lo[2] + (i2 + 0.5) * h;
          for (int i3 = 0; i3 < n[3]; ++i3) {
            z[3] = box.lo[3] + (i3 + 0.5) * h;
            for (int i4 = 0; i4 < n[4]; ++i4) {
              z[4] = box.lo[4] + (i4 + 0.5) * h;
              for (int i5 = 0; i5 < n[5]; ++i5) {
                z[5] = box.lo[5] + (i5 + 0.5) * h;
                const double v = f0.value(z);
                if (v <= 0.0 || v * dV < weight_floor) continue;
                if (pass == 0) {
                  ++kept;
                } else {
                  ens.z0.push_back(z);
                  ens.f0.push_back(v);
                  ens.df0.push_back(f0.grad(z));
                  ens.weights.push_back(v * dV);
                }
              }
            }
          }
        }
      }
    }
    if (pass == 0) {
      if (kept == 0) throw std::runtime_error("sample_ensemble: no particle above the weight floor");
      ens.z0.reserve(kept);
      ens.f0.reserve(kept);
      ens.df0.reserve(kept);
      ens.weights.reserve(kept);
    }
  }
  for (double v : ens.f0) ens.quadrature_l2_sq += dV * v * v;
  return ens;
}

double lp_norm(const ParticleEnsemble& ens, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p must be at least 1");
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : ens.f0) m = std::max(m, v);
    return m;
  }
  double s = 0.0;
  for (double v : ens.f0) s += ens.cell_volume * std::pow(v, p);
  return std::pow(s, 1.0 / p);
}

}  // namespace vpc
