#pragma once

// Backend-internal contract for the direct-summation kernels. Each backend
// (scalar reference, AVX2) implements the same per-target primitives over a
// padded SoA view of the source cloud. Accumulation runs block-wise in the
// canonical source order; block partials are combined by a pairwise tree so
// results are reproducible for a fixed backend.

#include <cstddef>
#include <vector>

#include "vpc/geometry.hpp"
#include "vpc/kernels.hpp"

namespace vpc::kernels::detail {

inline constexpr std::size_t kBlock = 1024;

struct CloudView {
  const double* x = nullptr;
  const double* y = nullptr;
  const double* z = nullptr;
  const double* w = nullptr;
  const double* gx = nullptr;
  const double* gy = nullptr;
  const double* gz = nullptr;
  std::size_t n = 0;         // logical entry count
  std::size_t n_padded = 0;  // multiple of 4, zero-weight far-away padding
};

struct BackendOps {
  double (*psi)(const CloudView&, const Vec3&, double eps, std::size_t skip);
  Vec3 (*efield)(const CloudView&, const Vec3&, double eps, std::size_t skip);
  EJSample (*efield_jac)(const CloudView&, const Vec3&, double eps, std::size_t skip);
  PhiSample (*phi_grad)(const CloudView&, const Vec3&, double eps, std::size_t skip);
  BackwardSample (*backward)(const CloudView&, const Vec3&, double eps, std::size_t skip);
  Vec3 (*vnewton)(const CloudView&, const Vec3&, double eps, std::size_t skip);
  const char* name;
};

const BackendOps& scalar_ops();
#if defined(__x86_64__)
const BackendOps& avx2_ops();
#endif

/// Pairwise combination of block partials (P needs operator+=).
template <class P>
P pairwise_combine(std::vector<P>& parts) {
  if (parts.empty()) return P{};
  for (std::size_t width = 1; width < parts.size(); width *= 2)
    for (std::size_t i = 0; i + width < parts.size(); i += 2 * width)
      parts[i] += parts[i + width];
  return parts[0];
}

}  // namespace vpc::kernels::detail
