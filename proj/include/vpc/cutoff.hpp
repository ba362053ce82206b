#pragma once

#include "vpc/geometry.hpp"

namespace vpc {

/// Radial C^2 cutoff on phase space: 1 for |z| <= inner, 0 for |z| >= outer,
/// quintic blend 1 - s^3 (10 - 15 s + 6 s^2) in between.
struct CutoffSpec {
  double inner = 1.0;
  double outer = 2.0;

  void validate() const;

  double eval(const Vec6& z) const;
  Vec6 eval_grad(const Vec6& z) const;
};

double eval_cutoff(const CutoffSpec& c, const Vec6& z);
Vec6 eval_cutoff_grad(const CutoffSpec& c, const Vec6& z);

}  // namespace vpc
