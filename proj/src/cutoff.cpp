#include "vpc/cutoff.hpp"

#include <stdexcept>

namespace vpc {

void CutoffSpec::validate() const {
  if (!(inner > 0.0)) throw std::invalid_argument("CutoffSpec: inner radius must be positive");
  if (!(outer > inner)) throw std::invalid_argument("CutoffSpec: outer radius must exceed inner");
}

double CutoffSpec::eval(const Vec6& z) const {
  const double r = norm(z);
  if (r <= inner) return 1.0;
  if (r >= outer) return 0.0;
  const double s = (r - inner) / (outer - inner);
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

Vec6 CutoffSpec::eval_grad(const Vec6& z) const {
  const double r = norm(z);
  if (r <= inner || r >= outer) return {};
  const double w = outer - inner;
  const double s = (r - inner) / w;
  const double ds = -30.0 * s * s * (1.0 - s) * (1.0 - s) / w;  // d/dr of the blend
  Vec6 out = z;
  out *= ds / r;
  return out;
}

double eval_cutoff(const CutoffSpec& c, const Vec6& z) { return c.eval(z); }
Vec6 eval_cutoff_grad(const CutoffSpec& c, const Vec6& z) { return c.eval_grad(z); }

}  // namespace vpc
