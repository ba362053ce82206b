#include "vpc/config.hpp"

#include <stdexcept>
#include <string>

namespace vpc {

void AdmissibleSpec::validate() const {
  if (!(K > 0.0)) throw std::invalid_argument("admissible.K must be positive");
  if (!(beta > 3.0)) throw std::invalid_argument("admissible.beta must exceed 3");
}

void FieldGridSpec::validate() const {
  for (int d = 0; d < 3; ++d) {
    if (dims[d] < 4)
      throw std::invalid_argument("field_grid.dims must be at least 4 per axis");
    if (!(spacing[d] > 0.0))
      throw std::invalid_argument("field_grid.spacing must be positive");
  }
  if (time_knots < 2) throw std::invalid_argument("field_grid.time_knots must be at least 2");
  if (!is_finite(origin)) throw std::invalid_argument("field_grid.origin must be finite");
}

void RunConfig::validate() const {
  if (!(T > 0.0)) throw std::invalid_argument("run.T must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("run.dt must be positive");
  const double n = T / dt;
  if (std::abs(n - std::lround(n)) > 1e-9 * std::max(1.0, n) || std::lround(n) < 1)
    throw std::invalid_argument("run.dt must divide run.T");
  if (softening < 0.0) throw std::invalid_argument("run.softening must be nonnegative");
  if (!(sample_spacing > 0.0)) throw std::invalid_argument("run.sample_spacing must be positive");
  if (weight_floor < 0.0) throw std::invalid_argument("run.weight_floor must be nonnegative");
  if (lambda < 0.0) throw std::invalid_argument("run.lambda must be nonnegative");
  field_grid.validate();
  admissible.validate();
  cutoff.validate();
}

}  // namespace vpc
