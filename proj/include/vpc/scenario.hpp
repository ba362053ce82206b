#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vpc/bump.hpp"
#include "vpc/config.hpp"
#include "vpc/control_field.hpp"
#include "vpc/optimize.hpp"

namespace vpc {

/// Validation failure naming the offending scenario field.
struct ScenarioError : std::invalid_argument {
  explicit ScenarioError(const std::string& field, const std::string& why)
      : std::invalid_argument(field + ": " + why), field_name(field) {}
  std::string field_name;
};

/// Smooth analytic atom for seeding nonzero control fields:
/// B(x) = amplitude * exp(-|x - center|^2 / (2 sigma^2)), constant in time.
struct FieldBlob {
  Vec3 amplitude;
  Vec3 center;
  double sigma = 1.0;
};

enum class TargetKind { bumps, transported };

/// Parsed scenario document (strict JSON: unknown keys are rejected).
struct Scenario {
  BumpSum initial_datum;
  TargetKind target_kind = TargetKind::bumps;
  BumpSum target_bumps;
  RunConfig run;
  OptimizeConfig optimize;
  std::vector<FieldBlob> initial_field;
  std::optional<std::string> mode;
  bool lambda_set = false;

  std::string raw;          // original document bytes
  std::uint64_t hash = 0;   // FNV-1a of raw
};

Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);

/// Samples the scenario's initial field blobs onto the control grid (zero
/// boundary layer enforced).
ControlField build_initial_field(const Scenario& sc);

}  // namespace vpc
