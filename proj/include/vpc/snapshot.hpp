#pragma once

#include <cstdint>
#include <string>

#include "vpc/control_field.hpp"
#include "vpc/forward.hpp"
#include "vpc/sensitivity.hpp"

namespace vpc {

/// Provenance stamped into every artifact header.
struct OutputMeta {
  std::uint64_t scenario_hash = 0;
  std::uint32_t threads = 0;
  std::string backend;
};

std::uint64_t fnv1a64(const std::string& bytes);

// Little-endian binary snapshots. Layout (all integers fixed-width LE):
//   common: tag[4], u32 version, u64 scenario_hash, u32 threads, u32 flags
//   "VPMG": u64 np, u64 steps, f64 t0, f64 dt, per step z[np]{6 f64},
//           then (flags & 1) M[np]{36 f64}, N[np]{36 f64}
//   "COST": u64 np, u64 steps, f64 t0, f64 dt, per step g[np]{f64}, G[np]{6 f64}
//   "CTRL": f64 origin[3], f64 spacing[3], u32 dims[3], u32 knots,
//           f64 t0, f64 t1, values[3 * nodes * knots]{f64}
void write_trajectory(const std::string& path, const TrajectoryStore& traj,
                      const OutputMeta& meta);
void write_costate(const std::string& path, const CostateStore& costate, const OutputMeta& meta);
void write_control(const std::string& path, const ControlField& field, const OutputMeta& meta);
ControlField read_control(const std::string& path);

}  // namespace vpc
