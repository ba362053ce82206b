#include "vpc/snapshot.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vpc {

namespace {

void put_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), std::streamsize(n));
}

template <class T>
void put(std::ofstream& out, T v) {
  put_bytes(out, &v, sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("snapshot: truncated file");
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("snapshot: cannot open " + path);
  return out;
}

void put_header(std::ofstream& out, const char tag[4], const OutputMeta& meta,
                std::uint32_t flags) {
  put_bytes(out, tag, 4);
  put<std::uint32_t>(out, 1);
  put<std::uint64_t>(out, meta.scenario_hash);
  put<std::uint32_t>(out, meta.threads);
  put<std::uint32_t>(out, flags);
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_trajectory(const std::string& path, const TrajectoryStore& traj,
                      const OutputMeta& meta) {
  auto out = open_out(path);
  put_header(out, "VPMG", meta, traj.has_matrices ? 1u : 0u);
  put<std::uint64_t>(out, traj.np());
  put<std::uint64_t>(out, std::uint64_t(traj.steps));
  put<double>(out, traj.t0);
  put<double>(out, traj.dt);
  const std::size_t np = traj.np();
  for (int n = 0; n <= traj.steps; ++n) {
    put_bytes(out, &traj.z[std::size_t(n) * np], np * sizeof(Vec6));
    if (traj.has_matrices) {
      put_bytes(out, &traj.M[std::size_t(n) * np], np * sizeof(Mat6));
      put_bytes(out, &traj.N[std::size_t(n) * np], np * sizeof(Mat6));
    }
  }
  if (!out) throw std::runtime_error("snapshot: write failed for " + path);
}

void write_costate(const std::string& path, const CostateStore& costate,
                   const OutputMeta& meta) {
  auto out = open_out(path);
  put_header(out, "COST", meta, 0);
  put<std::uint64_t>(out, costate.particles);
  put<std::uint64_t>(out, std::uint64_t(costate.steps));
  put<double>(out, costate.t0);
  put<double>(out, costate.dt);
  const std::size_t np = costate.particles;
  for (int n = 0; n <= costate.steps; ++n) {
    put_bytes(out, &costate.g[std::size_t(n) * np], np * sizeof(double));
    put_bytes(out, &costate.G[std::size_t(n) * np], np * sizeof(Vec6));
  }
  if (!out) throw std::runtime_error("snapshot: write failed for " + path);
}

void write_control(const std::string& path, const ControlField& field, const OutputMeta& meta) {
  auto out = open_out(path);
  put_header(out, "CTRL", meta, 0);
  const auto& g = field.grid();
  for (int i = 0; i < 3; ++i) put<double>(out, g.origin[i]);
  for (int i = 0; i < 3; ++i) put<double>(out, g.spacing[i]);
  for (int i = 0; i < 3; ++i) put<std::uint32_t>(out, std::uint32_t(g.dims[i]));
  put<std::uint32_t>(out, std::uint32_t(g.time_knots));
  put<double>(out, field.t_begin());
  put<double>(out, field.t_end());
  put_bytes(out, field.data(), field.dof() * sizeof(double));
  if (!out) throw std::runtime_error("snapshot: write failed for " + path);
}

ControlField read_control(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("snapshot: cannot open " + path);
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "CTRL", 4) != 0)
    throw std::runtime_error("snapshot: not a control field file: " + path);
  (void)get<std::uint32_t>(in);  // version
  (void)get<std::uint64_t>(in);  // hash
  (void)get<std::uint32_t>(in);  // threads
  (void)get<std::uint32_t>(in);  // flags
  FieldGridSpec g;
  for (int i = 0; i < 3; ++i) g.origin[i] = get<double>(in);
  for (int i = 0; i < 3; ++i) g.spacing[i] = get<double>(in);
  for (int i = 0; i < 3; ++i) g.dims[i] = int(get<std::uint32_t>(in));
  g.time_knots = int(get<std::uint32_t>(in));
  const double t0 = get<double>(in);
  const double t1 = get<double>(in);
  ControlField field(g, t0, t1);
  in.read(reinterpret_cast<char*>(field.data()), std::streamsize(field.dof() * sizeof(double)));
  if (!in) throw std::runtime_error("snapshot: truncated control field file");
  return field;
}

}  // namespace vpc
