#include "vpc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "vpc/snapshot.hpp"

namespace vpc {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key()))
      throw ScenarioError(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
}

double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError(path, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ScenarioError(path, "expected an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ScenarioError(path, "expected a boolean");
  return j.get<bool>();
}

Vec3 vec3_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ScenarioError(path, "expected an array of 3 numbers");
  return {num(j[0], path), num(j[1], path), num(j[2], path)};
}

Vec6 vec6_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 6) throw ScenarioError(path, "expected an array of 6 numbers");
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = num(j[i], path);
  return v;
}

CompactBump bump_of(const json& j, const std::string& path) {
  check_keys(j, path, {"center", "r_x", "r_v", "amplitude", "exponent"});
  CompactBump b;
  if (j.contains("center")) b.center = vec6_of(j["center"], path + ".center");
  if (j.contains("r_x")) b.r_x = num(j["r_x"], path + ".r_x");
  if (j.contains("r_v")) b.r_v = num(j["r_v"], path + ".r_v");
  if (j.contains("amplitude")) b.amplitude = num(j["amplitude"], path + ".amplitude");
  if (j.contains("exponent")) b.exponent = integer(j["exponent"], path + ".exponent");
  try {
    b.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(path, e.what());
  }
  return b;
}

BumpSum bumps_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ScenarioError(path, "expected a non-empty array of bumps");
  std::vector<CompactBump> terms;
  for (std::size_t i = 0; i < j.size(); ++i)
    terms.push_back(bump_of(j[i], path + "[" + std::to_string(i) + "]"));
  return BumpSum(std::move(terms));
}

void parse_run(const json& j, Scenario& sc) {
  check_keys(j, "run",
             {"T", "dt", "softening", "sample_spacing", "weight_floor", "lambda", "self_field",
              "deposit_spacing", "field_grid", "admissible", "cutoff"});
  RunConfig& r = sc.run;
  if (j.contains("T")) r.T = num(j["T"], "run.T");
  if (j.contains("dt")) r.dt = num(j["dt"], "run.dt");
  if (j.contains("softening")) r.softening = num(j["softening"], "run.softening");
  if (j.contains("sample_spacing")) r.sample_spacing = num(j["sample_spacing"], "run.sample_spacing");
  if (j.contains("weight_floor")) r.weight_floor = num(j["weight_floor"], "run.weight_floor");
  if (j.contains("lambda")) {
    r.lambda = num(j["lambda"], "run.lambda");
    sc.lambda_set = true;
  }
  if (j.contains("self_field")) r.self_field = boolean(j["self_field"], "run.self_field");
  if (j.contains("deposit_spacing"))
    r.deposit_spacing = num(j["deposit_spacing"], "run.deposit_spacing");
  if (j.contains("field_grid")) {
    const json& g = j["field_grid"];
    check_keys(g, "run.field_grid", {"origin", "spacing", "dims", "time_knots"});
    if (g.contains("origin")) r.field_grid.origin = vec3_of(g["origin"], "run.field_grid.origin");
    if (g.contains("spacing"))
      r.field_grid.spacing = vec3_of(g["spacing"], "run.field_grid.spacing");
    if (g.contains("dims")) {
      const json& dd = g["dims"];
      if (!dd.is_array() || dd.size() != 3)
        throw ScenarioError("run.field_grid.dims", "expected an array of 3 integers");
      for (int i = 0; i < 3; ++i) r.field_grid.dims[i] = integer(dd[i], "run.field_grid.dims");
    }
    if (g.contains("time_knots"))
      r.field_grid.time_knots = integer(g["time_knots"], "run.field_grid.time_knots");
  }
  if (j.contains("admissible")) {
    const json& a = j["admissible"];
    check_keys(a, "run.admissible", {"K", "beta"});
    if (a.contains("K")) r.admissible.K = num(a["K"], "run.admissible.K");
    if (a.contains("beta")) r.admissible.beta = num(a["beta"], "run.admissible.beta");
  }
  if (j.contains("cutoff")) {
    const json& c = j["cutoff"];
    check_keys(c, "run.cutoff", {"inner", "outer"});
    if (c.contains("inner")) r.cutoff.inner = num(c["inner"], "run.cutoff.inner");
    if (c.contains("outer")) r.cutoff.outer = num(c["outer"], "run.cutoff.outer");
  }
  try {
    r.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("run", e.what());
  }
}

void parse_optimize(const json& j, OptimizeConfig& o) {
  check_keys(j, "optimize",
             {"alpha0", "armijo_c1", "backtrack_ratio", "max_iters", "tol", "theta",
              "fp_max_iters", "fp_tol", "fd_delta", "n_directions"});
  if (j.contains("alpha0")) o.alpha0 = num(j["alpha0"], "optimize.alpha0");
  if (j.contains("armijo_c1")) o.armijo_c1 = num(j["armijo_c1"], "optimize.armijo_c1");
  if (j.contains("backtrack_ratio"))
    o.backtrack_ratio = num(j["backtrack_ratio"], "optimize.backtrack_ratio");
  if (j.contains("max_iters")) o.max_iters = integer(j["max_iters"], "optimize.max_iters");
  if (j.contains("tol")) o.tol = num(j["tol"], "optimize.tol");
  if (j.contains("theta")) o.theta = num(j["theta"], "optimize.theta");
  if (j.contains("fp_max_iters")) o.fp_max_iters = integer(j["fp_max_iters"], "optimize.fp_max_iters");
  if (j.contains("fp_tol")) o.fp_tol = num(j["fp_tol"], "optimize.fp_tol");
  if (j.contains("fd_delta")) o.fd_delta = num(j["fd_delta"], "optimize.fd_delta");
  if (j.contains("n_directions")) o.n_directions = integer(j["n_directions"], "optimize.n_directions");
  try {
    o.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("optimize", e.what());
  }
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError("document", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ScenarioError("document", "top level must be an object");
  check_keys(j, "", {"initial_datum", "target", "run", "optimize", "initial_field", "mode"});

  Scenario sc;
  sc.raw = text;
  sc.hash = fnv1a64(text);
  sc.run.lambda = 0.0;

  if (!j.contains("initial_datum")) throw ScenarioError("initial_datum", "required");
  sc.initial_datum = bumps_of(j["initial_datum"], "initial_datum");

  if (j.contains("target")) {
    const json& t = j["target"];
    check_keys(t, "target", {"mode", "bumps"});
    std::string kind = "bumps";
    if (t.contains("mode")) {
      if (!t["mode"].is_string()) throw ScenarioError("target.mode", "expected a string");
      kind = t["mode"].get<std::string>();
    }
    if (kind == "bumps") {
      sc.target_kind = TargetKind::bumps;
      if (!t.contains("bumps")) throw ScenarioError("target.bumps", "required for mode 'bumps'");
      sc.target_bumps = bumps_of(t["bumps"], "target.bumps");
    } else if (kind == "transported") {
      sc.target_kind = TargetKind::transported;
      if (t.contains("bumps"))
        throw ScenarioError("target.bumps", "not allowed for mode 'transported'");
    } else {
      throw ScenarioError("target.mode", "must be 'bumps' or 'transported'");
    }
  } else {
    sc.target_kind = TargetKind::transported;
  }

  if (j.contains("run")) parse_run(j["run"], sc);
  else sc.run.validate();
  if (j.contains("optimize")) parse_optimize(j["optimize"], sc.optimize);

  if (j.contains("initial_field")) {
    const json& arr = j["initial_field"];
    if (!arr.is_array()) throw ScenarioError("initial_field", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "initial_field[" + std::to_string(i) + "]";
      check_keys(arr[i], path, {"amplitude", "center", "sigma"});
      FieldBlob b;
      if (!arr[i].contains("amplitude")) throw ScenarioError(path + ".amplitude", "required");
      b.amplitude = vec3_of(arr[i]["amplitude"], path + ".amplitude");
      if (arr[i].contains("center")) b.center = vec3_of(arr[i]["center"], path + ".center");
      if (arr[i].contains("sigma")) b.sigma = num(arr[i]["sigma"], path + ".sigma");
      if (!(b.sigma > 0.0)) throw ScenarioError(path + ".sigma", "must be positive");
      sc.initial_field.push_back(b);
    }
  }

  if (j.contains("mode")) {
    if (!j["mode"].is_string()) throw ScenarioError("mode", "expected a string");
    static const std::set<std::string> modes{"forward",  "backward",   "gradcheck",
                                             "optimize", "fixedpoint", "picard-study"};
    const std::string m = j["mode"].get<std::string>();
    if (!modes.count(m)) throw ScenarioError("mode", "unknown mode '" + m + "'");
    sc.mode = m;
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("scenario", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

ControlField build_initial_field(const Scenario& sc) {
  ControlField B(sc.run.field_grid, 0.0, sc.run.T);
  if (sc.initial_field.empty()) return B;
  const auto& d = sc.run.field_grid.dims;
  for (int k = 0; k < B.knots(); ++k)
    for (int ix = 0; ix < d[0]; ++ix)
      for (int iy = 0; iy < d[1]; ++iy)
        for (int iz = 0; iz < d[2]; ++iz) {
          const Vec3 x = {sc.run.field_grid.origin.x + ix * sc.run.field_grid.spacing.x,
                          sc.run.field_grid.origin.y + iy * sc.run.field_grid.spacing.y,
                          sc.run.field_grid.origin.z + iz * sc.run.field_grid.spacing.z};
          Vec3 val;
          for (const auto& blob : sc.initial_field)
            val += std::exp(-norm2(x - blob.center) / (2.0 * blob.sigma * blob.sigma)) *
                   blob.amplitude;
          B.set_node(k, ix, iy, iz, val);
        }
  B.zero_boundary_layer();
  return B;
}

}  // namespace vpc
