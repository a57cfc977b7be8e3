#pragma once

// Run configuration: a single JSON document (comments allowed) describing the surface, the
// perturbation family, the observable, numerical settings and experiment parameters.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "horoflow/errors.hpp"
#include "horoflow/experiments.hpp"
#include "horoflow/fields.hpp"
#include "horoflow/flows.hpp"
#include "horoflow/functionals.hpp"
#include "horoflow/surface.hpp"

namespace horoflow {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

struct AdmissibilitySettings {
  AdmissibilityGrid grid;
  /// Also run the grid with doubled resolution in every direction.
  bool refine = true;
  double stability = 0.2;
};

struct LiouvilleSettings {
  std::size_t mc_samples = 1000000;
  double horocycle_length = 1e4;
  std::size_t horocycle_starts = 8;
  /// Observables checked alongside the main one.
  std::vector<ObservableSpec> cross_checks{
      {0.0, {{{-0.3, 0.25}, 1.0, 1.5, {0.0, 1.0}, {0.0}}}},
      {0.5, {{{0.4, 0.3}, 0.8, 1.0, {0.5, 0.0, 0.7}, {0.0, 0.3}}}}};
};

struct EquidistSettings {
  double t = 1.3;
  std::vector<double> b0_list{1e-1, 1e-2, 1e-3, 1e-4};
  std::size_t base_points = 10;
  double t_sub = 0.8;
  double b0_sub = 1e-3;
  double final_fraction = 0.25;
  double sub_fraction = 0.05;
};

struct HorocycleSettings {
  std::vector<double> T_list{1e2, 1e3, 1e4};
  std::size_t samples = 20;
  double max_ratio = 0.2;
  double max_slope = -0.2;
};

struct ReductionSettings {
  double t = 1.2;
  std::vector<double> b0_list{1e-2, 3e-3, 1e-3, 3e-4};
  /// Base point: disk coordinates and covector angle.
  Complex point_disk{0.15, -0.1};
  double angle = 0.7;
  double max_spread = 10.0;
  double gamma1 = 0.49;
};

struct ShadowingSettings {
  std::vector<double> norms{1e-4, 1e-3, 1e-2};
  std::vector<double> direction{1.0, -0.6, 0.8};
  std::size_t samples = 10;
  ShadowingConfig search;
  double min_exponent = 1.3;
};

struct BoundsSettings {
  BoundsSpec spec{0.45, 0.55, 0.02, 3, 4};
  double b0 = 1e-3;
  double t = 1.3;
};

struct RunConfig {
  std::string surface = "bolza";
  FamilySpec family;
  ObservableSpec observable{0.0, {{{0.2, -0.1}, 1.0, 2.0, {1.0, 0.5}, {0.0}}}};
  IntegratorConfig integrator;
  QuadratureConfig quadrature;
  BoxSampling sampling;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output = "horoflow_out";

  AdmissibilitySettings admissibility;
  LiouvilleSettings liouville;
  EquidistSettings equidist;
  HorocycleSettings horocycle;
  ReductionSettings reduction;
  ShadowingSettings shadowing;
  BoundsSettings bounds;
};

// ---------------------------------------------------------------------------
// JSON conversion
// ---------------------------------------------------------------------------

namespace detail {

inline Json complex_json(Complex w) { return Json::array({w.real(), w.imag()}); }

inline Complex json_complex(const Json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError("expected [x, y]", field);
  return {j[0].get<double>(), j[1].get<double>()};
}

/// Reads an optional key into `out`, reporting type errors with the field path.
template <class T>
void read(const Json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value: ") + e.what(), path + "." + key);
  }
}

inline void check_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& path) {
  if (!j.is_object()) throw ConfigError("expected an object", path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == it.key();
    if (!ok) throw ConfigError("unknown key", path.empty() ? it.key() : path + "." + it.key());
  }
}

inline Json observable_json(const ObservableSpec& s) {
  Json terms = Json::array();
  for (const auto& t : s.terms)
    terms.push_back({{"center", complex_json(t.center_disk)},
                     {"amplitude", t.amplitude},
                     {"r_max", t.r_max},
                     {"cos", t.cos_coeffs},
                     {"sin", t.sin_coeffs}});
  return {{"constant", s.constant}, {"terms", terms}};
}

inline ObservableSpec json_observable(const Json& j, const std::string& path) {
  check_keys(j, {"constant", "terms"}, path);
  ObservableSpec s;
  read(j, "constant", s.constant, path);
  if (j.contains("terms")) {
    if (!j["terms"].is_array()) throw ConfigError("expected an array", path + ".terms");
    for (std::size_t k = 0; k < j["terms"].size(); ++k) {
      const Json& t = j["terms"][k];
      const std::string p = path + ".terms[" + std::to_string(k) + "]";
      check_keys(t, {"center", "amplitude", "r_max", "cos", "sin"}, p);
      ObservableTermSpec ts;
      if (t.contains("center")) ts.center_disk = json_complex(t["center"], p + ".center");
      read(t, "amplitude", ts.amplitude, p);
      read(t, "r_max", ts.r_max, p);
      read(t, "cos", ts.cos_coeffs, p);
      read(t, "sin", ts.sin_coeffs, p);
      s.terms.push_back(ts);
    }
  }
  return s;
}

}  // namespace detail

inline Json to_json(const RunConfig& c) {
  Json pots = Json::array();
  for (const auto& p : c.family.potentials) {
    Json cs = Json::array();
    for (Complex w : p.centers_disk) cs.push_back(detail::complex_json(w));
    pots.push_back({{"centers", cs}, {"amplitudes", p.amplitudes}});
  }
  Json cross = Json::array();
  for (const auto& o : c.liouville.cross_checks) cross.push_back(detail::observable_json(o));
  const auto& g = c.admissibility.grid;
  return {
      {"schema_version", kSchemaVersion},
      {"surface", c.surface},
      {"family", {{"r_max", c.family.r_max}, {"potentials", pots}}},
      {"observable", detail::observable_json(c.observable)},
      {"integrator",
       {{"step", c.integrator.step},
        {"max_time", c.integrator.max_time},
        {"energy_monitor_interval", c.integrator.energy_monitor_interval},
        {"max_relative_energy_drift", c.integrator.max_relative_energy_drift},
        {"eps_cap", c.integrator.eps_cap}}},
      {"quadrature",
       {{"T_max", c.quadrature.T_max},
        {"nodes_per_unit", c.quadrature.nodes_per_unit},
        {"tolerance", c.quadrature.tolerance},
        {"max_depth", c.quadrature.max_depth}}},
      {"box",
       {{"mode", c.sampling.mode == BoxMode::grid ? "grid" : "monte_carlo"},
        {"samples", c.sampling.samples},
        {"grid_nodes", c.sampling.grid_nodes}}},
      {"seed", c.seed},
      {"threads", c.threads},
      {"output", c.output},
      {"experiments",
       {{"admissibility",
         {{"base", g.base},
          {"angles", g.angles},
          {"threshold", g.threshold},
          {"T_max", g.quadrature.T_max},
          {"tolerance", g.quadrature.tolerance},
          {"refine", c.admissibility.refine},
          {"stability", c.admissibility.stability}}},
        {"liouville",
         {{"mc_samples", c.liouville.mc_samples},
          {"horocycle_length", c.liouville.horocycle_length},
          {"horocycle_starts", c.liouville.horocycle_starts},
          {"cross_checks", cross}}},
        {"equidist",
         {{"t", c.equidist.t},
          {"b0_list", c.equidist.b0_list},
          {"base_points", c.equidist.base_points},
          {"t_sub", c.equidist.t_sub},
          {"b0_sub", c.equidist.b0_sub},
          {"final_fraction", c.equidist.final_fraction},
          {"sub_fraction", c.equidist.sub_fraction}}},
        {"horocycle_rate",
         {{"T_list", c.horocycle.T_list},
          {"samples", c.horocycle.samples},
          {"max_ratio", c.horocycle.max_ratio},
          {"max_slope", c.horocycle.max_slope}}},
        {"reduction",
         {{"t", c.reduction.t},
          {"b0_list", c.reduction.b0_list},
          {"point", detail::complex_json(c.reduction.point_disk)},
          {"angle", c.reduction.angle},
          {"max_spread", c.reduction.max_spread},
          {"gamma1", c.reduction.gamma1}}},
        {"shadowing",
         {{"norms", c.shadowing.norms},
          {"direction", c.shadowing.direction},
          {"samples", c.shadowing.samples},
          {"window", c.shadowing.search.window},
          {"grid_step", c.shadowing.search.grid_step},
          {"tolerance", c.shadowing.search.tolerance},
          {"max_sweeps", c.shadowing.search.max_sweeps},
          {"shift_factor", c.shadowing.search.shift_factor},
          {"min_exponent", c.shadowing.min_exponent}}},
        {"bounds",
         {{"E1", c.bounds.spec.E1},
          {"E2", c.bounds.spec.E2},
          {"delta", c.bounds.spec.delta},
          {"shells", c.bounds.spec.shells},
          {"base_points", c.bounds.spec.base_points},
          {"b0", c.bounds.b0},
          {"t", c.bounds.t}}}}}};
}

/// Fields absent from the document keep their defaults; unknown keys are errors.
inline RunConfig config_from_json(const Json& j) {
  using detail::check_keys;
  using detail::read;
  RunConfig c;
  check_keys(j, {"schema_version", "surface", "family", "observable", "integrator", "quadrature", "box", "seed",
                 "threads", "output", "experiments"},
             "");
  int schema = kSchemaVersion;
  read(j, "schema_version", schema, "");
  if (schema != kSchemaVersion)
    throw ConfigError("unsupported schema version " + std::to_string(schema), "schema_version");
  read(j, "surface", c.surface, "");
  read(j, "seed", c.seed, "");
  read(j, "threads", c.threads, "");
  read(j, "output", c.output, "");
  if (j.contains("family")) {
    const Json& f = j["family"];
    check_keys(f, {"r_max", "potentials"}, "family");
    read(f, "r_max", c.family.r_max, "family");
    if (f.contains("potentials")) {
      if (!f["potentials"].is_array()) throw ConfigError("expected an array", "family.potentials");
      c.family.potentials.clear();
      for (std::size_t k = 0; k < f["potentials"].size(); ++k) {
        const Json& p = f["potentials"][k];
        const std::string path = "family.potentials[" + std::to_string(k) + "]";
        check_keys(p, {"centers", "amplitudes"}, path);
        PotentialSpec ps;
        if (p.contains("centers")) {
          if (!p["centers"].is_array()) throw ConfigError("expected an array", path + ".centers");
          for (const auto& w : p["centers"]) ps.centers_disk.push_back(detail::json_complex(w, path + ".centers"));
        }
        read(p, "amplitudes", ps.amplitudes, path);
        c.family.potentials.push_back(ps);
      }
    }
  }
  if (j.contains("observable")) c.observable = detail::json_observable(j["observable"], "observable");
  if (j.contains("integrator")) {
    const Json& g = j["integrator"];
    check_keys(g, {"step", "max_time", "energy_monitor_interval", "max_relative_energy_drift", "eps_cap"},
               "integrator");
    read(g, "step", c.integrator.step, "integrator");
    read(g, "max_time", c.integrator.max_time, "integrator");
    read(g, "energy_monitor_interval", c.integrator.energy_monitor_interval, "integrator");
    read(g, "max_relative_energy_drift", c.integrator.max_relative_energy_drift, "integrator");
    read(g, "eps_cap", c.integrator.eps_cap, "integrator");
  }
  if (j.contains("quadrature")) {
    const Json& q = j["quadrature"];
    check_keys(q, {"T_max", "nodes_per_unit", "tolerance", "max_depth"}, "quadrature");
    read(q, "T_max", c.quadrature.T_max, "quadrature");
    read(q, "nodes_per_unit", c.quadrature.nodes_per_unit, "quadrature");
    read(q, "tolerance", c.quadrature.tolerance, "quadrature");
    read(q, "max_depth", c.quadrature.max_depth, "quadrature");
  }
  if (j.contains("box")) {
    const Json& b = j["box"];
    check_keys(b, {"mode", "samples", "grid_nodes"}, "box");
    std::string mode = "monte_carlo";
    read(b, "mode", mode, "box");
    if (mode == "grid")
      c.sampling.mode = BoxMode::grid;
    else if (mode == "monte_carlo")
      c.sampling.mode = BoxMode::monte_carlo;
    else
      throw ConfigError("mode must be monte_carlo or grid", "box.mode");
    read(b, "samples", c.sampling.samples, "box");
    read(b, "grid_nodes", c.sampling.grid_nodes, "box");
  }
  if (j.contains("experiments")) {
    const Json& e = j["experiments"];
    check_keys(e, {"admissibility", "liouville", "equidist", "horocycle_rate", "reduction", "shadowing", "bounds"},
               "experiments");
    if (e.contains("admissibility")) {
      const Json& a = e["admissibility"];
      const std::string p = "experiments.admissibility";
      check_keys(a, {"base", "angles", "threshold", "T_max", "tolerance", "refine", "stability"}, p);
      auto& g = c.admissibility.grid;
      read(a, "base", g.base, p);
      read(a, "angles", g.angles, p);
      read(a, "threshold", g.threshold, p);
      read(a, "T_max", g.quadrature.T_max, p);
      read(a, "tolerance", g.quadrature.tolerance, p);
      read(a, "refine", c.admissibility.refine, p);
      read(a, "stability", c.admissibility.stability, p);
    }
    if (e.contains("liouville")) {
      const Json& l = e["liouville"];
      const std::string p = "experiments.liouville";
      check_keys(l, {"mc_samples", "horocycle_length", "horocycle_starts", "cross_checks"}, p);
      read(l, "mc_samples", c.liouville.mc_samples, p);
      read(l, "horocycle_length", c.liouville.horocycle_length, p);
      read(l, "horocycle_starts", c.liouville.horocycle_starts, p);
      if (l.contains("cross_checks")) {
        if (!l["cross_checks"].is_array()) throw ConfigError("expected an array", p + ".cross_checks");
        c.liouville.cross_checks.clear();
        for (std::size_t k = 0; k < l["cross_checks"].size(); ++k)
          c.liouville.cross_checks.push_back(
              detail::json_observable(l["cross_checks"][k], p + ".cross_checks[" + std::to_string(k) + "]"));
      }
    }
    if (e.contains("equidist")) {
      const Json& q = e["equidist"];
      const std::string p = "experiments.equidist";
      check_keys(q, {"t", "b0_list", "base_points", "t_sub", "b0_sub", "final_fraction", "sub_fraction"}, p);
      read(q, "t", c.equidist.t, p);
      read(q, "b0_list", c.equidist.b0_list, p);
      read(q, "base_points", c.equidist.base_points, p);
      read(q, "t_sub", c.equidist.t_sub, p);
      read(q, "b0_sub", c.equidist.b0_sub, p);
      read(q, "final_fraction", c.equidist.final_fraction, p);
      read(q, "sub_fraction", c.equidist.sub_fraction, p);
    }
    if (e.contains("horocycle_rate")) {
      const Json& h = e["horocycle_rate"];
      const std::string p = "experiments.horocycle_rate";
      check_keys(h, {"T_list", "samples", "max_ratio", "max_slope"}, p);
      read(h, "T_list", c.horocycle.T_list, p);
      read(h, "samples", c.horocycle.samples, p);
      read(h, "max_ratio", c.horocycle.max_ratio, p);
      read(h, "max_slope", c.horocycle.max_slope, p);
    }
    if (e.contains("reduction")) {
      const Json& r = e["reduction"];
      const std::string p = "experiments.reduction";
      check_keys(r, {"t", "b0_list", "point", "angle", "max_spread", "gamma1"}, p);
      read(r, "t", c.reduction.t, p);
      read(r, "b0_list", c.reduction.b0_list, p);
      if (r.contains("point")) c.reduction.point_disk = detail::json_complex(r["point"], p + ".point");
      read(r, "angle", c.reduction.angle, p);
      read(r, "max_spread", c.reduction.max_spread, p);
      read(r, "gamma1", c.reduction.gamma1, p);
    }
    if (e.contains("shadowing")) {
      const Json& s = e["shadowing"];
      const std::string p = "experiments.shadowing";
      check_keys(s, {"norms", "direction", "samples", "window", "grid_step", "tolerance", "max_sweeps",
                     "shift_factor", "min_exponent"},
                 p);
      read(s, "norms", c.shadowing.norms, p);
      read(s, "direction", c.shadowing.direction, p);
      read(s, "samples", c.shadowing.samples, p);
      read(s, "window", c.shadowing.search.window, p);
      read(s, "grid_step", c.shadowing.search.grid_step, p);
      read(s, "tolerance", c.shadowing.search.tolerance, p);
      read(s, "max_sweeps", c.shadowing.search.max_sweeps, p);
      read(s, "shift_factor", c.shadowing.search.shift_factor, p);
      read(s, "min_exponent", c.shadowing.min_exponent, p);
    }
    if (e.contains("bounds")) {
      const Json& b = e["bounds"];
      const std::string p = "experiments.bounds";
      check_keys(b, {"E1", "E2", "delta", "shells", "base_points", "b0", "t"}, p);
      read(b, "E1", c.bounds.spec.E1, p);
      read(b, "E2", c.bounds.spec.E2, p);
      read(b, "delta", c.bounds.spec.delta, p);
      read(b, "shells", c.bounds.spec.shells, p);
      read(b, "base_points", c.bounds.spec.base_points, p);
      read(b, "b0", c.bounds.b0, p);
      read(b, "t", c.bounds.t, p);
    }
  }
  c.integrator.validate();
  c.quadrature.validate();
  if (c.threads == 0) throw ConfigError("threads must be positive", "threads");
  return c;
}

inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("cannot parse ") + origin + ": " + e.what());
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

inline RunConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

/// 64-bit FNV-1a of a string, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

/// The configuration without settings that cannot change results (output directory, workers).
inline Json result_relevant_json(const RunConfig& c) {
  Json j = to_json(c);
  j.erase("output");
  j.erase("threads");
  return j;
}

/// Hash of the canonical serialization of the result-relevant configuration.
inline std::string config_hash(const RunConfig& c) { return fnv1a_hex(result_relevant_json(c).dump()); }

/// Surface from a JSON document: {"name", "generators": [[a, b, c, d], ...], "relator": [...],
/// "area"}.
inline FuchsianSurface surface_from_json(const Json& j) {
  detail::check_keys(j, {"name", "generators", "relator", "area"}, "surface");
  std::string name = "custom";
  std::vector<int> relator;
  double area = 0.0;
  detail::read(j, "name", name, "surface");
  detail::read(j, "relator", relator, "surface");
  detail::read(j, "area", area, "surface");
  if (!j.contains("generators") || !j["generators"].is_array())
    throw ConfigError("expected an array of [a, b, c, d]", "surface.generators");
  std::vector<MoebiusMap> gens;
  for (const auto& g : j["generators"]) {
    if (!g.is_array() || g.size() != 4) throw ConfigError("expected [a, b, c, d]", "surface.generators");
    gens.push_back({g[0].get<double>(), g[1].get<double>(), g[2].get<double>(), g[3].get<double>()});
  }
  return make_surface(name, gens, relator, area);
}

inline FuchsianSurface load_surface(const std::string& spec) {
  if (spec == "bolza") return build_bolza();
  return surface_from_json(read_json_file(spec));
}

}  // namespace horoflow
