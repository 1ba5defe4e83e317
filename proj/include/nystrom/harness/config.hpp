#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nystrom/core/errors.hpp"
#include "nystrom/core/types.hpp"
#include "nystrom/geometry.hpp"
#include "nystrom/kernels.hpp"
#include "nystrom/solver.hpp"

namespace nystrom::harness {

// Flat key=value configuration. Every key has a default; unknown keys are errors.
struct ExperimentConfig {
  std::string geometry = "sphere";  // sphere | ellipsoid
  std::array<double, 3> semiaxes{1.0, 1.0, 1.0};
  double overlap = 0.49;
  geometry::AtlasOptions atlas;

  double kappa = 1.0;
  double eta = 1.0;
  Vec3 direction{0.0, 0.0, 1.0};

  std::vector<int> N{16, 24, 32, 48};
  double beta = 1.0 / 3.0;
  double alpha = 0.5;
  double theta_factor = 2.0;
  // delta = min(delta0, delta_coeff h^beta); 0 picks the coefficient that makes
  // delta = delta0 on the coarsest grid.
  double delta_coeff = 0.0;

  std::string variant = "base";  // base | hermite
  int hermite_d = 2;
  int hermite_m = 0;  // 0: smallest m with m^{-(2d+2)} <= h^{1-beta+r}
  double hermite_r = 1.0;

  std::string method = "gmres";  // gmres | dense
  double gmres_tol = 1e-12;
  int gmres_restart = 50;
  int gmres_max_iter = 1000;

  int probes = 200;
  double probe_radius = 2.0;

  // Quadrature-rate study.
  double quad_delta_coeff = 1.0;
  double quad_r = 4.0;

  unsigned long seed = 1;
  bool timing = true;
  std::string output_csv;
  std::string output_json;

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {
        "geometry", "semiaxes", "overlap", "eps0", "eps1", "margin", "support_fraction", "delta0_factor",
        "plateau_bump", "ramp_steepness", "cutoff_steepness", "kappa", "eta", "direction", "N", "beta", "alpha",
        "theta_factor", "delta_coeff", "variant", "hermite_d", "hermite_m", "hermite_r", "method", "gmres_tol",
        "gmres_restart", "gmres_max_iter", "probes", "probe_radius", "quad_delta_coeff", "quad_r", "seed", "timing",
        "output_csv", "output_json"};
    return k;
  }

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;

  std::map<std::string, std::string> snapshot() const {
    std::map<std::string, std::string> s;
    for (const auto& k : keys()) s[k] = get(k);
    return s;
  }

  kernels::ScatteringParams params() const { return {kappa, eta}; }

  geometry::Atlas build_atlas() const {
    if (geometry == "sphere") return geometry::build_sphere_atlas(overlap, atlas);
    return geometry::build_ellipsoid_atlas(semiaxes, overlap, atlas);
  }

  double delta_for(const geometry::Atlas& a, int n) const {
    const double h = 1.0 / n;
    const double c = delta_coeff > 0.0 ? delta_coeff : a.delta0() * std::pow(static_cast<double>(N.front()), beta);
    return std::min(a.delta0(), c * std::pow(h, beta));
  }

  int hermite_m_for(int n) const {
    if (hermite_m > 0) return hermite_m;
    const double h = 1.0 / n;
    const double e = (1.0 - beta + hermite_r) / (2.0 * hermite_d + 2.0);
    // Guard against pow landing a hair above an integer.
    return std::max(1, static_cast<int>(std::ceil(std::pow(h, -e) - 1e-12)));
  }

  solver::OperatorOptions operator_options(int n) const {
    solver::OperatorOptions o;
    o.alpha = alpha;
    o.theta_factor = theta_factor;
    if (variant == "hermite") o.variant = solver::Variant::hermite(hermite_m_for(n), hermite_d);
    return o;
  }

  solver::SolveOptions solve_options() const {
    solver::SolveOptions o;
    o.method = method == "dense" ? solver::SolveMethod::dense : solver::SolveMethod::gmres;
    o.gmres = {gmres_tol, gmres_restart, gmres_max_iter};
    return o;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

inline long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + key + "' expects true or false, got '" + v + "'");
}

inline std::array<double, 3> to_triple(const std::string& key, const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() != 3) throw ConfigError("config: '" + key + "' expects three comma-separated numbers");
  return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
}

// %.17g keeps every double lossless.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = trim(raw);
  if (key == "geometry") {
    geometry = v;
  } else if (key == "semiaxes") {
    semiaxes = to_triple(key, v);
  } else if (key == "overlap") {
    overlap = to_double(key, v);
  } else if (key == "eps0") {
    atlas.eps0 = to_double(key, v);
  } else if (key == "eps1") {
    atlas.eps1 = to_double(key, v);
  } else if (key == "margin") {
    atlas.margin = to_double(key, v);
  } else if (key == "support_fraction") {
    atlas.support_fraction = to_double(key, v);
  } else if (key == "delta0_factor") {
    atlas.delta0_factor = to_double(key, v);
  } else if (key == "plateau_bump") {
    atlas.plateau_bump = to_bool(key, v);
  } else if (key == "ramp_steepness") {
    atlas.ramp_steepness = to_double(key, v);
  } else if (key == "cutoff_steepness") {
    atlas.cutoff_steepness = to_double(key, v);
  } else if (key == "kappa") {
    kappa = to_double(key, v);
  } else if (key == "eta") {
    eta = to_double(key, v);
  } else if (key == "direction") {
    const auto t = to_triple(key, v);
    direction = {t[0], t[1], t[2]};
  } else if (key == "N") {
    N.clear();
    for (const auto& p : split_list(v)) N.push_back(static_cast<int>(to_long(key, p)));
  } else if (key == "beta") {
    beta = to_double(key, v);
  } else if (key == "alpha") {
    alpha = to_double(key, v);
  } else if (key == "theta_factor") {
    theta_factor = to_double(key, v);
  } else if (key == "delta_coeff") {
    delta_coeff = to_double(key, v);
  } else if (key == "variant") {
    variant = v;
  } else if (key == "hermite_d") {
    hermite_d = static_cast<int>(to_long(key, v));
  } else if (key == "hermite_m") {
    hermite_m = static_cast<int>(to_long(key, v));
  } else if (key == "hermite_r") {
    hermite_r = to_double(key, v);
  } else if (key == "method") {
    method = v;
  } else if (key == "gmres_tol") {
    gmres_tol = to_double(key, v);
  } else if (key == "gmres_restart") {
    gmres_restart = static_cast<int>(to_long(key, v));
  } else if (key == "gmres_max_iter") {
    gmres_max_iter = static_cast<int>(to_long(key, v));
  } else if (key == "probes") {
    probes = static_cast<int>(to_long(key, v));
  } else if (key == "probe_radius") {
    probe_radius = to_double(key, v);
  } else if (key == "quad_delta_coeff") {
    quad_delta_coeff = to_double(key, v);
  } else if (key == "quad_r") {
    quad_r = to_double(key, v);
  } else if (key == "seed") {
    const long s = to_long(key, v);
    if (s < 0) throw ConfigError("config: seed must be nonnegative");
    seed = static_cast<unsigned long>(s);
  } else if (key == "timing") {
    timing = to_bool(key, v);
  } else if (key == "output_csv") {
    output_csv = v;
  } else if (key == "output_json") {
    output_json = v;
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

inline std::string ExperimentConfig::get(const std::string& key) const {
  using detail::fmt17;
  auto triple = [](double a, double b, double c) { return fmt17(a) + "," + fmt17(b) + "," + fmt17(c); };
  if (key == "geometry") return geometry;
  if (key == "semiaxes") return triple(semiaxes[0], semiaxes[1], semiaxes[2]);
  if (key == "overlap") return fmt17(overlap);
  if (key == "eps0") return fmt17(atlas.eps0);
  if (key == "eps1") return fmt17(atlas.eps1);
  if (key == "margin") return fmt17(atlas.margin);
  if (key == "support_fraction") return fmt17(atlas.support_fraction);
  if (key == "delta0_factor") return fmt17(atlas.delta0_factor);
  if (key == "plateau_bump") return atlas.plateau_bump ? "true" : "false";
  if (key == "ramp_steepness") return fmt17(atlas.ramp_steepness);
  if (key == "cutoff_steepness") return fmt17(atlas.cutoff_steepness);
  if (key == "kappa") return fmt17(kappa);
  if (key == "eta") return fmt17(eta);
  if (key == "direction") return triple(direction.x, direction.y, direction.z);
  if (key == "N") {
    std::string s;
    for (std::size_t i = 0; i < N.size(); ++i) s += (i ? "," : "") + std::to_string(N[i]);
    return s;
  }
  if (key == "beta") return fmt17(beta);
  if (key == "alpha") return fmt17(alpha);
  if (key == "theta_factor") return fmt17(theta_factor);
  if (key == "delta_coeff") return fmt17(delta_coeff);
  if (key == "variant") return variant;
  if (key == "hermite_d") return std::to_string(hermite_d);
  if (key == "hermite_m") return std::to_string(hermite_m);
  if (key == "hermite_r") return fmt17(hermite_r);
  if (key == "method") return method;
  if (key == "gmres_tol") return fmt17(gmres_tol);
  if (key == "gmres_restart") return std::to_string(gmres_restart);
  if (key == "gmres_max_iter") return std::to_string(gmres_max_iter);
  if (key == "probes") return std::to_string(probes);
  if (key == "probe_radius") return fmt17(probe_radius);
  if (key == "quad_delta_coeff") return fmt17(quad_delta_coeff);
  if (key == "quad_r") return fmt17(quad_r);
  if (key == "seed") return std::to_string(seed);
  if (key == "timing") return timing ? "true" : "false";
  if (key == "output_csv") return output_csv;
  if (key == "output_json") return output_json;
  throw ConfigError("config: unknown key '" + key + "'");
}

inline void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (geometry != "sphere" && geometry != "ellipsoid") fail("geometry must be sphere or ellipsoid");
  for (double s : semiaxes) {
    if (!(s > 0.0)) fail("semiaxes must be positive");
  }
  if (!(overlap > 0.0 && overlap < 0.5)) fail("overlap must lie in (0, 1/2)");
  if (!(atlas.eps0 > 0.0 && atlas.eps0 < atlas.eps1 && atlas.eps1 <= 1.0)) fail("need 0 < eps0 < eps1 <= 1");
  if (!(atlas.margin >= 0.0 && atlas.margin < 0.25)) fail("margin must lie in [0, 1/4)");
  if (!(atlas.support_fraction > 0.0 && atlas.support_fraction < 1.0)) fail("support_fraction must lie in (0, 1)");
  if (!(atlas.delta0_factor > 0.0 && atlas.delta0_factor <= 1.0)) fail("delta0_factor must lie in (0, 1]");
  if (!(kappa > 0.0)) fail("kappa must be positive");
  if (!(eta > 0.0)) fail("eta must be positive");
  if (std::abs(norm(direction) - 1.0) > 1e-12) fail("direction must be a unit vector");
  if (N.empty()) fail("N list is empty");
  for (std::size_t i = 0; i < N.size(); ++i) {
    if (N[i] < 4) fail("every N must be at least 4");
    if (i > 0 && N[i] <= N[i - 1]) fail("N list must be strictly increasing");
  }
  if (!(beta > 0.0 && beta < 1.0)) fail("beta must lie in (0, 1), got " + detail::fmt17(beta));
  if (!(alpha > 0.0)) fail("alpha must be positive");
  if (!(theta_factor > 0.0)) fail("theta_factor must be positive");
  if (!(delta_coeff >= 0.0)) fail("delta_coeff must be nonnegative");
  if (variant != "base" && variant != "hermite") fail("variant must be base or hermite");
  if (hermite_d < 1 || hermite_d > 10) fail("hermite_d must lie in 1..10");
  if (hermite_m < 0) fail("hermite_m must be nonnegative");
  if (!(hermite_r >= 0.0)) fail("hermite_r must be nonnegative");
  if (method != "gmres" && method != "dense") fail("method must be gmres or dense");
  if (!(gmres_tol > 0.0 && gmres_tol < 1.0)) fail("gmres_tol must lie in (0, 1)");
  if (gmres_restart < 1) fail("gmres_restart must be positive");
  if (gmres_max_iter < 1) fail("gmres_max_iter must be positive");
  if (probes < 1) fail("probes must be positive");
  if (!(probe_radius > 1.0)) fail("probe_radius must exceed 1");
  if (!(quad_delta_coeff > 0.0)) fail("quad_delta_coeff must be positive");
  if (!(quad_r >= 0.0)) fail("quad_r must be nonnegative");
}

// Parses "key = value" lines; '#' starts a comment.
inline void apply_config_text(ExperimentConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    cfg.set(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  apply_config_text(cfg, ss.str(), path);
}

// One "key=value" override, as given to --set.
inline void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  cfg.set(detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

}  // namespace nystrom::harness
