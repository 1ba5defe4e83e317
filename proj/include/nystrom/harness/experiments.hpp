#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "nystrom/core/errors.hpp"
#include "nystrom/geometry.hpp"
#include "nystrom/harness/config.hpp"
#include "nystrom/harness/report.hpp"
#include "nystrom/oracle.hpp"
#include "nystrom/quadrature.hpp"
#include "nystrom/solver.hpp"
#include "nystrom/trig.hpp"

#ifndef NYSTROM_GIT_DESCRIBE
#define NYSTROM_GIT_DESCRIBE "unknown"
#endif

namespace nystrom::harness {

// A failed experiment still carries the rows finished before the failure.
class ExperimentError : public Error {
 public:
  ExperimentError(const std::string& what, Report partial) : Error(what), report(std::move(partial)) {}
  Report report;
};

// n quasi-uniform points on the sphere of the given radius (Fibonacci lattice).
inline std::vector<Vec3> probe_points(int n, double radius) {
  std::vector<Vec3> pts;
  pts.reserve(n);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double ph = k * golden;
    pts.push_back({radius * r * std::cos(ph), radius * r * std::sin(ph), radius * z});
  }
  return pts;
}

struct FieldError {
  double l2 = 0.0;    // relative discrete L2 over the probes
  double linf = 0.0;  // max |u - u_ref| / max |u_ref|
};

inline FieldError field_error(const std::vector<Complex>& u, const std::vector<Complex>& ref) {
  double num = 0.0, den = 0.0, emax = 0.0, rmax = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    num += std::norm(u[k] - ref[k]);
    den += std::norm(ref[k]);
    emax = std::max(emax, std::abs(u[k] - ref[k]));
    rmax = std::max(rmax, std::abs(ref[k]));
  }
  return {std::sqrt(num / den), emax / rmax};
}

// sqrt(sum_j ||p_j||_0^2) over per-chart trigonometric polynomials.
inline double chartwise_l2(const std::vector<trig::TrigPoly>& polys) {
  double s = 0.0;
  for (const auto& p : polys) s += std::pow(trig::sobolev_norm(p, 0.0), 2);
  return std::sqrt(s);
}

// ||Q_N(omega^j (phi - psi))||_0 with psi the exact sphere density at the nodes.
inline double density_error_vs_exact(const solver::NystromSolution& sol, const oracle::MieSeries& mie) {
  const auto& op = *sol.op;
  std::vector<Complex> diff(op.size());
  for (std::size_t k = 0; k < op.size(); ++k) diff[k] = sol.phi[k] - mie.density(op.points()[k]);
  return chartwise_l2(op.density_polys(diff));
}

inline double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline Report make_report(const ExperimentConfig& cfg, std::string kind, std::vector<std::string> columns) {
  Report r;
  r.kind = std::move(kind);
  r.columns = std::move(columns);
  r.config = cfg.snapshot();
  r.git_describe = NYSTROM_GIT_DESCRIBE;
  r.seed = cfg.seed;
  return r;
}

struct SolveRun {
  solver::NystromSolution sol;
  double delta = 0.0;
  int Theta = 0;
  double seconds = 0.0;
};

inline SolveRun run_single(const ExperimentConfig& cfg, const geometry::Atlas& atlas, int n,
                           solver::OperatorOptions opts) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveRun run;
  run.delta = cfg.delta_for(atlas, n);
  auto op = std::make_shared<solver::NystromOperator>(atlas, cfg.params(), run.delta,
                                                      std::vector<int>(atlas.size(), n), opts);
  run.Theta = op->rule(0).Theta;
  run.sol = solver::solve(op, solver::PlaneWave{cfg.direction, cfg.kappa}, cfg.solve_options());
  run.seconds = elapsed(t0);
  return run;
}

// Solve for every N, measure the exterior field at the probe sphere against the
// Mie series (sphere) or the finest N (other shapes).
inline Report run_convergence(const ExperimentConfig& cfg, const std::string& kind = "converge") {
  cfg.validate();
  const geometry::Atlas atlas = cfg.build_atlas();
  const bool sphere = cfg.geometry == "sphere" && atlas.is_sphere();
  Report rep = make_report(cfg, kind, convergence_columns());
  rep.extra["delta0"] = atlas.delta0();
  rep.extra["gap"] = atlas.gap();
  rep.extra["error_reference"] = sphere ? "mie" : "finest";
  const auto probes = probe_points(cfg.probes, cfg.probe_radius);
  const auto surface = probe_points(cfg.probes, 1.0);
  std::vector<Complex> exact;
  std::unique_ptr<oracle::MieSeries> mie;
  if (sphere) {
    mie = std::make_unique<oracle::MieSeries>(cfg.kappa, cfg.eta, cfg.direction);
    for (const auto& x : probes) exact.push_back(mie->scattered(x));
  }
  std::vector<std::vector<Complex>> fields, psis;
  nlohmann::json details = nlohmann::json::array();
  try {
    for (int n : cfg.N) {
      SolveRun run = run_single(cfg, atlas, n, cfg.operator_options(n));
      std::vector<Complex> u;
      for (const auto& x : probes) u.push_back(solver::evaluate_potential(run.sol, x));
      std::vector<Complex> psi;
      if (sphere) {
        for (const auto& x : surface) psi.push_back(solver::assemble_psi(run.sol, x));
      }
      nlohmann::json d = {{"N", n}, {"gmres_residual", run.sol.residual}};
      if (sphere) d["density_error"] = density_error_vs_exact(run.sol, *mie);
      details.push_back(d);
      fields.push_back(std::move(u));
      psis.push_back(std::move(psi));
      const double h = 1.0 / n;
      rep.rows.push_back({double(n), h, run.delta, double(run.Theta), double(run.sol.op->size()), std::nan(""),
                          std::nan(""), std::nan(""), std::nan(""), double(run.sol.iterations),
                          cfg.timing ? run.seconds : 0.0});
    }
  } catch (const SolverError& e) {
    rep.status = std::string("failed: ") + e.what();
    rep.extra["runs"] = details;
    throw ExperimentError(e.what(), rep);
  }
  const std::size_t R = rep.rows.size();
  for (std::size_t i = 0; i < R; ++i) {
    FieldError fe{std::nan(""), std::nan("")};
    if (sphere) {
      fe = field_error(fields[i], exact);
    } else if (i + 1 < R) {
      fe = field_error(fields[i], fields.back());
    }
    rep.rows[i][5] = fe.l2;
    rep.rows[i][6] = fe.linf;
    if (sphere && i + 1 < R) {
      // Surface density against the finest run, at the probe directions.
      double num = 0.0, den = 0.0;
      for (std::size_t k = 0; k < surface.size(); ++k) {
        num += std::norm(psis[i][k] - psis.back()[k]);
        den += std::norm(psis.back()[k]);
      }
      details[i]["density_self_error"] = std::sqrt(num / den);
    }
  }
  for (std::size_t i = 1; i < R; ++i) {
    rep.rows[i][7] = observed_order(rep.rows[i - 1][5], rep.rows[i][5], rep.rows[i - 1][0], rep.rows[i][0]);
    rep.rows[i][8] = observed_order(rep.rows[i - 1][6], rep.rows[i][6], rep.rows[i - 1][0], rep.rows[i][0]);
  }
  rep.extra["runs"] = details;
  return rep;
}

// A single solve at the largest N; the row carries no orders.
inline Report run_solve(const ExperimentConfig& cfg) {
  ExperimentConfig one = cfg;
  one.N = {cfg.N.back()};
  return run_convergence(one, "solve");
}

// ---------------------------------------------------------------------------
// Polar quadrature rate study

inline double quad_bump(double t) {
  const double a = std::abs(t);
  if (a >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - a * a));
}

// Random member of T_N with iid complex normal coefficients, scaled to ||xi||_r = 1.
inline trig::TrigPoly random_trig_poly(int N, double r, unsigned long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  trig::TrigPoly p(N);
  for (auto& c : p.coefficients()) {
    const double re = g(rng);
    const double im = g(rng);
    c = {re, im};
  }
  const double s = trig::sobolev_norm(p, r);
  for (auto& c : p.coefficients()) c /= s;
  return p;
}

inline const std::vector<std::string>& quadtest_cases() {
  static const std::vector<std::string> c = {"zero", "one", "mode21", "random"};
  return c;
}

// Least-squares slope of -log(e) against log(N).
inline double fitted_order(const std::vector<double>& N, const std::vector<double>& e) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < N.size(); ++i) {
    if (!(e[i] > 0.0)) continue;
    const double x = std::log(N[i]), y = -std::log(e[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::nan("");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Quadrature error of Q_{h,k,gamma} on chi_delta xi_N for a radial bump chi_delta,
// gamma aligned with the grid lines through a fixed off-grid center. The exact
// integral is sum_m c_m e_m(z) 4 pi int_0^delta b(s/delta) J_0(2 pi s |m|) ds.
inline Report run_quadtest(const ExperimentConfig& cfg) {
  cfg.validate();
  Report rep = make_report(cfg, "quadtest",
                           {"N", "h", "delta", "Theta", "case", "error", "reference", "bound", "ratio", "norm0",
                            "norm_r"});
  const UV z{0.3710, 0.6085};
  std::map<std::string, std::vector<double>> errs, ratios;
  std::vector<double> Ns;
  for (int N : cfg.N) {
    const double h = 1.0 / N;
    const double delta = cfg.quad_delta_coeff * std::pow(h, cfg.beta);
    if (!(delta < 0.5) || !(h < delta)) {
      throw ConfigError("quadtest: need h < delta < 1/2, got delta = " + detail::fmt17(delta));
    }
    const quadrature::PolarRule rule = quadrature::make_polar_rule(N, cfg.alpha, cfg.theta_factor);
    auto chi = [&](double rho, double) { return quad_bump(rho / delta); };
    auto gamma = [&](double th) {
      return quadrature::branch(th) == trig::LineKind::vertical ? -z.u1 / std::cos(th) : -z.u2 / std::sin(th);
    };
    std::map<long, Complex> radial;
    auto mode_integral = [&](int m1, int m2) {
      const long key = long(m1) * m1 + long(m2) * m2;
      auto it = radial.find(key);
      if (it == radial.end()) {
        const auto res = oracle::radial_mode_integral(quad_bump, delta, std::sqrt(double(key)), 1e-14);
        it = radial.emplace(key, res.value).first;
      }
      return it->second;
    };
    Ns.push_back(N);
    for (std::size_t c = 0; c < quadtest_cases().size(); ++c) {
      const std::string& name = quadtest_cases()[c];
      // Low modes live in a small T_M; their values are those of the same member of T_N.
      trig::TrigPoly xi;
      if (name == "zero") {
        xi = trig::TrigPoly(4);
      } else if (name == "one") {
        xi = trig::TrigPoly::mode(4, 0, 0);
      } else if (name == "mode21") {
        xi = trig::TrigPoly::mode(8, 2, 1);
      } else {
        xi = random_trig_poly(N, cfg.quad_r, cfg.seed + static_cast<unsigned long>(N));
      }
      Complex exact = 0.0;
      const int lo = xi.mmin();
      for (int m1 = lo; m1 < lo + xi.N(); ++m1) {
        for (int m2 = lo; m2 < lo + xi.N(); ++m2) {
          const Complex a = xi.coef(m1, m2);
          if (a == 0.0) continue;
          exact += a * trig::cis2pi(m1 * z.u1 + m2 * z.u2) * mode_integral(m1, m2);
        }
      }
      const Complex q = quadrature::quad_Qhkg(chi, delta, xi, gamma, h, rule.k, z);
      const double err = std::abs(q - exact);
      const double n0 = trig::sobolev_norm(xi, 0.0);
      const double nr = trig::sobolev_norm(xi, cfg.quad_r);
      const double bound = h / delta * std::abs(std::log(h)) + delta;
      const double ratio = n0 > 0.0 ? err / (bound * n0) : std::nan("");
      rep.rows.push_back({double(N), h, delta, double(rule.Theta), double(c), err, std::abs(exact), bound, ratio, n0,
                          nr});
      errs[name].push_back(err);
      ratios[name].push_back(ratio);
    }
  }
  nlohmann::json fits = nlohmann::json::object();
  for (const auto& name : quadtest_cases()) {
    if (name == "zero") continue;
    const auto& rs = ratios[name];
    const double mx = *std::max_element(rs.begin(), rs.end());
    const double mn = *std::min_element(rs.begin(), rs.end());
    fits[name] = {{"fitted_order", fitted_order(Ns, errs[name])}, {"ratio_spread", mx / mn}};
  }
  rep.extra["cases"] = quadtest_cases();
  rep.extra["fits"] = fits;
  rep.extra["center"] = {z.u1, z.u2};
  rep.extra["predicted_order"] = cfg.quad_r - (cfg.quad_r - 1.0) * cfg.beta;
  return rep;
}

// ---------------------------------------------------------------------------
// Hermite variant against the base scheme

struct HermiteStudy {
  std::vector<int> M;
  std::vector<double> errors;
  double order = 0.0;
};

// Piecewise Hermite interpolation of degree 2d+1 of a smooth periodic function,
// max error on a fine sample for each mesh 1/M, and the fitted order.
inline HermiteStudy hermite_interpolation_study(int d, std::vector<int> Ms = {8, 16, 32, 64}) {
  auto deriv = [](int r, double y) {
    Complex s = 0.0;
    for (int m = -3; m <= 3; ++m) s += std::pow(Complex(0.0, kTwoPi * m), r) / (1.0 + m * m) * trig::cis2pi(m * y);
    return s;
  };
  HermiteStudy st;
  st.M = Ms;
  std::vector<double> Nd;
  for (int M : Ms) {
    const double k = 1.0 / M;
    std::vector<std::vector<Complex>> data(M + 1);
    for (int p = 0; p <= M; ++p) {
      for (int r = 0; r <= d; ++r) data[p].push_back(deriv(r, p * k));
    }
    const auto H = trig::hermite_interpolate(data, k, d);
    double e = 0.0;
    for (int s = 0; s <= 4000; ++s) {
      const double y = s / 4000.0;
      e = std::max(e, std::abs(trig::hermite_eval(H, y) - deriv(0, y)));
    }
    st.errors.push_back(e);
    Nd.push_back(M);
  }
  st.order = fitted_order(Nd, st.errors);
  return st;
}

inline Report run_hermite_compare(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.geometry != "sphere") throw ConfigError("hermite-compare: needs the sphere for its oracle errors");
  const geometry::Atlas atlas = cfg.build_atlas();
  const oracle::MieSeries mie(cfg.kappa, cfg.eta, cfg.direction);
  const auto probes = probe_points(cfg.probes, cfg.probe_radius);
  std::vector<Complex> exact;
  for (const auto& x : probes) exact.push_back(mie.scattered(x));
  Report rep = make_report(cfg, "hermite-compare",
                           {"N", "h", "delta", "m", "d", "unknowns", "gap", "base_error", "hermite_error",
                            "base_field_error", "hermite_field_error", "flag", "base_seconds", "hermite_seconds"});
  auto field = [&](const solver::NystromSolution& sol) {
    std::vector<Complex> u;
    for (const auto& x : probes) u.push_back(solver::evaluate_potential(sol, x));
    return field_error(u, exact).l2;
  };
  try {
    for (int n : cfg.N) {
      solver::OperatorOptions base = cfg.operator_options(n);
      base.variant = solver::Variant::base();
      solver::OperatorOptions herm = base;
      const int m = cfg.hermite_m_for(n);
      herm.variant = solver::Variant::hermite(m, cfg.hermite_d);
      const SolveRun b = run_single(cfg, atlas, n, base);
      const SolveRun hr = run_single(cfg, atlas, n, herm);
      std::vector<Complex> diff(b.sol.phi.size());
      for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = hr.sol.phi[k] - b.sol.phi[k];
      const double gap = chartwise_l2(b.sol.op->density_polys(diff));
      const double eb = density_error_vs_exact(b.sol, mie);
      const double eh = density_error_vs_exact(hr.sol, mie);
      rep.rows.push_back({double(n), 1.0 / n, b.delta, double(m), double(cfg.hermite_d), double(b.sol.op->size()), gap,
                          eb, eh, field(b.sol), field(hr.sol), gap >= eb ? 1.0 : 0.0,
                          cfg.timing ? b.seconds : 0.0, cfg.timing ? hr.seconds : 0.0});
    }
  } catch (const SolverError& e) {
    rep.status = std::string("failed: ") + e.what();
    throw ExperimentError(e.what(), rep);
  }
  const HermiteStudy st = hermite_interpolation_study(cfg.hermite_d);
  rep.extra["interpolation"] = {{"d", cfg.hermite_d}, {"M", st.M}, {"errors", st.errors}, {"fitted_order", st.order},
                                {"expected_order", 2 * cfg.hermite_d + 2}};
  return rep;
}

}  // namespace nystrom::harness
