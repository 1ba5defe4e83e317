#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nystrom/core/errors.hpp"
#include "nystrom/core/parallel.hpp"
#include "nystrom/core/types.hpp"
#include "nystrom/geometry.hpp"
#include "nystrom/kernels.hpp"
#include "nystrom/quadrature.hpp"
#include "nystrom/trig.hpp"

namespace nystrom::solver {

using quadrature::Variant;
using quadrature::VariantKind;

struct PlaneWave {
  Vec3 direction{0.0, 0.0, 1.0};
  double kappa = 1.0;

  Complex operator()(const Vec3& x) const { return std::polar(1.0, kappa * dot(direction, x)); }
};

// Unknowns of every chart, phi^j_l for l in Omega^j_h, chart-major.
struct DiscreteDensity {
  std::vector<std::vector<Complex>> charts;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& c : charts) n += c.size();
    return n;
  }
};

struct OperatorOptions {
  double alpha = 0.5;
  double theta_factor = 2.0;
  Variant variant = Variant::base();
  // Drops both kernel parts; the operator reduces to phi / 2.
  bool kernels_off = false;
};

// The left-hand side of the discrete Nystrom equations:
// phi/2 + sum_j (trapezoidal regular sum + L^{ij} R_{N_j}(omega^j phi^j)) at x^i_l.
class NystromOperator {
 public:
  NystromOperator(const geometry::Atlas& atlas, kernels::ScatteringParams params, double delta, std::vector<int> N,
                  OperatorOptions opts = {})
      : atlas_(atlas), split_(params, atlas.cutoff(), delta), N_(std::move(N)), opts_(opts) {
    if (static_cast<int>(N_.size()) != atlas_.size()) throw ParameterError("NystromOperator: one N per chart required");
    if (opts_.variant.kind == VariantKind::hermite && (opts_.variant.m < 1 || opts_.variant.d < 1)) {
      throw ParameterError("NystromOperator: Hermite variant needs m >= 1 and d >= 1");
    }
    offsets_.push_back(0);
    for (int j = 0; j < atlas_.size(); ++j) {
      rules_.push_back(quadrature::make_polar_rule(N_[j], opts_.alpha, opts_.theta_factor));
      grids_.push_back(geometry::grid(atlas_, j, N_[j]));
      offsets_.push_back(offsets_.back() + grids_.back().size());
    }
    const std::size_t n = size();
    sx_.resize(n);
    sn_.resize(n);
    sw_.resize(n);
    std::vector<quadrature::PlanTarget> targets;
    targets.reserve(n);
    for (int j = 0; j < atlas_.size(); ++j) {
      const auto& g = grids_[j];
      for (std::size_t m = 0; m < g.size(); ++m) {
        const std::size_t k = offsets_[j] + m;
        sx_[k] = g.points[m];
        sn_[k] = g.normals[m];
        sw_[k] = g.h * g.h * g.jacobians[m] * g.omega[m];
        targets.push_back({j, g.params[m], g.points[m]});
      }
    }
    if (!opts_.kernels_off) plan_ = quadrature::build_singular_plan(atlas_, split_, rules_, targets, opts_.variant);
  }

  std::size_t size() const { return offsets_.back(); }
  int charts() const { return atlas_.size(); }
  const geometry::Atlas& atlas() const { return atlas_; }
  const kernels::KernelSplit& split() const { return split_; }
  const kernels::ScatteringParams& params() const { return split_.params; }
  double delta() const { return split_.delta; }
  const std::vector<int>& orders() const { return N_; }
  const OperatorOptions& options() const { return opts_; }
  const quadrature::PolarRule& rule(int j) const { return rules_[j]; }
  const geometry::ChartGrid& grid(int j) const { return grids_[j]; }
  std::size_t offset(int j) const { return offsets_[j]; }
  const quadrature::SingularPlan& plan() const { return plan_; }
  const std::vector<Vec3>& points() const { return sx_; }
  const std::vector<Vec3>& normals() const { return sn_; }
  // h_j^2 a^j omega^j at every unknown.
  const std::vector<double>& source_weights() const { return sw_; }

  DiscreteDensity split_density(const std::vector<Complex>& flat) const {
    check_size(flat);
    DiscreteDensity d;
    for (int j = 0; j < charts(); ++j) {
      d.charts.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(offsets_[j]),
                            flat.begin() + static_cast<std::ptrdiff_t>(offsets_[j + 1]));
    }
    return d;
  }

  std::vector<Complex> flatten(const DiscreteDensity& d) const {
    if (static_cast<int>(d.charts.size()) != charts()) throw ParameterError("density has wrong number of charts");
    std::vector<Complex> flat;
    flat.reserve(size());
    for (int j = 0; j < charts(); ++j) {
      if (d.charts[j].size() != grids_[j].size()) throw ParameterError("density shape does not match Omega^j_h");
      flat.insert(flat.end(), d.charts[j].begin(), d.charts[j].end());
    }
    return flat;
  }

  std::vector<Complex> apply(const std::vector<Complex>& phi) const {
    check_size(phi);
    std::vector<Complex> out(size());
    for (std::size_t k = 0; k < size(); ++k) out[k] = 0.5 * phi[k];
    if (opts_.kernels_off) return out;
    const auto reg = apply_regular_part(phi);
    const auto sing = apply_singular_part(phi);
    for (std::size_t k = 0; k < size(); ++k) out[k] += reg[k] + sing[k];
    return out;
  }

  DiscreteDensity apply(const DiscreteDensity& phi) const { return split_density(apply(flatten(phi))); }

  // sum_j h_j^2 sum_m K_reg(x_t, x_m) a_m omega_m phi_m, for every unknown t.
  std::vector<Complex> apply_regular_part(const std::vector<Complex>& phi) const {
    check_size(phi);
    return regular_sum(sx_, phi);
  }

  // Regular sums at arbitrary surface points.
  std::vector<Complex> regular_sum(const std::vector<Vec3>& targets, const std::vector<Complex>& phi) const {
    const std::size_t n = size();
    std::vector<Complex> wphi(n);
    for (std::size_t s = 0; s < n; ++s) wphi[s] = sw_[s] * phi[s];
    const double kappa = split_.params.kappa, eta = split_.params.eta;
    const double Rs2 = split_.support_radius() * split_.support_radius();
    std::vector<Complex> out(targets.size());
    parallel_for(targets.size(), [&](std::size_t t) {
      const Vec3 r = targets[t];
      double acc_re = 0.0, acc_im = 0.0;
      Complex near = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const double dx = r.x - sx_[s].x, dy = r.y - sx_[s].y, dz = r.z - sx_[s].z;
        const double R2 = dx * dx + dy * dy + dz * dz;
        if (R2 < Rs2) {
          near += kernels::kernel_reg(split_, r, sx_[s], sn_[s]) * wphi[s];
          continue;
        }
        const double R = std::sqrt(R2);
        const double inv = 1.0 / R;
        const double d = dx * sn_[s].x + dy * sn_[s].y + dz * sn_[s].z;
        const double a = d * inv * inv;
        const double b = -(kappa * d * inv + eta);
        const double c = std::cos(kappa * R), sn = std::sin(kappa * R);
        const double kr = (c * a - sn * b) * inv, ki = (c * b + sn * a) * inv;
        acc_re += kr * wphi[s].real() - ki * wphi[s].imag();
        acc_im += kr * wphi[s].imag() + ki * wphi[s].real();
      }
      out[t] = kernels::kInv4Pi * Complex(acc_re, acc_im) + near;
    });
    return out;
  }

  // sum_j L^{ij} R_{N_j}(omega^j phi^j) at every unknown, through the plan.
  std::vector<Complex> apply_singular_part(const std::vector<Complex>& phi) const {
    check_size(phi);
    const auto coeffs = line_coefficients(phi);
    std::vector<Complex> out(size());
    parallel_for(size(), [&](std::size_t t) {
      Complex s = 0.0;
      for (std::size_t e = plan_.row_begin[t]; e < plan_.row_begin[t + 1]; ++e) {
        const auto& en = plan_.entries[e];
        const int N = N_[en.chart];
        const auto& src = en.kind == trig::LineKind::vertical ? coeffs[en.chart].first : coeffs[en.chart].second;
        const Complex* c = src.data() + static_cast<std::size_t>(en.q) * N;
        const Complex* w = plan_.weights.data() + en.offset;
        Complex line = 0.0;
        for (int n = 0; n < N; ++n) line += w[n] * c[n];
        s += line;
      }
      out[t] = s;
    });
    return out;
  }

  // R_{N_j}(omega^j phi^j) of every chart.
  std::vector<trig::TrigPoly> density_polys(const std::vector<Complex>& phi) const {
    check_size(phi);
    std::vector<trig::TrigPoly> polys;
    for (int j = 0; j < charts(); ++j) polys.push_back(trig::interpolate_QN(chart_grid_values(j, phi)));
    return polys;
  }

  trig::GridValues chart_grid_values(int j, const std::vector<Complex>& phi) const {
    const std::vector<Complex> local(phi.begin() + static_cast<std::ptrdiff_t>(offsets_[j]),
                                     phi.begin() + static_cast<std::ptrdiff_t>(offsets_[j + 1]));
    return quadrature::zero_extend(grids_[j], local, true);
  }

 private:
  void check_size(const std::vector<Complex>& v) const {
    if (v.size() != size()) throw ParameterError("density size does not match the unknown count");
  }

  std::vector<std::pair<std::vector<Complex>, std::vector<Complex>>> line_coefficients(
      const std::vector<Complex>& phi) const {
    std::vector<std::pair<std::vector<Complex>, std::vector<Complex>>> out;
    for (int j = 0; j < charts(); ++j) {
      const trig::GridValues g = chart_grid_values(j, phi);
      out.emplace_back(trig::all_line_coefficients(g, trig::LineKind::vertical),
                       trig::all_line_coefficients(g, trig::LineKind::horizontal));
    }
    return out;
  }

  geometry::Atlas atlas_;
  kernels::KernelSplit split_;
  std::vector<int> N_;
  OperatorOptions opts_;
  std::vector<quadrature::PolarRule> rules_;
  std::vector<geometry::ChartGrid> grids_;
  std::vector<std::size_t> offsets_;
  std::vector<Vec3> sx_, sn_;
  std::vector<double> sw_;
  quadrature::SingularPlan plan_;
};

inline DiscreteDensity apply_operator(const NystromOperator& op, const DiscreteDensity& phi) { return op.apply(phi); }

struct GmresOptions {
  double tol = 1e-12;
  int restart = 50;
  int max_iterations = 1000;
};

struct GmresResult {
  std::vector<Complex> x;
  int iterations = 0;
  double residual = 0.0;  // relative, ||b - A x|| / ||b||
  std::vector<double> history;
};

template <class ApplyFn>
GmresResult gmres(ApplyFn&& apply, const std::vector<Complex>& b, const GmresOptions& opts) {
  const std::size_t n = b.size();
  auto nrm = [](const std::vector<Complex>& v) {
    double s = 0.0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
  };
  GmresResult res;
  res.x.assign(n, Complex(0.0));
  const double bnorm = nrm(b);
  if (bnorm == 0.0) {
    res.history.push_back(0.0);
    return res;
  }
  const int m = std::max(1, opts.restart);
  std::vector<Complex> r = b;
  double beta = bnorm;
  res.history.push_back(1.0);
  while (true) {
    std::vector<std::vector<Complex>> V;
    V.reserve(m + 1);
    std::vector<Complex> v0(n);
    for (std::size_t i = 0; i < n; ++i) v0[i] = r[i] / beta;
    V.push_back(std::move(v0));
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    std::vector<Complex> cs(m), sn(m), g(m + 1, Complex(0.0));
    g[0] = beta;
    int k = 0;
    for (; k < m && res.iterations < opts.max_iterations; ++k) {
      std::vector<Complex> w = apply(V[k]);
      ++res.iterations;
      for (int i = 0; i <= k; ++i) {
        Complex hik = 0.0;
        for (std::size_t q = 0; q < n; ++q) hik += std::conj(V[i][q]) * w[q];
        H(i, k) = hik;
        for (std::size_t q = 0; q < n; ++q) w[q] -= hik * V[i][q];
      }
      const double wn = nrm(w);
      H(k + 1, k) = wn;
      // Givens rotations [c s; -conj(s) c] with real c.
      for (int i = 0; i < k; ++i) {
        const Complex t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -std::conj(sn[i]) * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const Complex hk = H(k, k);
      const double a = std::abs(hk);
      const double den = std::hypot(a, wn);
      if (den == 0.0) {
        cs[k] = 1.0;
        sn[k] = 0.0;
      } else if (a == 0.0) {
        cs[k] = 0.0;
        sn[k] = 1.0;
      } else {
        cs[k] = a / den;
        sn[k] = (hk / a) * (wn / den);
      }
      H(k, k) = cs[k] * hk + sn[k] * wn;
      H(k + 1, k) = 0.0;
      g[k + 1] = -std::conj(sn[k]) * g[k];
      g[k] = cs[k] * g[k];
      const double rel = std::abs(g[k + 1]) / bnorm;
      res.history.push_back(rel);
      if (rel <= opts.tol || wn == 0.0) {
        ++k;
        break;
      }
      std::vector<Complex> vk(n);
      for (std::size_t q = 0; q < n; ++q) vk[q] = w[q] / wn;
      V.push_back(std::move(vk));
    }
    // Back substitution for the k x k upper triangle.
    std::vector<Complex> y(k);
    for (int i = k - 1; i >= 0; --i) {
      Complex s = g[i];
      for (int j = i + 1; j < k; ++j) s -= H(i, j) * y[j];
      y[i] = s / H(i, i);
    }
    for (int i = 0; i < k; ++i) {
      for (std::size_t q = 0; q < n; ++q) res.x[q] += y[i] * V[i][q];
    }
    const std::vector<Complex> Ax = apply(res.x);
    for (std::size_t q = 0; q < n; ++q) r[q] = b[q] - Ax[q];
    beta = nrm(r);
    res.residual = beta / bnorm;
    if (res.residual <= opts.tol) return res;
    if (res.iterations >= opts.max_iterations) {
      throw SolverError("gmres: no convergence within " + std::to_string(opts.max_iterations) + " iterations",
                        res.history);
    }
  }
}

inline std::vector<Complex> rhs_plane_wave(const NystromOperator& op, const PlaneWave& inc) {
  std::vector<Complex> b(op.size());
  for (std::size_t k = 0; k < op.size(); ++k) b[k] = -inc(op.points()[k]);
  return b;
}

enum class SolveMethod { gmres, dense };

struct SolveOptions {
  SolveMethod method = SolveMethod::gmres;
  GmresOptions gmres;
  std::size_t dense_cap = 5000;
};

struct NystromSolution {
  std::shared_ptr<const NystromOperator> op;
  PlaneWave incident;
  std::vector<Complex> phi;
  std::vector<trig::TrigPoly> polys;  // R_{N_j}(omega^j phi^j)
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> history;
  double seconds = 0.0;

  DiscreteDensity density() const { return op->split_density(phi); }
};

inline Eigen::MatrixXcd assemble_dense(const NystromOperator& op, std::size_t cap = 5000) {
  const std::size_t n = op.size();
  if (n > cap) throw ResourceError("assemble_dense: unknown count " + std::to_string(n) + " exceeds cap");
  Eigen::MatrixXcd A(n, n);
  std::vector<Complex> e(n, Complex(0.0));
  for (std::size_t k = 0; k < n; ++k) {
    e[k] = 1.0;
    const auto col = op.apply(e);
    for (std::size_t i = 0; i < n; ++i) A(i, k) = col[i];
    e[k] = 0.0;
  }
  return A;
}

inline NystromSolution solve(std::shared_ptr<const NystromOperator> op, const PlaneWave& inc,
                             const std::vector<Complex>& rhs, const SolveOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  NystromSolution sol;
  sol.op = op;
  sol.incident = inc;
  if (opts.method == SolveMethod::dense) {
    const Eigen::MatrixXcd A = assemble_dense(*op, opts.dense_cap);
    Eigen::VectorXcd b(rhs.size());
    for (std::size_t i = 0; i < rhs.size(); ++i) b[i] = rhs[i];
    const Eigen::VectorXcd x = A.partialPivLu().solve(b);
    sol.phi.assign(x.data(), x.data() + x.size());
    const double bn = b.norm();
    sol.residual = bn > 0.0 ? (A * x - b).norm() / bn : 0.0;
    sol.history = {sol.residual};
  } else {
    GmresResult r = gmres([&](const std::vector<Complex>& v) { return op->apply(v); }, rhs, opts.gmres);
    sol.phi = std::move(r.x);
    sol.iterations = r.iterations;
    sol.residual = r.residual;
    sol.history = std::move(r.history);
  }
  sol.polys = op->density_polys(sol.phi);
  sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

inline NystromSolution solve(std::shared_ptr<const NystromOperator> op, const PlaneWave& inc,
                             const SolveOptions& opts = {}) {
  return solve(op, inc, rhs_plane_wave(*op, inc), opts);
}

// Singular sums L^{ij} R(omega^j phi^j) at an arbitrary parameter point of chart i.
inline Complex singular_sum_at(const NystromSolution& sol, int i, UV u) {
  const NystromOperator& op = *sol.op;
  const geometry::Atlas& atlas = op.atlas();
  const Vec3 x = atlas.chart(i).point(u);
  Complex s = 0.0;
  for (int j = 0; j < op.charts(); ++j) {
    if (!quadrature::in_singular_region(atlas, j, x, op.delta())) continue;
    const std::vector<UV> t{u};
    const auto& v = op.options().variant;
    const auto val = v.kind == VariantKind::base
                         ? quadrature::apply_singular_L(op.split(), atlas, i, j, op.rule(j), sol.polys[j], t)
                         : quadrature::apply_singular_hermite(op.split(), atlas, i, j, op.rule(j), sol.polys[j], v.m,
                                                              v.d, t);
    s += val[0];
  }
  return s;
}

// psi^i_h(u) = -2 (regular + singular sums at u) - 2 U^inc(r^i(u)).
inline Complex reconstruct(const NystromSolution& sol, int i, UV u) {
  const NystromOperator& op = *sol.op;
  if (!op.atlas().chart(i).domain().contains(u)) throw DomainError("reconstruct: u outside D^i");
  const Vec3 x = op.atlas().chart(i).point(u);
  Complex total = 0.0;
  if (!op.options().kernels_off) {
    total += op.regular_sum({x}, sol.phi)[0];
    total += singular_sum_at(sol, i, u);
  }
  return -2.0 * total - 2.0 * sol.incident(x);
}

// psi_h(r) = sum_j omega^j(r) psi^j_h((r^j)^{-1}(r)).
inline Complex assemble_psi(const NystromSolution& sol, const Vec3& r) {
  const geometry::Atlas& atlas = sol.op->atlas();
  if (atlas.surface_residual(r) > 1e-10) throw DomainError("assemble_psi: point is not on the surface");
  Complex total = 0.0;
  for (int j = 0; j < atlas.size(); ++j) {
    const double w = atlas.omega(j, r);
    if (w == 0.0) continue;
    const auto u = atlas.locate(j, r);
    if (!u || !atlas.chart(j).domain().contains(*u)) throw DomainError("assemble_psi: chart inversion failed");
    total += w * reconstruct(sol, j, *u);
  }
  return total;
}

// Combined potential sum_j h_j^2 sum_m [dPhi/dnu' - i eta Phi](x, x_m) a_m omega_m phi_m.
inline Complex evaluate_potential(const NystromSolution& sol, const Vec3& x) {
  const NystromOperator& op = *sol.op;
  double hmin_dist = std::numeric_limits<double>::infinity();
  double spacing = 0.0;
  for (int j = 0; j < op.charts(); ++j) {
    spacing = std::max(spacing, op.grid(j).h * op.atlas().chart(j).angle_scale() *
                                    *std::max_element(op.atlas().semiaxes().begin(), op.atlas().semiaxes().end()));
  }
  const auto& pts = op.points();
  for (const auto& p : pts) hmin_dist = std::min(hmin_dist, norm(x - p));
  if (hmin_dist <= 2.0 * spacing) throw DomainError("evaluate_potential: point too close to the surface");
  const auto& w = op.source_weights();
  Complex s = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    s += kernels::kernel_K(x, pts[k], op.normals()[k], op.params()) * (w[k] * sol.phi[k]);
  }
  return s;
}

}  // namespace nystrom::solver
