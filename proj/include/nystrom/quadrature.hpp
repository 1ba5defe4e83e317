#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nystrom/core/errors.hpp"
#include "nystrom/core/parallel.hpp"
#include "nystrom/core/types.hpp"
#include "nystrom/geometry.hpp"
#include "nystrom/kernels.hpp"
#include "nystrom/trig.hpp"

namespace nystrom::quadrature {

using trig::LineKind;

// c(theta) = min(1/|cos|, 1/|sin|).
inline double c_weight(double theta) {
  return 1.0 / std::max(std::abs(std::cos(theta)), std::abs(std::sin(theta)));
}

// Vertical-line branch iff |cos| >= |sin|, i.e. |cos| >= sqrt(2)/2; ties go vertical.
inline LineKind branch(double theta) {
  return std::abs(std::cos(theta)) >= std::abs(std::sin(theta)) ? LineKind::vertical : LineKind::horizontal;
}

struct PolarRule {
  int N = 0;
  double h = 0.0;
  int Theta = 0;
  double k = 0.0;
  double alpha = 0.5;
  std::vector<double> theta, cos_t, sin_t, c;
  std::vector<LineKind> kind;
};

// Theta = round(theta_factor * N^{1 + alpha}) equispaced angles.
inline PolarRule make_polar_rule(int N, double alpha = 0.5, double theta_factor = 2.0) {
  if (N < 4) throw ParameterError("make_polar_rule: N must be at least 4");
  if (!(alpha > 0.0)) throw ParameterError("make_polar_rule: alpha must be positive");
  if (!(theta_factor > 0.0)) throw ParameterError("make_polar_rule: theta_factor must be positive");
  PolarRule r;
  r.N = N;
  r.h = 1.0 / N;
  r.alpha = alpha;
  r.Theta = std::max(4, static_cast<int>(std::lround(theta_factor * std::pow(N, 1.0 + alpha))));
  r.k = kTwoPi / r.Theta;
  for (int p = 0; p < r.Theta; ++p) {
    const double t = p * r.k;
    r.theta.push_back(t);
    r.cos_t.push_back(std::cos(t));
    r.sin_t.push_back(std::sin(t));
    r.c.push_back(c_weight(t));
    r.kind.push_back(branch(t));
  }
  return r;
}

struct RadialNodeSet {
  LineKind kind = LineKind::vertical;
  double c = 1.0;
  std::vector<int> q;
  std::vector<double> rho;
  std::vector<UV> points;
};

// Intersections of the line z + rho e(theta) with the grid lines of the branch
// selected by theta. The on-grid coordinate is stored exactly as q h.
inline RadialNodeSet radial_nodes(UV z, double theta, double h, int N) {
  RadialNodeSet s;
  s.kind = branch(theta);
  s.c = c_weight(theta);
  const double ct = std::cos(theta), st = std::sin(theta);
  for (int q = 0; q < N; ++q) {
    const double g = q * h;
    if (s.kind == LineKind::vertical) {
      const double rho = (g - z.u1) / ct;
      s.q.push_back(q);
      s.rho.push_back(rho);
      s.points.push_back({g, z.u2 + rho * st});
    } else {
      const double rho = (g - z.u2) / st;
      s.q.push_back(q);
      s.rho.push_back(rho);
      s.points.push_back({z.u1 + rho * ct, g});
    }
  }
  return s;
}

// Parameter radius beyond which chart j cannot reach the support of K_sing.
inline double singular_param_radius(const geometry::Atlas& atlas, int j, const kernels::KernelSplit& split) {
  return 1.5 * split.support_radius() / atlas.min_stretch(j);
}

// u in Omega^{ij}_{delta/2}: r^i(u) within eps1 delta of supp omega^j.
inline bool in_singular_region(const geometry::Atlas& atlas, int j, const Vec3& x, double delta) {
  return atlas.distance_to_support(j, x) <= atlas.eps1() * delta;
}

// Center of the polar rule for a target: its chart-j preimage and the chart-j
// image of that preimage (used as r so that r - r' cancels consistently).
struct PolarCenter {
  UV z;
  Vec3 r;
};

inline PolarCenter polar_center(const geometry::Atlas& atlas, int i, int j, UV u) {
  if (i == j) return {u, atlas.chart(j).point(u)};
  const auto z = atlas.locate(j, atlas.chart(i).point(u));
  if (!z) throw NumericalError("polar_center: chart inverse failed");
  return {*z, atlas.chart(j).point(*z)};
}

// Below this distance |rho| K1 is replaced by its rho -> 0 limit; the direct
// formula loses accuracy through cancellation in (r - r').nu'.
inline constexpr double kTinyDistance = 1e-6;

// Weight (h k / 2) c(theta) |rho| K^{j}_sing(r, r^j(v)) a^j(v) of every polar node
// v = z + rho e(theta) with nonzero kernel, passed to visit(kind, q, y, weight)
// where y is the coordinate of v along grid line q. Nodes outside D^j are skipped
// (the chart kernel is extended by zero). At rho = 0 the smooth limit is used.
template <class Visit>
void for_each_polar_node(const geometry::Atlas& atlas, int j, const kernels::KernelSplit& split,
                         const PolarRule& rule, const PolarCenter& center, Visit&& visit,
                         double rho_max = -1.0) {
  const geometry::Chart& chart = atlas.chart(j);
  const geometry::Rect& D = chart.domain();
  const double h = rule.h;
  const int N = rule.N;
  const double Rs = split.support_radius();
  if (rho_max < 0.0) rho_max = singular_param_radius(atlas, j, split);
  const UV z = center.z;
  const Vec3& r = center.r;
  std::optional<geometry::SurfaceJet> zjet;
  const double base = 0.5 * h * rule.k;

  auto limit_value = [&](double ct, double st) {
    if (!zjet) zjet = chart.jet(z);
    const Vec3 Je = ct * zjet->t1 + st * zjet->t2;
    const Vec3 eHe = (ct * ct) * zjet->h11 + (2.0 * ct * st) * zjet->h12 + (st * st) * zjet->h22;
    return zjet->jacobian * kernels::polar_K1_limit(Je, eHe, zjet->normal, split.params);
  };

  for (int p = 0; p < rule.Theta; ++p) {
    const double ct = rule.cos_t[p], st = rule.sin_t[p], c = rule.c[p];
    const LineKind kind = rule.kind[p];
    const double reach = rho_max + c * h;
    const double zc = kind == LineKind::vertical ? z.u1 : z.u2;
    const double dir = kind == LineKind::vertical ? ct : st;
    const double span = reach * std::abs(dir);
    const int qlo = std::max(0, static_cast<int>(std::ceil((zc - span) / h)));
    const int qhi = std::min(N - 1, static_cast<int>(std::floor((zc + span) / h)));
    for (int q = qlo; q <= qhi; ++q) {
      const double g = q * h;
      const double rho = (g - zc) / dir;
      if (std::abs(rho) >= reach) continue;
      const UV v = kind == LineKind::vertical ? UV{g, z.u2 + rho * st} : UV{z.u1 + rho * ct, g};
      if (!D.contains(v)) continue;
      const double y = kind == LineKind::vertical ? v.u2 : v.u1;
      Complex value;
      if (rho == 0.0) {
        value = limit_value(ct, st);
      } else {
        const geometry::SurfaceFrame f = chart.frame(v);
        const double R = norm(r - f.x);
        if (R >= Rs) continue;
        if (R < kTinyDistance) {
          value = limit_value(ct, st);
        } else {
          value = (std::abs(rho) * split.eta_at(R) * f.jacobian) * kernels::kernel_K1(r, f.x, f.normal, split.params);
        }
      }
      visit(kind, q, y, (base * c) * value);
    }
  }
}

// chi_{u,delta}(rho, theta) of the analysis: (1/2) omega^i(r^i(u)) |rho| K^{ij}_sing
// omega~^j_delta at the polar point, including the Jacobian a^j.
inline Complex polar_sing_eval(const kernels::KernelSplit& split, const geometry::Atlas& atlas, int i, int j, UV u,
                               double rho, double theta) {
  const Vec3 x = atlas.chart(i).point(u);
  if (atlas.distance_to_support(j, x) > 4.0 * atlas.eps1() * atlas.delta0()) {
    throw DomainError("polar_sing_eval: target outside Omega^{ij}_{2 delta0}");
  }
  const PolarCenter pc = polar_center(atlas, i, j, u);
  const double ct = std::cos(theta), st = std::sin(theta);
  const UV v{pc.z.u1 + rho * ct, pc.z.u2 + rho * st};
  const double wi = 0.5 * atlas.omega(i, x);
  const geometry::Chart& chart = atlas.chart(j);
  if (rho == 0.0) {
    const geometry::SurfaceJet s = chart.jet(pc.z);
    const Vec3 Je = ct * s.t1 + st * s.t2;
    const Vec3 eHe = (ct * ct) * s.h11 + (2.0 * ct * st) * s.h12 + (st * st) * s.h22;
    return wi * s.jacobian * kernels::polar_K1_limit(Je, eHe, s.normal, split.params) *
           atlas.omega_tilde(j, pc.z, split.delta);
  }
  if (!chart.domain().contains(v)) return 0.0;
  const geometry::SurfaceFrame f = chart.frame(v);
  const double R = norm(pc.r - f.x);
  if (R >= split.support_radius()) return 0.0;
  return wi * std::abs(rho) * f.jacobian * kernels::kernel_sing(split, pc.r, f.x, f.normal) *
         atlas.omega_tilde(j, v, split.delta);
}

// Trapezoidal rule h^2 sum_m K^{ij}_reg(u, x_m) omega_m phi_m over Omega^j_h.
inline std::vector<Complex> apply_regular(const kernels::KernelSplit& split, const geometry::Atlas& atlas, int i,
                                          const geometry::ChartGrid& gj, const std::vector<Complex>& phi,
                                          const std::vector<UV>& targets) {
  if (phi.size() != gj.size()) throw ParameterError("apply_regular: density size does not match Omega^j_h");
  std::vector<Complex> out(targets.size());
  const double h2 = gj.h * gj.h;
  parallel_for(targets.size(), [&](std::size_t t) {
    const Vec3 r = atlas.chart(i).point(targets[t]);
    Complex s = 0.0;
    for (std::size_t m = 0; m < gj.size(); ++m) {
      s += kernels::kernel_reg(split, r, gj.points[m], gj.normals[m]) * (gj.jacobians[m] * gj.omega[m]) * phi[m];
    }
    out[t] = h2 * s;
  });
  return out;
}

// Grid values of omega^j phi^j zero-extended from Omega^j_h to Z_N.
inline trig::GridValues zero_extend(const geometry::ChartGrid& gj, const std::vector<Complex>& phi, bool weight) {
  trig::GridValues g(gj.N);
  for (std::size_t m = 0; m < gj.size(); ++m) g.values[gj.active[m]] = weight ? gj.omega[m] * phi[m] : phi[m];
  return g;
}

// The discrete singular operator L^{ij} applied to a trigonometric polynomial.
inline std::vector<Complex> apply_singular_L(const kernels::KernelSplit& split, const geometry::Atlas& atlas, int i,
                                             int j, const PolarRule& rule, const trig::TrigPoly& density,
                                             const std::vector<UV>& targets) {
  if (density.N() != rule.N) throw ParameterError("apply_singular_L: density order differs from rule order");
  const int N = rule.N;
  const trig::GridValues g = trig::grid_values(density);
  const auto vert = trig::all_line_coefficients(g, LineKind::vertical);
  const auto horz = trig::all_line_coefficients(g, LineKind::horizontal);
  std::vector<Complex> out(targets.size(), Complex(0.0));
  parallel_for(targets.size(), [&](std::size_t t) {
    const Vec3 x = atlas.chart(i).point(targets[t]);
    if (!in_singular_region(atlas, j, x, split.delta)) return;
    PolarCenter pc;
    try {
      pc = polar_center(atlas, i, j, targets[t]);
    } catch (const NumericalError&) {
      throw NumericalError("apply_singular_L: chart inverse failed at target " + std::to_string(t));
    }
    Complex s = 0.0;
    std::vector<Complex> line(N);
    for_each_polar_node(atlas, j, split, rule, pc, [&](LineKind kind, int q, double y, Complex w) {
      const auto& src = kind == LineKind::vertical ? vert : horz;
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(q) * N, N, line.begin());
      s += w * trig::eval_line(line, y);
    });
    out[t] = s;
  });
  return out;
}

// Hermite data of every grid line: [kind][r][q * (N m + 1) + p].
struct HermiteLineData {
  int N = 0, m = 1, d = 1;
  std::vector<std::vector<Complex>> vertical, horizontal;

  HermiteLineData(const trig::TrigPoly& poly, int m_, int d_)
      : N(poly.N()),
        m(m_),
        d(d_),
        vertical(trig::derivatives_on_fine_grid(poly, LineKind::vertical, d_, m_)),
        horizontal(trig::derivatives_on_fine_grid(poly, LineKind::horizontal, d_, m_)) {}

  Complex value(LineKind kind, int q, double y) const {
    const auto& data = kind == LineKind::vertical ? vertical : horizontal;
    const int M = N * m;
    const double K = 1.0 / M;
    int p = static_cast<int>(std::floor(y * M));
    p = std::min(std::max(p, 0), M - 1);
    const double t = (y - p * K) / K;
    double left[32], right[32];
    trig::HermiteBasis::get(d).eval(t, left, right);
    const std::size_t base = static_cast<std::size_t>(q) * (M + 1) + p;
    Complex v = 0.0;
    double Kr = 1.0;
    for (int r = 0; r <= d; ++r) {
      v += Kr * (left[r] * data[r][base] + right[r] * data[r][base + 1]);
      Kr *= K;
    }
    return v;
  }
};

// L^{ij,2} + L^{ij,1}: the singular sums with line restrictions replaced by
// Hermite interpolants of degree 2d+1 on the mesh h/m.
inline std::vector<Complex> apply_singular_hermite(const kernels::KernelSplit& split, const geometry::Atlas& atlas,
                                                   int i, int j, const PolarRule& rule,
                                                   const trig::TrigPoly& density, int m, int d,
                                                   const std::vector<UV>& targets) {
  if (m < 1 || d < 1) throw ParameterError("apply_singular_hermite: need m >= 1 and d >= 1");
  if (density.N() != rule.N) throw ParameterError("apply_singular_hermite: density order differs from rule order");
  const HermiteLineData data(density, m, d);
  std::vector<Complex> out(targets.size(), Complex(0.0));
  parallel_for(targets.size(), [&](std::size_t t) {
    const Vec3 x = atlas.chart(i).point(targets[t]);
    if (!in_singular_region(atlas, j, x, split.delta)) return;
    PolarCenter pc;
    try {
      pc = polar_center(atlas, i, j, targets[t]);
    } catch (const NumericalError&) {
      throw NumericalError("apply_singular_hermite: chart inverse failed at target " + std::to_string(t));
    }
    Complex s = 0.0;
    for_each_polar_node(atlas, j, split, rule, pc,
                        [&](LineKind kind, int q, double y, Complex w) { s += w * data.value(kind, q, y); });
    out[t] = s;
  });
  return out;
}

// Q_{h,k,gamma}: k sum_p c_p h sum_q chi(rho, theta_p) xi(center + rho e(theta_p)),
// rho = gamma(theta_p) + q c_p h, over all q with |rho| < support.
inline Complex quad_Qhkg(const std::function<double(double, double)>& chi, double support,
                         const trig::TrigPoly& xi, const std::function<double(double)>& gamma, double h, double k,
                         UV center = {}) {
  const int Theta = static_cast<int>(std::lround(kTwoPi / k));
  Complex total = 0.0;
  for (int p = 0; p < Theta; ++p) {
    const double th = p * k;
    const double c = c_weight(th);
    const double g = gamma(th);
    const double ct = std::cos(th), st = std::sin(th);
    const int qlo = static_cast<int>(std::ceil((-support - g) / (c * h)));
    const int qhi = static_cast<int>(std::floor((support - g) / (c * h)));
    Complex inner = 0.0;
    for (int q = qlo; q <= qhi; ++q) {
      const double rho = g + q * c * h;
      if (std::abs(rho) >= support) continue;
      const double w = chi(rho, th);
      if (w == 0.0) continue;
      inner += w * trig::eval_point(xi, {center.u1 + rho * ct, center.u2 + rho * st});
    }
    total += c * h * inner;
  }
  return k * total;
}

// Precomputed singular operator: for every target row and every chart line the
// polar nodes touch, the weights multiplying each line Fourier coefficient.
// Applying it needs only 1D DFTs of the grid lines of omega^j phi^j.
struct SingularPlan {
  struct Entry {
    int chart;
    LineKind kind;
    int q;
    std::size_t offset;  // into weights, N_chart values
  };
  std::vector<std::size_t> row_begin;  // size rows + 1
  std::vector<Entry> entries;
  std::vector<Complex> weights;

  std::size_t bytes() const { return weights.size() * sizeof(Complex) + entries.size() * sizeof(Entry); }
};

enum class VariantKind { base, hermite };

struct Variant {
  VariantKind kind = VariantKind::base;
  int m = 1;
  int d = 2;

  static Variant base() { return {}; }
  static Variant hermite(int m, int d) { return {VariantKind::hermite, m, d}; }
};

namespace detail {

// Coefficient of line mode lo + n in the evaluation at y: exp(2 pi i (lo + n) y).
inline void add_exponential_weights(Complex* dst, int N, double y, Complex w) {
  const int lo = trig::mode_min(N);
  Complex e = w * trig::cis2pi(lo * y);
  const Complex step = trig::cis2pi(y);
  for (int n = 0; n < N; ++n) {
    if ((n & 15) == 0 && n > 0) e = w * trig::cis2pi((lo + n) * y);
    dst[n] += e;
    e *= step;
  }
}

// Coefficient of line mode in the Hermite evaluation at y on the mesh 1/(N m):
// sum_r K^r (2 pi i mode)^r [left_r(t) e(mode y_p) + right_r(t) e(mode y_{p+1})].
inline void add_hermite_weights(Complex* dst, int N, int m, int d, double y, Complex w) {
  const int lo = trig::mode_min(N);
  const int M = N * m;
  const double K = 1.0 / M;
  int p = static_cast<int>(std::floor(y * M));
  p = std::min(std::max(p, 0), M - 1);
  const double t = (y - p * K) / K;
  double left[32], right[32];
  trig::HermiteBasis::get(d).eval(t, left, right);
  const double ya = p * K, yb = (p + 1) * K;
  for (int n = 0; n < N; ++n) {
    const int mode = lo + n;
    const Complex ik(0.0, kTwoPi * mode * K);
    Complex pw = 1.0, a = 0.0, b = 0.0;
    for (int r = 0; r <= d; ++r) {
      a += left[r] * pw;
      b += right[r] * pw;
      pw *= ik;
    }
    dst[n] += w * (a * trig::cis2pi(mode * ya) + b * trig::cis2pi(mode * yb));
  }
}

}  // namespace detail

// Target description for plan building: chart i, grid parameter u, surface point.
struct PlanTarget {
  int chart;
  UV u;
  Vec3 x;
};

inline SingularPlan build_singular_plan(const geometry::Atlas& atlas, const kernels::KernelSplit& split,
                                        const std::vector<PolarRule>& rules, const std::vector<PlanTarget>& targets,
                                        const Variant& variant) {
  const int J = atlas.size();
  struct RowData {
    std::vector<SingularPlan::Entry> entries;
    std::vector<Complex> weights;
  };
  std::vector<RowData> rows(targets.size());
  parallel_for(targets.size(), [&](std::size_t t) {
    const PlanTarget& tg = targets[t];
    RowData& row = rows[t];
    for (int j = 0; j < J; ++j) {
      if (!in_singular_region(atlas, j, tg.x, split.delta)) continue;
      const PolarRule& rule = rules[j];
      const int N = rule.N;
      PolarCenter pc;
      try {
        pc = polar_center(atlas, tg.chart, j, tg.u);
      } catch (const NumericalError&) {
        throw NumericalError("build_singular_plan: chart inverse failed at target " + std::to_string(t));
      }
      // Dense scratch over every line index of both kinds; compacted afterwards.
      std::vector<Complex> scratch(static_cast<std::size_t>(2) * N * N, Complex(0.0));
      std::vector<char> touched(static_cast<std::size_t>(2) * N, 0);
      for_each_polar_node(atlas, j, split, rule, pc, [&](LineKind kind, int q, double y, Complex w) {
        const int slot = (kind == LineKind::vertical ? 0 : N) + q;
        touched[slot] = 1;
        Complex* dst = scratch.data() + static_cast<std::size_t>(slot) * N;
        if (variant.kind == VariantKind::base) {
          detail::add_exponential_weights(dst, N, y, w);
        } else {
          detail::add_hermite_weights(dst, N, variant.m, variant.d, y, w);
        }
      });
      for (int slot = 0; slot < 2 * N; ++slot) {
        if (!touched[slot]) continue;
        const LineKind kind = slot < N ? LineKind::vertical : LineKind::horizontal;
        row.entries.push_back({j, kind, slot % N, row.weights.size()});
        row.weights.insert(row.weights.end(), scratch.begin() + static_cast<std::ptrdiff_t>(slot) * N,
                           scratch.begin() + static_cast<std::ptrdiff_t>(slot + 1) * N);
      }
    }
  });
  SingularPlan plan;
  plan.row_begin.push_back(0);
  for (auto& row : rows) {
    const std::size_t base = plan.weights.size();
    for (auto e : row.entries) {
      e.offset += base;
      plan.entries.push_back(e);
    }
    plan.weights.insert(plan.weights.end(), row.weights.begin(), row.weights.end());
    plan.row_begin.push_back(plan.entries.size());
    std::vector<Complex>().swap(row.weights);
  }
  return plan;
}

}  // namespace nystrom::quadrature
