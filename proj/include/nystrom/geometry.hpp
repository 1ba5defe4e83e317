#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nystrom/core/errors.hpp"
#include "nystrom/core/jet.hpp"
#include "nystrom/core/types.hpp"

namespace nystrom::geometry {

// Axis-aligned parameter rectangle D^j.
struct Rect {
  double lo1 = 0.0, hi1 = 1.0, lo2 = 0.0, hi2 = 1.0;
  bool contains(UV u) const { return u.u1 >= lo1 && u.u1 <= hi1 && u.u2 >= lo2 && u.u2 <= hi2; }
};

struct SurfacePoint {
  Vec3 x;
  Vec3 normal;
  double jacobian = 0.0;
};

// Surface point together with the tangent vectors d r / d u_k.
struct SurfaceFrame : SurfacePoint {
  Vec3 t1, t2;
};

// Second-order expansion of the chart map at a parameter point.
struct SurfaceJet : SurfaceFrame {
  Vec3 h11, h12, h22;
};

// Smooth step: 1 for t <= 0, 0 for t >= 1, exp(2 e^{-1/t} / (t - 1)) between.
inline double smooth_step_down(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  return std::exp(2.0 * std::exp(-1.0 / t) / (t - 1.0));
}

// Symmetric step: 1 for t <= 0, 0 for t >= 1, erfc(c x / sqrt(1 - x^2)) / 2 with
// x = 2t - 1 between. Every derivative vanishes at both ends and
// step(t) + step(1 - t) = 1.
inline double erfc_step_down(double t, double c) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  const double x = 2.0 * t - 1.0;
  return 0.5 * std::erfc(c * x / std::sqrt(1.0 - x * x));
}

// Radial profile of the floating cut-off: eta_delta(r, r') = upsilon(delta0 |r' - r| / delta).
struct CutoffFamily {
  double delta0 = 0.0;
  double eps0 = 0.05;
  double eps1 = 0.8;
  double steepness = 0.0;

  double upsilon(double s) const { return step((s / delta0 - eps0) / (eps1 - eps0)); }

  // Same value as upsilon(delta0 * dist / delta), without the range check.
  double eta(double dist, double delta) const {
    return step((dist / delta - eps0) / (eps1 - eps0));
  }

  // steepness <= 0 selects the exponential blend instead of the erfc step.
  double step(double t) const { return steepness > 0.0 ? erfc_step_down(t, steepness) : smooth_step_down(t); }
};

inline double eta_delta(const CutoffFamily& cutoff, const Vec3& r, const Vec3& rp, double delta) {
  if (!(delta > 0.0) || delta > cutoff.delta0 * (1.0 + 1e-12)) {
    throw ParameterError("eta_delta: delta must lie in (0, delta0]");
  }
  return cutoff.upsilon(cutoff.delta0 * norm(rp - r) / delta);
}

// One face of the cube projected onto the ellipsoid x^2/a^2 + y^2/b^2 + z^2/c^2 = 1
// with the equiangular map. The face angles alpha_k = (u_k - 1/2) * scale run over
// [-A, A] on D^j; the map itself stays analytic for |alpha_k| < pi/2.
class Chart {
 public:
  Chart(int index, int axis, int sign, std::array<double, 3> semiaxes, double half_angle, double margin)
      : index_(index), axis_(axis), sign_(sign), semiaxes_(semiaxes), half_angle_(half_angle) {
    if (sign > 0) {
      b_ = (axis + 1) % 3;
      c_ = (axis + 2) % 3;
    } else {
      b_ = (axis + 2) % 3;
      c_ = (axis + 1) % 3;
    }
    domain_ = {margin, 1.0 - margin, margin, 1.0 - margin};
    scale_ = half_angle / (0.5 - margin);
  }

  int index() const { return index_; }
  const Rect& domain() const { return domain_; }
  double half_angle() const { return half_angle_; }
  double angle_scale() const { return scale_; }

  double angle(double u) const { return (u - 0.5) * scale_; }
  double param(double alpha) const { return 0.5 + alpha / scale_; }

  // Parameters where the analytic continuation of the map is still regular.
  bool in_extended_domain(UV u) const {
    const double lim = kExtendedAngle;
    return std::abs(angle(u.u1)) < lim && std::abs(angle(u.u2)) < lim;
  }

  template <class T>
  Vec3T<T> map(const T& u1, const T& u2) const {
    using std::sqrt;
    using std::tan;
    const T t1 = tan((u1 - T(0.5)) * T(scale_));
    const T t2 = tan((u2 - T(0.5)) * T(scale_));
    Vec3T<T> p;
    p[axis_] = T(static_cast<double>(sign_));
    p[b_] = t1;
    p[c_] = t2;
    const T inv = T(1.0) / sqrt(dot(p, p));
    return {p.x * inv * T(semiaxes_[0]), p.y * inv * T(semiaxes_[1]), p.z * inv * T(semiaxes_[2])};
  }

  Vec3 point(UV u) const { return map<double>(u.u1, u.u2); }

  // Point, tangents, unit normal and area element; no domain check.
  SurfaceFrame frame(UV u) const {
    const double a1 = angle(u.u1), a2 = angle(u.u2);
    const double t1 = std::tan(a1), t2 = std::tan(a2);
    Vec3 p;
    p[axis_] = sign_;
    p[b_] = t1;
    p[c_] = t2;
    const double inv = 1.0 / norm(p);
    const Vec3 q = inv * p;
    Vec3 dp1, dp2;
    dp1[b_] = scale_ * (1.0 + t1 * t1);
    dp2[c_] = scale_ * (1.0 + t2 * t2);
    const Vec3 dq1 = inv * (dp1 - dot(q, dp1) * q);
    const Vec3 dq2 = inv * (dp2 - dot(q, dp2) * q);
    SurfaceFrame f;
    f.x = stretch(q);
    f.t1 = stretch(dq1);
    f.t2 = stretch(dq2);
    const Vec3 n = cross(f.t1, f.t2);
    f.jacobian = norm(n);
    f.normal = (1.0 / f.jacobian) * n;
    return f;
  }

  SurfaceJet jet(UV u) const {
    const Vec3T<Jet2> r = map(Jet2::variable(u.u1, 0), Jet2::variable(u.u2, 1));
    SurfaceJet s;
    s.x = {r.x.v, r.y.v, r.z.v};
    s.t1 = {r.x.d1, r.y.d1, r.z.d1};
    s.t2 = {r.x.d2, r.y.d2, r.z.d2};
    s.h11 = {r.x.d11, r.y.d11, r.z.d11};
    s.h12 = {r.x.d12, r.y.d12, r.z.d12};
    s.h22 = {r.x.d22, r.y.d22, r.z.d22};
    const Vec3 n = cross(s.t1, s.t2);
    s.jacobian = norm(n);
    s.normal = (1.0 / s.jacobian) * n;
    return s;
  }

  // Face angles of a surface point with respect to this face; false when the
  // point is on the far hemisphere (not representable by this chart).
  bool face_angles(const Vec3& x, double& a1, double& a2) const {
    const Vec3 q{x.x / semiaxes_[0], x.y / semiaxes_[1], x.z / semiaxes_[2]};
    const double qa = sign_ * q[axis_];
    if (qa <= 0.0) return false;
    a1 = std::atan(q[b_] / qa);
    a2 = std::atan(q[c_] / qa);
    return true;
  }

  static constexpr double kExtendedAngle = 0.49 * kPi;

 private:
  Vec3 stretch(const Vec3& q) const { return {q.x * semiaxes_[0], q.y * semiaxes_[1], q.z * semiaxes_[2]}; }

  int index_, axis_, sign_, b_ = 1, c_ = 2;
  std::array<double, 3> semiaxes_;
  double half_angle_;
  double scale_ = 1.0;
  Rect domain_;
};

inline SurfacePoint chart_eval(const Chart& chart, UV u) {
  if (!chart.domain().contains(u)) {
    throw DomainError("chart_eval: parameter outside D^" + std::to_string(chart.index()));
  }
  return chart.frame(u);
}

struct AtlasOptions {
  double eps0 = 0.05;
  double eps1 = 0.8;
  double margin = 0.02;
  // Half-angle of supp omega^j is pi/4 + support_fraction * (A - pi/4).
  double support_fraction = 0.9;
  // delta0 = delta0_factor * (sampled gap) / eps1; see Atlas::delta0().
  double delta0_factor = 1.0;
  int boundary_samples = 128;
  // Bump shape: plateau up to pi/2 - R_b then a C-infinity ramp to R_b (true),
  // or the product exp(-1/(1 - t^2)) over t = alpha / R_b (false).
  bool plateau_bump = true;
  double ramp_steepness = 2.0;
  // 0 selects the exp blend for the cut-off profile, > 0 the erfc step.
  double cutoff_steepness = 0.0;
};

// Grid data of one chart: x_m = h m, m in Z_N, and the active set Omega^j_h.
struct ChartGrid {
  int chart = 0;
  int N = 0;
  double h = 0.0;
  std::vector<int> active;  // linear indices m1 * N + m2, increasing
  std::vector<UV> params;
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<double> jacobians;
  std::vector<double> omega;

  std::size_t size() const { return active.size(); }
};

class Atlas {
 public:
  Atlas(std::array<double, 3> semiaxes, double overlap, AtlasOptions opts) : semiaxes_(semiaxes), opts_(opts) {
    for (double s : semiaxes) {
      if (!(s > 0.0)) throw ParameterError("atlas: semiaxes must be positive");
    }
    if (!(overlap > 0.0 && overlap < 0.5)) throw ParameterError("atlas: overlap must lie in (0, 1/2)");
    if (!(opts.eps0 > 0.0 && opts.eps0 < opts.eps1 && opts.eps1 <= 1.0)) {
      throw ParameterError("atlas: need 0 < eps0 < eps1 <= 1");
    }
    if (!(opts.support_fraction > 0.0 && opts.support_fraction < 1.0)) {
      throw ParameterError("atlas: support_fraction must lie in (0, 1)");
    }
    overlap_ = overlap;
    const double A = 0.25 * kPi * (1.0 + overlap);
    support_angle_ = 0.25 * kPi + opts.support_fraction * (A - 0.25 * kPi);
    for (int axis = 0; axis < 3; ++axis) {
      for (int sign : {1, -1}) {
        charts_.emplace_back(static_cast<int>(charts_.size()), axis, sign, semiaxes, A, opts.margin);
      }
    }
    build_samples();
    build_overlaps();
    gap_ = sampled_gap();
    cutoff_ = {opts.delta0_factor * gap_ / opts.eps1, opts.eps0, opts.eps1, opts.cutoff_steepness};
  }

  int size() const { return static_cast<int>(charts_.size()); }
  const Chart& chart(int j) const { return charts_.at(j); }
  const std::array<double, 3>& semiaxes() const { return semiaxes_; }
  double overlap() const { return overlap_; }
  const AtlasOptions& options() const { return opts_; }
  const CutoffFamily& cutoff() const { return cutoff_; }
  double delta0() const { return cutoff_.delta0; }
  double eps0() const { return cutoff_.eps0; }
  double eps1() const { return cutoff_.eps1; }
  double support_angle() const { return support_angle_; }
  // Smallest sampled distance from supp omega^j to the boundary of S^j.
  double gap() const { return gap_; }
  bool overlaps(int i, int j) const { return overlap_pairs_[i][j]; }

  bool is_sphere() const { return semiaxes_[0] == 1.0 && semiaxes_[1] == 1.0 && semiaxes_[2] == 1.0; }

  // Residual of the implicit surface equation; zero on S.
  double surface_residual(const Vec3& x) const {
    const double q = x.x * x.x / (semiaxes_[0] * semiaxes_[0]) + x.y * x.y / (semiaxes_[1] * semiaxes_[1]) +
                     x.z * x.z / (semiaxes_[2] * semiaxes_[2]);
    return std::abs(std::sqrt(q) - 1.0);
  }

  double bump(int j, const Vec3& x) const {
    double a1, a2;
    if (!charts_[j].face_angles(x, a1, a2)) return 0.0;
    return bump_from_angles(a1, a2);
  }

  // omega^j(x) for x on the surface.
  double omega(int j, const Vec3& x) const {
    double total = 0.0, mine = 0.0;
    for (int k = 0; k < size(); ++k) {
      const double b = bump(k, x);
      total += b;
      if (k == j) mine = b;
    }
    return mine / total;
  }

  double omega_param(int j, UV u) const {
    const Chart& c = charts_[j];
    if (!c.in_extended_domain(u)) return 0.0;
    return omega(j, c.point(u));
  }

  bool in_support(int j, const Vec3& x) const {
    double a1, a2;
    if (!charts_[j].face_angles(x, a1, a2)) return false;
    return std::abs(a1) <= support_angle_ && std::abs(a2) <= support_angle_;
  }

  // Euclidean distance from x to supp omega^j, from boundary samples refined
  // by a local search along the nearest boundary edge.
  double distance_to_support(int j, const Vec3& x) const {
    if (in_support(j, x)) return 0.0;
    const auto& samples = support_boundary_[j];
    const int M = opts_.boundary_samples;
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const Vec3 d = samples[s] - x;
      const double d2 = dot(d, d);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = s;
      }
    }
    const int edge = static_cast<int>(best) / (M + 1);
    const int k = static_cast<int>(best) % (M + 1);
    double lo = std::max(0, k - 1) / static_cast<double>(M);
    double hi = std::min(M, k + 1) / static_cast<double>(M);
    auto dist2 = [&](double s) {
      const Vec3 d = support_edge_point(j, edge, s) - x;
      return dot(d, d);
    };
    for (int it = 0; it < 60; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (dist2(m1) < dist2(m2)) {
        hi = m2;
      } else {
        lo = m1;
      }
    }
    return std::sqrt(std::min(best_d2, dist2(0.5 * (lo + hi))));
  }

  // Parameter point of x in chart j, searched on the analytic continuation of
  // the chart map: nearest coarse-grid preimage, then damped Gauss-Newton.
  std::optional<UV> locate(int j, const Vec3& x) const {
    const Chart& c = charts_[j];
    const auto& cg = coarse_[j];
    double best = std::numeric_limits<double>::infinity();
    UV u{};
    for (const auto& [uv, p] : cg) {
      const Vec3 d = p - x;
      const double d2 = dot(d, d);
      if (d2 < best) {
        best = d2;
        u = uv;
      }
    }
    Vec3 res = x - c.point(u);
    double rn = norm(res);
    for (int it = 0; it < kNewtonMaxIter; ++it) {
      const SurfaceFrame f = c.frame(u);
      const double g11 = dot(f.t1, f.t1), g12 = dot(f.t1, f.t2), g22 = dot(f.t2, f.t2);
      const double b1 = dot(f.t1, res), b2 = dot(f.t2, res);
      const double det = g11 * g22 - g12 * g12;
      const UV step{(g22 * b1 - g12 * b2) / det, (g11 * b2 - g12 * b1) / det};
      double lambda = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 30; ++ls) {
        const UV trial = u + lambda * step;
        if (c.in_extended_domain(trial)) {
          const Vec3 tr = x - c.point(trial);
          const double tn = norm(tr);
          if (tn <= rn || tn < 1e-15) {
            u = trial;
            res = tr;
            rn = tn;
            accepted = true;
            break;
          }
        }
        lambda *= 0.5;
      }
      const double step_norm = lambda * std::hypot(step.u1, step.u2);
      if (!accepted || step_norm < kNewtonTol) break;
    }
    if (rn > 1e-10 * (1.0 + norm(x))) return std::nullopt;
    return u;
  }

  // omega~^j_delta: 1 within 2 eps1 delta of supp omega^j, 0 beyond 3 eps1 delta.
  double omega_tilde(int j, UV u, double delta) const {
    const Chart& c = charts_[j];
    if (delta == 0.0) {
      if (!c.domain().contains(u)) return 0.0;
      return omega(j, c.point(u)) > 0.0 ? 1.0 : 0.0;
    }
    if (!c.in_extended_domain(u)) return 0.0;
    const double d = distance_to_support(j, c.point(u));
    const double w = eps1() * delta;
    return smooth_step_down((d - 2.0 * w) / w);
  }

  // Smallest singular value of the chart Jacobian sampled over D^j.
  double min_stretch(int j) const { return min_stretch_[j]; }

 private:
  static constexpr int kNewtonMaxIter = 60;
  static constexpr double kNewtonTol = 1e-13;
  static constexpr int kCoarse = 40;

  double bump_from_angles(double a1, double a2) const {
    if (opts_.plateau_bump) {
      const double a0 = 0.5 * kPi - support_angle_;
      auto ramp = [&](double a) {
        const double t = (std::abs(a) - a0) / (support_angle_ - a0);
        return erfc_step_down(t, opts_.ramp_steepness);
      };
      return ramp(a1) * ramp(a2);
    }
    const double t1 = a1 / support_angle_, t2 = a2 / support_angle_;
    if (std::abs(t1) >= 1.0 || std::abs(t2) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - t1 * t1) - 1.0 / (1.0 - t2 * t2));
  }

  // Edge e of the square |alpha| <= R_b, arclength-like parameter s in [0,1].
  Vec3 support_edge_point(int j, int edge, double s) const {
    const Chart& c = charts_[j];
    const double R = support_angle_;
    const double t = -R + 2.0 * R * s;
    double a1 = 0.0, a2 = 0.0;
    switch (edge) {
      case 0: a1 = -R, a2 = t; break;
      case 1: a1 = R, a2 = t; break;
      case 2: a1 = t, a2 = -R; break;
      default: a1 = t, a2 = R; break;
    }
    return c.point({c.param(a1), c.param(a2)});
  }

  void build_samples() {
    const int M = opts_.boundary_samples;
    support_boundary_.assign(size(), {});
    coarse_.assign(size(), {});
    min_stretch_.assign(size(), std::numeric_limits<double>::infinity());
    for (int j = 0; j < size(); ++j) {
      const Chart& c = charts_[j];
      for (int e = 0; e < 4; ++e) {
        for (int k = 0; k <= M; ++k) support_boundary_[j].push_back(support_edge_point(j, e, k / static_cast<double>(M)));
      }
      const double lim = 0.999 * Chart::kExtendedAngle;
      for (int a = 0; a <= kCoarse; ++a) {
        for (int b = 0; b <= kCoarse; ++b) {
          const UV u{c.param(-lim + 2.0 * lim * a / kCoarse), c.param(-lim + 2.0 * lim * b / kCoarse)};
          coarse_[j].emplace_back(u, c.point(u));
        }
      }
      const Rect& D = c.domain();
      for (int a = 0; a <= 20; ++a) {
        for (int b = 0; b <= 20; ++b) {
          const UV u{D.lo1 + (D.hi1 - D.lo1) * a / 20.0, D.lo2 + (D.hi2 - D.lo2) * b / 20.0};
          const SurfaceFrame f = c.frame(u);
          const double g11 = dot(f.t1, f.t1), g12 = dot(f.t1, f.t2), g22 = dot(f.t2, f.t2);
          const double tr = 0.5 * (g11 + g22);
          const double disc = std::sqrt(std::max(0.0, tr * tr - (g11 * g22 - g12 * g12)));
          min_stretch_[j] = std::min(min_stretch_[j], std::sqrt(tr - disc));
        }
      }
    }
  }

  // S^i and S^j intersect when some boundary sample of one image lies in the other.
  void build_overlaps() {
    overlap_pairs_.assign(size(), std::vector<bool>(size(), false));
    for (int i = 0; i < size(); ++i) {
      for (int j = 0; j < size(); ++j) {
        if (i == j) {
          overlap_pairs_[i][j] = true;
          continue;
        }
        const Chart& ci = charts_[i];
        const Chart& cj = charts_[j];
        const Rect& D = ci.domain();
        for (int k = 0; k <= 64 && !overlap_pairs_[i][j]; ++k) {
          const double s = D.lo1 + (D.hi1 - D.lo1) * k / 64.0;
          for (UV u : {UV{s, D.lo2}, UV{s, D.hi2}, UV{D.lo1, s}, UV{D.hi1, s}, UV{0.5, 0.5}}) {
            double a1, a2;
            if (cj.face_angles(ci.point(u), a1, a2) && std::abs(a1) <= cj.half_angle() &&
                std::abs(a2) <= cj.half_angle()) {
              overlap_pairs_[i][j] = true;
              break;
            }
          }
        }
      }
    }
  }

  // min over charts of the distance between the boundary of supp omega^j and
  // the boundary of the extended chart image, both sampled.
  double sampled_gap() const {
    double gap = std::numeric_limits<double>::infinity();
    const int M = opts_.boundary_samples;
    const double lim = Chart::kExtendedAngle;
    for (int j = 0; j < size(); ++j) {
      const Chart& c = charts_[j];
      std::vector<Vec3> outer;
      for (int k = 0; k <= M; ++k) {
        const double a = -lim + 2.0 * lim * k / M;
        for (auto [a1, a2] : {std::pair{a, -lim}, std::pair{a, lim}, std::pair{-lim, a}, std::pair{lim, a}}) {
          outer.push_back(c.point({c.param(a1), c.param(a2)}));
        }
      }
      for (const Vec3& p : support_boundary_[j]) {
        for (const Vec3& q : outer) gap = std::min(gap, norm(p - q));
      }
    }
    return gap;
  }

  std::array<double, 3> semiaxes_;
  AtlasOptions opts_;
  double overlap_ = 0.0;
  double support_angle_ = 0.0;
  double gap_ = 0.0;
  CutoffFamily cutoff_;
  std::vector<Chart> charts_;
  std::vector<std::vector<bool>> overlap_pairs_;
  std::vector<std::vector<Vec3>> support_boundary_;
  std::vector<std::vector<std::pair<UV, Vec3>>> coarse_;
  std::vector<double> min_stretch_;
};

inline Atlas build_ellipsoid_atlas(std::array<double, 3> semiaxes, double overlap, AtlasOptions opts = {}) {
  return Atlas(semiaxes, overlap, opts);
}

inline Atlas build_sphere_atlas(double overlap, AtlasOptions opts = {}) {
  return Atlas({1.0, 1.0, 1.0}, overlap, opts);
}

// r^{ji}(u) = (r^j)^{-1}(r^i(u)).
inline UV transition_map(const Atlas& atlas, int i, int j, UV u) {
  if (i == j) return u;
  const Vec3 x = atlas.chart(i).point(u);
  const auto v = atlas.locate(j, x);
  if (!v) throw NumericalError("transition_map: Newton iteration did not converge");
  if (!atlas.chart(j).domain().contains(*v)) throw DomainError("transition_map: point not in S^j");
  return *v;
}

inline double omega_tilde(const Atlas& atlas, int j, UV u, double delta) { return atlas.omega_tilde(j, u, delta); }

inline ChartGrid grid(const Atlas& atlas, int j, int N) {
  if (N < 4) throw ParameterError("grid: N must be at least 4");
  ChartGrid g;
  g.chart = j;
  g.N = N;
  g.h = 1.0 / N;
  const Chart& c = atlas.chart(j);
  for (int m1 = 0; m1 < N; ++m1) {
    for (int m2 = 0; m2 < N; ++m2) {
      const UV u{m1 * g.h, m2 * g.h};
      if (!c.domain().contains(u)) continue;
      const SurfaceFrame f = c.frame(u);
      const double w = atlas.omega(j, f.x);
      if (!(w > 0.0)) continue;
      g.active.push_back(m1 * N + m2);
      g.params.push_back(u);
      g.points.push_back(f.x);
      g.normals.push_back(f.normal);
      g.jacobians.push_back(f.jacobian);
      g.omega.push_back(w);
    }
  }
  return g;
}

}  // namespace nystrom::geometry
