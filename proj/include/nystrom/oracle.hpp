#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <queue>
#include <vector>

#include "nystrom/core/errors.hpp"
#include "nystrom/core/parallel.hpp"
#include "nystrom/core/types.hpp"
#include "nystrom/geometry.hpp"
#include "nystrom/kernels.hpp"
#include "nystrom/quadrature.hpp"
#include "nystrom/solver.hpp"
#include "nystrom/trig.hpp"

namespace nystrom::oracle {

// ---------------------------------------------------------------------------
// Special functions

namespace detail {

// 1 / (j_n / j_{n-1}) = (2n+1)/x - 1/(...), modified Lentz.
inline double inverse_ratio_cf(int n, double x) {
  constexpr double tiny = 1e-300;
  double f = (2.0 * n + 1.0) / x;
  if (f == 0.0) f = tiny;
  double C = f, D = 0.0;
  for (int k = 1; k < 100000; ++k) {
    const double b = (2.0 * (n + k) + 1.0) / x;
    D = b - D;
    if (D == 0.0) D = tiny;
    C = b - 1.0 / C;
    if (C == 0.0) C = tiny;
    D = 1.0 / D;
    const double delta = C * D;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) return f;
  }
  throw OracleError("spherical Bessel continued fraction did not converge");
}

}  // namespace detail

// j_0..j_L at x >= 0: Miller's downward recurrence started from the
// continued-fraction ratio j_{L+1}/j_L, normalized by the closed form of j_0 or j_1.
inline std::vector<double> sph_bessel_j(int L, double x) {
  if (L < 0) throw ParameterError("sph_bessel_j: L must be nonnegative");
  if (!(x >= 0.0)) throw DomainError("sph_bessel_j: x must be nonnegative");
  std::vector<double> j(L + 1, 0.0);
  if (x == 0.0) {
    j[0] = 1.0;
    return j;
  }
  const int top = std::max(L, 1);
  std::vector<double> f(top + 2, 0.0);
  f[top] = 1.0;
  f[top + 1] = 1.0 / detail::inverse_ratio_cf(top + 1, x);
  for (int n = top; n >= 1; --n) {
    f[n - 1] = (2.0 * n + 1.0) / x * f[n] - f[n + 1];
    if (std::abs(f[n - 1]) > 1e250) {
      for (int k = n - 1; k <= top + 1; ++k) f[k] *= 1e-250;
    }
  }
  const double s = std::sin(x), c = std::cos(x);
  const double j0 = s / x;
  const double j1 = s / (x * x) - c / x;
  const double scale = std::abs(j0) >= std::abs(j1) ? j0 / f[0] : j1 / f[1];
  for (int n = 0; n <= L; ++n) j[n] = scale * f[n];
  return j;
}

// y_0..y_L at x > 0 by upward recurrence (stable for the growing solution).
inline std::vector<double> sph_bessel_y(int L, double x) {
  if (L < 0) throw ParameterError("sph_bessel_y: L must be nonnegative");
  if (!(x > 0.0)) throw DomainError("sph_bessel_y: x must be positive");
  std::vector<double> y(L + 1);
  const double s = std::sin(x), c = std::cos(x);
  y[0] = -c / x;
  if (L >= 1) y[1] = -c / (x * x) - s / x;
  for (int n = 1; n < L; ++n) y[n + 1] = (2.0 * n + 1.0) / x * y[n] - y[n - 1];
  return y;
}

// f'_n = f_{n-1} - (n+1)/x f_n, with f'_0 = -f_1. Needs values up to L+1.
template <class T>
std::vector<T> sph_derivative(const std::vector<T>& f, double x) {
  std::vector<T> d(f.size() - 1);
  d[0] = -f[1];
  for (std::size_t n = 1; n < d.size(); ++n) d[n] = f[n - 1] - (static_cast<double>(n) + 1.0) / x * f[n];
  return d;
}

inline std::vector<Complex> sph_hankel1(int L, double x) {
  const auto j = sph_bessel_j(L, x);
  const auto y = sph_bessel_y(L, x);
  std::vector<Complex> h(L + 1);
  for (int n = 0; n <= L; ++n) h[n] = {j[n], y[n]};
  return h;
}

inline std::vector<double> legendre(int L, double t) {
  std::vector<double> P(L + 1);
  P[0] = 1.0;
  if (L >= 1) P[1] = t;
  for (int n = 1; n < L; ++n) P[n + 1] = ((2.0 * n + 1.0) * t * P[n] - n * P[n - 1]) / (n + 1.0);
  return P;
}

// ---------------------------------------------------------------------------
// Plane-wave scattering by the unit sphere

class MieSeries {
 public:
  MieSeries(double kappa, double eta, Vec3 direction, int L = -1) : kappa_(kappa), eta_(eta) {
    if (!(kappa > 0.0)) throw ParameterError("MieSeries: kappa must be positive");
    if (std::abs(norm(direction) - 1.0) > 1e-12) throw ParameterError("MieSeries: direction must be a unit vector");
    dir_ = direction;
    L_ = L >= 0 ? L : static_cast<int>(std::ceil(kappa)) + 30;
    const auto j = sph_bessel_j(L_ + 1, kappa);
    const auto h = sph_hankel1(L_ + 1, kappa);
    const auto dj = sph_derivative(j, kappa);
    Complex il = 1.0;
    for (int l = 0; l <= L_; ++l) {
      const double w = 2.0 * l + 1.0;
      field_.push_back(-w * il * j[l] / h[l]);
      const Complex lambda = (kI * kappa * kappa * dj[l] + eta * kappa * j[l]) * h[l];
      density_.push_back(-w * il * j[l] / lambda);
      il *= kI;
    }
  }

  int order() const { return L_; }
  double kappa() const { return kappa_; }
  double eta() const { return eta_; }
  const Vec3& direction() const { return dir_; }

  Complex incident(const Vec3& x) const { return std::polar(1.0, kappa_ * dot(dir_, x)); }

  // -sum (2l+1) i^l [j_l(k)/h_l(k)] h_l(k|x|) P_l(cos gamma), |x| > 1.
  Complex scattered(const Vec3& x) const {
    const double r = norm(x);
    if (!(r > 1.0)) throw DomainError("MieSeries: point must lie outside the unit sphere");
    return sum(field_, sph_hankel1(L_, kappa_ * r), dot(dir_, x) / r);
  }

  // Same series evaluated at |x| = 1 (the boundary limit).
  Complex scattered_on_surface(const Vec3& x) const {
    return sum(field_, sph_hankel1(L_, kappa_), dot(dir_, x) / norm(x));
  }

  // Exact combined-field density on the sphere: -sum (2l+1) i^l j_l(k)/lambda_l P_l,
  // lambda_l = (i k^2 j_l'(k) + eta k j_l(k)) h_l(k).
  Complex density(const Vec3& x) const {
    std::vector<Complex> ones(L_ + 1, Complex(1.0));
    return sum(density_, ones, dot(dir_, x) / norm(x));
  }

  // |last term| / |sum| of the field series at x.
  double tail_ratio(const Vec3& x) const {
    const double r = norm(x);
    const auto h = sph_hankel1(L_, kappa_ * r);
    const auto P = legendre(L_, std::clamp(dot(dir_, x) / r, -1.0, 1.0));
    Complex s = 0.0;
    for (int l = 0; l <= L_; ++l) s += field_[l] * h[l] * P[l];
    return std::abs(field_[L_] * h[L_]) / std::abs(s);
  }

 private:
  Complex sum(const std::vector<Complex>& a, const std::vector<Complex>& radial, double t) const {
    const auto P = legendre(L_, std::clamp(t, -1.0, 1.0));
    Complex s = 0.0;
    for (int l = L_; l >= 0; --l) s += a[l] * radial[l] * P[l];
    return s;
  }

  double kappa_, eta_;
  Vec3 dir_;
  int L_;
  std::vector<Complex> field_, density_;
};

inline Complex mie_scattered_field(const MieSeries& series, const Vec3& x) { return series.scattered(x); }

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod quadrature

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss 7-point weights at kXgk[1], [3], [5], [7].
inline constexpr std::array<double, 4> kWg = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                             0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// 15 nodes on [-1, 1] with Kronrod and embedded Gauss weights.
struct Rule15 {
  std::array<double, 15> x{}, wk{}, wg{};
  Rule15() {
    for (int i = 0; i < 7; ++i) {
      x[i] = -kXgk[i];
      x[14 - i] = kXgk[i];
      wk[i] = wk[14 - i] = kWgk[i];
      if (i % 2 == 1) wg[i] = wg[14 - i] = kWg[i / 2];
    }
    x[7] = 0.0;
    wk[7] = kWgk[7];
    wg[7] = kWg[3];
  }
};

inline const Rule15& rule15() {
  static const Rule15 r;
  return r;
}

}  // namespace detail

struct IntegralResult {
  Complex value = 0.0;
  double error = 0.0;
  long evaluations = 0;
};

using Integrand1D = std::function<Complex(double)>;
using Integrand2D = std::function<Complex(double, double)>;

inline IntegralResult adaptive_integral_1d(const Integrand1D& f, double a, double b, double tol,
                                           int max_intervals = 20000) {
  if (!(tol >= 1e-15)) throw ParameterError("adaptive_integral_1d: tol must be at least 1e-15");
  const auto& R = detail::rule15();
  struct Piece {
    double a, b;
    Complex value;
    double error;
    bool operator<(const Piece& o) const { return error < o.error; }
  };
  IntegralResult res;
  auto eval = [&](double lo, double hi) {
    const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
    Complex k = 0.0, g = 0.0;
    for (int i = 0; i < 15; ++i) {
      const Complex v = f(c + r * R.x[i]);
      k += R.wk[i] * v;
      g += R.wg[i] * v;
    }
    res.evaluations += 15;
    return Piece{lo, hi, r * k, std::abs(r * (k - g))};
  };
  std::priority_queue<Piece> heap;
  heap.push(eval(a, b));
  Complex total = heap.top().value;
  double err = heap.top().error;
  while (err > tol) {
    if (static_cast<int>(heap.size()) >= max_intervals) {
      throw OracleError("adaptive_integral_1d: no convergence within the interval budget");
    }
    const Piece p = heap.top();
    heap.pop();
    const double m = 0.5 * (p.a + p.b);
    const Piece l = eval(p.a, m), r = eval(m, p.b);
    total += l.value + r.value - p.value;
    err += l.error + r.error - p.error;
    heap.push(l);
    heap.push(r);
  }
  // Re-sum to drop the accumulated update rounding.
  Complex s = 0.0;
  double e = 0.0;
  while (!heap.empty()) {
    s += heap.top().value;
    e += heap.top().error;
    heap.pop();
  }
  res.value = s;
  res.error = e;
  return res;
}

// Tensor 15x15 Gauss-Kronrod cells, refined by quadrisection of the worst cell.
inline IntegralResult adaptive_integral_2d(const Integrand2D& f, geometry::Rect domain, double tol,
                                           int max_cells = 40000) {
  if (!(tol >= 1e-15)) throw ParameterError("adaptive_integral_2d: tol must be at least 1e-15");
  const auto& R = detail::rule15();
  struct Cell {
    geometry::Rect box;
    Complex value;
    double error;
    bool operator<(const Cell& o) const { return error < o.error; }
  };
  IntegralResult res;
  auto eval = [&](const geometry::Rect& b) {
    const double c1 = 0.5 * (b.lo1 + b.hi1), r1 = 0.5 * (b.hi1 - b.lo1);
    const double c2 = 0.5 * (b.lo2 + b.hi2), r2 = 0.5 * (b.hi2 - b.lo2);
    Complex k = 0.0, g = 0.0;
    for (int i = 0; i < 15; ++i) {
      Complex krow = 0.0, grow = 0.0;
      for (int j = 0; j < 15; ++j) {
        const Complex v = f(c1 + r1 * R.x[i], c2 + r2 * R.x[j]);
        krow += R.wk[j] * v;
        grow += R.wg[j] * v;
      }
      k += R.wk[i] * krow;
      g += R.wg[i] * grow;
    }
    res.evaluations += 225;
    const double area = r1 * r2;
    return Cell{b, area * k, std::abs(area * (k - g))};
  };
  std::priority_queue<Cell> heap;
  heap.push(eval(domain));
  Complex total = heap.top().value;
  double err = heap.top().error;
  while (err > tol) {
    if (static_cast<int>(heap.size()) >= max_cells) {
      throw OracleError("adaptive_integral_2d: no convergence within the cell budget");
    }
    const Cell c = heap.top();
    heap.pop();
    const double m1 = 0.5 * (c.box.lo1 + c.box.hi1), m2 = 0.5 * (c.box.lo2 + c.box.hi2);
    const geometry::Rect parts[4] = {{c.box.lo1, m1, c.box.lo2, m2},
                                     {m1, c.box.hi1, c.box.lo2, m2},
                                     {c.box.lo1, m1, m2, c.box.hi2},
                                     {m1, c.box.hi1, m2, c.box.hi2}};
    total -= c.value;
    err -= c.error;
    for (const auto& b : parts) {
      const Cell s = eval(b);
      total += s.value;
      err += s.error;
      heap.push(s);
    }
  }
  Complex s = 0.0;
  double e = 0.0;
  while (!heap.empty()) {
    s += heap.top().value;
    e += heap.top().error;
    heap.pop();
  }
  res.value = s;
  res.error = e;
  return res;
}

// int_0^{2 pi} int_0^{rho_max} f(rho, theta) d rho d theta; f carries any Jacobian.
inline IntegralResult adaptive_integral_polar(const Integrand2D& f, double rho_max, double tol,
                                              int max_cells = 40000) {
  if (!(rho_max > 0.0)) throw ParameterError("adaptive_integral_polar: rho support must be positive");
  return adaptive_integral_2d(f, {0.0, rho_max, 0.0, kTwoPi}, tol, max_cells);
}

// int_0^{2 pi} int_R b(|rho|/delta) exp(2 pi i m.(rho e(theta))) d rho d theta
//   = 4 pi int_0^delta b(s/delta) J_0(2 pi s |m|) ds.
inline IntegralResult radial_mode_integral(const std::function<double(double)>& bump, double delta, double mnorm,
                                           double tol) {
  auto f = [&](double s) -> Complex {
    return 4.0 * kPi * bump(s / delta) * std::cyl_bessel_j(0.0, kTwoPi * s * mnorm);
  };
  return adaptive_integral_1d(f, 0.0, delta, tol);
}

// ---------------------------------------------------------------------------
// Brute-force operator: the Nystrom left-hand side by direct loops, with the
// densities interpolated by a naive DFT and evaluated pointwise.

inline trig::TrigPoly naive_interpolate(const trig::GridValues& g) {
  const int N = g.N;
  trig::TrigPoly p(N);
  const int lo = p.mmin();
  const double h = 1.0 / N;
  for (int m1 = lo; m1 < lo + N; ++m1) {
    for (int m2 = lo; m2 < lo + N; ++m2) {
      Complex s = 0.0;
      for (int n1 = 0; n1 < N; ++n1) {
        for (int n2 = 0; n2 < N; ++n2) {
          const Complex v = g(n1, n2);
          if (v == 0.0) continue;
          s += v * std::polar(1.0, -kTwoPi * (m1 * n1 + m2 * n2) * h);
        }
      }
      p.coef(m1, m2) = s / (static_cast<double>(N) * N);
    }
  }
  return p;
}

inline std::vector<Complex> brute_force_operator(const solver::NystromOperator& op, const std::vector<Complex>& phi) {
  if (phi.size() != op.size()) throw ParameterError("brute_force_operator: density size mismatch");
  const geometry::Atlas& atlas = op.atlas();
  const kernels::KernelSplit& split = op.split();
  const int J = op.charts();
  for (int j = 0; j < J; ++j) {
    if (op.grid(j).N > 16) throw ParameterError("brute_force_operator: N must be at most 16");
  }
  std::vector<trig::TrigPoly> polys;
  for (int j = 0; j < J; ++j) {
    const auto& g = op.grid(j);
    trig::GridValues v(g.N);
    for (std::size_t m = 0; m < g.size(); ++m) v.values[g.active[m]] = g.omega[m] * phi[op.offset(j) + m];
    polys.push_back(naive_interpolate(v));
  }
  std::vector<Complex> out(op.size());
  parallel_for(op.size(), [&](std::size_t t) {
    int i = 0;
    while (op.offset(i + 1) <= t) ++i;
    const auto& gi = op.grid(i);
    const UV u = gi.params[t - op.offset(i)];
    const Vec3 x = gi.points[t - op.offset(i)];
    Complex total = 0.5 * phi[t];
    if (op.options().kernels_off) {
      out[t] = total;
      return;
    }
    for (int j = 0; j < J; ++j) {
      const auto& gj = op.grid(j);
      Complex reg = 0.0;
      for (std::size_t m = 0; m < gj.size(); ++m) {
        reg += kernels::kernel_reg(split, x, gj.points[m], gj.normals[m]) * gj.jacobians[m] * gj.omega[m] *
               phi[op.offset(j) + m];
      }
      total += gj.h * gj.h * reg;

      if (atlas.distance_to_support(j, x) > atlas.eps1() * split.delta) continue;
      const quadrature::PolarRule& rule = op.rule(j);
      const quadrature::PolarCenter pc = quadrature::polar_center(atlas, i, j, u);
      const geometry::Chart& chart = atlas.chart(j);
      const double rho_max = quadrature::singular_param_radius(atlas, j, split);
      Complex sing = 0.0;
      for (int p = 0; p < rule.Theta; ++p) {
        const double theta = rule.theta[p];
        const auto nodes = quadrature::radial_nodes(pc.z, theta, rule.h, rule.N);
        const double ct = std::cos(theta), st = std::sin(theta);
        for (std::size_t n = 0; n < nodes.q.size(); ++n) {
          const double rho = nodes.rho[n];
          if (!(std::abs(rho) < rho_max + nodes.c * rule.h)) continue;
          const UV v = nodes.points[n];
          if (!chart.domain().contains(v)) continue;
          Complex kval;
          const geometry::SurfaceFrame f = chart.frame(v);
          const double R = norm(pc.r - f.x);
          if (rho != 0.0 && R >= split.support_radius()) continue;
          if (rho == 0.0 || R < quadrature::kTinyDistance) {
            const geometry::SurfaceJet s = chart.jet(pc.z);
            const Vec3 Je = ct * s.t1 + st * s.t2;
            const Vec3 eHe = (ct * ct) * s.h11 + (2.0 * ct * st) * s.h12 + (st * st) * s.h22;
            kval = s.jacobian * kernels::polar_K1_limit(Je, eHe, s.normal, split.params);
          } else {
            kval = std::abs(rho) * f.jacobian * kernels::kernel_sing(split, pc.r, f.x, f.normal);
          }
          sing += nodes.c * kval * trig::eval_point(polys[j], v);
        }
      }
      total += 0.5 * rule.h * rule.k * sing;
    }
    out[t] = total;
  });
  return out;
}

}  // namespace nystrom::oracle
