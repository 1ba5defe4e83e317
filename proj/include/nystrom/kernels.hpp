#pragma once

#include <algorithm>
#include <cmath>

#include "nystrom/core/errors.hpp"
#include "nystrom/core/types.hpp"
#include "nystrom/geometry.hpp"

namespace nystrom::kernels {

struct ScatteringParams {
  double kappa = 1.0;
  double eta = 1.0;

  static ScatteringParams with_default_eta(double kappa) { return {kappa, std::max(1.0, kappa)}; }

  void validate() const {
    if (!(kappa > 0.0)) throw ParameterError("kappa must be positive");
    if (!(eta > 0.0)) throw ParameterError("eta must be positive");
  }
};

struct KernelSplit {
  ScatteringParams params;
  geometry::CutoffFamily cutoff;
  double delta = 0.0;

  KernelSplit() = default;
  KernelSplit(ScatteringParams p, geometry::CutoffFamily c, double d) : params(p), cutoff(c), delta(d) {
    params.validate();
    if (!(d > 0.0) || d > c.delta0 * (1.0 + 1e-12)) throw ParameterError("KernelSplit: delta must lie in (0, delta0]");
  }

  double support_radius() const { return cutoff.eps1 * delta; }
  double plateau_radius() const { return cutoff.eps0 * delta; }
  double eta_at(double dist) const { return cutoff.eta(dist, delta); }
};

inline constexpr double kInv4Pi = 1.0 / (4.0 * kPi);

namespace detail {

inline void require_distinct(double R) {
  if (!(R > 0.0)) throw SingularityError("kernel evaluated at coincident points");
}

// sin(x)/x and (x cos x - sin x)/x^3, with six-term Taylor series near 0.
inline double sinc(double x) {
  if (std::abs(x) < 0.1) {
    const double x2 = x * x;
    return 1.0 + x2 * (-1.0 / 6 + x2 * (1.0 / 120 + x2 * (-1.0 / 5040 + x2 * (1.0 / 362880 + x2 * (-1.0 / 39916800)))));
  }
  return std::sin(x) / x;
}

inline double cos_sinc3(double x) {
  if (std::abs(x) < 0.1) {
    const double x2 = x * x;
    return -1.0 / 3 +
           x2 * (1.0 / 30 + x2 * (-1.0 / 840 + x2 * (1.0 / 45360 + x2 * (-1.0 / 3991680 + x2 * (1.0 / 518918400)))));
  }
  return (x * std::cos(x) - std::sin(x)) / (x * x * x);
}

}  // namespace detail

inline Complex phi_kappa(const Vec3& r, const Vec3& rp, double kappa) {
  const double R = norm(r - rp);
  detail::require_distinct(R);
  return std::polar(kInv4Pi / R, kappa * R);
}

// dPhi/dnu(r') - i eta Phi(r, r').
inline Complex kernel_K(const Vec3& r, const Vec3& rp, const Vec3& np, const ScatteringParams& p) {
  const Vec3 diff = r - rp;
  const double R = norm(diff);
  detail::require_distinct(R);
  const double d = dot(diff, np);
  const Complex e = std::polar(kInv4Pi / R, p.kappa * R);
  return e * Complex(d / (R * R), -(p.kappa * d / R + p.eta));
}

// Smooth part: eta sin(kR)/(4 pi R) - i (k R cos kR - sin kR) d / (4 pi R^3), d = (r - r').nu'.
inline Complex kernel_K0(const Vec3& r, const Vec3& rp, const Vec3& np, const ScatteringParams& p) {
  const Vec3 diff = r - rp;
  const double R = norm(diff);
  const double d = dot(diff, np);
  const double k = p.kappa;
  const double x = k * R;
  return kInv4Pi * Complex(p.eta * k * detail::sinc(x), -k * k * k * detail::cos_sinc3(x) * d);
}

// Weakly singular part: -i eta cos(kR)/(4 pi R) + (kR sin kR + cos kR) d / (4 pi R^3).
inline Complex kernel_K1(const Vec3& r, const Vec3& rp, const Vec3& np, const ScatteringParams& p) {
  const Vec3 diff = r - rp;
  const double R = norm(diff);
  detail::require_distinct(R);
  const double d = dot(diff, np);
  const double x = p.kappa * R;
  const double c = std::cos(x), s = std::sin(x);
  return kInv4Pi * Complex((x * s + c) * d / (R * R * R), -p.eta * c / R);
}

// K0 + (1 - eta_delta) K1. Inside the plateau this is K0, which is finite at r = r'.
inline Complex kernel_reg(const KernelSplit& split, const Vec3& r, const Vec3& rp, const Vec3& np) {
  const double R = norm(r - rp);
  if (R >= split.support_radius()) return kernel_K(r, rp, np, split.params);
  const Complex k0 = kernel_K0(r, rp, np, split.params);
  if (R <= split.plateau_radius()) return k0;
  return k0 + (1.0 - split.eta_at(R)) * kernel_K1(r, rp, np, split.params);
}

inline Complex kernel_sing(const KernelSplit& split, const Vec3& r, const Vec3& rp, const Vec3& np) {
  const double R = norm(r - rp);
  detail::require_distinct(R);
  if (R >= split.support_radius()) return 0.0;
  return split.eta_at(R) * kernel_K1(r, rp, np, split.params);
}

// Limit of |rho| K1(r(z), r(z + rho e)) as rho -> 0 along the unit direction e,
// given the tangent J e and second derivative e^T H e of the chart map at z and
// the unit normal there: -i eta / (4 pi |Je|) + nu.(eHe) / (8 pi |Je|^3).
inline Complex polar_K1_limit(const Vec3& Je, const Vec3& eHe, const Vec3& normal, const ScatteringParams& p) {
  const double s = norm(Je);
  return kInv4Pi * Complex(0.5 * dot(normal, eHe) / (s * s * s), -p.eta / s);
}

}  // namespace nystrom::kernels
