#pragma once

#include <cmath>

namespace nystrom {

// Truncated Taylor expansion in two variables up to second order. Chart maps
// are templated on their scalar type so that a single definition yields the
// surface point, its tangent vectors and its second derivatives.
struct Jet2 {
  double v = 0.0;
  double d1 = 0.0, d2 = 0.0;
  double d11 = 0.0, d12 = 0.0, d22 = 0.0;

  Jet2() = default;
  Jet2(double value) : v(value) {}  // NOLINT: constants promote implicitly
  Jet2(double value, double g1, double g2, double h11, double h12, double h22)
      : v(value), d1(g1), d2(g2), d11(h11), d12(h12), d22(h22) {}

  static Jet2 variable(double value, int k) {
    return k == 0 ? Jet2(value, 1.0, 0.0, 0.0, 0.0, 0.0) : Jet2(value, 0.0, 1.0, 0.0, 0.0, 0.0);
  }

  Jet2& operator+=(const Jet2& b) {
    v += b.v;
    d1 += b.d1;
    d2 += b.d2;
    d11 += b.d11;
    d12 += b.d12;
    d22 += b.d22;
    return *this;
  }
};

inline Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
inline Jet2 operator-(const Jet2& a) { return {-a.v, -a.d1, -a.d2, -a.d11, -a.d12, -a.d22}; }
inline Jet2 operator-(const Jet2& a, const Jet2& b) { return a + (-b); }

inline Jet2 operator*(const Jet2& a, const Jet2& b) {
  return {a.v * b.v,
          a.d1 * b.v + a.v * b.d1,
          a.d2 * b.v + a.v * b.d2,
          a.d11 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d11,
          a.d12 * b.v + a.d1 * b.d2 + a.d2 * b.d1 + a.v * b.d12,
          a.d22 * b.v + 2.0 * a.d2 * b.d2 + a.v * b.d22};
}

// Applies a scalar function given its value and first two derivatives at a.v.
inline Jet2 chain(const Jet2& a, double f, double fp, double fpp) {
  return {f,
          fp * a.d1,
          fp * a.d2,
          fpp * a.d1 * a.d1 + fp * a.d11,
          fpp * a.d1 * a.d2 + fp * a.d12,
          fpp * a.d2 * a.d2 + fp * a.d22};
}

inline Jet2 inverse(const Jet2& a) {
  const double f = 1.0 / a.v;
  return chain(a, f, -f * f, 2.0 * f * f * f);
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) { return a * inverse(b); }

inline Jet2 sqrt(const Jet2& a) {
  const double f = std::sqrt(a.v);
  return chain(a, f, 0.5 / f, -0.25 / (f * a.v));
}

inline Jet2 tan(const Jet2& a) {
  const double t = std::tan(a.v);
  const double s2 = 1.0 + t * t;
  return chain(a, t, s2, 2.0 * t * s2);
}

}  // namespace nystrom
