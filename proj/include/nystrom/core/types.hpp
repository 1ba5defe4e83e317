#pragma once

#include <cmath>
#include <complex>
#include <numbers>

namespace nystrom {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

// Point of a chart parameter domain.
struct UV {
  double u1 = 0.0;
  double u2 = 0.0;

  friend UV operator+(UV a, UV b) { return {a.u1 + b.u1, a.u2 + b.u2}; }
  friend UV operator-(UV a, UV b) { return {a.u1 - b.u1, a.u2 - b.u2}; }
  friend UV operator*(double s, UV a) { return {s * a.u1, s * a.u2}; }
  friend bool operator==(UV a, UV b) = default;
};

template <class T>
struct Vec3T {
  T x{}, y{}, z{};

  T& operator[](int k) { return k == 0 ? x : (k == 1 ? y : z); }
  const T& operator[](int k) const { return k == 0 ? x : (k == 1 ? y : z); }

  friend Vec3T operator+(const Vec3T& a, const Vec3T& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3T operator-(const Vec3T& a, const Vec3T& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3T operator-(const Vec3T& a) { return {-a.x, -a.y, -a.z}; }
  friend Vec3T operator*(const T& s, const Vec3T& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend Vec3T operator*(const Vec3T& a, const T& s) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3T& a, const Vec3T& b) = default;
};

using Vec3 = Vec3T<double>;

template <class T>
inline T dot(const Vec3T<T>& a, const Vec3T<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 normalized(const Vec3& a) { return (1.0 / norm(a)) * a; }

}  // namespace nystrom
