#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "nystrom/core/errors.hpp"
#include "nystrom/core/types.hpp"

namespace nystrom::trig {

// Lowest frequency of Z*_N = {-N/2 <= m < N/2}; the set has exactly N members.
inline int mode_min(int N) { return -(N / 2); }

// exp(2 pi i x), with the argument reduced to [-1/2, 1/2] first.
inline Complex cis2pi(double x) {
  const double f = x - std::round(x);
  return {std::cos(kTwoPi * f), std::sin(kTwoPi * f)};
}

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::Unscaled);
    return f;
  }();
  return engine;
}

// out[k] = sum_n in[n] exp(-2 pi i k n / N).
inline void dft_forward(std::vector<Complex>& out, const std::vector<Complex>& in) { fft_engine().fwd(out, in); }

// out[n] = sum_k in[k] exp(+2 pi i k n / N), unscaled.
inline void dft_backward(std::vector<Complex>& out, const std::vector<Complex>& in) { fft_engine().inv(out, in); }

inline int wrap(int m, int N) { return ((m % N) + N) % N; }

}  // namespace detail

// Values at the grid x_n = h n, n in Z_N, stored row-major (n1 slow).
struct GridValues {
  int N = 0;
  std::vector<Complex> values;

  GridValues() = default;
  explicit GridValues(int n) : N(n), values(static_cast<std::size_t>(n) * n) {}

  Complex& operator()(int n1, int n2) { return values[static_cast<std::size_t>(n1) * N + n2]; }
  const Complex& operator()(int n1, int n2) const { return values[static_cast<std::size_t>(n1) * N + n2]; }
};

// Bivariate trigonometric polynomial sum_{m in Z*_N} c(m) exp(2 pi i m.u).
class TrigPoly {
 public:
  TrigPoly() = default;
  explicit TrigPoly(int N) : N_(N), c_(static_cast<std::size_t>(N) * N) {
    if (N < 1) throw ParameterError("TrigPoly: N must be positive");
  }

  static TrigPoly mode(int N, int m1, int m2, Complex value = 1.0) {
    TrigPoly p(N);
    p.coef(m1, m2) = value;
    return p;
  }

  int N() const { return N_; }
  int mmin() const { return mode_min(N_); }
  bool has_mode(int m1, int m2) const {
    const int lo = mmin();
    return m1 >= lo && m1 < lo + N_ && m2 >= lo && m2 < lo + N_;
  }

  Complex& coef(int m1, int m2) { return c_[index(m1, m2)]; }
  const Complex& coef(int m1, int m2) const { return c_[index(m1, m2)]; }

  // Coefficient array indexed (m1 - mmin) * N + (m2 - mmin).
  const std::vector<Complex>& coefficients() const { return c_; }
  std::vector<Complex>& coefficients() { return c_; }

 private:
  std::size_t index(int m1, int m2) const {
    if (!has_mode(m1, m2)) throw DomainError("TrigPoly: mode outside Z*_N");
    const int lo = mmin();
    return static_cast<std::size_t>(m1 - lo) * N_ + (m2 - lo);
  }

  int N_ = 0;
  std::vector<Complex> c_;
};

// Q_N: the unique member of T_N matching the grid values.
inline TrigPoly interpolate_QN(const GridValues& g) {
  const int N = g.N;
  if (N < 1 || g.values.size() != static_cast<std::size_t>(N) * N) throw ParameterError("interpolate_QN: bad grid");
  std::vector<Complex> work(g.values);
  std::vector<Complex> in(N), out(N);
  for (int n1 = 0; n1 < N; ++n1) {
    for (int n2 = 0; n2 < N; ++n2) in[n2] = work[static_cast<std::size_t>(n1) * N + n2];
    detail::dft_forward(out, in);
    for (int k = 0; k < N; ++k) work[static_cast<std::size_t>(n1) * N + k] = out[k];
  }
  for (int k2 = 0; k2 < N; ++k2) {
    for (int n1 = 0; n1 < N; ++n1) in[n1] = work[static_cast<std::size_t>(n1) * N + k2];
    detail::dft_forward(out, in);
    for (int k = 0; k < N; ++k) work[static_cast<std::size_t>(k) * N + k2] = out[k];
  }
  TrigPoly p(N);
  const double scale = 1.0 / (static_cast<double>(N) * N);
  const int lo = mode_min(N);
  for (int m1 = lo; m1 < lo + N; ++m1) {
    for (int m2 = lo; m2 < lo + N; ++m2) {
      p.coef(m1, m2) = scale * work[static_cast<std::size_t>(detail::wrap(m1, N)) * N + detail::wrap(m2, N)];
    }
  }
  return p;
}

// Values of the polynomial at its own grid (inverse of interpolate_QN).
inline GridValues grid_values(const TrigPoly& p) {
  const int N = p.N();
  const int lo = p.mmin();
  std::vector<Complex> work(static_cast<std::size_t>(N) * N);
  for (int m1 = lo; m1 < lo + N; ++m1) {
    for (int m2 = lo; m2 < lo + N; ++m2) {
      work[static_cast<std::size_t>(detail::wrap(m1, N)) * N + detail::wrap(m2, N)] = p.coef(m1, m2);
    }
  }
  std::vector<Complex> in(N), out(N);
  for (int k1 = 0; k1 < N; ++k1) {
    for (int k2 = 0; k2 < N; ++k2) in[k2] = work[static_cast<std::size_t>(k1) * N + k2];
    detail::dft_backward(out, in);
    for (int n = 0; n < N; ++n) work[static_cast<std::size_t>(k1) * N + n] = out[n];
  }
  GridValues g(N);
  for (int n2 = 0; n2 < N; ++n2) {
    for (int k1 = 0; k1 < N; ++k1) in[k1] = work[static_cast<std::size_t>(k1) * N + n2];
    detail::dft_backward(out, in);
    for (int n1 = 0; n1 < N; ++n1) g(n1, n2) = out[n1];
  }
  return g;
}

inline TrigPoly project_PN(const TrigPoly& p, int N_target) {
  if (N_target > p.N()) throw ParameterError("project_PN: target order exceeds source order");
  TrigPoly out(N_target);
  const int lo = out.mmin();
  for (int m1 = lo; m1 < lo + N_target; ++m1) {
    for (int m2 = lo; m2 < lo + N_target; ++m2) out.coef(m1, m2) = p.coef(m1, m2);
  }
  return out;
}

inline Complex eval_point(const TrigPoly& p, UV u) {
  const int N = p.N();
  const int lo = p.mmin();
  std::vector<Complex> e2(N);
  for (int k = 0; k < N; ++k) e2[k] = cis2pi((lo + k) * u.u2);
  Complex total = 0.0;
  const auto& c = p.coefficients();
  for (int a = 0; a < N; ++a) {
    Complex row = 0.0;
    for (int b = 0; b < N; ++b) row += c[static_cast<std::size_t>(a) * N + b] * e2[b];
    total += cis2pi((lo + a) * u.u1) * row;
  }
  return total;
}

// Vertical lines have u1 = q h fixed and run along u2; horizontal lines the reverse.
enum class LineKind { vertical, horizontal };

struct Line {
  LineKind kind = LineKind::vertical;
  int q = 0;
};

// Univariate coefficients c(m) of the restriction of p to one grid line, m in Z*_N:
// restriction(y) = sum_m c(m) exp(2 pi i m y).
inline std::vector<Complex> line_coefficients(const TrigPoly& p, Line line) {
  const int N = p.N();
  if (line.q < 0 || line.q >= N) throw DomainError("line index outside 0..N-1");
  const int lo = p.mmin();
  std::vector<Complex> c(N, 0.0);
  std::vector<Complex> phase(N);
  for (int k = 0; k < N; ++k) phase[k] = cis2pi(static_cast<double>((lo + k) * line.q) / N);
  const auto& a = p.coefficients();
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      const Complex v = a[static_cast<std::size_t>(i) * N + j];
      if (line.kind == LineKind::vertical) {
        c[j] += v * phase[i];
      } else {
        c[i] += v * phase[j];
      }
    }
  }
  return c;
}

// Line coefficients of every grid line of the given kind, straight from grid
// values: row q holds (1/N) sum_n g(line q, n) exp(-2 pi i m n / N), m in Z*_N.
inline std::vector<Complex> all_line_coefficients(const GridValues& g, LineKind kind) {
  const int N = g.N;
  const int lo = mode_min(N);
  std::vector<Complex> out(static_cast<std::size_t>(N) * N);
  std::vector<Complex> in(N), tr(N);
  for (int q = 0; q < N; ++q) {
    for (int n = 0; n < N; ++n) in[n] = kind == LineKind::vertical ? g(q, n) : g(n, q);
    detail::dft_forward(tr, in);
    for (int k = 0; k < N; ++k) out[static_cast<std::size_t>(q) * N + k] = tr[detail::wrap(lo + k, N)] / double(N);
  }
  return out;
}

inline Complex eval_line(const std::vector<Complex>& c, double y) {
  const int N = static_cast<int>(c.size());
  const int lo = mode_min(N);
  Complex s = 0.0;
  for (int k = 0; k < N; ++k) s += c[k] * cis2pi((lo + k) * y);
  return s;
}

inline std::vector<Complex> eval_radial_line(const TrigPoly& p, Line line, const std::vector<double>& offsets) {
  const std::vector<Complex> c = line_coefficients(p, line);
  std::vector<Complex> out;
  out.reserve(offsets.size());
  for (double y : offsets) out.push_back(eval_line(c, y));
  return out;
}

inline double sobolev_norm(const TrigPoly& p, double s) {
  const int N = p.N();
  const int lo = p.mmin();
  double total = 0.0;
  for (int m1 = lo; m1 < lo + N; ++m1) {
    for (int m2 = lo; m2 < lo + N; ++m2) {
      const double a2 = std::norm(p.coef(m1, m2));
      if (m1 == 0 && m2 == 0) {
        total += a2;
      } else {
        total += std::pow(static_cast<double>(m1 * m1 + m2 * m2), s) * a2;
      }
    }
  }
  return std::sqrt(total);
}

// Spectral derivatives d^r/dy^r, r = 0..d, along every grid line of the given
// kind at the refined points y_p = p / (N m), p = 0..N m (the last equals p = 0).
// Result indexed [r][q * (N m + 1) + p].
inline std::vector<std::vector<Complex>> derivatives_on_fine_grid(const TrigPoly& poly, LineKind kind, int d, int m) {
  if (m < 1) throw ParameterError("derivatives_on_fine_grid: refinement must be >= 1");
  if (d < 0) throw ParameterError("derivatives_on_fine_grid: negative order");
  const int N = poly.N();
  const int lo = poly.mmin();
  const int M = N * m;
  const GridValues g = grid_values(poly);
  const std::vector<Complex> lc = all_line_coefficients(g, kind);
  std::vector<std::vector<Complex>> out(d + 1, std::vector<Complex>(static_cast<std::size_t>(N) * (M + 1)));
  std::vector<Complex> padded(M), vals(M);
  for (int r = 0; r <= d; ++r) {
    for (int q = 0; q < N; ++q) {
      std::fill(padded.begin(), padded.end(), Complex(0.0));
      for (int k = 0; k < N; ++k) {
        const int mode = lo + k;
        padded[detail::wrap(mode, M)] = lc[static_cast<std::size_t>(q) * N + k] * std::pow(Complex(0.0, kTwoPi * mode), r);
      }
      detail::dft_backward(vals, padded);
      for (int p = 0; p < M; ++p) out[r][static_cast<std::size_t>(q) * (M + 1) + p] = vals[p];
      out[r][static_cast<std::size_t>(q) * (M + 1) + M] = vals[0];
    }
  }
  return out;
}

// Two-point Hermite basis of degree 2d+1 on [0,1]: left_r(t) and right_r(t) carry
// the r-th derivative data at t = 0 and t = 1 respectively.
class HermiteBasis {
 public:
  explicit HermiteBasis(int d) : d_(d) {
    if (d < 0) throw ParameterError("HermiteBasis: d must be nonnegative");
    const int n = 2 * d + 2;
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s <= d; ++s) {
      for (int p = s; p < n; ++p) {
        double falling = 1.0;
        for (int t = 0; t < s; ++t) falling *= (p - t);
        if (p == s) V(s, p) = falling;
        V(d + 1 + s, p) = falling;
      }
    }
    coef_ = V.inverse();
  }

  int degree() const { return d_; }

  // left[r], right[r] for r = 0..d.
  void eval(double t, double* left, double* right) const {
    const int n = 2 * d_ + 2;
    double powers[64];
    powers[0] = 1.0;
    for (int p = 1; p < n; ++p) powers[p] = powers[p - 1] * t;
    for (int r = 0; r <= d_; ++r) {
      double a = 0.0, b = 0.0;
      for (int p = 0; p < n; ++p) {
        a += coef_(p, r) * powers[p];
        b += coef_(p, d_ + 1 + r) * powers[p];
      }
      left[r] = a;
      right[r] = b;
    }
  }

  static const HermiteBasis& get(int d) {
    static std::mutex mu;
    static std::map<int, HermiteBasis> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(d);
    if (it == cache.end()) it = cache.emplace(d, HermiteBasis(d)).first;
    return it->second;
  }

 private:
  int d_;
  Eigen::MatrixXd coef_;  // column j: monomial coefficients of basis function j
};

// Piecewise Hermite interpolant on breakpoints p k, p = 0..M, with M k = 1.
template <class T>
struct HermiteInterpolant {
  double k = 0.0;
  int d = 0;
  int M = 0;
  std::vector<T> data;  // data[p * (d + 1) + r] = f^{(r)}(p k)
};

template <class T>
HermiteInterpolant<T> hermite_interpolate(const std::vector<std::vector<T>>& derivs, double k, int d) {
  if (d < 0) throw ParameterError("hermite_interpolate: d must be nonnegative");
  if (!(k > 0.0)) throw ParameterError("hermite_interpolate: mesh must be positive");
  const int M = static_cast<int>(std::lround(1.0 / k));
  if (std::abs(M * k - 1.0) > 1e-12) throw ParameterError("hermite_interpolate: 1/k must be an integer");
  if (derivs.size() != static_cast<std::size_t>(M + 1)) throw ParameterError("hermite_interpolate: need M+1 breakpoints");
  HermiteInterpolant<T> h{k, d, M, {}};
  h.data.reserve(static_cast<std::size_t>(M + 1) * (d + 1));
  for (const auto& row : derivs) {
    if (row.size() < static_cast<std::size_t>(d + 1)) {
      throw ParameterError("hermite_interpolate: insufficient derivative data");
    }
    for (int r = 0; r <= d; ++r) h.data.push_back(row[r]);
  }
  return h;
}

template <class T>
T hermite_eval(const HermiteInterpolant<T>& h, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("hermite_eval: x outside [0,1]");
  int p = static_cast<int>(std::floor(x / h.k));
  p = std::min(std::max(p, 0), h.M - 1);
  const double t = (x - p * h.k) / h.k;
  if (t == 0.0) return h.data[static_cast<std::size_t>(p) * (h.d + 1)];
  if (t == 1.0) return h.data[static_cast<std::size_t>(p + 1) * (h.d + 1)];
  double left[32], right[32];
  HermiteBasis::get(h.d).eval(t, left, right);
  T value{};
  double kr = 1.0;
  for (int r = 0; r <= h.d; ++r) {
    value += kr * (left[r] * h.data[static_cast<std::size_t>(p) * (h.d + 1) + r] +
                   right[r] * h.data[static_cast<std::size_t>(p + 1) * (h.d + 1) + r]);
    kr *= h.k;
  }
  return value;
}

}  // namespace nystrom::trig
