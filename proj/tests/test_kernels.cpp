#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nystrom/geometry.hpp"
#include "nystrom/kernels.hpp"

using namespace nystrom;
using namespace nystrom::kernels;

namespace {

struct Pair {
  Vec3 r, rp, np;
};

// Random point pairs on the unit sphere with separations spread over (1e-4, 2).
std::vector<Pair> sphere_pairs(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> U(-4.0, std::log10(2.0));
  std::vector<Pair> out;
  for (int k = 0; k < n; ++k) {
    const Vec3 r = normalized(Vec3{g(rng), g(rng), g(rng)});
    const Vec3 t = normalized(cross(r, Vec3{g(rng), g(rng), g(rng)}));
    const double dist = std::pow(10.0, U(rng));
    const double ang = 2.0 * std::asin(std::min(1.0, 0.5 * dist));
    const Vec3 rp = std::cos(ang) * r + std::sin(ang) * t;
    out.push_back({r, rp, rp});
  }
  return out;
}

double rel(Complex a, Complex b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST(Kernels, FundamentalSolutionValue) {
  const Vec3 r{0.1, 0.2, 0.3}, rp{0.1, 0.2, 1.0};
  const Complex v = phi_kappa(r, rp, 1.3);
  EXPECT_NEAR(v.real(), 0.0697719070234174661, 1e-16);
  EXPECT_NEAR(v.imag(), 0.0897524448294232905, 1e-16);
}

TEST(Kernels, CoincidentPointsThrow) {
  const Vec3 r{0, 0, 1};
  const ScatteringParams p{1.0, 1.0};
  EXPECT_THROW(phi_kappa(r, r, 1.0), SingularityError);
  EXPECT_THROW(kernel_K(r, r, r, p), SingularityError);
  EXPECT_THROW(kernel_K1(r, r, r, p), SingularityError);
  // The smooth part is finite there: eta kappa / (4 pi).
  EXPECT_NEAR(kernel_K0(r, r, r, p).real(), kInv4Pi, 1e-16);
}

TEST(Kernels, SmoothPlusSingularIsK) {
  for (double kappa : {0.5, 1.0, 7.0}) {
    const ScatteringParams p{kappa, std::max(1.0, kappa)};
    for (const auto& q : sphere_pairs(400, 3)) {
      const Complex K = kernel_K(q.r, q.rp, q.np, p);
      const Complex sum = kernel_K0(q.r, q.rp, q.np, p) + kernel_K1(q.r, q.rp, q.np, p);
      EXPECT_LT(rel(K, sum), 1e-13);
    }
  }
}

TEST(Kernels, NormalDerivativeByFiniteDifferences) {
  const ScatteringParams p{1.7, 1.2};
  const Vec3 r{0.3, -0.2, 0.9};
  const Vec3 rp = normalized(Vec3{0.5, 0.4, 0.6});
  const Vec3 np = rp;
  const double e = 1e-5;
  const Complex dphi = (phi_kappa(r, rp + e * np, p.kappa) - phi_kappa(r, rp - e * np, p.kappa)) / (2 * e);
  const Complex expect = dphi - kI * p.eta * phi_kappa(r, rp, p.kappa);
  EXPECT_LT(rel(kernel_K(r, rp, np, p), expect), 1e-9);
}

TEST(Kernels, TaylorBranchesAreContinuous) {
  for (double x : {0.0999999, 0.1, 0.1000001}) {
    EXPECT_NEAR(detail::sinc(x), std::sin(x) / x, 1e-15);
    EXPECT_NEAR(detail::cos_sinc3(x), (x * std::cos(x) - std::sin(x)) / (x * x * x), 2e-12);
  }
  // Below the switch the series is the accurate route.
  EXPECT_NEAR(detail::cos_sinc3(1e-4), -1.0 / 3 + 1e-8 / 30, 1e-16);
}

TEST(Split, RegularPlusSingularIsK) {
  const geometry::Atlas atlas = geometry::build_sphere_atlas(0.49);
  const ScatteringParams p{1.0, 1.0};
  for (double delta : {atlas.delta0(), 0.5 * atlas.delta0(), 0.25 * atlas.delta0()}) {
    const KernelSplit split(p, atlas.cutoff(), delta);
    for (const auto& q : sphere_pairs(400, 4)) {
      const Complex K = kernel_K(q.r, q.rp, q.np, p);
      const Complex sum = kernel_reg(split, q.r, q.rp, q.np) + kernel_sing(split, q.r, q.rp, q.np);
      EXPECT_LT(rel(K, sum), 1e-13);
    }
  }
}

TEST(Split, SupportAndPlateau) {
  const geometry::Atlas atlas = geometry::build_sphere_atlas(0.49);
  const ScatteringParams p{1.0, 1.0};
  const KernelSplit split(p, atlas.cutoff(), 0.5 * atlas.delta0());
  for (const auto& q : sphere_pairs(400, 5)) {
    const double R = norm(q.r - q.rp);
    if (R >= split.support_radius()) {
      EXPECT_EQ(kernel_sing(split, q.r, q.rp, q.np), Complex(0.0));
      EXPECT_EQ(kernel_reg(split, q.r, q.rp, q.np), kernel_K(q.r, q.rp, q.np, p));
    }
    if (R <= split.plateau_radius()) {
      EXPECT_EQ(kernel_reg(split, q.r, q.rp, q.np), kernel_K0(q.r, q.rp, q.np, p));
    }
  }
}

TEST(Split, DeltaOutOfRangeThrows) {
  const geometry::Atlas atlas = geometry::build_sphere_atlas(0.49);
  EXPECT_THROW(KernelSplit({1.0, 1.0}, atlas.cutoff(), 0.0), ParameterError);
  EXPECT_THROW(KernelSplit({1.0, 1.0}, atlas.cutoff(), 2.0 * atlas.delta0()), ParameterError);
  EXPECT_THROW(KernelSplit({-1.0, 1.0}, atlas.cutoff(), atlas.delta0()), ParameterError);
}

TEST(Polar, LimitOfRhoTimesK1) {
  // |rho| K1(r(z), r(z + rho e)) tends to polar_K1_limit; the error is O(rho).
  const geometry::Atlas e = geometry::build_ellipsoid_atlas({1.0, 0.8, 1.5}, 0.45);
  const geometry::Chart& c = e.chart(2);
  const ScatteringParams p{1.0, 1.0};
  const UV z{0.44, 0.53};
  const geometry::SurfaceJet s = c.jet(z);
  for (double th : {0.3, 1.9, 4.0}) {
    const double ct = std::cos(th), st = std::sin(th);
    const Vec3 Je = ct * s.t1 + st * s.t2;
    const Vec3 eHe = (ct * ct) * s.h11 + (2 * ct * st) * s.h12 + (st * st) * s.h22;
    const Complex lim = polar_K1_limit(Je, eHe, s.normal, p);
    double prev = 1e300;
    for (double rho : {1e-2, 1e-3, 1e-4}) {
      const geometry::SurfaceFrame f = c.frame({z.u1 + rho * ct, z.u2 + rho * st});
      const Complex v = rho * kernel_K1(s.x, f.x, f.normal, p);
      const double err = std::abs(v - lim);
      EXPECT_LT(err, prev);
      prev = err;
    }
    EXPECT_LT(prev, 1e-3 * std::abs(lim));
  }
}
