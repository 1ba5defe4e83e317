#include <gtest/gtest.h>

#include <cmath>

#include "nystrom/geometry.hpp"
#include "nystrom/harness/experiments.hpp"
#include "nystrom/oracle.hpp"
#include "nystrom/quadrature.hpp"

using namespace nystrom;
using namespace nystrom::quadrature;

namespace {

const geometry::Atlas& sphere() {
  static const geometry::Atlas a = geometry::build_sphere_atlas(0.49);
  return a;
}

double schedule(int N) { return std::min(sphere().delta0(), sphere().delta0() * std::pow(16.0 / N, 1.0 / 3.0)); }

}  // namespace

TEST(PolarRule, WeightsAndBranches) {
  EXPECT_DOUBLE_EQ(c_weight(0.0), 1.0);
  EXPECT_NEAR(c_weight(kPi / 4), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(c_weight(kPi / 2), 1.0, 1e-15);
  EXPECT_EQ(branch(0.1), LineKind::vertical);
  EXPECT_EQ(branch(kPi / 2), LineKind::horizontal);
  const PolarRule r = make_polar_rule(32, 0.5, 2.0);
  EXPECT_EQ(r.Theta, static_cast<int>(std::lround(2.0 * std::pow(32.0, 1.5))));
  EXPECT_DOUBLE_EQ(r.k, kTwoPi / r.Theta);
  EXPECT_THROW(make_polar_rule(3), ParameterError);
  EXPECT_THROW(make_polar_rule(16, 0.0), ParameterError);
}

TEST(PolarRule, RadialNodesLieOnGridLines) {
  const int N = 16;
  const double h = 1.0 / N;
  const UV z{0.4321, 0.6789};
  for (double th : {0.2, 1.0, 2.5, 4.4}) {
    const RadialNodeSet s = radial_nodes(z, th, h, N);
    for (std::size_t k = 0; k < s.q.size(); ++k) {
      const UV v = s.points[k];
      if (s.kind == LineKind::vertical) {
        EXPECT_EQ(v.u1, s.q[k] * h);
      } else {
        EXPECT_EQ(v.u2, s.q[k] * h);
      }
      EXPECT_NEAR(v.u1, z.u1 + s.rho[k] * std::cos(th), 1e-14);
      EXPECT_NEAR(v.u2, z.u2 + s.rho[k] * std::sin(th), 1e-14);
    }
    // Consecutive nodes are c(theta) h apart.
    EXPECT_NEAR(std::abs(s.rho[1] - s.rho[0]), c_weight(th) * h, 1e-14);
  }
}

TEST(Qhkg, ZeroDensityGivesExactZero) {
  auto chi = [](double rho, double) { return harness::quad_bump(rho / 0.3); };
  auto gamma = [](double) { return 0.0; };
  const Complex q = quad_Qhkg(chi, 0.3, trig::TrigPoly(8), gamma, 1.0 / 32, kTwoPi / 362);
  EXPECT_EQ(q, Complex(0.0));
}

TEST(Qhkg, RadialModeOracleAgreesWithPolarCubature) {
  // Two routes to int int b(|rho|/delta) e_m(rho e(theta)): Bessel reduction and 2D cubature.
  const double delta = 0.3;
  for (auto [m1, m2] : {std::pair{0, 0}, std::pair{2, 1}, std::pair{-5, 3}}) {
    const double mn = std::hypot(m1, m2);
    const Complex bessel = oracle::radial_mode_integral(harness::quad_bump, delta, mn, 1e-14).value;
    auto f = [&](double rho, double th) -> Complex {
      // rho >= 0 only; the (-rho, theta) half equals (rho, theta + pi).
      return 2.0 * harness::quad_bump(rho / delta) *
             std::cos(kTwoPi * rho * (m1 * std::cos(th) + m2 * std::sin(th)));
    };
    const Complex cub = oracle::adaptive_integral_polar(f, delta, 1e-13).value;
    EXPECT_LT(std::abs(bessel - cub), 1e-11);
  }
}

TEST(Qhkg, ConstantDensityConvergesToBumpIntegral) {
  const double delta = 0.3;
  const Complex exact = oracle::radial_mode_integral(harness::quad_bump, delta, 0.0, 1e-14).value;
  auto chi = [&](double rho, double) { return harness::quad_bump(rho / delta); };
  const UV z{0.371, 0.6085};
  double prev = 1e300;
  for (int N : {16, 32, 64}) {
    auto gamma = [&](double th) { return branch(th) == LineKind::vertical ? -z.u1 / std::cos(th) : -z.u2 / std::sin(th); };
    const PolarRule r = make_polar_rule(N);
    const Complex q = quad_Qhkg(chi, delta, trig::TrigPoly::mode(4, 0, 0), gamma, 1.0 / N, r.k, z);
    const double err = std::abs(q - exact);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Regular, TrapezoidalSumMatchesDirectLoop) {
  const geometry::Atlas& a = sphere();
  const kernels::KernelSplit split({1.0, 1.0}, a.cutoff(), a.delta0());
  const geometry::ChartGrid g = geometry::grid(a, 2, 12);
  std::vector<Complex> phi(g.size());
  for (std::size_t m = 0; m < g.size(); ++m) phi[m] = {std::cos(3.0 * m), std::sin(1.0 * m)};
  const std::vector<UV> targets = {{0.5, 0.5}, {0.2, 0.7}};
  const auto got = apply_regular(split, a, 0, g, phi, targets);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Vec3 r = a.chart(0).point(targets[t]);
    Complex s = 0.0;
    for (std::size_t m = 0; m < g.size(); ++m) {
      s += g.h * g.h * kernels::kernel_reg(split, r, g.points[m], g.normals[m]) * g.jacobians[m] * g.omega[m] * phi[m];
    }
    EXPECT_LT(std::abs(got[t] - s), 1e-13);
  }
}

TEST(Singular, TargetFarFromSupportGivesZero) {
  const geometry::Atlas& a = sphere();
  const int N = 16;
  const kernels::KernelSplit split({1.0, 1.0}, a.cutoff(), schedule(N));
  const geometry::ChartGrid g = geometry::grid(a, 0, N);
  std::vector<Complex> ones(g.size(), 1.0);
  const trig::TrigPoly xi = trig::interpolate_QN(zero_extend(g, ones, true));
  // Center of face 1 is antipodal to face 0.
  const auto v = apply_singular_L(split, a, 1, 0, make_polar_rule(N), xi, {{0.5, 0.5}});
  EXPECT_EQ(v[0], Complex(0.0));
}

TEST(Singular, ConvergesToAdaptivePolarIntegral) {
  // L^{00} applied to Q_N(omega^0) against adaptive cubature of
  // int int rho a omega^0 K_sing d rho d theta around the target.
  const geometry::Atlas& a = sphere();
  const geometry::Chart& ch = a.chart(0);
  for (UV u : {UV{0.5, 0.5}, UV{0.31, 0.62}}) {
    std::vector<double> errs;
    for (int N : {16, 32, 64}) {
      const kernels::KernelSplit split({1.0, 1.0}, a.cutoff(), schedule(N));
      const geometry::ChartGrid g = geometry::grid(a, 0, N);
      std::vector<Complex> ones(g.size(), 1.0);
      const trig::TrigPoly xi = trig::interpolate_QN(zero_extend(g, ones, true));
      const Complex L = apply_singular_L(split, a, 0, 0, make_polar_rule(N), xi, {u})[0];
      const Vec3 r = ch.point(u);
      auto f = [&](double rho, double th) -> Complex {
        if (rho == 0.0) return 0.0;
        const UV v{u.u1 + rho * std::cos(th), u.u2 + rho * std::sin(th)};
        if (!ch.domain().contains(v)) return 0.0;
        const geometry::SurfaceFrame fr = ch.frame(v);
        if (norm(r - fr.x) >= split.support_radius()) return 0.0;
        return rho * fr.jacobian * a.omega(0, fr.x) * kernels::kernel_sing(split, r, fr.x, fr.normal);
      };
      const auto ref = oracle::adaptive_integral_polar(f, singular_param_radius(a, 0, split), 1e-11, 400000);
      errs.push_back(std::abs(L - ref.value));
    }
    EXPECT_LT(errs[1], errs[0]);
    EXPECT_LT(errs[2], errs[1]);
    EXPECT_LT(errs[2], 2e-5);
    EXPECT_GT(std::log(errs[0] / errs[2]) / std::log(4.0), 2.5);
  }
}

TEST(Singular, HermiteApproachesTrigonometricEvaluation) {
  const geometry::Atlas& a = sphere();
  const int N = 16;
  const kernels::KernelSplit split({1.0, 1.0}, a.cutoff(), schedule(N));
  const geometry::ChartGrid g = geometry::grid(a, 3, N);
  std::vector<Complex> ones(g.size(), 1.0);
  const trig::TrigPoly xi = trig::interpolate_QN(zero_extend(g, ones, true));
  const PolarRule rule = make_polar_rule(N);
  const std::vector<UV> t = {{0.5, 0.5}, {0.3, 0.6}};
  const auto base = apply_singular_L(split, a, 3, 3, rule, xi, t);
  double prev = 1e300;
  for (int m : {2, 4, 8}) {
    const auto herm = apply_singular_hermite(split, a, 3, 3, rule, xi, m, 2, t);
    const double gap = std::abs(herm[0] - base[0]) + std::abs(herm[1] - base[1]);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 1e-8);
}

TEST(Singular, HermiteExactForLowModeWithFineMesh) {
  const geometry::Atlas& a = sphere();
  const int N = 16;
  const kernels::KernelSplit split({1.0, 1.0}, a.cutoff(), schedule(N));
  const trig::TrigPoly xi = trig::TrigPoly::mode(N, 1, 0);
  const PolarRule rule = make_polar_rule(N);
  const std::vector<UV> t = {{0.45, 0.55}};
  const auto base = apply_singular_L(split, a, 0, 0, rule, xi, t);
  const auto herm = apply_singular_hermite(split, a, 0, 0, rule, xi, 16, 2, t);
  EXPECT_LT(std::abs(herm[0] - base[0]), 1e-10);
}

TEST(PolarIntegrand, SupportAndDomain) {
  const geometry::Atlas& a = sphere();
  const kernels::KernelSplit split({1.0, 1.0}, a.cutoff(), 0.5 * a.delta0());
  const double c0 = singular_param_radius(a, 0, split);
  for (double th : {0.0, 1.0, 2.0}) {
    EXPECT_EQ(polar_sing_eval(split, a, 0, 0, {0.5, 0.5}, c0, th), Complex(0.0));
    EXPECT_EQ(polar_sing_eval(split, a, 0, 0, {0.5, 0.5}, -1.2 * c0, th), Complex(0.0));
    EXPECT_NE(polar_sing_eval(split, a, 0, 0, {0.5, 0.5}, 0.01, th), Complex(0.0));
  }
  EXPECT_THROW(polar_sing_eval(split, a, 1, 0, {0.5, 0.5}, 0.01, 0.0), DomainError);
}

TEST(PolarIntegrand, BoundedAsDeltaShrinks) {
  // sup |chi| stays bounded and the radial slope grows no faster than 1/delta.
  const geometry::Atlas& a = sphere();
  std::vector<double> sups, slopes;
  for (double f : {1.0, 0.5, 0.25}) {
    const kernels::KernelSplit split({1.0, 1.0}, a.cutoff(), f * a.delta0());
    double sup = 0.0, slope = 0.0;
    const double e = 1e-6;
    for (int k = 1; k <= 200; ++k) {
      const double rho = k * split.support_radius() / 200.0;
      for (double th : {0.3, 2.2}) {
        const Complex v = polar_sing_eval(split, a, 0, 0, {0.5, 0.5}, rho, th);
        const Complex w = polar_sing_eval(split, a, 0, 0, {0.5, 0.5}, rho + e, th);
        sup = std::max(sup, std::abs(v));
        slope = std::max(slope, std::abs(w - v) / e);
      }
    }
    sups.push_back(sup);
    slopes.push_back(slope * split.delta);
  }
  EXPECT_LT(sups[2], 1.5 * sups[0]);
  EXPECT_LT(slopes[2], 3.0 * slopes[0]);
}
