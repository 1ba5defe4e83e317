#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "nystrom/oracle.hpp"
#include "nystrom/solver.hpp"

using namespace nystrom;
using namespace nystrom::solver;

namespace {

const geometry::Atlas& sphere() {
  static const geometry::Atlas a = geometry::build_sphere_atlas(0.49);
  return a;
}

std::shared_ptr<const NystromOperator> make_op(int N, OperatorOptions opts = {}) {
  return std::make_shared<NystromOperator>(sphere(), kernels::ScatteringParams{1.0, 1.0}, sphere().delta0(),
                                           std::vector<int>(6, N), opts);
}

std::vector<Complex> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Complex> v(n);
  for (auto& z : v) z = {g(rng), g(rng)};
  return v;
}

double max_diff(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

double max_abs(const std::vector<Complex>& a) {
  double m = 0.0;
  for (const auto& z : a) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace

TEST(Operator, ApplyMatchesBruteForceAndDenseColumns) {
  const auto op = make_op(8);
  const auto phi = random_vector(op->size(), 1);
  const auto fast = op->apply(phi);
  const auto slow = oracle::brute_force_operator(*op, phi);
  EXPECT_LT(max_diff(fast, slow), 1e-12 * max_abs(slow));
  const Eigen::MatrixXcd A = assemble_dense(*op);
  Eigen::VectorXcd x(phi.size());
  for (std::size_t k = 0; k < phi.size(); ++k) x[k] = phi[k];
  const Eigen::VectorXcd y = A * x;
  EXPECT_LT(max_diff(std::vector<Complex>(y.data(), y.data() + y.size()), fast), 1e-12 * max_abs(fast));
}

TEST(Operator, ZeroDensityGivesExactZero) {
  const auto op = make_op(8);
  const auto out = op->apply(std::vector<Complex>(op->size(), 0.0));
  for (const auto& z : out) EXPECT_EQ(z, Complex(0.0));
}

TEST(Operator, KernelsOffIsHalfIdentity) {
  OperatorOptions o;
  o.kernels_off = true;
  const auto op = make_op(8, o);
  const auto phi = random_vector(op->size(), 2);
  const auto out = op->apply(phi);
  for (std::size_t k = 0; k < phi.size(); ++k) EXPECT_EQ(out[k], 0.5 * phi[k]);
  EXPECT_LT(max_diff(oracle::brute_force_operator(*op, phi), out), 1e-15);
}

TEST(Operator, SplitAndFlattenRoundTrip) {
  const auto op = make_op(8);
  const auto phi = random_vector(op->size(), 3);
  const DiscreteDensity d = op->split_density(phi);
  EXPECT_EQ(static_cast<int>(d.charts.size()), 6);
  EXPECT_EQ(op->flatten(d), phi);
  EXPECT_EQ(op->flatten(apply_operator(*op, d)), op->apply(phi));
  EXPECT_THROW(op->apply(std::vector<Complex>(3)), ParameterError);
}

TEST(Operator, RejectsBadArguments) {
  EXPECT_THROW(NystromOperator(sphere(), {1.0, 1.0}, sphere().delta0(), {8, 8}), ParameterError);
  OperatorOptions o;
  o.variant = Variant::hermite(0, 2);
  EXPECT_THROW(make_op(8, o), ParameterError);
  EXPECT_THROW(assemble_dense(*make_op(8), 10), ResourceError);
}

TEST(Gmres, AgreesWithDirectSolveOnSmallSystem) {
  const int n = 40;
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(n, n);
  const auto noise = random_vector(n * n, 4);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A(i, j) += 0.3 / n * noise[i * n + j];
  }
  const auto b = random_vector(n, 5);
  Eigen::VectorXcd eb(n);
  for (int i = 0; i < n; ++i) eb[i] = b[i];
  const Eigen::VectorXcd ex = A.partialPivLu().solve(eb);
  auto apply = [&](const std::vector<Complex>& v) {
    Eigen::VectorXcd ev(n);
    for (int i = 0; i < n; ++i) ev[i] = v[i];
    const Eigen::VectorXcd r = A * ev;
    return std::vector<Complex>(r.data(), r.data() + n);
  };
  GmresOptions o;
  o.tol = 1e-13;
  o.restart = 7;
  const GmresResult r = gmres(apply, b, o);
  EXPECT_LE(r.residual, 1e-13);
  for (int i = 0; i < n; ++i) EXPECT_LT(std::abs(r.x[i] - ex[i]), 1e-11);
  // The recorded history is nonincreasing within each cycle and ends below tol.
  EXPECT_LE(r.history.back(), 1e-13);
  const GmresResult z = gmres(apply, std::vector<Complex>(n, 0.0), o);
  EXPECT_EQ(z.iterations, 0);
  for (const auto& v : z.x) EXPECT_EQ(v, Complex(0.0));
}

TEST(Gmres, NonConvergenceCarriesHistory) {
  // A cyclic shift needs n iterations; cap well below that.
  const int n = 30;
  auto shift = [&](const std::vector<Complex>& v) {
    std::vector<Complex> w(n);
    for (int i = 0; i < n; ++i) w[(i + 1) % n] = v[i];
    return w;
  };
  std::vector<Complex> b(n, 0.0);
  b[0] = 1.0;
  GmresOptions o;
  o.max_iterations = 10;
  o.restart = 5;
  try {
    gmres(shift, b, o);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_FALSE(e.residual_history.empty());
    EXPECT_GT(e.residual_history.back(), 0.5);
  }
}

TEST(Solve, ReconstructionRelationHoldsForAnyDensity) {
  // psi^i_h(x_l) = -2 ((A phi)_l - phi_l / 2) - 2 U^inc(x_l) at every node.
  const auto op = make_op(8);
  NystromSolution sol;
  sol.op = op;
  sol.incident = PlaneWave{};
  sol.phi = random_vector(op->size(), 6);
  sol.polys = op->density_polys(sol.phi);
  const auto Aphi = op->apply(sol.phi);
  for (int i : {0, 3}) {
    const auto& g = op->grid(i);
    for (std::size_t m = 0; m < g.size(); m += 3) {
      const std::size_t k = op->offset(i) + m;
      const Complex expect = -2.0 * (Aphi[k] - 0.5 * sol.phi[k]) - 2.0 * sol.incident(g.points[m]);
      EXPECT_LT(std::abs(reconstruct(sol, i, g.params[m]) - expect), 1e-12 * (1.0 + std::abs(expect)));
    }
  }
}

TEST(Solve, RightHandSideIsMinusIncidentField) {
  const auto op = make_op(8);
  const PlaneWave w{normalized(Vec3{0.6, 0.0, 0.8}), 1.5};
  const auto b = rhs_plane_wave(*op, w);
  for (std::size_t k = 0; k < b.size(); ++k) EXPECT_EQ(b[k], -w(op->points()[k]));
  // The incident field itself solves Helmholtz.
  const Vec3 x{0.2, -0.3, 0.4};
  const double e = 1e-3;
  Complex lap = -6.0 * w(x);
  for (Vec3 d : {Vec3{e, 0, 0}, Vec3{0, e, 0}, Vec3{0, 0, e}}) lap += w(x + d) + w(x - d);
  EXPECT_LT(std::abs(lap / (e * e) + w.kappa * w.kappa * w(x)), 1e-4);
}

TEST(Solve, SphereAtN16MatchesMieSeries) {
  const auto op = make_op(16);
  SolveOptions so;
  so.gmres.tol = 1e-10;
  const NystromSolution sol = solve(op, PlaneWave{}, so);
  EXPECT_LE(sol.residual, 1e-10);
  EXPECT_GE(sol.iterations, 5);
  EXPECT_LE(sol.iterations, 20);
  const oracle::MieSeries mie(1.0, 1.0, {0.0, 0.0, 1.0});
  double err = 0.0, ref = 0.0;
  for (Vec3 x : {Vec3{0, 0, 2}, Vec3{2, 0, 0}, Vec3{0, -2, 0}, Vec3{0.8, 1.2, -1.4}}) {
    err = std::max(err, std::abs(evaluate_potential(sol, x) - mie.scattered(x)));
    ref = std::max(ref, std::abs(mie.scattered(x)));
  }
  EXPECT_LT(err / ref, 2e-3);
  // Reconstructed surface density against the closed form.
  double derr = 0.0;
  for (Vec3 r : {Vec3{0, 0, 1}, normalized(Vec3{1, 1, 1}), normalized(Vec3{-0.3, 0.9, -0.2})}) {
    derr = std::max(derr, std::abs(assemble_psi(sol, r) - mie.density(r)));
  }
  EXPECT_LT(derr, 5e-2);
  // On the nodes the reconstruction returns the solution.
  const auto& g = op->grid(2);
  for (std::size_t m = 0; m < g.size(); m += 17) {
    EXPECT_LT(std::abs(reconstruct(sol, 2, g.params[m]) - sol.phi[op->offset(2) + m]), 1e-8);
  }
}

TEST(Solve, DenseAndGmresAgree) {
  const auto op = make_op(10);
  SolveOptions dense;
  dense.method = SolveMethod::dense;
  SolveOptions it;
  it.gmres.tol = 1e-13;
  const auto a = solve(op, PlaneWave{}, dense);
  const auto b = solve(op, PlaneWave{}, it);
  EXPECT_LT(max_diff(a.phi, b.phi), 1e-10 * max_abs(a.phi));
  EXPECT_LT(a.residual, 1e-12);
}

TEST(Solve, DomainErrors) {
  const auto op = make_op(8);
  const NystromSolution sol = solve(op, PlaneWave{});
  EXPECT_THROW(reconstruct(sol, 0, {0.0, 0.5}), DomainError);
  EXPECT_THROW(assemble_psi(sol, {0.0, 0.0, 1.2}), DomainError);
  EXPECT_THROW(evaluate_potential(sol, {0.0, 0.0, 1.01}), DomainError);
  EXPECT_NO_THROW(evaluate_potential(sol, {0.0, 0.0, 2.0}));
}

TEST(Solve, ResultDoesNotDependOnThreadCount) {
  const char* old = std::getenv("NYSTROM_THREADS");
  const std::string saved = old ? old : "";
  setenv("NYSTROM_THREADS", "1", 1);
  const auto a = make_op(8)->apply(random_vector(make_op(8)->size(), 7));
  setenv("NYSTROM_THREADS", "3", 1);
  const auto b = make_op(8)->apply(random_vector(make_op(8)->size(), 7));
  if (old) {
    setenv("NYSTROM_THREADS", saved.c_str(), 1);
  } else {
    unsetenv("NYSTROM_THREADS");
  }
  EXPECT_EQ(a, b);
}

TEST(Solve, EllipsoidSelfConvergence) {
  const geometry::Atlas e = geometry::build_ellipsoid_atlas({1.0, 1.0, 1.5}, 0.49);
  const PlaneWave w{normalized(Vec3{0.6, 0.0, 0.8}), 1.0};
  std::vector<Complex> u;
  // Below N = 16 the differences still oscillate.
  for (int N : {16, 24, 32}) {
    auto op = std::make_shared<NystromOperator>(e, kernels::ScatteringParams{1.0, 1.0}, e.delta0(),
                                                std::vector<int>(6, N));
    u.push_back(evaluate_potential(solve(op, w), {0.0, 0.0, 3.0}));
  }
  EXPECT_LT(std::abs(u[2] - u[1]), std::abs(u[1] - u[0]));
  EXPECT_LT(std::abs(u[2] - u[1]) / std::abs(u[2]), 1e-3);
}
