#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nystrom/harness/config.hpp"
#include "nystrom/harness/experiments.hpp"
#include "nystrom/harness/report.hpp"

using namespace nystrom;
using namespace nystrom::harness;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("nystrom_test_" + name)).string();
}

ExperimentConfig small_sweep() {
  ExperimentConfig c;
  c.N = {8, 12};
  c.probes = 40;
  c.timing = false;
  return c;
}

}  // namespace

TEST(Config, DefaultsAndKeyList) {
  const ExperimentConfig c;
  EXPECT_EQ(c.N, (std::vector<int>{16, 24, 32, 48}));
  EXPECT_EQ(c.probes, 200);
  EXPECT_EQ(c.probe_radius, 2.0);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.snapshot().size(), ExperimentConfig::keys().size());
}

TEST(Config, ParsesTextWithComments) {
  ExperimentConfig c;
  apply_config_text(c,
                    "# header\n"
                    "kappa = 2.5   # trailing\n"
                    "\n"
                    "N = 8, 16,32\n"
                    "direction = 0.6,0,0.8\n"
                    "timing = false\n",
                    "inline");
  EXPECT_EQ(c.kappa, 2.5);
  EXPECT_EQ(c.N, (std::vector<int>{8, 16, 32}));
  EXPECT_EQ(c.direction.x, 0.6);
  EXPECT_FALSE(c.timing);
  EXPECT_THROW(apply_config_text(c, "kappa 3\n", "inline"), ConfigError);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  ExperimentConfig c;
  EXPECT_THROW(c.set("colour", "blue"), ConfigError);
  EXPECT_THROW(c.set("kappa", "fast"), ConfigError);
  EXPECT_THROW(c.set("N", "8,x"), ConfigError);
  EXPECT_THROW(apply_override(c, "kappa"), ConfigError);
  EXPECT_THROW(apply_config_file(c, "/nonexistent/config.cfg"), ConfigError);
}

TEST(Config, ValidationMessages) {
  ExperimentConfig c;
  c.beta = 1.5;
  try {
    c.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("beta must lie in (0, 1), got 1.5"), std::string::npos);
  }
  c = ExperimentConfig{};
  c.N = {16, 16};
  EXPECT_THROW(c.validate(), ConfigError);
  c.N = {24, 16};
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.direction = {1.0, 1.0, 0.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.variant = "spline";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, SnapshotRoundTrips) {
  ExperimentConfig a;
  apply_override(a, "kappa=0.1");
  apply_override(a, "semiaxes=1,0.9,1.3");
  apply_override(a, "geometry=ellipsoid");
  ExperimentConfig b;
  for (const auto& [k, v] : a.snapshot()) b.set(k, v);
  EXPECT_EQ(a.snapshot(), b.snapshot());
  EXPECT_EQ(b.kappa, 0.1);
  EXPECT_EQ(b.get("kappa"), "0.10000000000000001");
}

TEST(Config, ShippedConfigsValidate) {
  for (const auto& entry : std::filesystem::directory_iterator(NYSTROM_CONFIG_DIR)) {
    ExperimentConfig c;
    apply_config_file(c, entry.path().string());
    EXPECT_NO_THROW(c.validate()) << entry.path();
  }
}

TEST(Config, DeltaScheduleAndHermiteRule) {
  ExperimentConfig c;
  const geometry::Atlas a = c.build_atlas();
  EXPECT_DOUBLE_EQ(c.delta_for(a, 16), a.delta0());
  EXPECT_NEAR(c.delta_for(a, 128), 0.5 * a.delta0(), 1e-15);
  c.delta_coeff = 10.0;
  EXPECT_EQ(c.delta_for(a, 16), a.delta0());
  // ceil(h^{-(1 - beta + r)/(2d + 2)}) and the target inequality m^{-(2d+2)} <= h^{1-beta+r}.
  c.variant = "hermite";
  for (int n : {16, 32, 64, 128}) {
    const int m = c.hermite_m_for(n);
    const double h = 1.0 / n, e = 1.0 - c.beta + c.hermite_r;
    EXPECT_LE(std::pow(m, -6.0), std::pow(h, e) * (1 + 1e-12));
    EXPECT_GT(std::pow(m - 1, -6.0), std::pow(h, e));
  }
  EXPECT_EQ(c.hermite_m_for(16), 3);
  EXPECT_EQ(c.operator_options(16).variant.m, 3);
  c.hermite_m = 5;
  EXPECT_EQ(c.hermite_m_for(16), 5);
}

TEST(Report, CsvHeaderAndPrecision) {
  Report r;
  r.kind = "converge";
  r.columns = convergence_columns();
  r.rows.push_back({16, 0.0625, 0.1 + 0.2, 128, 1536, 1.0 / 3.0, 2e-5, std::nan(""), std::nan(""), 12, 0});
  const std::string csv = to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "N,h,delta,Theta,unknowns,e_l2,e_linf,order_l2,order_linf,iters,seconds");
  EXPECT_NE(csv.find("0.30000000000000004"), std::string::npos);
  EXPECT_NE(csv.find("0.33333333333333331"), std::string::npos);
  EXPECT_NE(csv.find(",,"), std::string::npos);
  EXPECT_EQ(csv_cell(std::nan("")), "");
  EXPECT_EQ(std::stod(csv_cell(0.1)), 0.1);
}

TEST(Report, JsonRoundTrip) {
  Report r;
  r.kind = "quadtest";
  r.columns = {"N", "error", "ratio"};
  r.rows = {{32, 1.234567890123456789e-7, std::nan("")}, {64, 3.0e-300, 0.7}};
  r.config = ExperimentConfig{}.snapshot();
  r.git_describe = "abc";
  r.seed = 7;
  r.extra["fits"] = {{"random", {{"fitted_order", 5.04}}}};
  const std::string path = temp_path("roundtrip.json");
  emit_report(r, ReportFormat::json, path);
  const Report back = read_json_report(path);
  EXPECT_TRUE(back == r);
  EXPECT_TRUE(std::isnan(back.at(0, "ratio")));
  EXPECT_EQ(back.at(0, "error"), r.rows[0][1]);
  std::remove(path.c_str());
  EXPECT_THROW(read_json_report(temp_path("missing.json")), IoError);
  EXPECT_THROW(emit_report(r, ReportFormat::csv, "/nonexistent/dir/out.csv"), IoError);
  EXPECT_THROW(from_json(nlohmann::json{{"kind", "x"}}), IoError);
}

TEST(Report, ObservedOrder) {
  EXPECT_NEAR(observed_order(1e-2, 1.25e-3, 16, 32), 3.0, 1e-14);
  EXPECT_NEAR(observed_order(1.0, std::pow(1.5, -4.0), 16, 24), 4.0, 1e-13);
  EXPECT_TRUE(std::isnan(observed_order(0.0, 1.0, 16, 32)));
  EXPECT_NEAR(fitted_order({16, 32, 64}, {1.0, 0.125, 0.015625}), 3.0, 1e-13);
}

TEST(Probes, FibonacciSphere) {
  const auto p = probe_points(200, 2.0);
  ASSERT_EQ(p.size(), 200u);
  Vec3 c{0, 0, 0};
  for (const auto& x : p) {
    EXPECT_NEAR(norm(x), 2.0, 1e-14);
    c = c + x;
  }
  EXPECT_LT(norm(c) / 200.0, 1e-2);
}

TEST(Experiments, SmallConvergenceSweep) {
  const ExperimentConfig c = small_sweep();
  const Report a = run_convergence(c);
  ASSERT_EQ(a.rows.size(), 2u);
  EXPECT_EQ(a.columns, convergence_columns());
  EXPECT_TRUE(std::isnan(a.at(0, "order_l2")));
  EXPECT_FALSE(std::isnan(a.at(1, "order_l2")));
  EXPECT_LT(a.at(1, "e_l2"), a.at(0, "e_l2"));
  EXPECT_LT(a.at(1, "e_l2"), 1e-2);
  EXPECT_EQ(a.at(0, "seconds"), 0.0);
  EXPECT_EQ(a.extra["error_reference"], "mie");
  EXPECT_EQ(a.extra["runs"].size(), 2u);
  // Fixed inputs and timing off give byte-identical output.
  const Report b = run_convergence(c);
  EXPECT_EQ(to_csv(a), to_csv(b));
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Experiments, SolveUsesLargestN) {
  ExperimentConfig c = small_sweep();
  c.N = {6, 8};
  const Report r = run_solve(c);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.kind, "solve");
  EXPECT_EQ(r.at(0, "N"), 8.0);
}

TEST(Experiments, QuadtestZeroCaseIsExact) {
  ExperimentConfig c;
  c.N = {16, 32};
  c.timing = false;
  const Report r = run_quadtest(c);
  ASSERT_EQ(r.rows.size(), 2 * quadtest_cases().size());
  EXPECT_EQ(quadtest_cases()[0], "zero");
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    if (r.at(k, "case") != 0.0) continue;
    EXPECT_EQ(r.at(k, "error"), 0.0);
    EXPECT_TRUE(std::isnan(r.at(k, "ratio")));
  }
  EXPECT_TRUE(r.extra["fits"].contains("random"));
  // delta = h^beta must stay inside (h, 1/2).
  c.quad_delta_coeff = 3.0;
  EXPECT_THROW(run_quadtest(c), ConfigError);
}

TEST(Experiments, RandomPolynomialIsNormalized) {
  const trig::TrigPoly p = random_trig_poly(16, 4.0, 3);
  EXPECT_NEAR(trig::sobolev_norm(p, 4.0), 1.0, 1e-14);
  const trig::TrigPoly q = random_trig_poly(16, 4.0, 3);
  EXPECT_EQ(p.coefficients(), q.coefficients());
}

TEST(Experiments, HermiteInterpolationOrder) {
  const HermiteStudy s = hermite_interpolation_study(2);
  EXPECT_NEAR(s.order, 6.0, 0.4);
}

TEST(Experiments, HermiteCompareFlagsLargeGaps) {
  ExperimentConfig c;
  c.N = {8};
  c.variant = "hermite";
  c.hermite_d = 1;
  c.hermite_m = 1;
  c.probes = 20;
  c.timing = false;
  const Report r = run_hermite_compare(c);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.at(0, "flag"), r.at(0, "gap") >= r.at(0, "base_error") ? 1.0 : 0.0);
  EXPECT_GT(r.at(0, "gap"), 0.0);
  c.geometry = "ellipsoid";
  EXPECT_THROW(run_hermite_compare(c), ConfigError);
}
