// nystrom: command line driver for the solver and the convergence studies.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nystrom/harness/config.hpp"
#include "nystrom/harness/experiments.hpp"
#include "nystrom/harness/report.hpp"

namespace {

using namespace nystrom;
using namespace nystrom::harness;

void print_summary(const Report& r) {
  std::cout << to_csv(r);
  if (r.extra.contains("fits")) std::cout << "fits: " << r.extra["fits"].dump() << "\n";
  if (r.extra.contains("interpolation")) {
    std::cout << "hermite interpolation order: " << r.extra["interpolation"]["fitted_order"].get<double>() << "\n";
  }
}

void write_outputs(const Report& r, const ExperimentConfig& cfg) {
  const std::string stem = r.kind;
  const std::string csv = cfg.output_csv.empty() ? stem + ".csv" : cfg.output_csv;
  const std::string json = cfg.output_json.empty() ? stem + ".json" : cfg.output_json;
  emit_report(r, ReportFormat::csv, csv);
  emit_report(r, ReportFormat::json, json);
  std::cerr << "wrote " << csv << " and " << json << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-order Nystrom solver for sound-soft scattering"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--set", overrides, "override one key, key=value (repeatable)")->take_all();
  };
  CLI::App* solve = app.add_subcommand("solve", "one solve at the largest N of the list");
  CLI::App* converge = app.add_subcommand("converge", "convergence sweep over the N list");
  CLI::App* quadtest = app.add_subcommand("quadtest", "polar quadrature rate study");
  CLI::App* hermite = app.add_subcommand("hermite-compare", "Hermite variant against the base scheme");
  for (CLI::App* s : {solve, converge, quadtest, hermite}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& s : overrides) apply_override(cfg, s);
    cfg.validate();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    Report r;
    if (solve->parsed()) {
      r = run_solve(cfg);
    } else if (converge->parsed()) {
      r = run_convergence(cfg);
    } else if (quadtest->parsed()) {
      r = run_quadtest(cfg);
    } else {
      r = run_hermite_compare(cfg);
    }
    print_summary(r);
    write_outputs(r, cfg);
    return 0;
  } catch (const ExperimentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    try {
      write_outputs(e.report, cfg);
    } catch (const Error& io) {
      std::cerr << "error: " << io.what() << "\n";
    }
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
