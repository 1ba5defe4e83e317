#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nystrom/core/errors.hpp"

namespace nystrom::harness {

inline const std::vector<std::string>& convergence_columns() {
  static const std::vector<std::string> c = {"N",       "h",     "delta",     "Theta",      "unknowns", "e_l2",
                                             "e_linf",  "order_l2", "order_linf", "iters", "seconds"};
  return c;
}

// A table of numbers plus metadata. Missing cells (the first row's orders,
// say) are NaN; they print as empty CSV fields and JSON nulls.
struct Report {
  std::string kind;  // converge | quadtest | hermite-compare | solve
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, std::string> config;
  std::string git_describe;
  unsigned long seed = 0;
  std::string status = "ok";
  // Anything experiment specific that is not a table row.
  nlohmann::json extra = nlohmann::json::object();

  double at(std::size_t row, const std::string& col) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] == col) return rows.at(row).at(c);
    }
    throw ParameterError("report: no column '" + col + "'");
  }

  std::vector<double> column(const std::string& col) const {
    std::vector<double> out;
    for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(at(r, col));
    return out;
  }
};

inline bool same_cell(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

inline bool operator==(const Report& a, const Report& b) {
  if (a.kind != b.kind || a.columns != b.columns || a.config != b.config || a.git_describe != b.git_describe ||
      a.seed != b.seed || a.status != b.status || a.extra != b.extra || a.rows.size() != b.rows.size()) {
    return false;
  }
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    if (a.rows[r].size() != b.rows[r].size()) return false;
    for (std::size_t c = 0; c < a.rows[r].size(); ++c) {
      if (!same_cell(a.rows[r][c], b.rows[r][c])) return false;
    }
  }
  return true;
}

// Order between consecutive rows, log(e_prev / e) / log(N / N_prev); equals
// log2(e_N / e_2N) when N doubles.
inline double observed_order(double e_prev, double e, double n_prev, double n) {
  if (!(e_prev > 0.0) || !(e > 0.0)) return std::nan("");
  return std::log(e_prev / e) / std::log(n / n_prev);
}

inline std::string csv_cell(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string to_csv(const Report& r) {
  std::ostringstream out;
  for (std::size_t c = 0; c < r.columns.size(); ++c) out << (c ? "," : "") << r.columns[c];
  out << "\n";
  for (const auto& row : r.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_cell(row[c]);
    out << "\n";
  }
  return out.str();
}

inline nlohmann::json to_json(const Report& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t c = 0; c < row.size(); ++c) {
      obj[r.columns[c]] = std::isnan(row[c]) ? nlohmann::json(nullptr) : nlohmann::json(row[c]);
    }
    rows.push_back(obj);
  }
  return {{"kind", r.kind},
          {"columns", r.columns},
          {"rows", rows},
          {"config", r.config},
          {"git_describe", r.git_describe},
          {"seed", r.seed},
          {"status", r.status},
          {"extra", r.extra}};
}

inline Report from_json(const nlohmann::json& j) {
  Report r;
  try {
    r.kind = j.at("kind").get<std::string>();
    r.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& obj : j.at("rows")) {
      std::vector<double> row;
      for (const auto& c : r.columns) {
        const auto& v = obj.at(c);
        row.push_back(v.is_null() ? std::nan("") : v.get<double>());
      }
      r.rows.push_back(std::move(row));
    }
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    r.git_describe = j.at("git_describe").get<std::string>();
    r.seed = j.at("seed").get<unsigned long>();
    r.status = j.at("status").get<std::string>();
    r.extra = j.at("extra");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("report json: ") + e.what());
  }
  return r;
}

enum class ReportFormat { csv, json };

inline void emit_report(const Report& r, ReportFormat format, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  if (format == ReportFormat::csv) {
    f << to_csv(r);
  } else {
    // nlohmann prints the shortest representation that reads back exactly.
    f << to_json(r).dump(2) << "\n";
  }
  if (!f) throw IoError("write failed for '" + path + "'");
}

inline Report read_json_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("report json: ") + e.what());
  }
  return from_json(j);
}

}  // namespace nystrom::harness
