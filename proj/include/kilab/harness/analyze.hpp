#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "kilab/errors.hpp"
#include "kilab/harness/csv.hpp"
#include "kilab/rate_theory.hpp"

namespace kilab {

enum class Quantity { var_exact, bias_sq_exact, total };

inline Quantity parse_quantity(const std::string& text) {
  if (text == "var_exact") return Quantity::var_exact;
  if (text == "bias_sq_exact") return Quantity::bias_sq_exact;
  if (text == "total") return Quantity::total;
  throw UsageError("quantity must be one of var_exact, bias_sq_exact, total (got '" + text + "')");
}

inline std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::var_exact: return "var_exact";
    case Quantity::bias_sq_exact: return "bias_sq_exact";
    case Quantity::total: return "total";
  }
  return "?";
}

/// Theoretical d-exponent of a quantity at a phase point; absent when undefined.
inline std::optional<double> theory_exponent(Quantity q, const rates::PhasePoint& point) {
  switch (q) {
    case Quantity::var_exact: return point.var_exponent;
    case Quantity::bias_sq_exact: return point.bias_exponent;
    case Quantity::total: return point.total_exponent;
  }
  return std::nullopt;
}

struct AnalysisReport {
  Quantity quantity = Quantity::var_exact;
  double gamma = 0.0;
  double s = 0.0;
  rates::SlopeFit fit;
  std::optional<double> theory;
  double tolerance = 0.25;
  bool pass = false;
  std::size_t rows_used = 0;
  std::size_t rows_failed = 0;

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j;
    j["quantity"] = to_string(quantity);
    j["gamma"] = gamma;
    j["s"] = s;
    j["slope"] = fit.slope;
    j["slope_stderr"] = fit.stderr_slope;
    j["intercept"] = fit.intercept;
    j["r2"] = fit.r2;
    j["theory_exponent"] = theory ? nlohmann::json(*theory) : nlohmann::json(nullptr);
    j["tolerance"] = tolerance;
    j["pass"] = pass;
    j["rows_used"] = rows_used;
    j["rows_failed"] = rows_failed;
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : fit.groups) {
      groups.push_back({{"d", g.d}, {"mean_log", g.mean_log}, {"sd_log", g.sd_log}, {"count", g.count}});
    }
    j["groups"] = groups;
    return j;
  }

  [[nodiscard]] std::string summary() const {
    std::ostringstream out;
    out << to_string(quantity) << " vs d (gamma=" << csv::format_double(gamma, 6)
        << ", s=" << csv::format_double(s, 6) << "): slope " << csv::format_double(fit.slope, 4)
        << " +/- " << csv::format_double(fit.stderr_slope, 3) << ", r2 "
        << csv::format_double(fit.r2, 4);
    if (theory) {
      out << "; theory " << csv::format_double(*theory, 6) << ", tolerance "
          << csv::format_double(tolerance, 4) << " -> " << (pass ? "PASS" : "FAIL");
    } else {
      out << "; theory exponent undefined at this (gamma, s) -> FAIL";
    }
    out << " [" << rows_used << " rows";
    if (rows_failed) out << ", " << rows_failed << " failed rows skipped";
    out << "]";
    return out.str();
  }
};

/// Slope of a per-cell quantity against d, compared with its theoretical exponent.
inline AnalysisReport analyze(const csv::Table& table, Quantity quantity, double gamma, double s,
                              double tolerance = 0.25) {
  const auto point = rates::classify(s, gamma);
  AnalysisReport report;
  report.quantity = quantity;
  report.gamma = gamma;
  report.s = s;
  report.tolerance = tolerance;
  report.theory = theory_exponent(quantity, point);

  const std::size_t d_col = table.column("d");
  const std::optional<std::size_t> status_col =
      table.has_column("status") ? std::optional(table.column("status")) : std::nullopt;
  std::vector<std::size_t> value_cols;
  if (quantity == Quantity::total) {
    value_cols = {table.column("bias_sq_exact"), table.column("var_exact")};
  } else {
    value_cols = {table.column(to_string(quantity))};
  }

  std::vector<std::pair<double, double>> pairs;
  for (const auto& row : table.rows()) {
    if (status_col && row[*status_col] != "ok") {
      ++report.rows_failed;
      continue;
    }
    const auto d = csv::Table::parse_number(row[d_col]);
    if (!d) throw UsageError("row with unparsable d value '" + row[d_col] + "'");
    double value = 0.0;
    for (std::size_t c : value_cols) {
      const auto v = csv::Table::parse_number(row[c]);
      if (!v) throw UsageError("row at d=" + row[d_col] + " has no value for " + to_string(quantity));
      value += *v;
    }
    pairs.emplace_back(*d, value);
  }
  if (pairs.empty()) throw UsageError("no successful cells in results (" +
                                      std::to_string(report.rows_failed) + " failed rows)");
  report.rows_used = pairs.size();
  report.fit = rates::fit_slope(pairs);
  report.pass = report.theory.has_value() && std::abs(report.fit.slope - *report.theory) <= tolerance;
  return report;
}

inline AnalysisReport analyze(const std::string& results_path, Quantity quantity, double gamma, double s,
                              double tolerance = 0.25) {
  return analyze(csv::Table::read(results_path), quantity, gamma, s, tolerance);
}

}  // namespace kilab
