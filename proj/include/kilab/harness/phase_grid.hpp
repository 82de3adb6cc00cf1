#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "kilab/errors.hpp"
#include "kilab/harness/csv.hpp"
#include "kilab/rate_theory.hpp"

namespace kilab {

struct GridRange {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;

  /// "lo:hi:step"
  static GridRange parse(const std::string& text) {
    const auto a = text.find(':');
    const auto b = a == std::string::npos ? std::string::npos : text.find(':', a + 1);
    require(b != std::string::npos, "range must look like lo:hi:step, got '" + text + "'");
    GridRange r;
    try {
      r.lo = std::stod(text.substr(0, a));
      r.hi = std::stod(text.substr(a + 1, b - a - 1));
      r.step = std::stod(text.substr(b + 1));
    } catch (const std::exception&) {
      throw UsageError("range must look like lo:hi:step, got '" + text + "'");
    }
    require(r.step > 0.0 && r.hi > r.lo, "range needs hi > lo and step > 0: '" + text + "'");
    return r;
  }

  /// lo, lo+step, ... <= hi; values within 1e-9 of an integer are snapped to it.
  [[nodiscard]] std::vector<double> values() const {
    std::vector<double> out;
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (long i = 0; i < count; ++i) {
      double v = lo + static_cast<double>(i) * step;
      if (std::abs(v - std::round(v)) < 1e-9) v = std::round(v);
      out.push_back(v);
    }
    return out;
  }
};

inline std::vector<std::string> phase_columns() {
  return {"gamma", "s", "l", "Gamma_gamma", "var_exp", "bias_exp", "total_exp", "minimax_exp",
          "classification"};
}

inline std::string phase_row(const rates::PhasePoint& p) {
  using csv::format_double;
  constexpr int digits = 12;
  return csv::join({format_double(p.gamma, digits), format_double(p.s, digits), std::to_string(p.l),
                    format_double(p.gamma_threshold, digits), format_double(p.var_exponent, digits),
                    csv::format_optional(p.bias_exponent, digits),
                    format_double(p.total_exponent, digits),
                    csv::format_optional(p.minimax_exponent, digits), rates::to_string(p.classification)});
}

/// Classified (gamma, s) grid. Integer gamma lines inside the range are always
/// present so the inconsistent region shows up on any step size.
inline std::vector<rates::PhasePoint> phase_grid(const GridRange& gamma, const GridRange& s) {
  auto gammas = gamma.values();
  const auto ss = s.values();
  require(gammas.size() >= 2 && ss.size() >= 2, "phase grid needs at least 2 steps in each direction");
  require(gamma.lo > 0.0, "phase grid: gamma range must be positive");
  require(s.lo >= 0.0, "phase grid: s range must be nonnegative");
  for (double g = std::ceil(gamma.lo); g <= gamma.hi + 1e-9; g += 1.0) {
    if (g >= 1.0) gammas.push_back(g);
  }
  std::sort(gammas.begin(), gammas.end());
  gammas.erase(std::unique(gammas.begin(), gammas.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               gammas.end());
  std::vector<rates::PhasePoint> points;
  points.reserve(gammas.size() * ss.size());
  for (double g : gammas) {
    for (double sv : ss) points.push_back(rates::classify(sv, g));
  }
  return points;
}

inline void write_phase_grid(std::ostream& out, const std::vector<rates::PhasePoint>& points) {
  out << csv::join(phase_columns()) << '\n';
  for (const auto& p : points) out << phase_row(p) << '\n';
}

}  // namespace kilab
