#pragma once

// Convergence-rate exponents of kernel interpolation in the regime n ~ d^gamma
// and the (s, gamma) phase classification. All exponents are powers of d.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kilab/errors.hpp"

namespace kilab {

namespace rates {

constexpr double kIntegerTolerance = 1e-9;

inline bool is_positive_integer(double gamma) {
  const double r = std::round(gamma);
  return r >= 1.0 && std::abs(gamma - r) <= kIntegerTolerance;
}

/// floor(gamma), robust to grid round-off just below an integer.
inline int floor_degree(double gamma) {
  return static_cast<int>(std::floor(gamma + kIntegerTolerance));
}

inline void check_gamma(double gamma) {
  require(std::isfinite(gamma) && gamma > 0.0, "gamma must be > 0");
}

inline void check_s(double s) { require(std::isfinite(s) && s >= 0.0, "s must be >= 0"); }

/// max(l - gamma, gamma - l - 1); zero at integer gamma.
inline double var_exponent(double gamma) {
  check_gamma(gamma);
  if (is_positive_integer(gamma)) return 0.0;
  const int l = floor_degree(gamma);
  return std::max(l - gamma, gamma - l - 1.0);
}

/// max(-(l+1)s, (2 - min(s,2)) l - 2 gamma); absent for integer gamma.
inline std::optional<double> bias_exponent(double s, double gamma) {
  check_s(s);
  check_gamma(gamma);
  if (is_positive_integer(gamma)) return std::nullopt;
  const int l = floor_degree(gamma);
  const double s_tilde = std::min(s, 2.0);
  return std::max(-(l + 1.0) * s, (2.0 - s_tilde) * l - 2.0 * gamma);
}

/// Generalization error exponent max(l - gamma, gamma - l - 1, -(l+1)s).
inline double total_exponent(double s, double gamma) {
  check_s(s);
  check_gamma(gamma);
  const int l = floor_degree(gamma);
  return std::max({var_exponent(gamma), -(l + 1.0) * s});
}

/// Threshold on s below which interpolation is minimax optimal.
inline double gamma_threshold(double gamma) {
  check_gamma(gamma);
  if (gamma <= 0.5) return std::numeric_limits<double>::infinity();
  if (gamma <= 1.0) return 1.0 - gamma;
  // l with gamma in (l, l+1]
  const int l = static_cast<int>(std::ceil(gamma - kIntegerTolerance)) - 1;
  if (gamma <= l + 0.5) return (gamma - l) / l;
  return (l + 1.0 - gamma) / (l + 1.0);
}

/// Minimax lower-bound exponent over [H]^s balls (the delta slack is dropped).
/// Absent for s = 0 or integer gamma, where the bound is not stated.
inline std::optional<double> minimax_exponent(double s, double gamma) {
  check_s(s);
  check_gamma(gamma);
  if (s == 0.0 || is_positive_integer(gamma)) return std::nullopt;
  // unique p >= 0 with gamma in (p + ps, (p+1) + (p+1)s]
  int p = std::max(0, static_cast<int>(std::ceil(gamma / (1.0 + s))) - 1);
  while (gamma <= p * (1.0 + s) && p > 0) --p;
  while (gamma > (p + 1) * (1.0 + s)) ++p;
  if (gamma <= p + p * s + s) return -(gamma - p);
  return -(p + 1.0) * s;
}

enum class Phase { optimal, sub_optimal, inconsistent };

inline std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::optimal: return "optimal";
    case Phase::sub_optimal: return "sub-optimal";
    case Phase::inconsistent: return "inconsistent";
  }
  return "unknown";
}

struct PhasePoint {
  double gamma = 0.0;
  double s = 0.0;
  int l = 0;
  double s_tilde = 0.0;
  double var_exponent = 0.0;
  std::optional<double> bias_exponent;
  double total_exponent = 0.0;
  double gamma_threshold = 0.0;  // may be +inf
  std::optional<double> minimax_exponent;
  Phase classification = Phase::inconsistent;
};

inline PhasePoint classify(double s, double gamma) {
  check_s(s);
  check_gamma(gamma);
  PhasePoint point;
  point.gamma = gamma;
  point.s = s;
  point.l = floor_degree(gamma);
  point.s_tilde = std::min(s, 2.0);
  point.var_exponent = var_exponent(gamma);
  point.bias_exponent = bias_exponent(s, gamma);
  point.total_exponent = total_exponent(s, gamma);
  point.gamma_threshold = gamma_threshold(gamma);
  point.minimax_exponent = minimax_exponent(s, gamma);
  if (s == 0.0 || is_positive_integer(gamma)) {
    point.classification = Phase::inconsistent;
  } else if (s <= point.gamma_threshold) {
    point.classification = Phase::optimal;
  } else {
    point.classification = Phase::sub_optimal;
  }
  return point;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double r2 = 0.0;
  // per distinct d: (d, mean log value, sd of log values, count)
  struct Group {
    double d = 0.0;
    double mean_log = 0.0;
    double sd_log = 0.0;
    int count = 0;
  };
  std::vector<Group> groups;
};

/// Least squares of mean log(value) on log d, replicates averaged per d first.
inline SlopeFit fit_slope(const std::vector<std::pair<double, double>>& pairs) {
  std::map<double, std::vector<double>> by_d;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [d, value] = pairs[i];
    require(d > 0.0, "fit_slope: d must be positive (entry " + std::to_string(i) + ")");
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw UsageError("fit_slope: non-positive value " + std::to_string(value) + " at entry " +
                       std::to_string(i) + " (d=" + std::to_string(d) + ")");
    }
    by_d[d].push_back(std::log(value));
  }
  require(by_d.size() >= 3, "fit_slope: need at least 3 distinct d values, got " +
                                std::to_string(by_d.size()));
  SlopeFit fit;
  for (const auto& [d, logs] : by_d) {
    SlopeFit::Group g;
    g.d = d;
    g.count = static_cast<int>(logs.size());
    double sum = 0.0;
    for (double v : logs) sum += v;
    g.mean_log = sum / g.count;
    double ss = 0.0;
    for (double v : logs) ss += (v - g.mean_log) * (v - g.mean_log);
    g.sd_log = g.count > 1 ? std::sqrt(ss / (g.count - 1)) : 0.0;
    fit.groups.push_back(g);
  }
  const auto m = static_cast<double>(fit.groups.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& g : fit.groups) {
    sx += std::log(g.d);
    sy += g.mean_log;
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& g : fit.groups) {
    const double dx = std::log(g.d) - mx, dy = g.mean_log - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (const auto& g : fit.groups) {
    const double r = g.mean_log - (fit.intercept + fit.slope * std::log(g.d));
    sse += r * r;
  }
  fit.stderr_slope = std::sqrt(sse / (m - 2.0) / sxx);
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

}  // namespace rates

}  // namespace kilab
