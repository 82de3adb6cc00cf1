#pragma once

// Band-limited zonal regression targets under a source condition, and
// datasets drawn from y = f*(x) + eps.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kilab/errors.hpp"
#include "kilab/geometry_rng.hpp"
#include "kilab/kernel_spectrum.hpp"
#include "kilab/rate_theory.hpp"
#include "kilab/zonal.hpp"

namespace kilab {

/// f*(x) = sum_{k<=l+1} beta_k sqrt(N(d,k)) P_{k,d}(<x, w>).
///
/// Each degree component has unit L2 norm, so ||f*||^2 = sum beta_k^2 and the
/// squared [H]^s norm is sum mu_k^{-s} beta_k^2.
struct Target {
  int d = 0;
  double s = 0.0;
  double gamma = 0.0;
  int l = 0;
  double norm_budget = 0.0;           // R
  std::vector<double> beta;           // degrees 0..l+1
  Eigen::VectorXd axis;               // unit vector in R^{d+1}
  double hs_norm_sq = 0.0;            // sum mu_k^{-s} beta_k^2
  double c0 = 0.0;                    // lower-bound constant actually achieved
  std::shared_ptr<const Spectrum> spectrum;

  [[nodiscard]] int max_degree() const { return static_cast<int>(beta.size()) - 1; }

  [[nodiscard]] double l2_norm_sq() const {
    double total = 0.0;
    for (double b : beta) total += b * b;
    return total;
  }

  /// ||theta*_{>l}||^2
  [[nodiscard]] double high_degree_energy() const {
    double total = 0.0;
    for (int k = l + 1; k <= max_degree(); ++k) total += beta[k] * beta[k];
    return total;
  }

  /// ||Sigma_{<=l}^{-1} theta*_{<=l}||^2
  [[nodiscard]] double inverse_weighted_low_energy() const {
    double total = 0.0;
    for (int k = 0; k <= std::min(l, max_degree()); ++k) {
      total += beta[k] * beta[k] / (spectrum->mu[k] * spectrum->mu[k]);
    }
    return total;
  }
};

/// Equal per-degree [H]^s energy c^2 on degrees 0..l+1, with (l+2) c^2 = min(R, l+2).
inline Target build_target(std::shared_ptr<const Spectrum> spectrum, double s, double gamma,
                           const SeedPath& seed, double norm_budget = 4.0) {
  require(spectrum != nullptr, "build_target: missing spectrum");
  require(s >= 0.0, "build_target: s must be >= 0");
  require(gamma > 0.0, "build_target: gamma must be > 0");
  require(norm_budget > 0.0, "build_target: norm budget R must be > 0");
  const int l = rates::floor_degree(gamma);
  require(l + 1 <= spectrum->k_max,
          "build_target: degree l+1=" + std::to_string(l + 1) + " exceeds spectrum k_max=" +
              std::to_string(spectrum->k_max));

  Target target;
  target.d = spectrum->d;
  target.s = s;
  target.gamma = gamma;
  target.l = l;
  target.norm_budget = norm_budget;
  target.spectrum = spectrum;

  const int degrees = l + 2;
  const double c_sq = std::min(norm_budget, static_cast<double>(degrees)) / degrees;
  target.beta.resize(degrees);
  for (int k = 0; k < degrees; ++k) {
    const double mu = spectrum->mu[k];
    if (s > 0.0 && mu <= 0.0) {
      throw UsageError("build_target: mu_" + std::to_string(k) +
                       " is zero; the source condition cannot be met for s > 0");
    }
    target.beta[k] = std::sqrt(c_sq) * std::pow(mu, 0.5 * s);
  }
  for (int k = 0; k < degrees; ++k) {
    const double mu = spectrum->mu[k];
    target.hs_norm_sq += (s == 0.0 ? 1.0 : std::pow(mu, -s)) * target.beta[k] * target.beta[k];
  }
  double low_l2 = 0.0;
  for (int k = 0; k <= l; ++k) low_l2 += target.beta[k] * target.beta[k];
  target.c0 = std::min(c_sq, low_l2);
  target.axis = sample_direction(spectrum->d, seed.child(Purpose::target_axis));
  return target;
}

/// The degree-k component sqrt(N(d,k)) P_{k,d}(<x, w>) evaluated at every row.
inline Eigen::VectorXd target_degree_component(const Target& target, int k,
                                               const SpherePoints& points) {
  require(points.d == target.d, "eval_target: dimension mismatch");
  const ZonalBasis basis(target.d, std::max(k, 1));
  const Eigen::VectorXd proj = points.coordinates * target.axis;
  const double scale = std::sqrt(multiplicity_real(target.d, k));
  Eigen::VectorXd out(points.count());
  for (Eigen::Index i = 0; i < points.count(); ++i) {
    out(i) = scale * basis.eval(k, std::clamp(proj(i), -1.0, 1.0));
  }
  return out;
}

inline Eigen::VectorXd eval_target(const Target& target, const SpherePoints& points) {
  require(points.d == target.d, "eval_target: dimension mismatch (points on S^" +
                                    std::to_string(points.d) + ", target on S^" +
                                    std::to_string(target.d) + ")");
  const int kmax = target.max_degree();
  const ZonalBasis basis(target.d, std::max(kmax, 1));
  std::vector<double> scale(static_cast<std::size_t>(kmax) + 1);
  for (int k = 0; k <= kmax; ++k) scale[k] = target.beta[k] * std::sqrt(multiplicity_real(target.d, k));
  const Eigen::VectorXd proj = points.coordinates * target.axis;
  std::vector<double> p(static_cast<std::size_t>(basis.k_max()) + 1);
  Eigen::VectorXd out(points.count());
  for (Eigen::Index i = 0; i < points.count(); ++i) {
    basis.eval_all(std::clamp(proj(i), -1.0, 1.0), p);
    double acc = 0.0;
    for (int k = 0; k <= kmax; ++k) acc += scale[k] * p[k];
    out(i) = acc;
  }
  return out;
}

struct Dataset {
  SpherePoints points;
  Eigen::VectorXd labels;  // y
  Eigen::VectorXd clean;   // f*(X)
  double sigma2 = 0.0;
  SeedPath seed;

  [[nodiscard]] Eigen::Index size() const { return points.count(); }
};

inline Dataset make_dataset(const Target& target, Eigen::Index n, double sigma2, const SeedPath& seed) {
  require(n >= 1, "make_dataset: n must be >= 1");
  Dataset data;
  data.points = sample_sphere(target.d, n, seed.child(Purpose::design_points));
  data.clean = eval_target(target, data.points);
  data.labels = data.clean + sample_noise(n, sigma2, seed.child(Purpose::noise));
  data.sigma2 = sigma2;
  data.seed = seed;
  return data;
}

}  // namespace kilab
