#pragma once

// Kernel ridge regression and minimum-norm interpolation on S^d, with exact
// bias/variance via the zonal spectrum and Monte Carlo cross-checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kilab/errors.hpp"
#include "kilab/geometry_rng.hpp"
#include "kilab/kernel_spectrum.hpp"
#include "kilab/target_model.hpp"
#include "kilab/zonal.hpp"

namespace kilab {

enum class JitterPolicy { forbid, allow };

inline JitterPolicy parse_jitter_policy(const std::string& text) {
  if (text == "forbid") return JitterPolicy::forbid;
  if (text == "allow") return JitterPolicy::allow;
  throw UsageError("jitter_policy must be 'forbid' or 'allow', got '" + text + "'");
}

inline std::string to_string(JitterPolicy policy) {
  return policy == JitterPolicy::forbid ? "forbid" : "allow";
}

/// f(x) = k(x, X) alpha with alpha = (K + n lambda I)^{-1} Y; lambda = 0 interpolates.
struct FittedInterpolant {
  std::shared_ptr<const Spectrum> spectrum;
  SpherePoints points;
  Eigen::MatrixXd gram;
  Eigen::VectorXd labels;
  Eigen::VectorXd clean;
  double sigma2 = 0.0;
  double lambda = 0.0;
  double jitter_used = 0.0;
  Eigen::LLT<Eigen::MatrixXd> factor;  // of K + n lambda I (+ jitter)
  Eigen::VectorXd alpha;
  Eigen::VectorXd alpha_clean;
  double solve_residual = 0.0;  // relative residual of the noisy-label system
  double train_residual = 0.0;  // max_i |f(x_i) - y_i|

  [[nodiscard]] Eigen::Index size() const { return points.count(); }
  [[nodiscard]] const KernelSpec& kernel() const { return spectrum->kernel; }
};

namespace detail {

inline double min_eigenvalue(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  return solver.eigenvalues()(0);
}

// A Cholesky factor that "succeeds" on a numerically singular matrix is not
// accepted: its solves would be pure round-off.
inline bool factor_ok(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return llt.info() == Eigen::Success && llt.rcond() > 1e-14;
}

}  // namespace detail

inline FittedInterpolant fit(const Dataset& data, std::shared_ptr<const Spectrum> spectrum,
                             double lambda = 0.0, JitterPolicy jitter = JitterPolicy::forbid) {
  require(spectrum != nullptr, "fit: missing spectrum");
  require(lambda >= 0.0, "fit: lambda must be >= 0");
  require(data.points.d == spectrum->d, "fit: dataset and spectrum dimensions differ");

  FittedInterpolant model;
  model.spectrum = spectrum;
  model.points = data.points;
  model.gram = data.points.gram();
  model.labels = data.labels;
  model.clean = data.clean;
  model.sigma2 = data.sigma2;
  model.lambda = lambda;

  const Eigen::Index n = data.size();
  const Eigen::MatrixXd kernel = assemble_from_gram(spectrum->kernel, model.gram);
  Eigen::MatrixXd system = kernel;
  system.diagonal().array() += static_cast<double>(n) * lambda;

  model.factor.compute(system);
  if (!detail::factor_ok(model.factor)) {
    if (jitter == JitterPolicy::forbid) {
      throw NumericalError("kernel matrix is not numerically positive definite (lambda_min ~ " +
                           std::to_string(detail::min_eigenvalue(system)) +
                           ", n=" + std::to_string(n) + "); jitter is forbidden");
    }
    const double cap = 1e-10 * spectrum->phi_one;
    for (double eps = 1e-14 * spectrum->phi_one; eps <= cap * (1 + 1e-12); eps *= 10.0) {
      Eigen::MatrixXd jittered = system;
      jittered.diagonal().array() += eps;
      model.factor.compute(jittered);
      if (detail::factor_ok(model.factor)) {
        model.jitter_used = eps;
        break;
      }
    }
    if (model.jitter_used == 0.0) {
      throw NumericalError("kernel matrix factorization failed even with jitter " +
                           std::to_string(cap) + " (lambda_min ~ " +
                           std::to_string(detail::min_eigenvalue(system)) + ")");
    }
    system.diagonal().array() += model.jitter_used;
  }

  model.alpha = model.factor.solve(model.labels);
  model.alpha_clean = model.factor.solve(model.clean);
  const double label_scale = std::max(model.labels.norm(), std::numeric_limits<double>::min());
  model.solve_residual = (system * model.alpha - model.labels).norm() / label_scale;
  if (model.labels.norm() == 0.0) model.solve_residual = 0.0;
  model.train_residual = (kernel * model.alpha - model.labels).cwiseAbs().maxCoeff();
  return model;
}

inline Eigen::VectorXd predict(const FittedInterpolant& model, const SpherePoints& query) {
  require(query.d == model.points.d, "predict: dimension mismatch");
  const Eigen::MatrixXd cross = assemble_cross_kernel(model.kernel(), query.cross_gram(model.points));
  return cross * model.alpha;
}

/// Exact variance sigma^2 tr((K+n lambda)^{-1} M (K+n lambda)^{-1}), M_ij = Phi_2(<x_i,x_j>).
struct VarianceReport {
  double total = 0.0;                  // via the assembled Phi_2 matrix
  std::vector<double> by_degree;       // sigma^2 mu_k^2 N tr(S P_k(G)), k = 0..k_max
  double low = 0.0;                    // degrees <= l
  double high = 0.0;                   // degrees > l
  double tail_bound = 0.0;             // unaccounted degrees > k_max
};

/// Squared L2 norm of the degree-k part of E_eps f_hat - f*, per degree.
struct BiasReport {
  double total = 0.0;                  // via the assembled Phi_2 matrix
  std::vector<double> by_degree;
  double B1 = 0.0;                     // degrees <= l
  double B2 = 0.0;                     // degrees > l
  double tail_bound = 0.0;
};

namespace detail {

// sum_ij W_ij P_k(G_ij) for every k <= k_max, one recurrence per pair.
inline std::vector<double> zonal_quadratic_forms(const ZonalBasis& basis, const Eigen::MatrixXd& gram,
                                                 const Eigen::MatrixXd& weights) {
  const int kmax = basis.k_max();
  std::vector<double> acc(static_cast<std::size_t>(kmax) + 1, 0.0);
  std::vector<double> p(static_cast<std::size_t>(kmax) + 1);
  const Eigen::Index n = gram.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double w = (i == j) ? weights(i, j) : weights(i, j) + weights(j, i);
      if (w == 0.0) continue;
      basis.eval_all(gram(i, j), p);
      for (int k = 0; k <= kmax; ++k) acc[k] += w * p[k];
    }
  }
  return acc;
}

inline double clamp_contribution(double value, int k, const char* what) {
  if (value >= 0.0) return value;
  if (value >= -1e-10) return 0.0;
  throw NumericalError(std::string(what) + " contribution at degree " + std::to_string(k) +
                       " is materially negative: " + std::to_string(value));
}

}  // namespace detail

inline VarianceReport exact_variance(const FittedInterpolant& model, int l = 0) {
  const Spectrum& spec = *model.spectrum;
  VarianceReport out;
  out.by_degree.assign(static_cast<std::size_t>(spec.k_max) + 1, 0.0);
  if (model.sigma2 == 0.0) return out;

  const Eigen::Index n = model.size();
  const Eigen::MatrixXd inverse = model.factor.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd inverse_sq = inverse * inverse;  // (K + n lambda)^{-2}

  const SquaredKernel phi2(spec);
  const Eigen::MatrixXd m = assemble_from_gram(phi2, model.gram);
  out.total = model.sigma2 * inverse_sq.cwiseProduct(m).sum();
  out.total = std::max(out.total, 0.0);

  const auto forms = detail::zonal_quadratic_forms(spec.basis(), model.gram, inverse_sq);
  for (int k = 0; k <= spec.k_max; ++k) {
    const double v = model.sigma2 * spec.mu[k] * spec.mu_times_n(k) * forms[k];
    out.by_degree[k] = detail::clamp_contribution(v, k, "variance");
    (k <= l ? out.low : out.high) += out.by_degree[k];
  }
  out.tail_bound = model.sigma2 * phi2.tail_bound() * inverse_sq.cwiseAbs().sum();
  return out;
}

inline BiasReport exact_bias_by_degree(const FittedInterpolant& model, const Target& target) {
  const Spectrum& spec = *model.spectrum;
  require(target.d == spec.d, "exact_bias: target and spectrum dimensions differ");
  require(target.spectrum != nullptr &&
              (target.spectrum.get() == model.spectrum.get() || target.spectrum->mu == spec.mu),
          "exact_bias: target was built on a different spectrum");
  require(target.max_degree() <= spec.k_max, "exact_bias: target degree exceeds k_max");

  BiasReport out;
  const int kmax = spec.k_max;
  out.by_degree.assign(static_cast<std::size_t>(kmax) + 1, 0.0);
  const Eigen::VectorXd& a = model.alpha_clean;
  const ZonalBasis basis = spec.basis();

  const Eigen::MatrixXd outer = a * a.transpose();
  const auto forms = detail::zonal_quadratic_forms(basis, model.gram, outer);

  // alpha_c . p_k(w) with p_k(w)_i = P_k(<x_i, w>)
  std::vector<double> cross(static_cast<std::size_t>(kmax) + 1, 0.0);
  const Eigen::VectorXd proj = model.points.coordinates * target.axis;
  std::vector<double> p(static_cast<std::size_t>(kmax) + 1);
  for (Eigen::Index i = 0; i < model.size(); ++i) {
    basis.eval_all(std::clamp(proj(i), -1.0, 1.0), p);
    for (int k = 0; k <= kmax; ++k) cross[k] += a(i) * p[k];
  }

  Eigen::VectorXd v = Eigen::VectorXd::Zero(model.size());
  for (int k = 0; k <= kmax; ++k) {
    const double nk = spec.multiplicities_real[k];
    const double beta = k <= target.max_degree() ? target.beta[k] : 0.0;
    const double value = spec.mu[k] * spec.mu[k] * nk * forms[k] -
                         2.0 * spec.mu[k] * beta * std::sqrt(nk) * cross[k] + beta * beta;
    out.by_degree[k] = detail::clamp_contribution(value, k, "bias");
    (k <= target.l ? out.B1 : out.B2) += out.by_degree[k];
  }

  // Independent aggregation: a^T M a - 2 a^T v + ||f*||^2 with M from Phi_2 and
  // v_i = sum_k mu_k beta_k sqrt(N) P_k(<x_i, w>) = (L_K f*)(x_i).
  for (Eigen::Index i = 0; i < model.size(); ++i) {
    basis.eval_all(std::clamp(proj(i), -1.0, 1.0), p);
    double acc = 0.0;
    for (int k = 0; k <= target.max_degree(); ++k) {
      acc += spec.mu[k] * target.beta[k] * std::sqrt(spec.multiplicities_real[k]) * p[k];
    }
    v(i) = acc;
  }
  const Eigen::MatrixXd m = assemble_from_gram(SquaredKernel(spec), model.gram);
  out.total = std::max(0.0, a.dot(m * a) - 2.0 * a.dot(v) + target.l2_norm_sq());
  out.tail_bound = SquaredKernel(spec).tail_bound() * a.lpNorm<1>() * a.lpNorm<1>();
  return out;
}

struct MonteCarloErrors {
  double bias_sq = 0.0;
  double bias_sq_se = 0.0;
  double var = 0.0;
  double var_se = 0.0;
  Eigen::Index test_points = 0;
};

/// Bias and variance estimated on fresh uniform test points.
inline MonteCarloErrors mc_errors(const FittedInterpolant& model, const Target& target,
                                  Eigen::Index m_test, const SeedPath& seed) {
  require(m_test >= 100, "mc_errors: m_test must be >= 100");
  const SpherePoints test = sample_sphere(model.points.d, m_test, seed.child(Purpose::mc_test_points));
  const Eigen::VectorXd truth = eval_target(target, test);

  constexpr Eigen::Index kChunk = 512;
  Eigen::VectorXd bias_terms(m_test);
  Eigen::VectorXd var_terms(m_test);
  for (Eigen::Index start = 0; start < m_test; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, m_test - start);
    SpherePoints block;
    block.d = test.d;
    block.coordinates = test.coordinates.middleRows(start, len);
    const Eigen::MatrixXd cross = assemble_cross_kernel(model.kernel(), block.cross_gram(model.points));
    const Eigen::VectorXd mean_pred = cross * model.alpha_clean;
    bias_terms.segment(start, len) = (mean_pred - truth.segment(start, len)).array().square().matrix();
    if (model.sigma2 == 0.0) {
      var_terms.segment(start, len).setZero();
    } else {
      const Eigen::MatrixXd weights = model.factor.solve(cross.transpose());
      var_terms.segment(start, len) = model.sigma2 * weights.colwise().squaredNorm().transpose();
    }
  }
  auto mean_se = [m_test](const Eigen::VectorXd& xs, double& mean, double& se) {
    mean = xs.mean();
    const double var = (xs.array() - mean).square().sum() / static_cast<double>(m_test - 1);
    se = std::sqrt(var / static_cast<double>(m_test));
  };
  MonteCarloErrors out;
  out.test_points = m_test;
  mean_se(bias_terms, out.bias_sq, out.bias_sq_se);
  mean_se(var_terms, out.var, out.var_se);
  return out;
}

/// Random-matrix concentration of the kernel matrix around its low-degree part.
struct ConcentrationReport {
  int l = 0;
  double lambda_min_K = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double delta1_opnorm = 0.0;       // || K_{>l}/kappa1 - I ||_op
  double psi_gram_deviation = 0.0;  // max |lambda - 1| over nonzero eigenvalues of Psi Psi^T / n
  double cumulative_multiplicity = 0.0;  // B_l
  bool psi_gram_meaningful = true;  // false when n < B_l
};

inline ConcentrationReport concentration_report(const FittedInterpolant& model, int l) {
  const Spectrum& spec = *model.spectrum;
  require(l >= 0 && l < spec.k_max, "concentration_report: need 0 <= l < k_max");
  ConcentrationReport out;
  out.l = l;
  const TailSums tails = tail_sums(spec, l);
  out.kappa1 = tails.kappa1;
  out.kappa2 = tails.kappa2;

  const Eigen::Index n = model.size();
  const Eigen::MatrixXd kernel = assemble_from_gram(spec.kernel, model.gram);
  out.lambda_min_K = detail::min_eigenvalue(kernel);

  const Eigen::MatrixXd low = low_degree_kernel_matrix(spec, l, model.gram);
  Eigen::MatrixXd delta = (kernel - low) / out.kappa1;
  delta.diagonal().array() -= 1.0;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(delta, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("eigensolver failed on K_{>l}");
    out.delta1_opnorm = solver.eigenvalues().cwiseAbs().maxCoeff();
  }

  const BigCount b_l = cumulative_multiplicity(spec.d, l);
  out.cumulative_multiplicity = to_double(b_l);
  const ZonalBasis basis(spec.d, l);
  Eigen::MatrixXd psi_gram = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k <= l; ++k) psi_gram += gram_zonal(basis, k, model.gram);
  psi_gram /= static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(psi_gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("eigensolver failed on Psi gram");
  if (static_cast<BigCount>(n) < b_l) {
    out.psi_gram_meaningful = false;
    out.psi_gram_deviation = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const auto count = static_cast<Eigen::Index>(b_l);
  const Eigen::VectorXd top = solver.eigenvalues().tail(count);
  out.psi_gram_deviation = (top.array() - 1.0).abs().maxCoeff();
  return out;
}

/// Everything measured on one fitted cell.
struct ErrorReport {
  double bias_sq_exact = 0.0;
  double var_exact = 0.0;
  std::vector<double> bias_by_degree;
  std::vector<double> var_by_degree;
  double B1 = 0.0;
  double B2 = 0.0;
  double var_low = 0.0;
  double var_high = 0.0;
  double bias_tail_bound = 0.0;
  double var_tail_bound = 0.0;
  bool has_mc = false;
  MonteCarloErrors mc;
  bool mc_bias_flag = false;  // exact outside 4 SE of MC
  bool mc_var_flag = false;
  bool has_concentration = false;
  ConcentrationReport concentration;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double exact_ms = 0.0;
  double mc_ms = 0.0;
  double diagnostics_ms = 0.0;
};

struct ReportOptions {
  Eigen::Index mc_test_points = 2000;  // 0 skips Monte Carlo
  bool concentration = true;
};

inline ErrorReport error_report(const FittedInterpolant& model, const Target& target,
                                const SeedPath& seed, const ReportOptions& options = {}) {
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  ErrorReport out;
  auto t0 = clock::now();
  const BiasReport bias = exact_bias_by_degree(model, target);
  const VarianceReport var = exact_variance(model, target.l);
  out.bias_sq_exact = bias.total;
  out.var_exact = var.total;
  out.bias_by_degree = bias.by_degree;
  out.var_by_degree = var.by_degree;
  out.B1 = bias.B1;
  out.B2 = bias.B2;
  out.var_low = var.low;
  out.var_high = var.high;
  out.bias_tail_bound = bias.tail_bound;
  out.var_tail_bound = var.tail_bound;
  const TailSums tails = tail_sums(*model.spectrum, target.l);
  out.kappa1 = tails.kappa1;
  out.kappa2 = tails.kappa2;
  out.exact_ms = ms_since(t0);

  if (options.mc_test_points > 0) {
    t0 = clock::now();
    out.has_mc = true;
    out.mc = mc_errors(model, target, options.mc_test_points, seed);
    out.mc_bias_flag = std::abs(out.mc.bias_sq - out.bias_sq_exact) > 4.0 * out.mc.bias_sq_se + 1e-12;
    out.mc_var_flag = std::abs(out.mc.var - out.var_exact) > 4.0 * out.mc.var_se + 1e-12;
    out.mc_ms = ms_since(t0);
  }
  if (options.concentration) {
    t0 = clock::now();
    out.has_concentration = true;
    out.concentration = concentration_report(model, target.l);
    out.diagnostics_ms = ms_since(t0);
  }
  return out;
}

}  // namespace kilab
