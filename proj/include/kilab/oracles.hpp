#pragma once

// Independent computations of spectral quantities, used by the verification
// suite and the tests to cross-check the production code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "kilab/kernel_spectrum.hpp"
#include "kilab/zonal.hpp"

namespace kilab::oracles {

/// E_rho_d[t^{2m}] = prod_{i<m} (2i+1)/(d+1+2i); odd moments vanish.
inline double inner_product_moment(int d, int power) {
  if (power % 2 == 1) return 0.0;
  double out = 1.0;
  for (int i = 0; i < power / 2; ++i) out *= (2.0 * i + 1.0) / (d + 1.0 + 2.0 * i);
  return out;
}

/// Monomial coefficients of P_{k,d} (index = power), built from the recurrence.
inline std::vector<double> zonal_monomial_coefficients(int d, int k) {
  std::vector<double> prev{1.0};
  if (k == 0) return prev;
  std::vector<double> cur{0.0, 1.0};
  for (int j = 1; j < k; ++j) {
    std::vector<double> next(static_cast<std::size_t>(j) + 2, 0.0);
    const double a = (2.0 * j + d - 1.0) / (j + d - 1.0);
    const double b = j / (j + d - 1.0);
    for (std::size_t p = 0; p < cur.size(); ++p) next[p + 1] += a * cur[p];
    for (std::size_t p = 0; p < prev.size(); ++p) next[p] -= b * prev[p];
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

/// mu_k = sum_j a_j E[t^j P_k(t)] by exact moments (term-by-term monomial route).
inline double monomial_eigenvalue(const KernelSpec& spec, int d, int k) {
  const auto pk = zonal_monomial_coefficients(d, k);
  const auto& a = spec.coefficients();
  double mu = 0.0;
  for (std::size_t j = static_cast<std::size_t>(k); j < a.size(); j += 2) {
    double moment = 0.0;
    for (std::size_t p = 0; p < pk.size(); ++p) {
      moment += pk[p] * inner_product_moment(d, static_cast<int>(j + p));
    }
    mu += a[j] * moment;
  }
  return mu;
}

/// mu_k = E_rho_d[Phi(t) P_k(t)] by direct Gauss-Jacobi projection.
inline double direct_projection_eigenvalue(const KernelSpec& spec, int d, int k, int points = 256) {
  const QuadratureRule rule = quadrature(d, points);
  const ZonalBasis basis(d, k);
  return rule.integrate([&](double t) { return spec.eval(t) * basis.eval(k, t); });
}

/// max over an m-point uniform grid on [-1,1] of |Phi(t) - sum_k mu_k N P_k(t)|.
inline double mercer_residual(const Spectrum& spectrum, int grid_points = 201) {
  const ZonalBasis basis = spectrum.basis();
  std::vector<double> p(static_cast<std::size_t>(spectrum.k_max) + 1);
  double worst = 0.0;
  for (int g = 0; g < grid_points; ++g) {
    const double t = -1.0 + 2.0 * g / (grid_points - 1);
    basis.eval_all(t, p);
    double acc = 0.0;
    for (int k = 0; k <= spectrum.k_max; ++k) acc += spectrum.mu_times_n(k) * p[k];
    worst = std::max(worst, std::abs(spectrum.kernel.eval(t) - acc));
  }
  return worst;
}

/// |sum mu_k N(d,k) + trace_residual - Phi(1)|
inline double trace_identity_error(const Spectrum& spectrum) {
  double total = 0.0;
  for (int k = 0; k <= spectrum.k_max; ++k) total += spectrum.mu_times_n(k);
  return std::abs(total + spectrum.trace_residual - spectrum.kernel.eval(1.0));
}

/// Eigenvalues (descending) of the integral operator on S^2 discretized with a
/// product rule: Gauss-Legendre in z times equispaced azimuth, m = nz * nphi.
inline Eigen::VectorXd discretized_operator_eigenvalues_s2(const KernelSpec& spec, int nz, int nphi) {
  const QuadratureRule rule = quadrature(2, nz);
  const Eigen::Index m = static_cast<Eigen::Index>(nz) * nphi;
  Eigen::MatrixXd pts(m, 3);
  Eigen::VectorXd sqrt_w(m);
  Eigen::Index idx = 0;
  for (int a = 0; a < nz; ++a) {
    const double z = rule.nodes[a];
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int b = 0; b < nphi; ++b) {
      const double phi = 2.0 * M_PI * (b + 0.5 * (a % 2)) / nphi;
      pts.row(idx) << r * std::cos(phi), r * std::sin(phi), z;
      sqrt_w(idx) = std::sqrt(rule.weights[a] / nphi);
      ++idx;
    }
  }
  Eigen::MatrixXd op(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = j; i < m; ++i) {
      const double t = std::clamp(pts.row(i).dot(pts.row(j)), -1.0, 1.0);
      const double v = sqrt_w(i) * spec.eval(t) * sqrt_w(j);
      op(i, j) = v;
      op(j, i) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("discretized operator eigensolve failed");
  return solver.eigenvalues().reverse();
}

/// Largest relative error between the leading discretized eigenvalues and mu_k
/// repeated 2k+1 times, k = 0..k_check.
inline double discretized_operator_max_relative_error(const Spectrum& spectrum, const Eigen::VectorXd& eig,
                                                      int k_check) {
  double worst = 0.0;
  Eigen::Index idx = 0;
  for (int k = 0; k <= k_check; ++k) {
    for (int m = 0; m < 2 * k + 1; ++m, ++idx) {
      worst = std::max(worst, std::abs(eig(idx) - spectrum.mu[k]) / spectrum.mu[k]);
    }
  }
  return worst;
}

}  // namespace kilab::oracles
