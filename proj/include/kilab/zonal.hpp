#pragma once

// Zonal (Gegenbauer) polynomials on S^d, harmonic multiplicities and
// Gauss-Jacobi quadrature for the law of <x, x'> under the uniform measure.
//
// Normalization is P_{k,d}(1) = 1, so by the addition theorem
//   sum_m psi_{k,m}(x) psi_{k,m}(x') = N(d,k) P_{k,d}(<x,x'>).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kilab/errors.hpp"

namespace kilab {

using BigCount = unsigned __int128;

inline double to_double(BigCount value) { return static_cast<double>(value); }

inline std::string to_string(BigCount value) {
  if (value == 0) return "0";
  std::string digits;
  while (value > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
    value /= 10;
  }
  std::reverse(digits.begin(), digits.end());
  return digits;
}

namespace detail {

inline BigCount checked_mul(BigCount a, BigCount b, const char* what) {
  BigCount out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw NumericalError(std::string("128-bit overflow in ") + what);
  }
  return out;
}

inline BigCount gcd(BigCount a, BigCount b) {
  while (b != 0) {
    const BigCount r = a % b;
    a = b;
    b = r;
  }
  return a;
}

// Exact binomial coefficient. Each partial product is itself a binomial, so
// out * (n-r+i) / i is an integer; dividing out the common factor first keeps
// intermediates within 128 bits for as long as the result is.
inline BigCount binomial(std::uint64_t n, std::uint64_t r) {
  if (r > n) return 0;
  r = std::min(r, n - r);
  BigCount out = 1;
  for (std::uint64_t i = 1; i <= r; ++i) {
    const BigCount g = gcd(out, i);
    const BigCount factor = static_cast<BigCount>(n - r + i) / (i / g);
    out = checked_mul(out / g, factor, "binomial");
  }
  return out;
}

}  // namespace detail

/// Dimension N(d,k) of the degree-k spherical harmonics on S^d.
///
/// Uses N(d,k) = (2k+d-1)/k * C(k+d-2, k-1) with exact 128-bit arithmetic;
/// overflow raises NumericalError instead of wrapping.
inline BigCount multiplicity(int d, int k) {
  require(d >= 1, "multiplicity: d must be >= 1");
  require(k >= 0, "multiplicity: k must be >= 0");
  if (k == 0) return 1;
  const auto kk = static_cast<std::uint64_t>(k);
  const auto dd = static_cast<std::uint64_t>(d);
  const BigCount c = detail::binomial(kk + dd - 2, kk - 1);
  return detail::checked_mul(c, 2 * kk + dd - 1, "multiplicity") / kk;
}

inline double multiplicity_real(int d, int k) { return to_double(multiplicity(d, k)); }

/// B_l = sum_{k<=l} N(d,k).
inline BigCount cumulative_multiplicity(int d, int l) {
  BigCount total = 0;
  for (int k = 0; k <= l; ++k) {
    const BigCount nk = multiplicity(d, k);
    if (__builtin_add_overflow(total, nk, &total)) {
      throw NumericalError("128-bit overflow in cumulative_multiplicity");
    }
  }
  return total;
}

/// Normalized zonal polynomials P_{0..k_max, d} via the three-term recurrence
///   (k+d-1) P_{k+1}(t) = (2k+d-1) t P_k(t) - k P_{k-1}(t).
class ZonalBasis {
 public:
  ZonalBasis(int d, int k_max) : d_(d), k_max_(k_max) {
    require(d >= 1, "ZonalBasis: d must be >= 1");
    require(k_max >= 0, "ZonalBasis: k_max must be >= 0");
    alpha_.resize(static_cast<std::size_t>(k_max_) + 1, 0.0);
    beta_.resize(static_cast<std::size_t>(k_max_) + 1, 0.0);
    for (int k = 1; k < k_max_; ++k) {
      const double denom = k + d_ - 1.0;
      alpha_[k] = (2.0 * k + d_ - 1.0) / denom;
      beta_[k] = k / denom;
    }
  }

  [[nodiscard]] int d() const { return d_; }
  [[nodiscard]] int k_max() const { return k_max_; }

  /// P_{k,d}(t); t is clamped to [-1, 1] when it overshoots by <= 1e-12.
  [[nodiscard]] double eval(int k, double t) const {
    require(k >= 0 && k <= k_max_,
            "eval_zonal: degree " + std::to_string(k) + " exceeds k_max " +
                std::to_string(k_max_));
    t = clamp_arg(t);
    if (k == 0) return 1.0;
    double prev = 1.0;
    double cur = t;
    for (int j = 1; j < k; ++j) {
      const double next = alpha_[j] * t * cur - beta_[j] * prev;
      prev = cur;
      cur = next;
    }
    return cur;
  }

  /// Writes P_{0..k_max}(t) into `out` (size k_max+1).
  void eval_all(double t, std::span<double> out) const {
    require(out.size() == static_cast<std::size_t>(k_max_) + 1, "eval_all: bad output size");
    t = clamp_arg(t);
    out[0] = 1.0;
    if (k_max_ == 0) return;
    out[1] = t;
    for (int j = 1; j < k_max_; ++j) {
      out[j + 1] = alpha_[j] * t * out[j] - beta_[j] * out[j - 1];
    }
  }

  [[nodiscard]] std::vector<double> eval_all(double t) const {
    std::vector<double> out(static_cast<std::size_t>(k_max_) + 1);
    eval_all(t, out);
    return out;
  }

  /// Rows: arguments t; columns: degrees 0..k_max.
  [[nodiscard]] Eigen::MatrixXd eval_table(std::span<const double> ts) const {
    Eigen::MatrixXd table(static_cast<Eigen::Index>(ts.size()), k_max_ + 1);
    std::vector<double> row(static_cast<std::size_t>(k_max_) + 1);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      eval_all(ts[i], row);
      for (int k = 0; k <= k_max_; ++k) table(static_cast<Eigen::Index>(i), k) = row[k];
    }
    return table;
  }

 private:
  static double clamp_arg(double t) {
    if (std::abs(t) > 1.0 + 1e-12) {
      throw UsageError("zonal polynomial argument outside [-1, 1]: " + std::to_string(t));
    }
    return std::clamp(t, -1.0, 1.0);
  }

  int d_;
  int k_max_;
  std::vector<double> alpha_;
  std::vector<double> beta_;
};

inline double eval_zonal(const ZonalBasis& basis, int k, double t) { return basis.eval(k, t); }

/// Gauss rule for a symmetric Jacobi weight on (-1,1), weights summing to one.
struct QuadratureRule {
  double exponent = 0.0;  // weight (1 - t^2)^exponent
  std::vector<double> nodes;
  std::vector<double> weights;

  [[nodiscard]] std::size_t size() const { return nodes.size(); }
  /// Polynomials up to this degree are integrated exactly.
  [[nodiscard]] int exact_degree() const { return 2 * static_cast<int>(nodes.size()) - 1; }

  template <class F>
  [[nodiscard]] double integrate(F&& f) const {
    double sum = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) sum += weights[q] * f(nodes[q]);
    return sum;
  }
};

/// Golub-Welsch rule for the weight (1-t^2)^exponent, exponent > -1.
inline QuadratureRule gauss_gegenbauer(double exponent, int points) {
  require(points >= 1, "quadrature: points must be >= 1");
  require(exponent > -1.0, "quadrature: weight exponent must be > -1");
  QuadratureRule rule;
  rule.exponent = exponent;
  if (points == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }
  // Monic recurrence for Jacobi(a, a): zero diagonal and
  //   b_1^2 = 1/(2a+3),  b_n^2 = n(n+2a) / ((2n+2a+1)(2n+2a-1)).
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(points);
  Eigen::VectorXd sub(points - 1);
  for (int n = 1; n < points; ++n) {
    const double b2 = (n == 1) ? 1.0 / (2.0 * exponent + 3.0)
                               : n * (n + 2.0 * exponent) /
                                     ((2.0 * n + 2.0 * exponent + 1.0) *
                                      (2.0 * n + 2.0 * exponent - 1.0));
    sub(n - 1) = std::sqrt(b2);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("Gauss-Jacobi node computation failed to converge (exponent=" +
                         std::to_string(exponent) + ", points=" + std::to_string(points) + ")");
  }
  rule.nodes.resize(points);
  rule.weights.resize(points);
  double total = 0.0;
  for (int q = 0; q < points; ++q) {
    rule.nodes[q] = solver.eigenvalues()(q);
    const double v = solver.eigenvectors()(0, q);
    rule.weights[q] = v * v;
    total += rule.weights[q];
  }
  for (double& w : rule.weights) w /= total;
  // Enforce exact symmetry of the rule.
  for (int q = 0; q < points / 2; ++q) {
    const int r = points - 1 - q;
    const double t = 0.5 * (rule.nodes[r] - rule.nodes[q]);
    const double w = 0.5 * (rule.weights[q] + rule.weights[r]);
    rule.nodes[q] = -t;
    rule.nodes[r] = t;
    rule.weights[q] = w;
    rule.weights[r] = w;
  }
  if (points % 2 == 1) rule.nodes[points / 2] = 0.0;
  return rule;
}

/// Probability rule for the density of <x, x'> on S^d, proportional to (1-t^2)^{(d-2)/2}.
inline QuadratureRule quadrature(int d, int points) {
  require(d >= 1, "quadrature: d must be >= 1");
  return gauss_gegenbauer(0.5 * (d - 2), points);
}

/// N(d,k) * P_{k,d}(G_ij); equals Psi_k Psi_k^T for sphere points with Gram matrix G.
inline Eigen::MatrixXd gram_zonal(const ZonalBasis& basis, int k, const Eigen::MatrixXd& gram) {
  require(gram.rows() == gram.cols(), "gram_zonal: G must be square");
  for (Eigen::Index i = 0; i < gram.rows(); ++i) {
    require(std::abs(gram(i, i) - 1.0) <= 1e-9,
            "gram_zonal: G must have unit diagonal (inputs must be sphere points)");
  }
  const double nk = multiplicity_real(basis.d(), k);
  const Eigen::Index n = gram.rows();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = nk * basis.eval(k, gram(i, j));
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

}  // namespace kilab
