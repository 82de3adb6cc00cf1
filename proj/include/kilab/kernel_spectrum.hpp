#pragma once

// Inner-product kernels k(x,x') = Phi(<x,x'>) with nonnegative Taylor
// coefficients, and their per-degree eigenvalues on S^d.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kilab/errors.hpp"
#include "kilab/geometry_rng.hpp"
#include "kilab/zonal.hpp"

namespace kilab {

/// Phi(t) = sum_j a_j t^j. Built-in families carry closed forms for Phi and
/// its derivatives; coefficient-list kernels are evaluated by Horner.
class KernelSpec {
 public:
  using Evaluator = std::function<double(double)>;
  using DerivativeEvaluator = std::function<double(int, double)>;

  /// Phi(t) = exp(t - 1), a_j = e^{-1}/j!.
  static KernelSpec exponential() {
    std::vector<double> a(32);
    double factorial = 1.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (j > 0) factorial *= static_cast<double>(j);
      a[j] = std::exp(-1.0) / factorial;
    }
    KernelSpec spec("exp", std::move(a));
    spec.closed_form_ = [](double t) { return std::exp(t - 1.0); };
    spec.closed_derivative_ = [](int, double t) { return std::exp(t - 1.0); };
    return spec;
  }

  /// Phi(t) = 1/(2 - t), a_j = 2^{-(j+1)}.
  static KernelSpec geometric() {
    std::vector<double> a(64);
    for (std::size_t j = 0; j < a.size(); ++j) a[j] = std::ldexp(1.0, -static_cast<int>(j) - 1);
    KernelSpec spec("geometric", std::move(a));
    spec.closed_form_ = [](double t) { return 1.0 / (2.0 - t); };
    spec.closed_derivative_ = [](int k, double t) {
      // k! / (2 - t)^{k+1}
      return std::exp(std::lgamma(k + 1.0) - (k + 1.0) * std::log(2.0 - t));
    };
    return spec;
  }

  /// Finite coefficient list. `degenerate` admits zero coefficients (test specs).
  static KernelSpec from_coefficients(std::vector<double> coefficients, bool degenerate = false,
                                      std::string family_id = "coefficients") {
    KernelSpec spec(std::move(family_id), std::move(coefficients));
    spec.degenerate_ = degenerate;
    spec.validate();
    return spec;
  }

  static KernelSpec by_id(const std::string& id) {
    if (id == "exp") return exponential();
    if (id == "geometric") return geometric();
    throw UsageError("unknown kernel id '" + id + "' (expected 'exp' or 'geometric')");
  }

  [[nodiscard]] const std::string& family_id() const { return family_id_; }
  [[nodiscard]] const std::vector<double>& coefficients() const { return coefficients_; }
  [[nodiscard]] bool degenerate() const { return degenerate_; }
  [[nodiscard]] bool has_closed_form() const { return static_cast<bool>(closed_form_); }

  /// Phi(t) for |t| <= 1.
  [[nodiscard]] double eval(double t) const {
    if (std::abs(t) > 1.0 + 1e-12) {
      throw UsageError("eval_phi: argument outside [-1, 1]: " + std::to_string(t));
    }
    t = std::clamp(t, -1.0, 1.0);
    if (closed_form_) return closed_form_(t);
    return horner(coefficients_, t);
  }

  /// k-th derivative of Phi at t.
  [[nodiscard]] double derivative(int k, double t) const {
    if (k == 0) return eval(t);
    if (closed_derivative_) return closed_derivative_(k, t);
    const auto& a = coefficients_;
    if (static_cast<std::size_t>(k) >= a.size()) return 0.0;
    std::vector<double> shifted(a.size() - static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < shifted.size(); ++j) {
      double falling = 1.0;  // (j+k)! / j!
      for (int i = 1; i <= k; ++i) falling *= static_cast<double>(j + static_cast<std::size_t>(i));
      shifted[j] = a[j + static_cast<std::size_t>(k)] * falling;
    }
    return horner(shifted, t);
  }

  /// Upper bound on the series remainder beyond the stored coefficients.
  /// Zero for exact closed forms and for finite coefficient lists.
  [[nodiscard]] double series_remainder_bound() const {
    if (!closed_form_) return 0.0;
    double sum = 0.0;
    for (double a : coefficients_) sum += a;
    return std::max(0.0, closed_form_(1.0) - sum);
  }

  void validate() const {
    require(!coefficients_.empty(), "kernel: coefficient list is empty");
    double total = 0.0;
    for (std::size_t j = 0; j < coefficients_.size(); ++j) {
      const double a = coefficients_[j];
      require(std::isfinite(a) && a >= 0.0,
              "kernel: coefficient a_" + std::to_string(j) + " must be nonnegative");
      require(degenerate_ || a > 0.0,
              "kernel: coefficient a_" + std::to_string(j) +
                  " is zero; declare the kernel degenerate to allow it");
      total += a;
    }
    require(total <= 1.0 + 1e-12, "kernel: coefficients must sum to at most 1");
  }

 private:
  KernelSpec(std::string family_id, std::vector<double> coefficients)
      : family_id_(std::move(family_id)), coefficients_(std::move(coefficients)) {}

  static double horner(const std::vector<double>& a, double t) {
    double acc = 0.0;
    for (auto it = a.rbegin(); it != a.rend(); ++it) acc = acc * t + *it;
    return acc;
  }

  std::string family_id_;
  std::vector<double> coefficients_;
  Evaluator closed_form_;
  DerivativeEvaluator closed_derivative_;
  bool degenerate_ = false;
};

inline double eval_phi(const KernelSpec& spec, double t) { return spec.eval(t); }

struct SpectrumOptions {
  double tol = 1e-10;   // target trace residual Phi(1) - sum mu_k N(d,k)
  int min_k_max = 0;    // keep going at least to this degree
  int k_cap = 64;       // hard cap; exceeding it is an error
};

/// Per-degree eigenvalues mu_k of the integral operator on S^d.
struct Spectrum {
  int d = 0;
  int k_max = 0;
  double tol = 0.0;
  double phi_one = 0.0;
  double trace_residual = 0.0;  // Phi(1) - sum_{k<=k_max} mu_k N(d,k)
  std::vector<double> mu;
  std::vector<BigCount> multiplicities;
  std::vector<double> multiplicities_real;
  KernelSpec kernel = KernelSpec::exponential();

  [[nodiscard]] double mu_times_n(int k) const { return mu[k] * multiplicities_real[k]; }
  [[nodiscard]] ZonalBasis basis() const { return ZonalBasis(d, k_max); }
};

namespace detail {

inline double log_beta_normalizer(double exponent) {
  // log of integral_{-1}^{1} (1-t^2)^exponent dt
  return 0.5 * std::log(std::numbers::pi) + std::lgamma(exponent + 1.0) -
         std::lgamma(exponent + 1.5);
}

// mu_k = E_rho_d[Phi(t) P_{k,d}(t)] rewritten by k integrations by parts
// (Rodrigues' formula) as
//   mu_k = Z_{a+k} / (2^k (a+1)_k Z_a) * E_{(1-t^2)^{a+k}}[Phi^{(k)}(t)],
// a = (d-2)/2, Z_b = int (1-t^2)^b. The integrand is nonnegative under the
// kernel assumptions, so small eigenvalues keep full relative accuracy.
inline double degree_eigenvalue(const KernelSpec& spec, int d, int k) {
  const double a = 0.5 * (d - 2);
  const double exponent = a + k;
  const double log_prefactor = -k * std::log(2.0) - (std::lgamma(a + 1.0 + k) - std::lgamma(a + 1.0)) +
                               log_beta_normalizer(exponent) - log_beta_normalizer(a);
  const double prefactor = std::exp(log_prefactor);

  auto integrand = [&](double t) { return spec.derivative(k, t); };
  int points = 16;
  double previous = gauss_gegenbauer(exponent, points).integrate(integrand);
  constexpr int kMaxPoints = 1024;
  while (true) {
    points *= 2;
    if (points > kMaxPoints) {
      throw NumericalError("eigenvalue quadrature did not converge: d=" + std::to_string(d) +
                           " k=" + std::to_string(k) + " last=" + std::to_string(previous));
    }
    const auto rule = gauss_gegenbauer(exponent, points);
    const double current = rule.integrate(integrand);
    // cancellation (e.g. odd integrands) leaves only roundoff, so measure
    // the change against the mass of |integrand| as well
    const double mass = rule.integrate([&](double t) { return std::abs(integrand(t)); });
    const double scale = std::max({std::abs(current), 1e-2 * mass, 1e-300});
    if (std::abs(current - previous) <= 1e-14 * scale) return prefactor * current;
    previous = current;
  }
}

}  // namespace detail

/// Eigenvalues mu_0..mu_{k_max} with k_max chosen so the trace residual drops below tol.
inline Spectrum compute_spectrum(const KernelSpec& spec, int d, const SpectrumOptions& options = {}) {
  require(d >= 1, "compute_spectrum: d must be >= 1");
  require(options.tol > 0.0, "compute_spectrum: tol must be > 0");
  require(options.min_k_max >= 0 && options.min_k_max <= options.k_cap,
          "compute_spectrum: min_k_max out of range");
  spec.validate();

  Spectrum out;
  out.d = d;
  out.tol = options.tol;
  out.kernel = spec;
  out.phi_one = spec.eval(1.0);
  double trace = 0.0;
  for (int k = 0; k <= options.k_cap; ++k) {
    double mu = detail::degree_eigenvalue(spec, d, k);
    if (!std::isfinite(mu)) {
      throw NumericalError("non-finite eigenvalue at degree " + std::to_string(k));
    }
    if (mu < 0.0) {
      if (mu > -1e-13) {
        mu = 0.0;
      } else {
        throw NumericalError("materially negative eigenvalue mu_" + std::to_string(k) + " = " +
                             std::to_string(mu) + " (kernel violates the positivity assumption)");
      }
    }
    const BigCount nk = multiplicity(d, k);
    out.mu.push_back(mu);
    out.multiplicities.push_back(nk);
    out.multiplicities_real.push_back(to_double(nk));
    trace += mu * to_double(nk);
    out.k_max = k;
    out.trace_residual = out.phi_one - trace;
    if (k >= options.min_k_max && out.trace_residual < options.tol) return out;
  }
  throw NumericalError("k_max cap " + std::to_string(options.k_cap) +
                       " reached before trace residual fell below tol (d=" + std::to_string(d) +
                       ", residual=" + std::to_string(out.trace_residual) + ")");
}

/// Multiplicity-weighted tail sums over degrees > l.
struct TailSums {
  int l = 0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double kappa1_tail_bound = 0.0;  // unaccounted mass beyond k_max
  double kappa2_tail_bound = 0.0;
};

/// kappa1 = sum_{k>l} mu_k N(d,k), kappa2 = sum_{k>l} mu_k^2 N(d,k); l = -1 sums everything.
inline TailSums tail_sums(const Spectrum& spectrum, int l) {
  require(l >= -1, "tail_sums: l must be >= -1");
  require(l < spectrum.k_max, "tail_sums: l=" + std::to_string(l) + " must be below k_max=" +
                                  std::to_string(spectrum.k_max) + " (tighten the trace tolerance)");
  TailSums out;
  out.l = l;
  for (int k = l + 1; k <= spectrum.k_max; ++k) {
    out.kappa1 += spectrum.mu_times_n(k);
    out.kappa2 += spectrum.mu[k] * spectrum.mu_times_n(k);
  }
  const double residual = std::max(0.0, spectrum.trace_residual);
  out.kappa1_tail_bound = residual;
  out.kappa2_tail_bound = spectrum.mu[spectrum.k_max] * residual;
  return out;
}

/// Phi_2(t) = sum_k mu_k^2 N(d,k) P_{k,d}(t): the kernel of Psi Sigma^2 Psi^T.
class SquaredKernel {
 public:
  explicit SquaredKernel(const Spectrum& spectrum)
      : basis_(spectrum.basis()), coefficients_(spectrum.mu.size()) {
    for (std::size_t k = 0; k < coefficients_.size(); ++k) {
      coefficients_[k] = spectrum.mu[k] * spectrum.mu_times_n(static_cast<int>(k));
    }
    tail_bound_ = spectrum.mu[spectrum.k_max] * std::max(0.0, spectrum.trace_residual);
  }

  [[nodiscard]] double eval(double t) const {
    std::vector<double> p(coefficients_.size());
    basis_.eval_all(t, p);
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) acc += coefficients_[k] * p[k];
    return acc;
  }

  /// Bound on sum_{k>k_max} mu_k^2 N(d,k).
  [[nodiscard]] double tail_bound() const { return tail_bound_; }
  [[nodiscard]] const std::vector<double>& degree_coefficients() const { return coefficients_; }

 private:
  ZonalBasis basis_;
  std::vector<double> coefficients_;
  double tail_bound_ = 0.0;
};

inline SquaredKernel squared_kernel(const Spectrum& spectrum) { return SquaredKernel(spectrum); }

/// Symmetric matrix E(<x_i,x_j>) for any evaluator with `double eval(double) const`.
template <class Evaluator>
Eigen::MatrixXd assemble_from_gram(const Evaluator& evaluator, const Eigen::MatrixXd& gram) {
  const Eigen::Index n = gram.rows();
  Eigen::MatrixXd k(n, n);
  const double diag = evaluator.eval(1.0);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = diag;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = evaluator.eval(gram(i, j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

template <class Evaluator>
Eigen::MatrixXd assemble_kernel_matrix(const Evaluator& evaluator, const SpherePoints& points) {
  return assemble_from_gram(evaluator, points.gram());
}

/// Rectangular kernel block E(<a_i, b_j>).
template <class Evaluator>
Eigen::MatrixXd assemble_cross_kernel(const Evaluator& evaluator, const Eigen::MatrixXd& cross_gram) {
  return cross_gram.unaryExpr([&](double t) { return evaluator.eval(t); });
}

/// K_{<=l} = sum_{k<=l} mu_k N(d,k) P_{k,d}(G).
inline Eigen::MatrixXd low_degree_kernel_matrix(const Spectrum& spectrum, int l,
                                                const Eigen::MatrixXd& gram) {
  require(l >= 0 && l <= spectrum.k_max, "low_degree_kernel_matrix: l out of range");
  const ZonalBasis basis(spectrum.d, l);
  const Eigen::Index n = gram.rows();
  Eigen::MatrixXd out(n, n);
  std::vector<double> p(static_cast<std::size_t>(l) + 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      basis.eval_all(gram(i, j), p);
      double acc = 0.0;
      for (int k = 0; k <= l; ++k) acc += spectrum.mu_times_n(k) * p[k];
      out(i, j) = acc;
      out(j, i) = acc;
    }
  }
  return out;
}

}  // namespace kilab
