#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "kilab/estimator.hpp"
#include "kilab/harness/config.hpp"
#include "kilab/harness/sweep.hpp"
#include "kilab/kernel_spectrum.hpp"
#include "kilab/oracles.hpp"
#include "kilab/rate_theory.hpp"
#include "kilab/target_model.hpp"

namespace kilab {

struct VerifyOptions {
  bool quick = false;
  std::uint64_t master_seed = 20240917;
  // Negative: off. Otherwise mu at this degree is replaced by -1e-3 before the
  // spectrum checks run.
  int spectrum_fault_degree = -1;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct VerifyReport {
  bool quick = false;
  std::uint64_t master_seed = 0;
  std::vector<CheckResult> checks;

  [[nodiscard]] bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
  }

  [[nodiscard]] std::vector<std::string> failed_names() const {
    std::vector<std::string> out;
    for (const auto& c : checks) {
      if (!c.pass) out.push_back(c.name);
    }
    return out;
  }

  /// Machine-readable form. Contains no timings, so repeated runs match byte for byte.
  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j;
    j["mode"] = quick ? "quick" : "full";
    j["master_seed"] = master_seed;
    j["pass"] = all_pass();
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks) {
      arr.push_back({{"name", c.name},
                     {"pass", c.pass},
                     {"value", csv::format_double(c.value)},
                     {"threshold", csv::format_double(c.threshold)},
                     {"detail", c.detail}});
    }
    j["checks"] = arr;
    return j;
  }

  void print_table(std::ostream& out) const {
    std::size_t width = 5;
    for (const auto& c : checks) width = std::max(width, c.name.size());
    out << std::left << std::setw(static_cast<int>(width) + 2) << "check" << std::setw(6) << "ok"
        << std::setw(14) << "value" << std::setw(14) << "threshold"
        << "detail\n";
    for (const auto& c : checks) {
      out << std::left << std::setw(static_cast<int>(width) + 2) << c.name << std::setw(6)
          << (c.pass ? "PASS" : "FAIL") << std::setw(14) << csv::format_double(c.value, 4)
          << std::setw(14) << csv::format_double(c.threshold, 4) << c.detail << '\n';
    }
    out << (all_pass() ? "all checks passed" : "verification FAILED") << '\n';
  }
};

namespace detail {

inline CheckResult check_at_most(std::string name, double value, double threshold, std::string detail = {}) {
  return {std::move(name), std::isfinite(value) && value <= threshold, value, threshold, std::move(detail)};
}

inline CheckResult check_at_least(std::string name, double value, double threshold, std::string detail = {}) {
  return {std::move(name), std::isfinite(value) && value >= threshold, value, threshold, std::move(detail)};
}

struct VerifyCell {
  std::shared_ptr<const Spectrum> spectrum;
  Target target;
  FittedInterpolant model;
};

inline VerifyCell make_verify_cell(const KernelSpec& kernel, int d, double gamma, double s, double sigma2,
                                   const SeedPath& seed) {
  SpectrumOptions options;
  options.min_k_max = rates::floor_degree(gamma) + 2;
  auto spectrum = std::make_shared<const Spectrum>(compute_spectrum(kernel, d, options));
  Target target = build_target(spectrum, s, gamma, seed);
  const auto n = static_cast<Eigen::Index>(std::llround(std::pow(static_cast<double>(d), gamma)));
  const Dataset data = make_dataset(target, n, sigma2, seed);
  FittedInterpolant model = fit(data, spectrum);
  return {std::move(spectrum), std::move(target), std::move(model)};
}

}  // namespace detail

/// Runs the invariant suite: spectrum oracles, interpolation, exact-vs-MC,
/// per-degree bookkeeping, phase classification and sweep determinism.
inline VerifyReport verify(const VerifyOptions& options = {}) {
  using detail::check_at_least;
  using detail::check_at_most;
  VerifyReport report;
  report.quick = options.quick;
  report.master_seed = options.master_seed;
  auto& checks = report.checks;
  const SeedPath root(options.master_seed, {0x7665726966ULL});

  auto guarded = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      checks.push_back({name, false, std::nan(""), 0.0, std::string("threw: ") + e.what()});
    }
  };

  const std::vector<KernelSpec> kernels{KernelSpec::exponential(), KernelSpec::geometric()};
  const std::vector<int> spectrum_dims = options.quick ? std::vector<int>{2, 8} : std::vector<int>{2, 4, 8, 16, 32};

  // Spectra, with the optional fault applied.
  std::vector<std::shared_ptr<Spectrum>> spectra;
  guarded("spectrum.compute", [&] {
    for (const auto& kernel : kernels) {
      for (int d : spectrum_dims) {
        auto sp = std::make_shared<Spectrum>(compute_spectrum(kernel, d));
        if (options.spectrum_fault_degree >= 0 && options.spectrum_fault_degree <= sp->k_max) {
          sp->mu[static_cast<std::size_t>(options.spectrum_fault_degree)] = -1e-3;
        }
        spectra.push_back(sp);
      }
    }
  });

  guarded("spectrum.mercer", [&] {
    double worst = 0.0;
    std::string where;
    for (const auto& sp : spectra) {
      const double r = oracles::mercer_residual(*sp);
      if (!(r <= worst)) {
        worst = r;
        where = sp->kernel.family_id() + " d=" + std::to_string(sp->d);
      }
    }
    checks.push_back(check_at_most("spectrum.mercer", worst, 2e-10, "worst at " + where));
  });

  guarded("spectrum.trace", [&] {
    double worst = 0.0;
    for (const auto& sp : spectra) {
      double total = 0.0;
      for (int k = 0; k <= sp->k_max; ++k) total += sp->mu_times_n(k);
      worst = std::max(worst, std::abs(total - sp->phi_one));
    }
    checks.push_back(check_at_most("spectrum.trace", worst, 1e-10, "|sum mu_k N(d,k) - Phi(1)|"));
  });

  guarded("spectrum.nonnegative", [&] {
    double most_negative = 0.0;
    for (const auto& sp : spectra) {
      for (double mu : sp->mu) most_negative = std::min(most_negative, mu);
    }
    checks.push_back(check_at_least("spectrum.nonnegative", most_negative, 0.0, "min mu_k"));
  });

  guarded("spectrum.monomial_oracle", [&] {
    double worst = 0.0;
    for (const auto& sp : spectra) {
      if (sp->d > 8) continue;
      for (int k = 0; k <= std::min(4, sp->k_max); ++k) {
        const double oracle = oracles::monomial_eigenvalue(sp->kernel, sp->d, k);
        worst = std::max(worst, std::abs(sp->mu[k] - oracle) / std::abs(oracle));
      }
    }
    checks.push_back(check_at_most("spectrum.monomial_oracle", worst, 1e-8, "relative, k <= 4, d <= 8"));
  });

  if (!options.quick) {
    guarded("spectrum.discretized_operator", [&] {
      const Spectrum sp = compute_spectrum(KernelSpec::exponential(), 2);
      const Eigen::VectorXd eig = oracles::discretized_operator_eigenvalues_s2(sp.kernel, 40, 50);
      const double err = oracles::discretized_operator_max_relative_error(sp, eig, 4);
      checks.push_back(check_at_most("spectrum.discretized_operator", err, 0.02, "S^2, 2000 nodes, k <= 4"));
    });
  }

  // Fitted cells shared by the estimator checks.
  struct CellSpec {
    int d;
    double gamma;
    double s;
    double sigma2;
  };
  const std::vector<CellSpec> cell_specs =
      options.quick ? std::vector<CellSpec>{{8, 1.5, 0.5, 1.0}, {6, 2.4, 1.0, 0.5}}
                    : std::vector<CellSpec>{{8, 1.5, 0.5, 1.0},   {16, 1.5, 2.0, 1.0}, {6, 2.4, 1.0, 0.5},
                                            {12, 1.3, 0.5, 1.0},  {10, 1.75, 1.0, 1.0}, {24, 1.25, 0.5, 2.0},
                                            {4, 2.6, 0.3, 1.0},   {8, 1.5, 0.5, 0.0},  {20, 1.3, 1.5, 0.25},
                                            {16, 1.8, 0.8, 1.0}};
  constexpr int kReplicates = 2;
  std::vector<detail::VerifyCell> cells;
  guarded("estimator.fit", [&] {
    for (std::size_t i = 0; i < cell_specs.size(); ++i) {
      const auto& c = cell_specs[i];
      const KernelSpec& kernel = kernels[i % kernels.size()];
      for (int r = 0; r < kReplicates; ++r) {
        cells.push_back(
            detail::make_verify_cell(kernel, c.d, c.gamma, c.s, c.sigma2, root.child(1).child(i).child(r)));
      }
    }
  });

  guarded("estimator.interpolation", [&] {
    double worst = 0.0;
    for (const auto& cell : cells) {
      const double scale = std::max(1.0, cell.model.labels.cwiseAbs().maxCoeff());
      worst = std::max(worst, cell.model.train_residual / scale);
    }
    checks.push_back(check_at_most("estimator.interpolation", worst, 1e-6,
                                   "max |f(x_i) - y_i| / max(1, max|y|), zero jitter"));
  });

  guarded("estimator.bias_split", [&] {
    double worst = 0.0;
    for (const auto& cell : cells) {
      const BiasReport bias = exact_bias_by_degree(cell.model, cell.target);
      double sum = 0.0;
      for (double b : bias.by_degree) sum += b;
      const double scale = std::max(bias.total, cell.target.l2_norm_sq());
      worst = std::max(worst, std::abs(sum - bias.total) / scale);
      worst = std::max(worst, std::abs(bias.B1 + bias.B2 - sum) / scale);
    }
    checks.push_back(check_at_most("estimator.bias_split", worst, 1e-8,
                                   "per-degree bias vs direct aggregation, relative"));
  });

  guarded("estimator.variance_split", [&] {
    double worst = 0.0;
    for (const auto& cell : cells) {
      if (cell.model.sigma2 == 0.0) continue;
      const VarianceReport var = exact_variance(cell.model, cell.target.l);
      double sum = 0.0;
      for (double v : var.by_degree) sum += v;
      worst = std::max(worst, std::abs(sum - var.total) / var.total);
    }
    checks.push_back(check_at_most("estimator.variance_split", worst, 1e-8,
                                   "per-degree variance vs Phi_2 assembly, relative"));
  });

  guarded("estimator.single_point_variance", [&] {
    double worst = 0.0;
    for (const auto& kernel : kernels) {
      auto sp = std::make_shared<const Spectrum>(compute_spectrum(kernel, 5));
      const Target target = build_target(sp, 1.0, 0.5, root.child(2));
      const Dataset data = make_dataset(target, 1, 1.0, root.child(2));
      const FittedInterpolant model = fit(data, sp);
      const double expected = SquaredKernel(*sp).eval(1.0) / (sp->phi_one * sp->phi_one);
      worst = std::max(worst, std::abs(exact_variance(model).total - expected) / expected);
    }
    checks.push_back(check_at_most("estimator.single_point_variance", worst, 1e-10,
                                   "n=1: sigma^2 Phi_2(1) / Phi(1)^2"));
  });

  guarded("estimator.mc_vs_exact", [&] {
    int agree = 0;
    int total = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& cell = cells[i];
      const MonteCarloErrors mc = mc_errors(cell.model, cell.target, 4000, root.child(3).child(i));
      const BiasReport bias = exact_bias_by_degree(cell.model, cell.target);
      const VarianceReport var = exact_variance(cell.model, cell.target.l);
      const bool bias_ok = std::abs(mc.bias_sq - bias.total) <= 4.0 * mc.bias_sq_se + 1e-12;
      const bool var_ok = std::abs(mc.var - var.total) <= 4.0 * mc.var_se + 1e-12;
      agree += (bias_ok && var_ok) ? 1 : 0;
      ++total;
    }
    const double fraction = total ? static_cast<double>(agree) / total : 0.0;
    checks.push_back(check_at_least("estimator.mc_vs_exact", fraction, 0.95,
                                    std::to_string(agree) + "/" + std::to_string(total) +
                                        " cells within 4 MC standard errors"));
  });

  guarded("rates.classification", [&] {
    std::mt19937_64 rng = root.child(4).engine();
    std::uniform_real_distribution<double> gamma_dist(0.0, 4.0);
    std::uniform_real_distribution<double> s_dist(0.0, 3.0);
    const int samples = options.quick ? 2000 : 10000;
    int agree = 0;
    int tested = 0;
    while (tested < samples) {
      const double gamma = gamma_dist(rng);
      const double s = s_dist(rng);
      if (gamma <= 0.0 || s <= 0.0 || rates::is_positive_integer(gamma)) continue;
      const auto point = rates::classify(s, gamma);
      const auto minimax = rates::minimax_exponent(s, gamma);
      const bool attains = minimax && std::abs(point.total_exponent - *minimax) <= 1e-12;
      const bool above = minimax && point.total_exponent >= *minimax - 1e-12;
      agree += (above && attains == (point.classification == rates::Phase::optimal)) ? 1 : 0;
      ++tested;
    }
    checks.push_back(check_at_least("rates.classification", static_cast<double>(agree) / tested, 1.0,
                                    std::to_string(agree) + "/" + std::to_string(tested) +
                                        " agree with total-vs-minimax exponent comparison"));
  });

  guarded("rates.spot_checks", [&] {
    struct Spot {
      double gamma;
      double s;
      rates::Phase expected;
    };
    const std::vector<Spot> spots{{0.4, 3.0, rates::Phase::optimal},
                                  {1.5, 0.5, rates::Phase::optimal},
                                  {1.5, 1.0, rates::Phase::sub_optimal},
                                  {2.0, 1.0, rates::Phase::inconsistent},
                                  {0.4, 1.0, rates::Phase::optimal}};
    int ok = 0;
    std::string misses;
    for (const auto& spot : spots) {
      const auto got = rates::classify(spot.s, spot.gamma).classification;
      if (got == spot.expected) {
        ++ok;
      } else {
        misses += " (" + csv::format_double(spot.gamma, 4) + "," + csv::format_double(spot.s, 4) +
                  ")->" + rates::to_string(got);
      }
    }
    checks.push_back(check_at_least("rates.spot_checks", ok, static_cast<double>(spots.size()),
                                    misses.empty() ? "all match" : "mismatch:" + misses));
  });

  guarded("sweep.determinism", [&] {
    ExperimentConfig config;
    config.gamma = 1.5;
    config.s = 0.5;
    config.d_list = options.quick ? std::vector<int>{4, 6} : std::vector<int>{4, 6, 8};
    config.replicates = options.quick ? 2 : 3;
    config.mc_test_points = 200;
    config.master_seed = options.master_seed;
    std::ostringstream one, again, many;
    run_sweep_csv(config, 1, one);
    run_sweep_csv(config, 1, again);
    run_sweep_csv(config, 3, many);
    const bool same = one.str() == again.str() && one.str() == many.str();
    checks.push_back({"sweep.determinism", same, same ? 1.0 : 0.0, 1.0,
                      "repeat and 1-vs-3 worker outputs byte-identical"});
  });

  return report;
}

}  // namespace kilab
