#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "kilab/errors.hpp"
#include "kilab/estimator.hpp"
#include "kilab/harness/config.hpp"
#include "kilab/harness/csv.hpp"
#include "kilab/kernel_spectrum.hpp"
#include "kilab/rate_theory.hpp"
#include "kilab/target_model.hpp"

namespace kilab {

inline constexpr int kResultSchemaVersion = 1;

struct CellKey {
  std::size_t index = 0;
  int d = 0;
  int replicate = 0;
  Eigen::Index n = 0;
  SeedPath seed;
};

struct CellResult {
  CellKey key;
  bool ok = true;
  int error_code = 0;
  std::string error_message;
  int l = 0;
  double beta_norm_sq = 0.0;
  double hs_norm_sq = 0.0;
  double c0 = 0.0;
  ErrorReport report;
  double jitter_used = 0.0;
  double train_residual = 0.0;
  double runtime_ms = 0.0;
};

/// Test hooks applied inside a cell, after the dataset is drawn.
struct SweepHooks {
  std::function<void(const CellKey&, Dataset&)> mutate_dataset;
};

struct SweepSummary {
  std::size_t cells = 0;
  std::size_t failed = 0;
};

/// Cells in (d, replicate) order; seeds are addressed by (d, replicate) so a
/// cell's randomness does not depend on the rest of the sweep.
inline std::vector<CellKey> enumerate_cells(const ExperimentConfig& config) {
  std::vector<CellKey> cells;
  for (int d : config.d_list) {
    for (int r = 0; r < config.replicates; ++r) {
      CellKey key;
      key.index = cells.size();
      key.d = d;
      key.replicate = r;
      key.n = config.n_for(d);
      key.seed = SeedPath(config.master_seed,
                          {static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(r)});
      cells.push_back(key);
    }
  }
  return cells;
}

inline std::vector<std::string> result_columns() {
  return {"schema_version", "kernel",        "gamma",          "s",
          "sigma2",         "n_coefficient", "lambda",         "d",
          "n",              "replicate",     "seed_path",      "status",
          "error_code",     "error_message", "l",              "beta_norm_sq",
          "hs_norm_sq",     "c0",            "bias_sq_exact",  "var_exact",
          "B1",             "B2",            "var_low",        "var_high",
          "bias_sq_mc",     "bias_sq_mc_se", "var_mc",         "var_mc_se",
          "mc_flag",        "kappa1",        "kappa2",         "lambda_min_K",
          "delta1_opnorm",  "psi_gram_deviation", "jitter_used", "train_residual",
          "runtime_ms"};
}

inline std::string result_header() { return csv::join(result_columns()); }

inline std::string result_row(const ExperimentConfig& config, const CellResult& r) {
  using csv::format_double;
  std::vector<std::string> f;
  f.push_back(std::to_string(kResultSchemaVersion));
  f.push_back(config.kernel_label());
  f.push_back(format_double(config.gamma));
  f.push_back(format_double(config.s));
  f.push_back(format_double(config.sigma2));
  f.push_back(format_double(config.n_coefficient));
  f.push_back(format_double(config.lambda));
  f.push_back(std::to_string(r.key.d));
  f.push_back(std::to_string(r.key.n));
  f.push_back(std::to_string(r.key.replicate));
  f.push_back(r.key.seed.to_string());
  f.push_back(r.ok ? "ok" : "error");
  f.push_back(std::to_string(r.error_code));
  f.push_back(csv::sanitize(r.error_message));
  const std::size_t numeric_start = f.size();
  if (r.ok) {
    const ErrorReport& e = r.report;
    f.push_back(std::to_string(r.l));
    f.push_back(format_double(r.beta_norm_sq));
    f.push_back(format_double(r.hs_norm_sq));
    f.push_back(format_double(r.c0));
    f.push_back(format_double(e.bias_sq_exact));
    f.push_back(format_double(e.var_exact));
    f.push_back(format_double(e.B1));
    f.push_back(format_double(e.B2));
    f.push_back(format_double(e.var_low));
    f.push_back(format_double(e.var_high));
    if (e.has_mc) {
      f.push_back(format_double(e.mc.bias_sq));
      f.push_back(format_double(e.mc.bias_sq_se));
      f.push_back(format_double(e.mc.var));
      f.push_back(format_double(e.mc.var_se));
      f.push_back((e.mc_bias_flag || e.mc_var_flag) ? "1" : "0");
    } else {
      f.insert(f.end(), 5, std::string());
    }
    f.push_back(format_double(e.kappa1));
    f.push_back(format_double(e.kappa2));
    if (e.has_concentration) {
      f.push_back(format_double(e.concentration.lambda_min_K));
      f.push_back(format_double(e.concentration.delta1_opnorm));
      f.push_back(e.concentration.psi_gram_meaningful
                      ? format_double(e.concentration.psi_gram_deviation)
                      : std::string());
    } else {
      f.insert(f.end(), 3, std::string());
    }
    f.push_back(format_double(r.jitter_used));
    f.push_back(format_double(r.train_residual));
  } else {
    f.resize(numeric_start + 22);
  }
  f.push_back(config.record_timings ? format_double(r.runtime_ms, 6) : std::string());
  return csv::join(f);
}

/// Fits one cell. Failures become error rows; they never propagate.
inline CellResult run_cell(const ExperimentConfig& config, const std::shared_ptr<const Spectrum>& spectrum,
                           const CellKey& key, const SweepHooks& hooks = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  CellResult result;
  result.key = key;
  try {
    if (!spectrum) throw NumericalError("spectrum unavailable for d=" + std::to_string(key.d));
    const Target target = build_target(spectrum, config.s, config.gamma, key.seed, config.norm_budget);
    result.l = target.l;
    result.beta_norm_sq = target.l2_norm_sq();
    result.hs_norm_sq = target.hs_norm_sq;
    result.c0 = target.c0;
    Dataset data = make_dataset(target, key.n, config.sigma2, key.seed);
    if (hooks.mutate_dataset) hooks.mutate_dataset(key, data);
    const FittedInterpolant model = fit(data, spectrum, config.lambda, config.jitter_policy);
    result.jitter_used = model.jitter_used;
    result.train_residual = model.train_residual;
    ReportOptions options;
    options.mc_test_points = config.mc_test_points;
    options.concentration = config.diagnostics;
    result.report = error_report(model, target, key.seed, options);
  } catch (const UsageError& e) {
    result.ok = false;
    result.error_code = static_cast<int>(ExitCode::usage);
    result.error_message = e.what();
  } catch (const NumericalError& e) {
    result.ok = false;
    result.error_code = static_cast<int>(ExitCode::numerical);
    result.error_message = e.what();
  } catch (const std::exception& e) {
    result.ok = false;
    result.error_code = static_cast<int>(ExitCode::numerical);
    result.error_message = std::string("unexpected: ") + e.what();
  }
  result.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// Runs every cell on `workers` threads and hands results to `sink` in cell
/// order, from the calling thread, as soon as each prefix is complete.
inline SweepSummary run_sweep(const ExperimentConfig& config, int workers,
                              const std::function<void(const CellResult&)>& sink,
                              const SweepHooks& hooks = {}) {
  config.validate();
  const auto cells = enumerate_cells(config);
  const KernelSpec kernel = config.kernel();

  // Spectra are shared by all replicates of a d.
  std::map<int, std::shared_ptr<const Spectrum>> spectra;
  std::map<int, std::string> spectrum_errors;
  SpectrumOptions spectrum_options;
  spectrum_options.tol = config.trace_tol;
  spectrum_options.min_k_max = rates::floor_degree(config.gamma) + 2;
  for (int d : config.d_list) {
    try {
      spectra[d] = std::make_shared<const Spectrum>(compute_spectrum(kernel, d, spectrum_options));
    } catch (const std::exception& e) {
      spectra[d] = nullptr;
      spectrum_errors[d] = e.what();
    }
  }

  std::vector<std::optional<CellResult>> slots(cells.size());
  std::mutex mutex;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      CellResult r = run_cell(config, spectra.at(cells[i].d), cells[i], hooks);
      if (!spectra.at(cells[i].d)) {
        r.error_message = "spectrum failed: " + spectrum_errors[cells[i].d];
      }
      {
        std::lock_guard lock(mutex);
        slots[i] = std::move(r);
      }
      ready.notify_one();
    }
  };

  workers = std::max(1, workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);

  SweepSummary summary;
  summary.cells = cells.size();
  for (std::size_t emitted = 0; emitted < cells.size(); ++emitted) {
    CellResult r;
    {
      std::unique_lock lock(mutex);
      ready.wait(lock, [&] { return slots[emitted].has_value(); });
      r = std::move(*slots[emitted]);
      slots[emitted].reset();
    }
    if (!r.ok) ++summary.failed;
    sink(r);
  }
  for (auto& t : pool) t.join();
  return summary;
}

/// run_sweep writing CSV (header + one flushed row per cell) to `out`.
inline SweepSummary run_sweep_csv(const ExperimentConfig& config, int workers, std::ostream& out,
                                  const SweepHooks& hooks = {}) {
  config.validate();
  out << result_header() << '\n';
  out.flush();
  return run_sweep(
      config, workers,
      [&](const CellResult& r) {
        out << result_row(config, r) << '\n';
        out.flush();
      },
      hooks);
}

}  // namespace kilab
