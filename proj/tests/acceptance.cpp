// Acceptance suite: one PASS/FAIL line per criterion, exit 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kilab/kilab.hpp"

using namespace kilab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(double v, int digits = 4) { return csv::format_double(v, digits); }

std::string temp_csv(const std::string& name) {
  const char* dir = std::getenv("TMPDIR");
  return std::string(dir ? dir : "/tmp") + "/kilab_acceptance_" + name + ".csv";
}

ExperimentConfig rate_config(double gamma, double s, double sigma2, std::vector<int> d_list, int replicates) {
  ExperimentConfig c;
  c.gamma = gamma;
  c.s = s;
  c.sigma2 = sigma2;
  c.d_list = std::move(d_list);
  c.replicates = replicates;
  c.mc_test_points = 0;
  c.diagnostics = false;
  return c;
}

std::vector<CellResult> sweep(const ExperimentConfig& config, std::size_t& failed) {
  std::vector<CellResult> out;
  failed = run_sweep(config, workers(), [&](const CellResult& r) { out.push_back(r); }).failed;
  return out;
}

// Sweep to a CSV file, then fit the slope through the analysis path the CLI uses.
AnalysisReport sweep_and_fit(const ExperimentConfig& config, Quantity quantity, double tolerance,
                             const std::string& name, std::size_t& failed) {
  const std::string path = temp_csv(name);
  {
    std::ofstream out(path);
    failed = run_sweep_csv(config, workers(), out).failed;
  }
  auto report = analyze(path, quantity, config.gamma, config.s, tolerance);
  std::remove(path.c_str());
  return report;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Outcome spectral_exactness() {
  double worst_mercer = 0.0, worst_trace = 0.0;
  for (const auto& kernel : {KernelSpec::exponential(), KernelSpec::geometric()}) {
    for (int d : {4, 8, 16}) {
      const Spectrum sp = compute_spectrum(kernel, d);
      worst_mercer = std::max(worst_mercer, oracles::mercer_residual(sp, 201));
      double total = 0.0;
      for (int k = 0; k <= sp.k_max; ++k) total += sp.mu_times_n(k);
      worst_trace = std::max(worst_trace, std::abs(total - kernel.eval(1.0)));
    }
  }
  return {worst_mercer <= 2e-10 && worst_trace <= 1e-10,
          "max Mercer residual " + fmt(worst_mercer) + " (<= 2e-10), max trace error " + fmt(worst_trace) +
              " (<= 1e-10)"};
}

Outcome discretized_operator() {
  const Spectrum sp = compute_spectrum(KernelSpec::exponential(), 2);
  const Eigen::VectorXd eig = oracles::discretized_operator_eigenvalues_s2(sp.kernel, 40, 50);
  const double err = oracles::discretized_operator_max_relative_error(sp, eig, 4);
  return {err <= 0.02, "2000-point operator, k <= 4: max relative error " + fmt(err) + " (<= 0.02)"};
}

Outcome interpolation_constraint() {
  std::mt19937_64 rng = SeedPath(20240917, {3}).engine();
  const std::vector<double> gammas{1.3, 1.5, 2.4};
  std::uniform_int_distribution<int> d_dist(4, 24);
  double worst = 0.0;
  int jittered = 0;
  for (int i = 0; i < 20; ++i) {
    const double gamma = gammas[static_cast<std::size_t>(i) % gammas.size()];
    const int d = d_dist(rng);
    const KernelSpec kernel = i % 2 ? KernelSpec::geometric() : KernelSpec::exponential();
    SpectrumOptions options;
    options.min_k_max = rates::floor_degree(gamma) + 2;
    auto sp = std::make_shared<const Spectrum>(compute_spectrum(kernel, d, options));
    const SeedPath seed(20240917, {3, static_cast<std::uint64_t>(i)});
    const Target target = build_target(sp, 1.0, gamma, seed);
    const auto n = static_cast<Eigen::Index>(std::llround(std::pow(d, gamma)));
    const Dataset data = make_dataset(target, n, 1.0, seed);
    const FittedInterpolant model = fit(data, sp, 0.0, JitterPolicy::forbid);
    jittered += model.jitter_used > 0.0 ? 1 : 0;
    worst = std::max(worst, model.train_residual / std::max(1.0, data.labels.cwiseAbs().maxCoeff()));
  }
  return {worst <= 1e-6 && jittered == 0,
          "20 cells, max scaled training residual " + fmt(worst) + " (<= 1e-6), jitter used in " +
              std::to_string(jittered)};
}

Outcome exact_vs_monte_carlo() {
  std::mt19937_64 rng = SeedPath(20240917, {4}).engine();
  const std::vector<double> gammas{1.3, 1.5, 1.75, 2.4};
  const std::vector<double> smooth{0.5, 1.0, 2.0};
  std::uniform_int_distribution<int> d_dist(4, 16);
  int agree = 0;
  std::string misses;
  for (int i = 0; i < 30; ++i) {
    const double gamma = gammas[static_cast<std::size_t>(i) % gammas.size()];
    const double s = smooth[static_cast<std::size_t>(i) % smooth.size()];
    const int d = d_dist(rng);
    const KernelSpec kernel = i % 2 ? KernelSpec::geometric() : KernelSpec::exponential();
    SpectrumOptions options;
    options.min_k_max = rates::floor_degree(gamma) + 2;
    auto sp = std::make_shared<const Spectrum>(compute_spectrum(kernel, d, options));
    const SeedPath seed(20240917, {4, static_cast<std::uint64_t>(i)});
    const Target target = build_target(sp, s, gamma, seed);
    const auto n = static_cast<Eigen::Index>(std::llround(std::pow(d, gamma)));
    const FittedInterpolant model = fit(make_dataset(target, n, 1.0, seed), sp);
    ReportOptions report_options;
    report_options.mc_test_points = 4000;
    report_options.concentration = false;
    const ErrorReport r = error_report(model, target, seed, report_options);
    if (!r.mc_bias_flag && !r.mc_var_flag) {
      ++agree;
    } else {
      misses += " #" + std::to_string(i);
    }
  }
  return {agree >= 28, std::to_string(agree) + "/30 cells within 4 MC standard errors (>= 28)" +
                           (misses.empty() ? "" : "; outside:" + misses)};
}

Outcome variance_rate() {
  std::size_t failed = 0;
  const auto r = sweep_and_fit(rate_config(1.5, 0.5, 1.0, {8, 12, 16, 24, 32}, 50), Quantity::var_exact, 0.25,
                               "variance_rate", failed);
  return {r.pass && failed == 0, "slope " + fmt(r.fit.slope) + " +/- " + fmt(r.fit.stderr_slope, 2) +
                                     " vs theory " + fmt(*r.theory) + " (tol 0.25), failed cells " +
                                     std::to_string(failed)};
}

Outcome variance_asymmetry() {
  bool pass = true;
  std::string detail;
  for (double gamma : {1.25, 1.75}) {
    const ExperimentConfig config = rate_config(gamma, 0.5, 1.0, {8, 12, 16, 24, 32}, 50);
    std::size_t failed = 0;
    const auto cells = sweep(config, failed);
    std::vector<std::pair<double, double>> pairs;
    // l - gamma > gamma - l - 1 means the low-degree branch leads
    const int l = rates::floor_degree(gamma);
    const bool low_expected = (l - gamma) > (gamma - l - 1);
    int matches = 0;
    std::map<int, int> misses;
    for (const auto& c : cells) {
      if (!c.ok) continue;
      pairs.emplace_back(c.key.d, c.report.var_exact);
      const bool low_dominant = c.report.var_low > c.report.var_high;
      if (low_dominant == low_expected) {
        ++matches;
      } else {
        ++misses[c.key.d];
      }
    }
    const auto fit = rates::fit_slope(pairs);
    const double theory = rates::var_exponent(gamma);
    const bool slope_ok = std::abs(fit.slope - theory) <= 0.25;
    const bool branch_ok = matches == static_cast<int>(cells.size()) && failed == 0;
    pass = pass && slope_ok && branch_ok;
    if (!detail.empty()) detail += "; ";
    detail += "gamma=" + fmt(gamma, 3) + ": slope " + fmt(fit.slope) + " vs " + fmt(theory) + ", " +
              (low_expected ? "low" : "high") + "-degree branch dominant in " + std::to_string(matches) + "/" +
              std::to_string(cells.size()) + " cells";
    for (const auto& [d, count] : misses) detail += " (" + std::to_string(count) + " off at d=" + std::to_string(d) + ")";
  }
  return {pass, detail};
}

Outcome bias_rate() {
  bool pass = true;
  std::string detail;
  for (const auto& [s, tol] : std::vector<std::pair<double, double>>{{0.5, 0.3}, {2.0, 0.6}}) {
    std::size_t failed = 0;
    const auto r = sweep_and_fit(rate_config(1.5, s, 0.0, {8, 12, 16, 24, 32}, 50), Quantity::bias_sq_exact,
                                 tol, "bias_rate", failed);
    pass = pass && r.pass && failed == 0;
    if (!detail.empty()) detail += "; ";
    detail += "s=" + fmt(s, 2) + ": slope " + fmt(r.fit.slope) + " vs " + fmt(*r.theory) + " (tol " +
              fmt(tol, 2) + ")";
  }
  return {pass, detail};
}

Outcome integer_gamma() {
  ExperimentConfig config = rate_config(2.0, 1.0, 1.0, {6, 8, 10}, 50);
  config.n_cap = 100;
  std::size_t failed = 0;
  const auto cells = sweep(config, failed);
  std::map<int, double> sum;
  std::map<int, int> count;
  for (const auto& c : cells) {
    if (!c.ok) continue;
    sum[c.key.d] += c.report.var_exact;
    count[c.key.d] += 1;
  }
  const double first = sum[6] / count[6];
  const double last = sum[10] / count[10];
  const double ratio = first / last;
  return {failed == 0 && ratio <= 2.0, "mean var_exact " + fmt(first) + " at d=6, " + fmt(sum[8] / count[8]) +
                                           " at d=8, " + fmt(last) + " at d=10; decrease factor " + fmt(ratio) +
                                           " (<= 2)"};
}

Outcome phase_diagram() {
  std::mt19937_64 rng = SeedPath(20240917, {9}).engine();
  std::uniform_real_distribution<double> g(0.0, 4.0), s(0.0, 3.0);
  int tested = 0, agree = 0;
  while (tested < 10000) {
    const double gamma = g(rng), sv = s(rng);
    if (gamma <= 0.0 || sv <= 0.0 || rates::is_positive_integer(gamma)) continue;
    const auto p = rates::classify(sv, gamma);
    const auto minimax = rates::minimax_exponent(sv, gamma);
    // independent route: optimal iff the upper exponent attains the minimax one
    const bool attains = minimax && std::abs(rates::total_exponent(sv, gamma) - *minimax) <= 1e-12;
    agree += attains == (p.classification == rates::Phase::optimal) ? 1 : 0;
    ++tested;
  }
  const bool spots = rates::classify(3.0, 0.4).classification == rates::Phase::optimal &&
                     rates::classify(0.5, 1.5).classification == rates::Phase::optimal &&
                     rates::classify(1.0, 1.5).classification == rates::Phase::sub_optimal &&
                     rates::classify(1.0, 2.0).classification == rates::Phase::inconsistent;
  return {agree == tested && spots, std::to_string(agree) + "/" + std::to_string(tested) +
                                        " random points agree; spot checks " + (spots ? "match" : "MISMATCH")};
}

Outcome concentration_trend() {
  ExperimentConfig config = rate_config(1.5, 0.5, 1.0, {8, 16, 32}, 400);
  config.diagnostics = true;
  std::size_t failed = 0;
  const auto cells = sweep(config, failed);
  std::map<int, std::vector<double>> delta, psi;
  for (const auto& c : cells) {
    if (!c.ok || !c.report.has_concentration) continue;
    delta[c.key.d].push_back(c.report.concentration.delta1_opnorm);
    if (c.report.concentration.psi_gram_meaningful) psi[c.key.d].push_back(c.report.concentration.psi_gram_deviation);
  }
  std::vector<double> md, mp;
  for (int d : config.d_list) {
    md.push_back(delta[d].empty() ? NAN : median(delta[d]));
    mp.push_back(psi[d].empty() ? NAN : median(psi[d]));
  }
  const bool dec_delta = md[0] > md[1] && md[1] > md[2];
  const bool dec_psi = mp[0] > mp[1] && mp[1] > mp[2];
  auto chain = [](const std::vector<double>& v) {
    std::string out = fmt(v[0]);
    for (std::size_t i = 1; i < v.size(); ++i) out += (v[i - 1] > v[i] ? " > " : " <= ") + fmt(v[i]);
    return out;
  };
  return {failed == 0 && dec_delta && dec_psi, "median ||Delta1||_op " + chain(md) +
                                                   "; median Psi-gram deviation " + chain(mp) + " (d = 8, 16, 32)"};
}

Outcome determinism() {
  VerifyOptions options;
  const std::string first = verify(options).to_json().dump(2);
  const VerifyReport second_report = verify(options);
  const std::string second = second_report.to_json().dump(2);
  return {first == second && second_report.all_pass(),
          std::string("full verify JSON ") + (first == second ? "byte-identical" : "DIFFERS") + " across two runs (" +
              std::to_string(first.size()) + " bytes), suite " + (second_report.all_pass() ? "passes" : "FAILS")};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "spectral exactness", 10, spectral_exactness},
      {2, "discretized-operator oracle", 60, discretized_operator},
      {3, "interpolation constraint", 60, interpolation_constraint},
      {4, "exact vs Monte Carlo", 300, exact_vs_monte_carlo},
      {5, "variance rate", 600, variance_rate},
      {6, "variance asymmetry", 600, variance_asymmetry},
      {7, "bias rate", 600, bias_rate},
      {8, "inconsistency at integer gamma", 120, integer_gamma},
      {9, "phase-diagram correctness", 5, phase_diagram},
      {10, "concentration trend", 180, concentration_trend},
      {11, "determinism", 300, determinism},
  };

  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    failures += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " ["
              << fmt(secs, 3) << " s of " << fmt(c.budget_s, 4) << " s budget"
              << (in_budget ? "" : ", OVER BUDGET") << "]" << std::endl;
  }
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
