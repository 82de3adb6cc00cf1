#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "kilab/errors.hpp"
#include "kilab/estimator.hpp"
#include "kilab/kernel_spectrum.hpp"

namespace kilab {

/// One rate experiment: a kernel, (gamma, s), and a sweep over d with replicates.
/// n = round(n_coefficient * d^gamma) for every d.
struct ExperimentConfig {
  std::string kernel_id = "exp";
  std::vector<double> coefficients;  // overrides kernel_id when non-empty
  double gamma = 1.5;
  double s = 0.5;
  double sigma2 = 1.0;
  double n_coefficient = 1.0;
  std::vector<int> d_list{8, 12, 16, 24, 32};
  int replicates = 50;
  double lambda = 0.0;
  std::uint64_t master_seed = 20240917;
  int mc_test_points = 2000;  // 0 disables the Monte Carlo cross-check
  double trace_tol = 1e-10;
  JitterPolicy jitter_policy = JitterPolicy::forbid;
  std::string output;
  int n_cap = 8000;
  double norm_budget = 4.0;
  bool diagnostics = true;
  bool record_timings = false;

  [[nodiscard]] Eigen::Index n_for(int d) const {
    return static_cast<Eigen::Index>(std::llround(n_coefficient * std::pow(static_cast<double>(d), gamma)));
  }

  [[nodiscard]] KernelSpec kernel() const {
    if (!coefficients.empty()) return KernelSpec::from_coefficients(coefficients);
    return KernelSpec::by_id(kernel_id);
  }

  [[nodiscard]] std::string kernel_label() const {
    return coefficients.empty() ? kernel_id : std::string("coefficients");
  }

  void validate() const {
    require(gamma > 0.0 && std::isfinite(gamma), "config: gamma must be > 0");
    require(s >= 0.0 && std::isfinite(s), "config: s must be >= 0");
    require(sigma2 >= 0.0, "config: sigma2 must be >= 0");
    require(n_coefficient > 0.0, "config: n_coefficient must be > 0");
    require(lambda >= 0.0, "config: lambda must be >= 0");
    require(replicates >= 1, "config: replicates must be >= 1");
    require(!d_list.empty(), "config: d_list is empty");
    require(mc_test_points == 0 || mc_test_points >= 100,
            "config: mc_test_points must be 0 (disabled) or >= 100");
    require(trace_tol > 0.0, "config: trace_tol must be > 0");
    require(norm_budget > 0.0, "config: norm_budget must be > 0");
    require(n_cap >= 4, "config: n_cap must be >= 4");
    for (std::size_t i = 0; i < d_list.size(); ++i) {
      require(d_list[i] >= 2, "config: every d must be >= 2 (got " + std::to_string(d_list[i]) + ")");
      if (i > 0) require(d_list[i] > d_list[i - 1], "config: d_list must be strictly increasing");
      const Eigen::Index n = n_for(d_list[i]);
      require(n >= 4, "config: n=" + std::to_string(n) + " for d=" + std::to_string(d_list[i]) +
                          " is below the minimum of 4");
      require(n <= n_cap, "config: n=" + std::to_string(n) + " for d=" + std::to_string(d_list[i]) +
                              " exceeds n_cap=" + std::to_string(n_cap));
    }
    (void)kernel();
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j;
    j["kernel_id"] = kernel_id;
    j["coefficients"] = coefficients;
    j["gamma"] = gamma;
    j["s"] = s;
    j["sigma2"] = sigma2;
    j["n_coefficient"] = n_coefficient;
    j["d_list"] = d_list;
    j["replicates"] = replicates;
    j["lambda"] = lambda;
    j["master_seed"] = master_seed;
    j["mc_test_points"] = mc_test_points;
    j["trace_tol"] = trace_tol;
    j["jitter_policy"] = to_string(jitter_policy);
    j["output"] = output;
    j["n_cap"] = n_cap;
    j["norm_budget"] = norm_budget;
    j["diagnostics"] = diagnostics;
    j["record_timings"] = record_timings;
    return j;
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    require(j.is_object(), "config: top level must be a JSON object");
    static const std::set<std::string> known{
        "kernel_id", "coefficients", "gamma",   "s",           "sigma2",      "n_coefficient",
        "d_list",    "replicates",   "lambda",  "master_seed", "mc_test_points", "trace_tol",
        "jitter_policy", "output",   "n_cap",   "norm_budget", "diagnostics", "record_timings"};
    for (const auto& item : j.items()) {
      require(known.contains(item.key()), "config: unknown key '" + item.key() + "'");
    }
    ExperimentConfig c;
    try {
      auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
      };
      get("kernel_id", c.kernel_id);
      get("coefficients", c.coefficients);
      get("gamma", c.gamma);
      get("s", c.s);
      get("sigma2", c.sigma2);
      get("n_coefficient", c.n_coefficient);
      get("d_list", c.d_list);
      get("replicates", c.replicates);
      get("lambda", c.lambda);
      get("master_seed", c.master_seed);
      get("mc_test_points", c.mc_test_points);
      get("trace_tol", c.trace_tol);
      if (j.contains("jitter_policy")) {
        c.jitter_policy = parse_jitter_policy(j.at("jitter_policy").get<std::string>());
      }
      get("output", c.output);
      get("n_cap", c.n_cap);
      get("norm_budget", c.norm_budget);
      get("diagnostics", c.diagnostics);
      get("record_timings", c.record_timings);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
  }

  /// KILAB_SEED, when set, replaces master_seed.
  void apply_environment() {
    if (const char* env = std::getenv("KILAB_SEED"); env != nullptr && *env != '\0') {
      try {
        std::size_t used = 0;
        master_seed = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw UsageError(std::string("KILAB_SEED is not an unsigned integer: '") + env + "'");
      }
    }
  }
};

}  // namespace kilab
