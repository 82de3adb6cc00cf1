#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "kilab/kilab.hpp"

namespace {

using kilab::ExitCode;

int code(ExitCode c) { return static_cast<int>(c); }

// Opens `path` for writing, or returns std::cout when the path is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw kilab::UsageError("cannot open output file '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

int cmd_spectrum(const std::string& kernel_id, int d, double tol, const std::string& out_path) {
  const auto kernel = kilab::KernelSpec::by_id(kernel_id);
  kilab::SpectrumOptions options;
  options.tol = tol;
  const auto spectrum = kilab::compute_spectrum(kernel, d, options);
  Output out(out_path);
  auto& os = out.stream();
  os << "k,mu_k,N_dk,mu_k_times_N\n";
  for (int k = 0; k <= spectrum.k_max; ++k) {
    os << k << ',' << kilab::csv::format_double(spectrum.mu[k]) << ','
       << kilab::to_string(spectrum.multiplicities[k]) << ','
       << kilab::csv::format_double(spectrum.mu_times_n(k)) << '\n';
  }
  std::cerr << "kernel " << kernel_id << ", d=" << d << ": k_max=" << spectrum.k_max
            << ", trace residual " << kilab::csv::format_double(spectrum.trace_residual, 3) << '\n';
  return code(ExitCode::ok);
}

int cmd_phase(const std::string& gamma, const std::string& s, const std::string& out_path) {
  const auto points = kilab::phase_grid(kilab::GridRange::parse(gamma), kilab::GridRange::parse(s));
  Output out(out_path);
  kilab::write_phase_grid(out.stream(), points);
  std::cerr << points.size() << " grid points\n";
  return code(ExitCode::ok);
}

int cmd_run(const std::string& config_path, const std::string& out_path, int workers) {
  auto config = kilab::ExperimentConfig::load(config_path);
  config.apply_environment();
  config.validate();
  const std::string target = out_path.empty() ? config.output : out_path;
  Output out(target);
  const auto summary = kilab::run_sweep_csv(config, workers, out.stream());
  std::cerr << summary.cells << " cells, " << summary.failed << " failed\n";
  return summary.failed == 0 ? code(ExitCode::ok) : code(ExitCode::numerical);
}

int cmd_fit(const std::string& input, const std::string& quantity, double gamma, double s, double tolerance,
            bool json) {
  const auto report = kilab::analyze(input, kilab::parse_quantity(quantity), gamma, s, tolerance);
  if (json) {
    std::cout << report.to_json().dump(2) << '\n';
  } else {
    std::cout << report.summary() << '\n';
  }
  return report.pass ? code(ExitCode::ok) : code(ExitCode::verification);
}

int cmd_verify(bool quick, const std::string& json_path, int fault_degree) {
  kilab::ExperimentConfig seed_source;
  seed_source.apply_environment();
  kilab::VerifyOptions options;
  options.quick = quick;
  options.master_seed = seed_source.master_seed;
  options.spectrum_fault_degree = fault_degree;
  const auto report = kilab::verify(options);
  if (json_path == "-") {
    std::cout << report.to_json().dump(2) << '\n';
  } else {
    report.print_table(std::cout);
    if (!json_path.empty()) {
      Output out(json_path);
      out.stream() << report.to_json().dump(2) << '\n';
    }
  }
  if (!report.all_pass()) {
    std::cerr << "failed checks:";
    for (const auto& name : report.failed_names()) std::cerr << ' ' << name;
    std::cerr << '\n';
    return code(ExitCode::verification);
  }
  return code(ExitCode::ok);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel interpolation on the sphere: exact bias/variance, rates and phase diagram"};
  app.require_subcommand(1);

  std::string kernel_id = "exp";
  int d = 0;
  double kmax_tol = 1e-10;
  std::string out_path;
  auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues mu_k and multiplicities of a kernel on S^d");
  spectrum->add_option("--kernel", kernel_id, "exp or geometric")->capture_default_str();
  spectrum->add_option("--d", d, "sphere dimension")->required();
  spectrum->add_option("--kmax-tol", kmax_tol, "trace residual that stops the expansion")->capture_default_str();
  spectrum->add_option("-o,--output", out_path, "CSV path (default stdout)");

  std::string gamma_range, s_range;
  auto* phase = app.add_subcommand("phase", "Classified (gamma, s) grid as CSV");
  phase->add_option("--gamma", gamma_range, "lo:hi:step")->required();
  phase->add_option("--s", s_range, "lo:hi:step")->required();
  phase->add_option("-o,--output", out_path, "CSV path (default stdout)");

  std::string config_path;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* run = app.add_subcommand("run", "Run a sweep over d and replicates");
  run->add_option("--config", config_path, "JSON config")->required();
  run->add_option("-o,--output", out_path, "CSV path (default: config output, else stdout)");
  run->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  std::string input, quantity = "var_exact";
  double gamma = 0.0, s = 0.0, tolerance = 0.25;
  bool json = false;
  auto* fit = app.add_subcommand("fit", "Fit the d-exponent of a result column and compare with theory");
  fit->add_option("--input", input, "results CSV")->required();
  fit->add_option("--quantity", quantity, "var_exact, bias_sq_exact or total")->capture_default_str();
  fit->add_option("--gamma", gamma)->required();
  fit->add_option("--s", s)->required();
  fit->add_option("--tolerance", tolerance)->capture_default_str();
  fit->add_flag("--json", json, "print the JSON report");

  bool quick = false;
  std::string json_path;
  int fault_degree = -1;
  auto* verify = app.add_subcommand("verify", "Run the invariant suite");
  verify->add_flag("--quick", quick, "smaller, faster suite");
  verify->add_option("--json", json_path, "write the JSON report to this path ('-' for stdout only)");
  verify->add_option("--inject-spectrum-fault", fault_degree, "set mu_k = -1e-3 at this degree (test hook)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : code(ExitCode::usage);
  }

  try {
    if (*spectrum) return cmd_spectrum(kernel_id, d, kmax_tol, out_path);
    if (*phase) return cmd_phase(gamma_range, s_range, out_path);
    if (*run) return cmd_run(config_path, out_path, workers);
    if (*fit) return cmd_fit(input, quantity, gamma, s, tolerance, json);
    if (*verify) return cmd_verify(quick, json_path, fault_degree);
  } catch (const kilab::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return code(ExitCode::usage);
  } catch (const kilab::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return code(ExitCode::numerical);
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return code(ExitCode::numerical);
  }
  return code(ExitCode::usage);
}
