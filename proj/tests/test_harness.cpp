#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "kilab/harness/analyze.hpp"
#include "kilab/harness/config.hpp"
#include "kilab/harness/csv.hpp"
#include "kilab/harness/phase_grid.hpp"
#include "kilab/harness/sweep.hpp"
#include "kilab/harness/verify.hpp"

using namespace kilab;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.d_list = {4, 6, 8};
  c.replicates = 2;
  c.mc_test_points = 200;
  return c;
}

std::string temp_path(const std::string& name) {
  const char* dir = std::getenv("TMPDIR");
  return std::string(dir ? dir : "/tmp") + "/kilab_test_" + name;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST(Csv, FormatAndSplit) {
  EXPECT_EQ(csv::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(csv::format_double(0.1)), 0.1);
  EXPECT_EQ(csv::format_double(INFINITY), "inf");
  EXPECT_EQ(csv::format_optional(std::nullopt), "");
  EXPECT_EQ(csv::split("a,,b,").size(), 4u);
  EXPECT_EQ(csv::sanitize("x,y\n\"z\""), "x;y;'z'");
}

TEST(Config, RoundTripIsIdempotent) {
  ExperimentConfig c = small_config();
  c.coefficients = {0.5, 0.25};
  c.jitter_policy = JitterPolicy::allow;
  const auto j1 = c.to_json();
  const auto j2 = ExperimentConfig::from_json(j1).to_json();
  EXPECT_EQ(j1.dump(), j2.dump());
  EXPECT_EQ(ExperimentConfig::from_json(j1).kernel_label(), "coefficients");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(ExperimentConfig::from_json({{"gama", 1.5}}), UsageError);
  EXPECT_THROW(ExperimentConfig::from_json({{"gamma", "x"}}), UsageError);
  ExperimentConfig c = small_config();
  c.d_list = {8, 6};
  EXPECT_THROW(c.validate(), UsageError);
  c.d_list = {1, 4};
  EXPECT_THROW(c.validate(), UsageError);
  c = small_config();
  c.d_list = {8, 500, 600};
  try {
    c.validate();
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("d=500"), std::string::npos);
  }
  c = small_config();
  c.replicates = 0;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(Config, NRule) {
  ExperimentConfig c;
  c.gamma = 1.5;
  c.n_coefficient = 2.0;
  EXPECT_EQ(c.n_for(16), 128);
  c.gamma = 2.0;
  c.n_coefficient = 1.0;
  EXPECT_EQ(c.n_for(10), 100);
}

TEST(Config, SeedFromEnvironment) {
  ExperimentConfig c;
  setenv("KILAB_SEED", "99", 1);
  c.apply_environment();
  EXPECT_EQ(c.master_seed, 99u);
  setenv("KILAB_SEED", "9x", 1);
  EXPECT_THROW(c.apply_environment(), UsageError);
  unsetenv("KILAB_SEED");
}

TEST(Sweep, SingleCell) {
  ExperimentConfig c = small_config();
  c.d_list = {8};
  c.replicates = 1;
  std::ostringstream out;
  const auto summary = run_sweep_csv(c, 1, out);
  EXPECT_EQ(summary.cells, 1u);
  EXPECT_EQ(summary.failed, 0u);
  const auto lines = lines_of(out.str());
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], result_header());
  EXPECT_EQ(csv::split(lines[1]).size(), result_columns().size());
}

TEST(Sweep, DeterministicAndWorkerInvariant) {
  const ExperimentConfig c = small_config();
  std::ostringstream a, b, many;
  run_sweep_csv(c, 1, a);
  run_sweep_csv(c, 1, b);
  run_sweep_csv(c, 4, many);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str(), many.str());
  EXPECT_EQ(lines_of(a.str()).size(), 1u + 3 * 2);
}

TEST(Sweep, ReplicatesDiffer) {
  ExperimentConfig c = small_config();
  std::vector<CellResult> results;
  run_sweep(c, 1, [&](const CellResult& r) { results.push_back(r); });
  ASSERT_EQ(results.size(), 6u);
  EXPECT_NE(results[0].report.var_exact, results[1].report.var_exact);
  EXPECT_EQ(results[0].key.seed.to_string(), std::to_string(c.master_seed) + "/4/0");
}

TEST(Sweep, PoisonedCellIsIsolated) {
  const ExperimentConfig c = small_config();
  SweepHooks hooks;
  hooks.mutate_dataset = [](const CellKey& key, Dataset& data) {
    if (key.d == 6 && key.replicate == 1) data.points.coordinates.row(1) = data.points.coordinates.row(0);
  };
  std::ostringstream clean_out, poisoned_out;
  run_sweep_csv(c, 1, clean_out);
  const auto summary = run_sweep_csv(c, 2, poisoned_out, hooks);
  EXPECT_EQ(summary.failed, 1u);
  const auto clean = lines_of(clean_out.str());
  const auto poisoned = lines_of(poisoned_out.str());
  ASSERT_EQ(clean.size(), poisoned.size());
  int differing = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i] == poisoned[i]) continue;
    ++differing;
    const auto fields = csv::split(poisoned[i]);
    EXPECT_EQ(fields.size(), result_columns().size());
    EXPECT_EQ(fields[11], "error");
    EXPECT_EQ(fields[12], "2");
  }
  EXPECT_EQ(differing, 1);
}

TEST(Analyze, SyntheticPowerLaw) {
  const std::string path = temp_path("synthetic.csv");
  {
    std::ofstream out(path);
    out << "d,status,var_exact,bias_sq_exact\n";
    for (int d : {8, 16, 32}) out << d << ",ok," << 1.0 / d << ",0\n";
  }
  const auto r = analyze(path, Quantity::var_exact, 0.5, 1.0, 0.25);
  EXPECT_NEAR(r.fit.slope, -1.0, 1e-12);
  // var exponent at gamma=0.5 is max(-0.5, -0.5) = -0.5: slope -1 is outside tolerance
  EXPECT_FALSE(r.pass);
  const auto r2 = analyze(path, Quantity::var_exact, 0.5, 1.0, 0.6);
  EXPECT_TRUE(r2.pass);
  EXPECT_EQ(r.to_json()["slope"].get<double>(), r.fit.slope);
  EXPECT_NE(r.summary().find("FAIL"), std::string::npos);
  std::remove(path.c_str());
}

TEST(Analyze, TotalSumsColumnsAndSkipsErrors) {
  const std::string path = temp_path("total.csv");
  {
    std::ofstream out(path);
    out << "d,status,var_exact,bias_sq_exact\n";
    for (int d : {8, 16, 32}) out << d << ",ok," << 0.5 / d << ',' << 0.5 / d << '\n';
    out << "64,error,,\n";
  }
  const auto r = analyze(path, Quantity::total, 1.0 / 3.0, 1.0, 0.25);
  EXPECT_NEAR(r.fit.slope, -1.0, 1e-12);
  EXPECT_NEAR(r.fit.intercept, 0.0, 1e-12);
  EXPECT_EQ(r.rows_failed, 1u);
  EXPECT_EQ(r.rows_used, 3u);
  std::remove(path.c_str());
}

TEST(Analyze, Errors) {
  const std::string path = temp_path("bad.csv");
  {
    std::ofstream out(path);
    out << "d,status,var_exact\n8,error,\n16,error,\n";
  }
  EXPECT_THROW(analyze(path, Quantity::var_exact, 1.5, 0.5), UsageError);
  EXPECT_THROW(analyze(path, Quantity::bias_sq_exact, 1.5, 0.5), UsageError);
  EXPECT_THROW(analyze(temp_path("missing.csv"), Quantity::var_exact, 1.5, 0.5), UsageError);
  EXPECT_THROW(parse_quantity("bias"), UsageError);
  std::remove(path.c_str());
}

TEST(Analyze, UndefinedTheoryFails) {
  const std::string path = temp_path("int.csv");
  {
    std::ofstream out(path);
    out << "d,var_exact,bias_sq_exact\n6,1,1\n8,1,1\n10,1,1\n";
  }
  const auto r = analyze(path, Quantity::bias_sq_exact, 2.0, 1.0);
  EXPECT_FALSE(r.theory.has_value());
  EXPECT_FALSE(r.pass);
  std::remove(path.c_str());
}

TEST(PhaseGrid, Classifications) {
  const auto points = phase_grid(GridRange::parse("0.4:2.0:0.1"), GridRange::parse("0:1:0.5"));
  auto find = [&](double g, double s) {
    for (const auto& p : points) {
      if (std::abs(p.gamma - g) < 1e-9 && std::abs(p.s - s) < 1e-9) return p.classification;
    }
    ADD_FAILURE() << "missing " << g << ',' << s;
    return rates::Phase::inconsistent;
  };
  EXPECT_EQ(find(0.4, 1.0), rates::Phase::optimal);
  EXPECT_EQ(find(1.5, 1.0), rates::Phase::sub_optimal);
  EXPECT_EQ(find(2.0, 0.5), rates::Phase::inconsistent);
  EXPECT_EQ(find(1.0, 1.0), rates::Phase::inconsistent);
  EXPECT_EQ(find(1.5, 0.0), rates::Phase::inconsistent);
}

TEST(PhaseGrid, IntegerLinesAlwaysPresent) {
  const auto points = phase_grid(GridRange::parse("0.3:3.3:0.7"), GridRange::parse("0.5:1:0.5"));
  for (double g : {1.0, 2.0, 3.0}) {
    int hits = 0;
    for (const auto& p : points) {
      if (p.gamma == g) {
        ++hits;
        EXPECT_EQ(p.classification, rates::Phase::inconsistent);
      }
    }
    EXPECT_EQ(hits, 2) << g;
  }
}

TEST(PhaseGrid, CsvShape) {
  std::ostringstream out;
  write_phase_grid(out, phase_grid(GridRange::parse("0.2:0.6:0.2"), GridRange::parse("0.5:1.0:0.5")));
  const auto lines = lines_of(out.str());
  ASSERT_EQ(lines.size(), 1u + 3 * 2);
  EXPECT_EQ(lines[0], "gamma,s,l,Gamma_gamma,var_exp,bias_exp,total_exp,minimax_exp,classification");
  EXPECT_EQ(lines[1], "0.2,0.5,0,inf,-0.2,-0.4,-0.2,-0.2,optimal");
}

TEST(PhaseGrid, BadRanges) {
  EXPECT_THROW(GridRange::parse("1:2"), UsageError);
  EXPECT_THROW(GridRange::parse("2:1:0.1"), UsageError);
  EXPECT_THROW(GridRange::parse("a:b:c"), UsageError);
  EXPECT_THROW(phase_grid(GridRange::parse("1:1.5:1"), GridRange::parse("0:1:0.5")), UsageError);
}

TEST(Verify, QuickSuitePassesAndIsDeterministic) {
  VerifyOptions options;
  options.quick = true;
  const auto a = verify(options);
  EXPECT_TRUE(a.all_pass()) << a.to_json().dump(2);
  EXPECT_EQ(a.to_json().dump(), verify(options).to_json().dump());
}

TEST(Verify, SpectrumFaultIsNamed) {
  VerifyOptions options;
  options.quick = true;
  options.spectrum_fault_degree = 1;
  const auto r = verify(options);
  EXPECT_FALSE(r.all_pass());
  const auto failed = r.failed_names();
  EXPECT_NE(std::find(failed.begin(), failed.end(), "spectrum.nonnegative"), failed.end());
  for (const auto& name : failed) EXPECT_EQ(name.rfind("spectrum.", 0), 0u) << name;
}
