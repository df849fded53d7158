#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "saddle/experiments.hpp"

using namespace saddle::lab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(f, line);) out.push_back(line);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("saddle_lab_test_" + name);
  fs::remove_all(dir);
  return dir;
}

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST(Config, DefaultsCommentsAndFractions) {
  const auto c = parse_config(
      "# phase retrieval\n"
      "experiment = phase-expectation\n"
      "\n"
      "trials = 7   # few\n"
      "step=1/4\n");
  EXPECT_EQ(c.experiment(), Experiment::PhaseExpectation);
  EXPECT_EQ(c.get_long("trials"), 7);
  EXPECT_DOUBLE_EQ(c.get_double("step"), 0.25);
  EXPECT_EQ(c.get_long("n"), 64);
  EXPECT_DOUBLE_EQ(default_config(Experiment::PhaseExpectation).get_double("step"), 1.0 / 3.0);
}

TEST(Config, EchoRoundTrips) {
  for (const auto& name : experiment_names()) {
    const auto c = default_config(*parse_experiment(name));
    const auto again = parse_config(c.echo());
    EXPECT_EQ(again.values(), c.values()) << name;
    EXPECT_EQ(again.echo(), c.echo());
  }
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("experiment=phase-expectation\n\nno equals sign\n"), 3);
  EXPECT_EQ(error_line("experiment=phase-expectation\nbogus=1\n"), 2);
  EXPECT_EQ(error_line("# c\nexperiment=nope\n"), 2);
  EXPECT_EQ(error_line("experiment=phase-expectation\nn=12\nn=13\n"), 3);
  EXPECT_EQ(error_line("experiment=phase-expectation\nstep=abc\n"), 2);
  EXPECT_EQ(error_line("experiment=phase-expectation\nstep=1/0\n"), 2);
  EXPECT_EQ(error_line("experiment=svc-counterexample\n\nstep=0.2\n"), 3);
  EXPECT_EQ(error_line("experiment=svc-counterexample\nvariant=C\n"), 2);
  EXPECT_EQ(error_line("experiment=eig-stiefel\nseed=-4\n"), 2);
  EXPECT_EQ(error_line("n=5\n"), 0);
  try {
    parse_config("experiment=phase-expectation\nbogus=1\n");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Config, ZeroTrialsRejected) {
  EXPECT_EQ(error_line("experiment=phase-expectation\ntrials=0\n"), 2);
  auto c = default_config(Experiment::SvcCounterexample);
  c.set("trials", "0");
  EXPECT_THROW(run_experiment(c, {1, scratch("zero")}), ConfigError);
}

TEST(Config, EnvironmentSeedOverride) {
  auto c = default_config(Experiment::SaddleProbe);
  ::setenv("SADDLE_LAB_SEED", "99", 1);
  apply_env_overrides(c);
  EXPECT_EQ(c.get_seed(), 99u);
  ::setenv("SADDLE_LAB_SEED", "x", 1);
  EXPECT_THROW(apply_env_overrides(c), ConfigError);
  ::unsetenv("SADDLE_LAB_SEED");
}

TEST(Run, PhaseExpectationAllMinimum) {
  const fs::path dir = scratch("pe");
  const auto r = run_experiment(default_config(Experiment::PhaseExpectation), {1, dir});
  EXPECT_EQ(r.trials, 100);
  EXPECT_FALSE(r.all_failed());
  const auto rows = lines_of(dir / "trials.csv");
  ASSERT_EQ(rows.size(), 101u);
  EXPECT_EQ(rows[0], "trial,seed,label,iterations,terminated_by,final_value,final_grad_norm,final_error,failure");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_NE(rows[i].find(",minimum,"), std::string::npos) << rows[i];
  EXPECT_EQ(r.summary["stats"]["labels"]["minimum"]["count"], 100);
  for (const char* f : {"result.json", "series.csv", "config.txt"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(Run, RerunFromEchoIsByteIdentical) {
  auto c = default_config(Experiment::PhaseRealization);
  c.set("trials", "6");
  c.set("n", "16");
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  run_experiment(c, {1, a});
  const auto echoed = load_config(a / "config.txt");
  run_experiment(echoed, {3, b});
  EXPECT_EQ(slurp(a / "trials.csv"), slurp(b / "trials.csv"));
  EXPECT_EQ(slurp(a / "series.csv"), slurp(b / "series.csv"));
}

TEST(Run, SeriesGridAndMonotoneIter) {
  auto c = default_config(Experiment::EigSphereLinear);
  c.set("trials", "3");
  c.set("max_iters", "12345");
  c.set("record_every", "100");
  const fs::path dir = scratch("series");
  run_experiment(c, {1, dir});
  const auto rows = lines_of(dir / "series.csv");
  ASSERT_EQ(rows.size(), 1u + 12345 / 100 + 1);
  EXPECT_EQ(rows[0], "iter,mean_log10_err,min,max");
  long prev = -1;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const long iter = std::stol(rows[i].substr(0, rows[i].find(',')));
    EXPECT_EQ(iter, static_cast<long>(i - 1) * 100);
    EXPECT_GT(iter, prev);
    prev = iter;
  }
}

TEST(Run, SvcSmall) {
  auto c = default_config(Experiment::SvcCounterexample);
  c.set("trials", "300");
  const fs::path dir = scratch("svc");
  const auto r = run_experiment(c, {2, dir});
  const double frac = r.summary["results"]["in_v_fraction"];
  EXPECT_NEAR(frac, 1.0 / 6.0, 0.08);
  EXPECT_EQ(lines_of(dir / "series.csv").size(), 3u);
  EXPECT_TRUE(fs::exists(dir / "landscape.csv"));
}

TEST(Run, SaddleProbeEscapes) {
  auto c = default_config(Experiment::SaddleProbe);
  c.set("trials", "10");
  const auto r = run_experiment(c, {1, scratch("probe")});
  const auto& res = r.summary["results"];
  EXPECT_EQ(res["critical_point"]["classification"], "strict-saddle-nondegenerate");
  EXPECT_EQ(res["critical_point"]["morse_index"], 1);
  EXPECT_EQ(res["escape_fraction"], 1.0);
  EXPECT_LT(res["jacobian_deviation"]["1e-05"].get<double>(), 1e-4);
}

TEST(Run, RetractionOrderTables) {
  auto c = default_config(Experiment::RetractionOrder);
  c.set("trials", "3");
  const fs::path dir = scratch("retraction");
  const auto r = run_experiment(c, {1, dir});
  const auto& m = r.summary["results"]["manifolds"];
  for (const char* k : {"sphere", "stiefel", "fixed-rank", "psd-rank-one", "box"}) {
    EXPECT_TRUE(m[k]["first_order"].get<bool>()) << k;
  }
  EXPECT_TRUE(m["psd-rank-one"]["second_order"].get<bool>());
  EXPECT_EQ(lines_of(dir / "trials.csv").size(), 1u + 5 * 3);
  EXPECT_EQ(lines_of(dir / "series.csv").size(), 1u + 5 * 7);
}

TEST(Describe, MentionsContentAndDefaults) {
  const std::string s = describe(Experiment::EigStiefel);
  EXPECT_NE(s.find("first-5 eigenstates"), std::string::npos);
  EXPECT_NE(s.find("Fig. 3"), std::string::npos);
  EXPECT_NE(s.find("frame=5"), std::string::npos);
  for (const auto& name : experiment_names()) {
    const std::string d = describe(*parse_experiment(name));
    EXPECT_EQ(d.rfind(name, 0), 0u);
    EXPECT_NE(d.find("trials.csv"), std::string::npos);
  }
  EXPECT_EQ(experiment_names().size(), 8u);
  EXPECT_FALSE(parse_experiment("bogus"));
}
