#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "saddle/errors.hpp"

namespace saddle::lab {

enum class Experiment {
  PhaseExpectation,
  PhaseRealization,
  EigSphereLinear,
  EigSphereNonlinear,
  EigStiefel,
  SvcCounterexample,
  SaddleProbe,
  RetractionOrder,
};

const std::vector<std::string>& experiment_names();
std::optional<Experiment> parse_experiment(const std::string& name);
const char* to_string(Experiment e);

/// Config file problem, carrying the 1-based line it was found on (0 when the
/// problem is not tied to a line, e.g. a missing key).
class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

/// A flat key=value configuration with '#' comments. All keys of the chosen
/// experiment are present after parsing: file values override defaults.
class ExperimentConfig {
 public:
  Experiment experiment() const { return experiment_; }

  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key) const;
  /// Accepts plain decimals and fractions such as 1/3.
  double get_double(const std::string& key) const;
  long get_long(const std::string& key) const;
  std::uint64_t get_seed() const;
  std::uint64_t get_seed_of(const std::string& key) const;

  void set(const std::string& key, const std::string& value);

  /// key=value lines in key order; parsing this text gives the same config.
  std::string echo() const;

  /// Type and range checks for every key of the experiment.
  void validate() const;

 private:
  friend ExperimentConfig parse_config(const std::string& text);
  friend ExperimentConfig default_config(Experiment e);

  Experiment experiment_ = Experiment::PhaseExpectation;
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
};

ExperimentConfig default_config(Experiment e);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Replaces the master seed when SADDLE_LAB_SEED is set.
void apply_env_overrides(ExperimentConfig& config);

struct RunOptions {
  unsigned jobs = 1;
  /// Output directory; empty means the config's `out` key.
  std::filesystem::path out;
};

struct ExperimentResult {
  nlohmann::json summary;
  std::filesystem::path out_dir;
  long trials = 0;
  long failed_trials = 0;
  /// True when every trial failed; the CLI then exits nonzero.
  bool all_failed() const { return trials > 0 && failed_trials == trials; }
};

/// Validates, runs, and writes result.json, trials.csv, series.csv and
/// config.txt (plus experiment-specific extras) into the output directory.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Help text: provenance, defaults and output schema.
std::string describe(Experiment e);

}  // namespace saddle::lab
