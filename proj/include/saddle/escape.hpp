#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "saddle/pgd.hpp"

namespace saddle {

struct TrialRecord {
  long trial = 0;
  std::uint64_t seed = 0;
  std::string label;
  long iterations = 0;
  Termination terminated_by = Termination::MaxIters;
  double final_value = 0.0;
  double final_grad_norm = 0.0;
  /// Problem-specific error of the final iterate (NaN without an error metric).
  double final_error = 0.0;
  /// Error metric at each recorded iterate, when requested.
  std::vector<long> series_iters;
  std::vector<double> series_errors;
  std::string failure;
};

struct LabelStat {
  long count = 0;
  double probability = 0.0;
  /// Binomial standard error sqrt(p (1 - p) / trials).
  double std_error = 0.0;
};

struct EscapeStats {
  long trials = 0;
  std::map<std::string, LabelStat> labels;
  std::vector<std::uint64_t> seeds;
  std::vector<TrialRecord> records;

  long count(const std::string& label) const;
  double fraction(const std::string& label) const;
};

struct EscapeOptions {
  long trials = 100;
  std::uint64_t master_seed = 0;
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned jobs = 1;
  /// Gradient threshold for accepting a region label.
  double classify_grad_tol = 1e-8;
  /// Initial point of a trial from its own stream. Defaults to random_point.
  std::function<Point(RandomStream&)> init;
  /// Error of a point (e.g. distance to the minimizer); optional.
  std::function<double(const Point&)> error;
  bool keep_series = false;
};

/// Runs one PGD trial per derived seed and classifies each limit. Records
/// are sorted by trial index, so results do not depend on `jobs`.
EscapeStats escape_monte_carlo(const Objective& obj, const ManifoldSpec& spec, const PgdConfig& config,
                               const std::vector<LimitReference>& references,
                               const EscapeOptions& options);

}  // namespace saddle
