#pragma once

#include <functional>
#include <string>
#include <vector>

#include "saddle/objective.hpp"

namespace saddle {

struct PgdConfig {
  double step = 0.01;
  long max_iters = 100000;
  double grad_tol = 1e-10;
  /// Iterates are stored every record_every iterations (plus the last one).
  long record_every = 1;

  void validate() const;
};

enum class Termination { GradTol, MaxIters, RetractionFailure };

const char* to_string(Termination t);

struct Trajectory {
  std::vector<Point> iterates;
  std::vector<double> f_values;
  std::vector<double> grad_norms;
  /// Iteration number of each stored entry.
  std::vector<long> iterations;
  Termination terminated_by = Termination::MaxIters;
  long iterations_run = 0;
  /// Message of the error that stopped a RetractionFailure run.
  std::string failure;

  const Point& initial() const { return iterates.front(); }
  const Point& final_point() const { return iterates.back(); }
  double final_value() const { return f_values.back(); }
  double final_grad_norm() const { return grad_norms.back(); }
};

/// One step R(p - alpha * grad f(p)); the cone projection is used at
/// rank-deficient bounded-rank points.
Point pgd_step(const Point& p, const Objective& obj, double alpha);

Trajectory run_pgd(const Point& p0, const Objective& obj, const PgdConfig& config);

/// A labelled region test on a finished trajectory.
struct LimitReference {
  std::string label;
  std::function<bool(const Trajectory&)> predicate;
};

inline constexpr const char* kUndetermined = "undetermined";

/// Label of the first reference whose predicate holds, provided the run did
/// not fail and its final gradient norm is at most grad_tol. Otherwise
/// "undetermined".
std::string classify_limit(const Trajectory& traj, const std::vector<LimitReference>& references,
                           double grad_tol);

}  // namespace saddle
