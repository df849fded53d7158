#pragma once

#include <utility>
#include <vector>

#include "saddle/escape.hpp"

namespace saddle {

/// Level-L truncation of the Smith-Volterra-Cantor set in [0, 1]. Round k
/// removes the open middle interval of length 4^-k from each of the 2^(k-1)
/// intervals left by the previous round.
class SvcSet {
 public:
  static constexpr int kMaxLevel = 48;
  /// Explicit interval lists are produced up to this level only.
  static constexpr int kMaxExplicitLevel = 24;

  explicit SvcSet(int level);

  int level() const { return level_; }

  /// The 2^L closed remaining intervals, sorted. ResourceError above kMaxExplicitLevel.
  std::vector<std::pair<double, double>> intervals() const;
  /// All removed open intervals of rounds 1..L, sorted.
  std::vector<std::pair<double, double>> removed() const;

  /// 1 - sum over rounds of 2^(k-1) 4^-k.
  double remaining_measure() const;

 private:
  int level_;
};

struct Membership {
  /// x lies in a level-L remaining interval.
  bool in_v = false;
  /// Containing open interval when !in_v: a removed interval, or one of the
  /// end intervals (-1, 0) and (1, 2).
  double a = 0.0;
  double b = 0.0;
};

/// Requires x in [-1, 2].
Membership svc_membership(double x, const SvcSet& svc);

enum class PVariant { A, B };

const char* to_string(PVariant v);

struct PValue {
  double value = 0.0;
  double derivative = 0.0;
  double second = 0.0;
};

/// Bump on an open interval (a, b), zero outside. Variant A: quadratic caps
/// and a quartic middle (C^1). Variant B: quartic caps and a sextic middle
/// (C^3). Knots at a + (b-a)/4 and b - (b-a)/4.
PValue bump(double x, double a, double b, PVariant variant);

/// p on [-1, 2]. End intervals use the bump of the virtual intervals (-2, 0)
/// and (1, 3), so the box edges are midpoints.
PValue p_eval(double x, PVariant variant, const SvcSet& svc);

/// f(x, y) = -p(x) + y^2 on the box [-1,2] x [-1,1].
class CounterexampleObjective final : public Objective {
 public:
  CounterexampleObjective(PVariant variant, SvcSet svc) : variant_(variant), svc_(svc) {}

  double value(const Matrix& xy) const override;
  Matrix gradient(const Matrix& xy) const override;
  bool has_hessian_action() const override { return true; }
  Matrix hessian_action(const Matrix& xy, const Matrix& d) const override;

  PVariant variant() const { return variant_; }
  const SvcSet& svc() const { return svc_; }

 private:
  PVariant variant_;
  SvcSet svc_;
};

struct SvcExperimentConfig {
  PVariant variant = PVariant::A;
  int level = 30;
  long trials = 20000;
  double step = 0.05;
  long max_iters = 20000;
  /// Distance tolerance of both region predicates.
  double tol = 1e-6;
  std::uint64_t master_seed = 0;
  unsigned jobs = 1;
  /// Trajectory stride; 0 records only the start and the limit.
  long record_every = 0;
  /// Keep |y| at every recorded iterate (final_error is always |y|).
  bool keep_series = false;
};

inline constexpr const char* kInVColumn = "in-V-column";
inline constexpr const char* kIntervalMinimum = "interval-minimum";

/// Uniform starts on the box, plain gradient descent with clamping. A trial is
/// "in-V-column" when its initial x lies in V_L and the final |y| < tol, and
/// "interval-minimum" when it ends within tol of the midpoint of the interval
/// containing its final x.
EscapeStats escape_failure_experiment(const SvcExperimentConfig& config);

/// Grid of f over the box: header x,y,f then nx * ny rows.
void write_landscape_csv(const std::string& path, PVariant variant, const SvcSet& svc, int nx, int ny);

}  // namespace saddle
