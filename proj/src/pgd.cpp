#include "saddle/pgd.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace saddle {

void PgdConfig::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw ParameterError("step size must be positive");
  if (max_iters < 1) throw ParameterError("max_iters must be at least 1");
  if (!(grad_tol >= 0.0)) throw ParameterError("grad_tol must be nonnegative");
  if (record_every < 1) throw ParameterError("record_every must be at least 1");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::GradTol: return "grad_tol";
    case Termination::MaxIters: return "max_iters";
    case Termination::RetractionFailure: return "retraction_failure";
  }
  return "unknown";
}

Point pgd_step(const Point& p, const Objective& obj, double alpha) {
  if (!(alpha >= 0.0)) throw ParameterError("step size must be nonnegative");
  const TangentVector g = obj.riemannian_gradient(p);
  return retract(p, g.scaled(-alpha));
}

Trajectory run_pgd(const Point& p0, const Objective& obj, const PgdConfig& config) {
  config.validate();
  Trajectory traj;
  Point p = p0;
  auto record = [&](long it, double f, double gn) {
    traj.iterates.push_back(p);
    traj.f_values.push_back(f);
    traj.grad_norms.push_back(gn);
    traj.iterations.push_back(it);
  };
  for (long it = 0;; ++it) {
    double f = 0.0, gn = 0.0;
    std::optional<TangentVector> g;
    try {
      f = obj.value_at(p);
      g = obj.riemannian_gradient(p);
      gn = g->norm();
      if (!std::isfinite(f) || !std::isfinite(gn)) throw NumericError("non-finite objective or gradient");
    } catch (const Error& e) {
      record(it, f, std::numeric_limits<double>::infinity());
      traj.terminated_by = Termination::RetractionFailure;
      traj.failure = e.what();
      traj.iterations_run = it;
      return traj;
    }
    const bool done = gn < config.grad_tol || it >= config.max_iters;
    if (done || it % config.record_every == 0) record(it, f, gn);
    if (gn < config.grad_tol) {
      traj.terminated_by = Termination::GradTol;
      traj.iterations_run = it;
      return traj;
    }
    if (it >= config.max_iters) {
      traj.terminated_by = Termination::MaxIters;
      traj.iterations_run = it;
      return traj;
    }
    try {
      p = retract(p, g->scaled(-config.step));
    } catch (const Error& e) {
      if (traj.iterations.back() != it) record(it, f, gn);
      traj.terminated_by = Termination::RetractionFailure;
      traj.failure = e.what();
      traj.iterations_run = it;
      return traj;
    }
  }
}

std::string classify_limit(const Trajectory& traj, const std::vector<LimitReference>& references,
                           double grad_tol) {
  if (references.empty()) throw MisuseError("classify_limit needs at least one reference");
  if (traj.iterates.empty() || traj.terminated_by == Termination::RetractionFailure) {
    return kUndetermined;
  }
  if (!(traj.final_grad_norm() <= grad_tol)) return kUndetermined;
  for (const auto& ref : references) {
    if (ref.predicate(traj)) return ref.label;
  }
  return kUndetermined;
}

}  // namespace saddle
