#pragma once

#include <cstdint>
#include <functional>

#include "saddle/manifold.hpp"

namespace saddle {

/// A smooth function on an ambient space. Evaluated at manifold points
/// through their ambient representation unless a subclass provides a faster
/// factored path. Implementations must be safe to call concurrently.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual double value(const Matrix& y) const = 0;
  /// Embedded (ambient Euclidean) gradient.
  virtual Matrix gradient(const Matrix& y) const = 0;

  virtual bool has_hessian_action() const { return false; }
  /// Ambient Hessian applied to d. Throws CapabilityError when unavailable.
  virtual Matrix hessian_action(const Matrix& y, const Matrix& d) const;

  virtual double value_at(const Point& p) const { return value(p.ambient()); }
  virtual Matrix gradient_at(const Point& p) const { return gradient(p.ambient()); }
  /// Feasible projection of the embedded gradient (tangent cone at
  /// rank-deficient points).
  virtual TangentVector riemannian_gradient(const Point& p) const;
};

/// Objective assembled from callables. Handy for tests and small problems.
class FunctionObjective final : public Objective {
 public:
  using ValueFn = std::function<double(const Matrix&)>;
  using GradFn = std::function<Matrix(const Matrix&)>;
  using HessFn = std::function<Matrix(const Matrix&, const Matrix&)>;

  FunctionObjective(ValueFn f, GradFn g, HessFn h = nullptr)
      : f_(std::move(f)), g_(std::move(g)), h_(std::move(h)) {}

  double value(const Matrix& y) const override { return f_(y); }
  Matrix gradient(const Matrix& y) const override { return g_(y); }
  bool has_hessian_action() const override { return static_cast<bool>(h_); }
  Matrix hessian_action(const Matrix& y, const Matrix& d) const override;

 private:
  ValueFn f_;
  GradFn g_;
  HessFn h_;
};

/// Worst error of central differences against <grad f(p), d> over 10 random
/// ambient directions d. The error is relative to |grad f| |d|, or absolute
/// when the gradient vanishes. Requires h in [1e-7, 1e-3].
double fd_gradient_check(const Objective& obj, const Point& p, double h, std::uint64_t seed = 7);

}  // namespace saddle
