#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "saddle/objective.hpp"

namespace saddle {

/// Real Gaussian measurements y_j = (a_j^T x)^2. Row j of `a` is a_j^T.
struct Measurements {
  Matrix a;
  Vector x;
  Vector y;
  std::uint64_t seed = 0;

  Index n() const { return a.cols(); }
  Index m() const { return a.rows(); }
};

/// Gaussian sensing vectors and a unit-norm Gaussian signal from `seed`.
Measurements make_measurements(Index n, Index m, std::uint64_t seed);
/// Gaussian sensing vectors for a given signal.
Measurements make_measurements(const Vector& x, Index m, std::uint64_t seed);

/// Comment line, "n m seed", m rows of a_j, then one row holding x.
void save_measurements(const Measurements& meas, const std::string& path);
/// y is recomputed from (a, x).
Measurements load_measurements(const std::string& path);

/// Population landscape 1.5|Z|^2 + 1.5|X|^2 - |Z||X| - 2<Z,X> (Frobenius).
class ExpectationObjective final : public Objective {
 public:
  explicit ExpectationObjective(Vector x);

  double value(const Matrix& z) const override;
  Matrix gradient(const Matrix& z) const override;
  bool has_hessian_action() const override { return true; }
  Matrix hessian_action(const Matrix& z, const Matrix& d) const override;

  double value_at(const Point& p) const override;
  TangentVector riemannian_gradient(const Point& p) const override;

  const Vector& signal() const { return x_; }
  Matrix target() const { return x_ * x_.transpose(); }

 private:
  Vector x_;
  Matrix xx_;
  double xnorm_;  // |X|_F = |x|^2
};

/// (1/2m) sum_j (a_j^T Z a_j - y_j)^2.
class RealizationObjective final : public Objective {
 public:
  explicit RealizationObjective(Measurements meas);

  double value(const Matrix& z) const override;
  Matrix gradient(const Matrix& z) const override;
  bool has_hessian_action() const override { return true; }
  Matrix hessian_action(const Matrix& z, const Matrix& d) const override;

  double value_at(const Point& p) const override;
  TangentVector riemannian_gradient(const Point& p) const override;

  const Measurements& measurements() const { return meas_; }

 private:
  Vector quad_forms(const Matrix& z) const;  // a_j^T Z a_j
  Matrix weighted_gram(const Vector& w) const;  // (1/m) sum_j w_j a_j a_j^T
  Measurements meas_;
};

/// (1/m) sum_j ((a_j^T z)^2 - y_j)(a_j^T z) a_j.
Vector first_order_residual(const Vector& z, const Measurements& meas);
/// Jacobian of first_order_residual: (1/m) sum_j (3 (a_j^T z)^2 - y_j) a_j a_j^T.
Matrix first_order_jacobian(const Vector& z, const Measurements& meas);

/// True iff the stacked sensing matrix has numerical rank n.
bool homogeneous_triviality_check(const Measurements& meas);

struct NewtonOptions {
  double tol = 1e-10;
  int max_iters = 100;
};

/// Damped Newton on the first-order residual. Steps are halved until the
/// residual norm decreases. Empty when the Jacobian is singular, damping
/// stalls, or the iteration budget runs out.
std::optional<Vector> newton_solve(const Measurements& meas, const Vector& z0,
                                   const NewtonOptions& opt = {});

/// Distinct roots of the first-order system modulo sign, found by Newton
/// from n_starts Gaussian starts with random radii. Requires n <= 6. Each
/// root is returned with its first nonzero entry positive, sorted by norm.
std::vector<Vector> enumerate_critical_points(const Measurements& meas, int n_starts,
                                              double newton_tol, double cluster_tol,
                                              std::uint64_t seed = 1);

/// |<Z,X>| <= d0 |Z||X| and 1/3 - d0 <= |Z|/|X| <= 1/3 + d0, with Z = zz^T.
struct RingRegion {
  double delta0;

  explicit RingRegion(double d0);
  bool contains(const Vector& z, const Vector& x) const;
};

/// Rayleigh quotient of the realization Hessian along x u^T + u x^T at a
/// first-order point: (1/m) sum (3 s^2 t^2 - t^4) / (|z|^2|x|^2 + <x,z>^2),
/// s = a^T z, t = a^T x.
double ring_rayleigh_bound(const Vector& z, const Measurements& meas, const Vector& x);

/// Closed-form upper bound Lambda(d0, d1) on the smallest Hessian eigenvalue
/// near the ring.
double ring_lambda_bound(double delta0, double delta1);

/// Tangent vector u x^T + x u^T at Z = zz^T: w = 2 u^T x, v = x - u u^T x.
TangentVector ring_saddle_direction(const Point& z_point, const Vector& x);

/// A point of the ring {|Z| = |X|/3, <Z,X> = 0}.
Point random_ring_point(const Vector& x, RandomStream& rng);

}  // namespace saddle
