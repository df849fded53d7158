#pragma once

#include <Eigen/Sparse>

#include <string>

#include "saddle/pgd.hpp"

namespace saddle {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Smoothed periodic Kronig-Penney potential on [0, length).
/// Well k (0-based) is centred at (k + 1/2) length / wells with depth
/// depth - k * depth_step. depth_step > 0 breaks the symmetry between wells.
struct KpConfig {
  double length = 50.0;
  int wells = 5;
  double depth = 10.0;
  double depth_step = 0.2;
  double width = 4.0;
  double smoothing = 0.3;
  Index n = 128;

  void validate() const;
};

/// -L + diag(V) with the periodic 3-point Laplacian L on n points.
struct DiscreteOperator {
  Matrix dense;
  SparseMatrix sparse;
  Vector potential;
  Vector grid;
  double h = 0.0;
};

/// Potential sampled at x (periodic). The minimum over the grid is shifted to 0
/// by assemble_operator.
double kp_potential_raw(const KpConfig& cfg, double x);

DiscreteOperator assemble_operator(const KpConfig& cfg);
/// Operator with a caller-supplied potential on the grid i * length / n.
DiscreteOperator assemble_operator(const Vector& potential, double length);

/// Grid point and value, one per line, with a header row.
void write_profile_csv(const std::string& path, const Vector& grid, const Vector& values,
                       const std::string& value_name);

/// f(z) = z^T (A + cI) z with c = max(0, -lambda_min(A)) + 1 applied only when
/// A is not positive definite. eigenvalue_of subtracts the shift again.
class LinearSphereObjective final : public Objective {
 public:
  explicit LinearSphereObjective(const Matrix& a);

  double value(const Matrix& z) const override;
  Matrix gradient(const Matrix& z) const override;
  bool has_hessian_action() const override { return true; }
  Matrix hessian_action(const Matrix& z, const Matrix& d) const override;

  double shift() const { return shift_; }
  double eigenvalue_of(const Vector& z) const;

 private:
  SparseMatrix a_;
  double shift_ = 0.0;
};

/// f(z) = z^T A z / 2 + beta/4 sum z_j^4 on the sphere.
class NonlinearSphereObjective final : public Objective {
 public:
  NonlinearSphereObjective(const Matrix& a, double beta);

  double value(const Matrix& z) const override;
  Matrix gradient(const Matrix& z) const override;
  bool has_hessian_action() const override { return true; }
  Matrix hessian_action(const Matrix& z, const Matrix& d) const override;

  double beta() const { return beta_; }
  /// 2 f(z) + beta/2 sum z_j^4.
  double eigenvalue_of(const Vector& z) const;
  /// |A z + beta z^3 - lambda z| with lambda = eigenvalue_of(z).
  double residual(const Vector& z) const;

 private:
  SparseMatrix a_;
  double beta_;
};

/// f(Z) = trace(Z^T A Z) on the Stiefel manifold St(n, m).
class StiefelTraceObjective final : public Objective {
 public:
  StiefelTraceObjective(const Matrix& a, Index m);

  double value(const Matrix& z) const override;
  Matrix gradient(const Matrix& z) const override;
  bool has_hessian_action() const override { return true; }
  Matrix hessian_action(const Matrix& z, const Matrix& d) const override;

  Index frame_size() const { return m_; }

 private:
  SparseMatrix a_;
  Index m_;
};

/// |sin Theta|_2 between span(z) and span(v) (both with orthonormal columns).
double subspace_distance(const Matrix& z, const Matrix& v);

struct DeflatedResult {
  Point state;
  bool converged = false;
  long iterations = 0;
  /// |A v + beta v^3 - lambda v| for the returned state.
  double residual = 0.0;
  /// |v^T v1|.
  double overlap = 0.0;
};

/// PGD on {|z| = 1, z orthogonal to v1} for the nonlinear objective, with the
/// gradient projected onto the tangent space of that sphere. Stops when the
/// projected gradient norm falls below config.grad_tol.
DeflatedResult deflated_second_state(const Matrix& a, double beta, const Vector& v1,
                                     const PgdConfig& config, const Vector& z0);

}  // namespace saddle
