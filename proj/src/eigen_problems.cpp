#include "saddle/eigen_problems.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <numbers>

namespace saddle {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double periodic_distance(double x, double c, double length) {
  double d = std::fmod(std::abs(x - c), length);
  return std::min(d, length - d);
}

void require_square_symmetric(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() < 1) throw DimensionError("operator must be square");
  if ((a - a.transpose()).norm() > 1e-12 * std::max(1.0, a.norm())) {
    throw ParameterError("operator must be symmetric");
  }
}

}  // namespace

void KpConfig::validate() const {
  if (!(length > 0.0)) throw ParameterError("domain length must be positive");
  if (wells < 1) throw ParameterError("need at least one well");
  if (n < 16) throw ParameterError("grid needs n >= 16");
  if (!(width > 0.0) || !(smoothing > 0.0)) throw ParameterError("well width and smoothing must be positive");
  if (!(depth > 0.0) || depth_step < 0.0 || depth - depth_step * (wells - 1) <= 0.0) {
    throw ParameterError("well depths must stay positive");
  }
}

double kp_potential_raw(const KpConfig& cfg, double x) {
  const double spacing = cfg.length / cfg.wells;
  double v = 0.0;
  for (int k = 0; k < cfg.wells; ++k) {
    const double c = (k + 0.5) * spacing;
    const double d = cfg.depth - k * cfg.depth_step;
    v -= d * logistic((0.5 * cfg.width - periodic_distance(x, c, cfg.length)) / cfg.smoothing);
  }
  return v;
}

DiscreteOperator assemble_operator(const KpConfig& cfg) {
  cfg.validate();
  const double h = cfg.length / static_cast<double>(cfg.n);
  Vector v(cfg.n);
  for (Index i = 0; i < cfg.n; ++i) v(i) = kp_potential_raw(cfg, static_cast<double>(i) * h);
  v.array() -= v.minCoeff();
  return assemble_operator(v, cfg.length);
}

DiscreteOperator assemble_operator(const Vector& potential, double length) {
  const Index n = potential.size();
  if (n < 3) throw ParameterError("grid needs at least 3 points");
  DiscreteOperator op;
  op.h = length / static_cast<double>(n);
  op.potential = potential;
  op.grid = Vector::LinSpaced(n, 0.0, length - op.h);
  const double c = 1.0 / (op.h * op.h);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(3 * n));
  for (Index i = 0; i < n; ++i) {
    trip.emplace_back(i, i, 2.0 * c + potential(i));
    trip.emplace_back(i, (i + 1) % n, -c);
    trip.emplace_back(i, (i + n - 1) % n, -c);
  }
  op.sparse = SparseMatrix(n, n);
  op.sparse.setFromTriplets(trip.begin(), trip.end());
  op.dense = Matrix(op.sparse);
  return op;
}

void write_profile_csv(const std::string& path, const Vector& grid, const Vector& values,
                       const std::string& value_name) {
  if (grid.size() != values.size()) throw DimensionError("profile grid and values differ in length");
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot open " + path + " for writing");
  std::fprintf(f, "x,%s\n", value_name.c_str());
  for (Index i = 0; i < grid.size(); ++i) std::fprintf(f, "%.17g,%.17g\n", grid(i), values(i));
  std::fclose(f);
}

LinearSphereObjective::LinearSphereObjective(const Matrix& a) {
  require_square_symmetric(a);
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  Matrix shifted = a;
  if (lmin <= 0.0) {
    shift_ = std::max(0.0, -lmin) + 1.0;
    shifted.diagonal().array() += shift_;
  }
  a_ = shifted.sparseView();
}

double LinearSphereObjective::value(const Matrix& z) const { return z.col(0).dot(a_ * z.col(0)); }

Matrix LinearSphereObjective::gradient(const Matrix& z) const { return 2.0 * (a_ * z.col(0)); }

Matrix LinearSphereObjective::hessian_action(const Matrix&, const Matrix& d) const {
  return 2.0 * (a_ * d.col(0));
}

double LinearSphereObjective::eigenvalue_of(const Vector& z) const { return value(z) - shift_; }

NonlinearSphereObjective::NonlinearSphereObjective(const Matrix& a, double beta) : beta_(beta) {
  require_square_symmetric(a);
  if (!(beta >= 0.0)) throw ParameterError("beta must be nonnegative");
  a_ = a.sparseView();
}

double NonlinearSphereObjective::value(const Matrix& z) const {
  const Vector& zz = z.col(0);
  return 0.5 * zz.dot(a_ * zz) + 0.25 * beta_ * zz.array().pow(4).sum();
}

Matrix NonlinearSphereObjective::gradient(const Matrix& z) const {
  const Vector& zz = z.col(0);
  return a_ * zz + beta_ * zz.array().cube().matrix();
}

Matrix NonlinearSphereObjective::hessian_action(const Matrix& z, const Matrix& d) const {
  return a_ * d.col(0) + 3.0 * beta_ * (z.col(0).array().square() * d.col(0).array()).matrix();
}

double NonlinearSphereObjective::eigenvalue_of(const Vector& z) const {
  return 2.0 * value(z) + 0.5 * beta_ * z.array().pow(4).sum();
}

double NonlinearSphereObjective::residual(const Vector& z) const {
  const Vector g = gradient(z);
  return (g - eigenvalue_of(z) * z).norm();
}

StiefelTraceObjective::StiefelTraceObjective(const Matrix& a, Index m) : m_(m) {
  require_square_symmetric(a);
  if (m < 1 || m >= a.rows()) throw ParameterError("frame size must satisfy 1 <= m < n");
  a_ = a.sparseView();
}

double StiefelTraceObjective::value(const Matrix& z) const { return z.cwiseProduct(a_ * z).sum(); }

Matrix StiefelTraceObjective::gradient(const Matrix& z) const { return 2.0 * (a_ * z); }

Matrix StiefelTraceObjective::hessian_action(const Matrix&, const Matrix& d) const {
  return 2.0 * (a_ * d);
}

double subspace_distance(const Matrix& z, const Matrix& v) {
  if (z.rows() != v.rows()) throw DimensionError("subspaces live in different spaces");
  const Matrix r = z - v * (v.transpose() * z);
  Eigen::JacobiSVD<Matrix> svd(r);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

DeflatedResult deflated_second_state(const Matrix& a, double beta, const Vector& v1,
                                     const PgdConfig& config, const Vector& z0) {
  config.validate();
  if (std::abs(v1.norm() - 1.0) > 1e-10) throw ParameterError("v1 must be a unit vector");
  if (z0.size() != v1.size() || a.rows() != v1.size()) throw DimensionError("sizes do not match");
  const NonlinearSphereObjective obj(a, beta);
  auto deflate = [&](Vector z) {
    z -= v1 * v1.dot(z);
    const double nz = z.norm();
    if (!(nz > 0.0)) throw DegenerateRetractionError("start lies along v1");
    return Vector(z / nz);
  };
  Vector z = deflate(z0);
  DeflatedResult out{Point::sphere(z)};
  for (long it = 0;; ++it) {
    Vector g = obj.gradient(z);
    g -= z * z.dot(g);
    g -= v1 * v1.dot(g);
    const double gn = g.norm();
    if (!std::isfinite(gn)) throw NumericError("non-finite gradient in deflated iteration");
    if (gn < config.grad_tol || it >= config.max_iters) {
      out.converged = gn < config.grad_tol;
      out.iterations = it;
      break;
    }
    z = deflate(z - config.step * g);
  }
  out.state = Point::sphere(z);
  out.residual = obj.residual(z);
  out.overlap = std::abs(v1.dot(z));
  return out;
}

}  // namespace saddle
