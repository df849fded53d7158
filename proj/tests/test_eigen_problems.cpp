#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "saddle/eigen_problems.hpp"
#include "saddle/escape.hpp"
#include "saddle/hessian.hpp"

using namespace saddle;

namespace {

Matrix diag(std::initializer_list<double> d) {
  Vector v(static_cast<Index>(d.size()));
  Index i = 0;
  for (double x : d) v(i++) = x;
  return v.asDiagonal();
}

const DiscreteOperator& kp() {
  static const DiscreteOperator op = assemble_operator(KpConfig{});
  return op;
}

const Eigen::SelfAdjointEigenSolver<Matrix>& kp_eigs() {
  static const Eigen::SelfAdjointEigenSolver<Matrix> es(kp().dense);
  return es;
}

int local_minima(const Vector& v) {
  const Index n = v.size();
  int count = 0;
  for (Index i = 0; i < n; ++i) {
    if (v(i) < v((i + n - 1) % n) && v(i) <= v((i + 1) % n)) ++count;
  }
  return count;
}

}  // namespace

TEST(Operator, SymmetricPeriodicStencil) {
  const auto& op = kp();
  EXPECT_EQ(op.dense.rows(), 128);
  EXPECT_LE((op.dense - op.dense.transpose()).norm(), 1e-12);
  EXPECT_NEAR(op.h, 50.0 / 128.0, 1e-15);
  const Matrix lap = op.dense - Matrix(op.potential.asDiagonal());
  EXPECT_LE(lap.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((Matrix(op.sparse) - op.dense).norm(), 1e-12);
}

TEST(Operator, PotentialShape) {
  KpConfig cfg;
  EXPECT_NEAR(kp_potential_raw(cfg, 0.0), kp_potential_raw(cfg, 50.0), 1e-10);
  const auto& op = kp();
  EXPECT_NEAR(op.potential.minCoeff(), 0.0, 1e-12);
  EXPECT_EQ(local_minima(op.potential), 5);
}

TEST(Operator, FreeSpectrumIsCirculant) {
  const Index n = 32;
  const auto op = assemble_operator(Vector::Zero(n), 50.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(op.dense);
  std::vector<double> expect;
  for (Index k = 0; k < n; ++k) {
    expect.push_back(2.0 * (1.0 - std::cos(2.0 * std::numbers::pi * k / n)) / (op.h * op.h));
  }
  std::sort(expect.begin(), expect.end());
  for (Index k = 0; k < n; ++k) EXPECT_NEAR(es.eigenvalues()(k), expect[k], 1e-10);
}

TEST(Operator, ClusterAndGap) {
  const Vector& lam = kp_eigs().eigenvalues();
  EXPECT_GT((lam(5) - lam(4)) / (lam(4) - lam(0)), 1.0);
}

TEST(Operator, SingleWellIsolatedGround) {
  KpConfig cfg;
  cfg.wells = 1;
  const auto op = assemble_operator(cfg);
  Eigen::SelfAdjointEigenSolver<Matrix> es(op.dense);
  const Vector& lam = es.eigenvalues();
  EXPECT_GT(lam(1) - lam(0), 10.0 * 1e-3);
  EXPECT_EQ(local_minima(op.potential), 1);
}

TEST(Operator, Validation) {
  KpConfig cfg;
  cfg.n = 8;
  EXPECT_THROW(cfg.validate(), ParameterError);
  EXPECT_THROW(assemble_operator(cfg), ParameterError);
}

TEST(LinearSphere, DiagonalExamples) {
  LinearSphereObjective obj(diag({1, 2, 3}));
  const Point e1 = Point::sphere(Vector::Unit(3, 0));
  EXPECT_NEAR(obj.value_at(e1) - obj.shift(), 1.0, 1e-14);
  EXPECT_NEAR(obj.eigenvalue_of(Vector::Unit(3, 0)), 1.0, 1e-14);
  EXPECT_LT(obj.riemannian_gradient(e1).norm(), 1e-14);
  const auto rep = classify_critical_point(obj, Point::sphere(Vector::Unit(3, 1)), {});
  EXPECT_EQ(rep.classification, CriticalClass::StrictSaddleNondegenerate);
  EXPECT_EQ(rep.morse_index, 1);
  const auto xi = TangentVector::checked(Point::sphere(Vector::Unit(3, 1)), Vector::Unit(3, 0));
  EXPECT_LT(hessian_quadform(obj, xi.base(), xi, {}), 0.0);
}

TEST(LinearSphere, ShiftForIndefinite) {
  LinearSphereObjective obj(diag({-2, 1}));
  EXPECT_GT(obj.shift(), 2.0);
  EXPECT_NEAR(obj.eigenvalue_of(Vector::Unit(2, 0)), -2.0, 1e-14);
}

TEST(LinearSphere, DegenerateCircleIsCritical) {
  LinearSphereObjective obj(diag({1, 2, 2}));
  for (int k = 0; k < 20; ++k) {
    const double t = 2.0 * std::numbers::pi * k / 20.0;
    const Point p = Point::sphere(Vector(Eigen::Vector3d(0, std::cos(t), std::sin(t))));
    EXPECT_LE(obj.riemannian_gradient(p).norm(), 1e-10);
    EXPECT_LT(hessian_spectrum(obj, p, {}).lambda_min, 0.0);
  }
}

TEST(LinearSphere, PgdFindsOnlyGroundState) {
  LinearSphereObjective obj(diag({1, 2, 3, 4, 5, 6}));
  PgdConfig cfg;
  cfg.step = 0.05;
  cfg.record_every = 1000;
  std::vector<LimitReference> refs{
      {"v1", [](const Trajectory& t) { return std::abs(t.final_point().as<SpherePoint>().z(0)) > 1 - 1e-9; }},
      {"excited", [](const Trajectory&) { return true; }}};
  EscapeOptions opt;
  opt.trials = 100;
  opt.master_seed = 12;
  const auto stats = escape_monte_carlo(obj, ManifoldSpec::sphere(6), cfg, refs, opt);
  EXPECT_EQ(stats.count("v1"), 100);
}

TEST(LinearSphere, KpConvergesToGroundState) {
  LinearSphereObjective obj(kp().dense);
  PgdConfig cfg;
  cfg.step = 0.01;
  cfg.record_every = 100000;
  const auto t = run_pgd(random_point(ManifoldSpec::sphere(128), 3), obj, cfg);
  ASSERT_EQ(t.terminated_by, Termination::GradTol);
  const Vector z = t.final_point().as<SpherePoint>().z;
  const Vector v1 = kp_eigs().eigenvectors().col(0);
  EXPECT_NEAR(std::abs(z.dot(v1)), 1.0, 1e-8);
  EXPECT_NEAR(obj.eigenvalue_of(z), kp_eigs().eigenvalues()(0), 1e-8);
}

TEST(NonlinearSphere, Identities) {
  RandomStream rng(2);
  Matrix a = rng.normal_matrix(6, 6);
  a = (a + a.transpose()).eval();
  NonlinearSphereObjective obj(a, 1.5);
  for (int i = 0; i < 10; ++i) {
    Vector z = rng.normal_vector(6);
    z.normalize();
    EXPECT_NEAR(obj.eigenvalue_of(z), z.dot(a * z) + 1.5 * z.array().pow(4).sum(), 1e-12);
  }
  EXPECT_LE(fd_gradient_check(obj, random_point(ManifoldSpec::sphere(6), rng), 1e-5), 1e-6);
  EXPECT_THROW(NonlinearSphereObjective(a, -1.0), ParameterError);
}

TEST(NonlinearSphere, BetaZeroIsHalfLinear) {
  const Matrix a = diag({1, 2, 3});
  NonlinearSphereObjective nl(a, 0.0);
  FunctionObjective lin([a](const Matrix& z) { return z.col(0).dot(a * z.col(0)); },
                        [a](const Matrix& z) -> Matrix { return 2 * a * z; });
  RandomStream rng(3);
  for (int i = 0; i < 5; ++i) {
    const Point p = random_point(ManifoldSpec::sphere(3), rng);
    EXPECT_NEAR(nl.value_at(p), 0.5 * lin.value_at(p), 1e-14);
  }
  EXPECT_LT(nl.riemannian_gradient(Point::sphere(Vector::Unit(3, 1))).norm(), 1e-14);
}

TEST(NonlinearSphere, KpStates) {
  const auto& op = kp();
  NonlinearSphereObjective obj(op.dense, 1.0);
  PgdConfig cfg;
  cfg.step = 0.01;
  cfg.record_every = 100000;
  const auto t = run_pgd(random_point(ManifoldSpec::sphere(128), 4), obj, cfg);
  ASSERT_EQ(t.terminated_by, Termination::GradTol);
  const Vector v1 = t.final_point().as<SpherePoint>().z;
  EXPECT_LE(obj.residual(v1), 1e-6);

  const auto res = deflated_second_state(op.dense, 1.0, v1, cfg, random_point(ManifoldSpec::sphere(128), 5).as<SpherePoint>().z);
  ASSERT_TRUE(res.converged);
  const Vector v2 = res.state.as<SpherePoint>().z;
  EXPECT_LE(std::abs(v2.dot(v1)), 1e-8);
  EXPECT_LE(obj.residual(v2), 1e-6);
  EXPECT_LT(hessian_spectrum(obj, res.state, {}).lambda_min, 0.0);
  // The node can sit in a barrier where v2 is tiny, so no amplitude cut.
  int sign_changes = 0;
  double last = 0.0;
  for (Index i = 0; i < 128; ++i) {
    if (std::abs(v2(i)) < 1e-14) continue;
    if (last != 0.0 && last * v2(i) < 0) ++sign_changes;
    last = v2(i);
  }
  EXPECT_GE(sign_changes, 1);
}

TEST(NonlinearSphere, DeflatedBetaZeroMatchesDense) {
  const auto& op = kp();
  const Matrix& vecs = kp_eigs().eigenvectors();
  PgdConfig cfg;
  cfg.step = 0.01;
  cfg.record_every = 100000;
  const auto res = deflated_second_state(op.dense, 0.0, vecs.col(0), cfg, random_point(ManifoldSpec::sphere(128), 6).as<SpherePoint>().z);
  ASSERT_TRUE(res.converged);
  const Vector v2 = res.state.as<SpherePoint>().z;
  EXPECT_LE(std::min((v2 - vecs.col(1)).norm(), (v2 + vecs.col(1)).norm()), 1e-6);
}

TEST(Stiefel, DiagonalExamples) {
  StiefelTraceObjective obj(diag({1, 2, 3, 4}), 2);
  Matrix z = Matrix::Zero(4, 2);
  z(0, 0) = z(1, 1) = 1;
  const Point p = Point::stiefel(z);
  EXPECT_NEAR(obj.value_at(p), 3.0, 1e-14);
  EXPECT_LT(obj.riemannian_gradient(p).norm(), 1e-14);
  Matrix w = Matrix::Zero(4, 2);
  w(0, 0) = w(2, 1) = 1;
  const Point q = Point::stiefel(w);
  EXPECT_LT(obj.riemannian_gradient(q).norm(), 1e-14);
  EXPECT_LT(hessian_spectrum(obj, q, {}).lambda_min, 0.0);
  EXPECT_THROW(StiefelTraceObjective(diag({1, 2}), 2), ParameterError);
}

TEST(Stiefel, RotationInvariance) {
  RandomStream rng(7);
  Matrix a = rng.normal_matrix(8, 8);
  a = (a + a.transpose()).eval();
  StiefelTraceObjective obj(a, 3);
  for (int i = 0; i < 5; ++i) {
    const Matrix z = random_point(ManifoldSpec::stiefel(8, 3), rng).ambient();
    const Matrix q = random_point(ManifoldSpec::stiefel(3, 3), rng).ambient();
    EXPECT_NEAR(obj.value(z * q), obj.value(z), 1e-10);
  }
}

TEST(Stiefel, KpSubspace) {
  StiefelTraceObjective obj(kp().dense, 5);
  PgdConfig cfg;
  cfg.step = 0.01;
  cfg.record_every = 100000;
  const auto t = run_pgd(random_point(ManifoldSpec::stiefel(128, 5), 8), obj, cfg);
  ASSERT_EQ(t.terminated_by, Termination::GradTol);
  const Matrix z = t.final_point().ambient();
  EXPECT_LE(subspace_distance(z, kp_eigs().eigenvectors().leftCols(5)), 1e-6);
  Eigen::SelfAdjointEigenSolver<Matrix> small(z.transpose() * kp().dense * z);
  for (Index i = 0; i < 5; ++i) {
    const double ref = kp_eigs().eigenvalues()(i);
    EXPECT_NEAR(small.eigenvalues()(i), ref, 1e-6 * std::abs(ref));
  }
}

TEST(Stiefel, SubspaceDistance) {
  Matrix a = Matrix::Identity(4, 2);
  EXPECT_NEAR(subspace_distance(a, a), 0.0, 1e-15);
  Matrix b = Matrix::Zero(4, 2);
  b(2, 0) = b(3, 1) = 1;
  EXPECT_NEAR(subspace_distance(a, b), 1.0, 1e-12);
}
