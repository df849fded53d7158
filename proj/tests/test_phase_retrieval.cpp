#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "saddle/hessian.hpp"
#include "saddle/phase_retrieval.hpp"

using namespace saddle;

namespace {

Measurements scalar_measurements() {
  Measurements m;
  m.a = Matrix::Ones(1, 1);
  m.x = Vector::Ones(1);
  m.y = Vector::Ones(1);
  return m;
}

double expectation_closed_form(const Matrix& z, const Matrix& x) {
  return 1.5 * z.squaredNorm() + 1.5 * x.squaredNorm() - z.norm() * x.norm() - 2.0 * z.cwiseProduct(x).sum();
}

// Newton roots of the first-order system started on the ring.
std::vector<Vector> ring_roots(const Measurements& meas, int starts, std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<Vector> out;
  for (int i = 0; i < starts; ++i) {
    const auto z = newton_solve(meas, random_ring_point(meas.x, rng).as<PsdRankOnePoint>().z);
    if (z && z->norm() > 1e-6) out.push_back(*z);
  }
  return out;
}

}  // namespace

TEST(Measurements, ShapesAndDeterminism) {
  const auto a = make_measurements(8, 40, 3);
  const auto b = make_measurements(8, 40, 3);
  EXPECT_EQ(a.a.rows(), 40);
  EXPECT_EQ(a.n(), 8);
  EXPECT_NEAR(a.x.norm(), 1.0, 1e-14);
  EXPECT_EQ(a.a, b.a);
  EXPECT_EQ(a.x, b.x);
  EXPECT_LT((a.y - (a.a * a.x).array().square().matrix()).norm(), 1e-14);
}

TEST(Measurements, SaveLoadRoundTrip) {
  const auto a = make_measurements(5, 12, 21);
  const auto path = (std::filesystem::temp_directory_path() / "saddle_meas_roundtrip.txt").string();
  save_measurements(a, path);
  const auto b = load_measurements(path);
  std::filesystem::remove(path);
  EXPECT_EQ(b.seed, a.seed);
  EXPECT_EQ(b.a, a.a);
  EXPECT_EQ(b.x, a.x);
}

TEST(Expectation, GlobalMinimum) {
  Vector x = Vector::LinSpaced(4, 1, 4);
  ExpectationObjective obj(x);
  const Point p = Point::psd_rank_one(x);
  EXPECT_NEAR(obj.value_at(p), 0.0, 1e-12);
  EXPECT_LT(obj.riemannian_gradient(p).norm(), 1e-12);
}

TEST(Expectation, RingValueAndGradient) {
  Vector x = Vector::Unit(3, 0);
  ExpectationObjective obj(x);
  const Point p = Point::psd_rank_one(Vector::Unit(3, 1) / std::sqrt(3.0));
  EXPECT_NEAR(obj.value_at(p), 4.0 / 3.0, 1e-14);
  EXPECT_LT(obj.riemannian_gradient(p).norm(), 1e-14);
}

TEST(Expectation, ClosedFormAndAmbientGradient) {
  RandomStream rng(4);
  const Vector x = rng.normal_vector(6);
  ExpectationObjective obj(x);
  const Matrix xx = x * x.transpose();
  for (int trial = 0; trial < 100; ++trial) {
    const Vector z = rng.normal_vector(6);
    const Matrix zz = z * z.transpose();
    EXPECT_NEAR(obj.value(zz), expectation_closed_form(zz, xx), 1e-10 * (1 + xx.squaredNorm()));
    // Central differences of the value along a random symmetric direction.
    Matrix d = rng.normal_matrix(6, 6);
    d = 0.5 * (d + d.transpose());
    const double h = 1e-6;
    const double fd = (obj.value(zz + h * d) - obj.value(zz - h * d)) / (2 * h);
    const double an = obj.gradient(zz).cwiseProduct(d).sum();
    EXPECT_NEAR(fd, an, 1e-6 * std::max(1.0, std::abs(an)));
  }
  const Point p = Point::psd_rank_one(rng.normal_vector(6));
  EXPECT_LE(fd_gradient_check(obj, p, 1e-5), 1e-6);
}

TEST(Expectation, RingIsStrictCriticalSubmanifold) {
  RandomStream rng(8);
  for (double xnorm : {0.5, 1.0, 2.0}) {
    Vector x = rng.normal_vector(7);
    x *= std::sqrt(xnorm) / x.norm();  // |X|_F = |x|^2
    ExpectationObjective obj(x);
    for (int i = 0; i < 20; ++i) {
      const Point p = random_ring_point(x, rng);
      EXPECT_LE(obj.riemannian_gradient(p).norm(), 1e-10);
      const TangentVector xi = ring_saddle_direction(p, x);
      const double q = hessian_quadform(obj, p, xi, {});
      EXPECT_NEAR(q, -12.0 * xnorm, 1e-8 * 12.0 * xnorm);
      const double c = hessian_quadform(obj, p, xi, {HessianMode::RetractionComposition});
      EXPECT_NEAR(c, -12.0 * xnorm, 1e-4 * 12.0 * xnorm);
    }
  }
}

TEST(Expectation, SingularAtZero) {
  ExpectationObjective obj(Vector::Ones(3));
  EXPECT_THROW(obj.gradient(Matrix::Zero(3, 3)), SingularPointError);
  EXPECT_THROW(ExpectationObjective(Vector::Zero(3)), ParameterError);
}

TEST(Realization, HandArithmetic) {
  RealizationObjective obj(scalar_measurements());
  EXPECT_NEAR(obj.value(Matrix::Constant(1, 1, 4.0)), 4.5, 1e-15);
  EXPECT_NEAR(obj.value_at(Point::psd_rank_one(Vector::Constant(1, 2.0))), 4.5, 1e-15);
}

TEST(Realization, ZeroAtSignal) {
  const auto meas = make_measurements(6, 30, 2);
  RealizationObjective obj(meas);
  const Point p = Point::psd_rank_one(meas.x);
  EXPECT_NEAR(obj.value_at(p), 0.0, 1e-15);
  EXPECT_LT(obj.riemannian_gradient(p).norm(), 1e-14);
  EXPECT_LT(obj.gradient(p.ambient()).norm(), 1e-14);
}

TEST(Realization, GradientCheck) {
  const auto meas = make_measurements(16, 64, 5);
  RealizationObjective obj(meas);
  RandomStream rng(6);
  for (int i = 0; i < 5; ++i) {
    EXPECT_LE(fd_gradient_check(obj, Point::psd_rank_one(rng.normal_vector(16)), 1e-4), 1e-5);
  }
}

TEST(Realization, FastGradientMatchesProjection) {
  const auto meas = make_measurements(6, 40, 9);
  RealizationObjective obj(meas);
  RandomStream rng(10);
  for (int i = 0; i < 10; ++i) {
    const Point p = Point::psd_rank_one(rng.normal_vector(6));
    const auto fast = obj.riemannian_gradient(p);
    const auto slow = project_tangent(p, obj.gradient(p.ambient()));
    EXPECT_LT((fast.ambient() - slow.ambient()).norm(), 1e-12 * std::max(1.0, slow.norm()));
  }
}

TEST(FirstOrder, TrivialRoots) {
  const auto meas = make_measurements(5, 25, 12);
  EXPECT_LT(first_order_residual(meas.x, meas).norm(), 1e-14);
  EXPECT_LT(first_order_residual(-meas.x, meas).norm(), 1e-14);
  EXPECT_EQ(first_order_residual(Vector::Zero(5), meas).norm(), 0.0);
}

TEST(FirstOrder, JacobianMatchesDifferences) {
  const auto meas = make_measurements(4, 20, 13);
  RandomStream rng(3);
  const Vector z = rng.normal_vector(4);
  const Matrix j = first_order_jacobian(z, meas);
  const double h = 1e-6;
  for (Index i = 0; i < 4; ++i) {
    const Vector e = Vector::Unit(4, i);
    const Vector col = (first_order_residual(z + h * e, meas) - first_order_residual(z - h * e, meas)) / (2 * h);
    EXPECT_LT((col - j.col(i)).norm(), 1e-7 * std::max(1.0, j.col(i).norm()));
  }
}

TEST(FirstOrder, EquivalentToRiemannianCriticality) {
  const auto meas = make_measurements(8, 96, 14);
  RealizationObjective obj(meas);
  const auto roots = ring_roots(meas, 30, 15);
  ASSERT_FALSE(roots.empty());
  for (const Vector& z : roots) {
    EXPECT_LE(first_order_residual(z, meas).norm(), 1e-10);
    EXPECT_LE(obj.riemannian_gradient(Point::psd_rank_one(z)).norm(), 1e-9);
  }
  RandomStream rng(16);
  for (int i = 0; i < 20; ++i) {
    const Vector z = rng.normal_vector(8);
    EXPECT_GT(first_order_residual(z, meas).norm(), 1e-10);
    EXPECT_GT(obj.riemannian_gradient(Point::psd_rank_one(z)).norm(), 1e-9);
  }
}

TEST(FirstOrder, CurvatureTermLiesInTangentSpace) {
  const auto meas = make_measurements(8, 96, 17);
  RealizationObjective obj(meas);
  for (const Vector& z : ring_roots(meas, 20, 18)) {
    const Matrix g = obj.gradient(z * z.transpose());
    const Vector u = z / z.norm();
    const Vector v = meas.x - u * u.dot(meas.x);
    const double term = 2.0 * g.cwiseProduct(v * v.transpose() - meas.x * meas.x.transpose()).sum() / z.squaredNorm();
    EXPECT_LE(std::abs(term), 1e-9);
  }
}

TEST(Triviality, GaussianFullRank) {
  int ok = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Index n = 1 + static_cast<Index>(s % 8);
    const Index m = n + static_cast<Index>(s % 5);
    ok += homogeneous_triviality_check(make_measurements(n, m, 1000 + s));
  }
  EXPECT_EQ(ok, 100);
}

TEST(Triviality, RankDeficient) {
  EXPECT_FALSE(homogeneous_triviality_check(make_measurements(5, 4, 1)));
  auto meas = make_measurements(3, 3, 2);
  meas.a.row(1) = meas.a.row(0);
  meas.a.row(2) = meas.a.row(0);
  EXPECT_FALSE(homogeneous_triviality_check(meas));
}

TEST(Enumerate, StableAndBounded) {
  const auto meas = make_measurements(2, 4, 2024);
  const auto r100 = enumerate_critical_points(meas, 100, 1e-12, 1e-6);
  const auto r200 = enumerate_critical_points(meas, 200, 1e-12, 1e-6);
  const auto r400 = enumerate_critical_points(meas, 400, 1e-12, 1e-6);
  EXPECT_EQ(r100.size(), r200.size());
  EXPECT_EQ(r200.size(), r400.size());
  EXPECT_LE(r400.size(), 9u);
  bool has_zero = false, has_x = false;
  for (const Vector& z : r400) {
    has_zero |= z.norm() < 1e-10;
    has_x |= std::min((z - meas.x).norm(), (z + meas.x).norm()) < 1e-8;
  }
  EXPECT_TRUE(has_zero);
  EXPECT_TRUE(has_x);
}

TEST(Enumerate, Preconditions) {
  EXPECT_THROW(enumerate_critical_points(make_measurements(7, 30, 1), 10, 1e-12, 1e-6), ParameterError);
  EXPECT_THROW(enumerate_critical_points(make_measurements(3, 2, 1), 10, 1e-12, 1e-6), MisuseError);
}

TEST(Ring, LambdaBound) {
  EXPECT_NEAR(ring_lambda_bound(0.0, 0.0), -6.0, 1e-14);
  EXPECT_NEAR(ring_lambda_bound(1.0 / 6.0, 5.0 / 36.0), -1.0, 1e-12);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      const double d0 = (1.0 / 6.0) * i / 50.0;
      const double d1 = (5.0 / 36.0) * j / 50.0;
      EXPECT_LT(ring_lambda_bound(d0, d1), -1.0);
    }
  }
}

TEST(Ring, Region) {
  EXPECT_THROW(RingRegion(0.0), ParameterError);
  EXPECT_THROW(RingRegion(0.4), ParameterError);
  const Vector x = Vector::Unit(3, 0);
  RingRegion ring(0.05);
  EXPECT_TRUE(ring.contains(Vector::Unit(3, 1) / std::sqrt(3.0), x));
  EXPECT_FALSE(ring.contains(x, x));
}

TEST(Ring, SaddleDirectionStructure) {
  const Vector x = Vector(Eigen::Vector3d(0, 2, 0));
  const Point perp = Point::psd_rank_one(Vector::Unit(3, 0));
  const auto xi = ring_saddle_direction(perp, x);
  ASSERT_TRUE(xi.psd_structure());
  EXPECT_NEAR(xi.psd_structure()->w, 0.0, 1e-15);
  EXPECT_LT((xi.psd_structure()->v - x).norm(), 1e-15);

  const Point par = Point::psd_rank_one(Vector::Unit(3, 1) * 0.7);
  const auto xp = ring_saddle_direction(par, x);
  EXPECT_NEAR(xp.psd_structure()->w, 4.0, 1e-14);
  EXPECT_LT(xp.psd_structure()->v.norm(), 1e-15);

  RandomStream rng(1);
  const Vector y = rng.normal_vector(5);
  const Point p = Point::psd_rank_one(rng.normal_vector(5));
  const auto xr = ring_saddle_direction(p, y);
  const Vector u = p.as<PsdRankOnePoint>().z.normalized();
  EXPECT_NEAR(xr.norm() * xr.norm(), 2.0 * (y.squaredNorm() + std::pow(u.dot(y), 2)), 1e-10);
}

TEST(Ring, RayleighMatchesQuadform) {
  const auto meas = make_measurements(16, 192, 11);
  RealizationObjective obj(meas);
  RingRegion ring(0.15);
  int checked = 0;
  for (const Vector& z : ring_roots(meas, 60, 5)) {
    if (!ring.contains(z, meas.x)) continue;
    const Point p = Point::psd_rank_one(z);
    const auto xi = ring_saddle_direction(p, meas.x);
    const double q = hessian_quadform(obj, p, xi, {}) / inner(p, xi, xi);
    const double r = ring_rayleigh_bound(z, meas, meas.x);
    EXPECT_NEAR(q, r, 1e-6 * std::abs(r));
    EXPECT_LT(r, 0.0);
    ++checked;
  }
  EXPECT_GT(checked, 0);
  EXPECT_THROW(ring_rayleigh_bound(Vector::Zero(16), meas, meas.x), SingularPointError);
}
