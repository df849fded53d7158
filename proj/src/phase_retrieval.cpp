#include "saddle/phase_retrieval.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace saddle {

namespace {

void require_psd(const Point& p) {
  if (p.kind() != ManifoldKind::PsdRankOne) throw MisuseError("objective lives on the rank-one PSD manifold");
}

TangentVector psd_gradient(const Point& p, const Vector& gu) {
  const Vector& z = p.as<PsdRankOnePoint>().z;
  const Vector u = z / z.norm();
  const double w = u.dot(gu);
  Vector v = gu - w * u;
  v -= u * u.dot(v);
  return TangentVector::psd(p, w, std::move(v));
}

}  // namespace

Measurements make_measurements(Index n, Index m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw ParameterError("measurements need n >= 1 and m >= 1");
  RandomStream rng(derive_seed(seed, 0xC0FFEE));
  Vector x = rng.normal_vector(n);
  x /= x.norm();
  return make_measurements(x, m, seed);
}

Measurements make_measurements(const Vector& x, Index m, std::uint64_t seed) {
  if (x.size() < 1 || m < 1) throw ParameterError("measurements need n >= 1 and m >= 1");
  RandomStream rng(seed);
  Measurements meas;
  meas.a = Matrix(m, x.size());
  // Row-major fill so a_j depends only on (seed, j).
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < x.size(); ++i) meas.a(j, i) = rng.normal();
  }
  meas.x = x;
  meas.y = (meas.a * x).array().square().matrix();
  meas.seed = seed;
  return meas;
}

void save_measurements(const Measurements& meas, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot open " + path + " for writing");
  std::fprintf(f, "# phase retrieval measurements: n m seed, then rows a_j, then x\n");
  std::fprintf(f, "%ld %ld %llu\n", static_cast<long>(meas.n()), static_cast<long>(meas.m()),
               static_cast<unsigned long long>(meas.seed));
  for (Index j = 0; j < meas.m(); ++j) {
    for (Index i = 0; i < meas.n(); ++i) std::fprintf(f, i ? " %.17g" : "%.17g", meas.a(j, i));
    std::fprintf(f, "\n");
  }
  for (Index i = 0; i < meas.n(); ++i) std::fprintf(f, i ? " %.17g" : "%.17g", meas.x(i));
  std::fprintf(f, "\n");
  std::fclose(f);
}

Measurements load_measurements(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  std::stringstream body;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    body << line << '\n';
  }
  long n = 0, m = 0;
  unsigned long long seed = 0;
  if (!(body >> n >> m >> seed) || n < 1 || m < 1) throw Error("bad measurement header in " + path);
  Measurements meas;
  meas.a = Matrix(m, n);
  meas.x = Vector(n);
  meas.seed = seed;
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i)
      if (!(body >> meas.a(j, i))) throw Error("truncated measurement file " + path);
  for (Index i = 0; i < n; ++i)
    if (!(body >> meas.x(i))) throw Error("truncated measurement file " + path);
  meas.y = (meas.a * meas.x).array().square().matrix();
  return meas;
}

ExpectationObjective::ExpectationObjective(Vector x) : x_(std::move(x)) {
  if (x_.size() < 1 || x_.norm() == 0.0) throw ParameterError("signal must be nonzero");
  xx_ = x_ * x_.transpose();
  xnorm_ = x_.squaredNorm();
}

double ExpectationObjective::value(const Matrix& z) const {
  const double zn = z.norm();
  return 1.5 * zn * zn + 1.5 * xnorm_ * xnorm_ - zn * xnorm_ - 2.0 * x_.dot(z * x_);
}

Matrix ExpectationObjective::gradient(const Matrix& z) const {
  const double zn = z.norm();
  if (zn == 0.0) throw SingularPointError("expectation gradient is singular at Z = 0");
  return (3.0 - xnorm_ / zn) * z - 2.0 * xx_;
}

Matrix ExpectationObjective::hessian_action(const Matrix& z, const Matrix& d) const {
  const double zn = z.norm();
  if (zn == 0.0) throw SingularPointError("expectation Hessian is singular at Z = 0");
  const double zd = z.cwiseProduct(d).sum();
  return 3.0 * d - xnorm_ * (d / zn - zd * z / (zn * zn * zn));
}

double ExpectationObjective::value_at(const Point& p) const {
  require_psd(p);
  const Vector& z = p.as<PsdRankOnePoint>().z;
  const double zn = z.squaredNorm();
  const double zx = z.dot(x_);
  return 1.5 * zn * zn + 1.5 * xnorm_ * xnorm_ - zn * xnorm_ - 2.0 * zx * zx;
}

TangentVector ExpectationObjective::riemannian_gradient(const Point& p) const {
  require_psd(p);
  const Vector& z = p.as<PsdRankOnePoint>().z;
  const double zn = z.squaredNorm();
  const double znorm = std::sqrt(zn);
  const Vector u = z / znorm;
  // G u with G = (3 - |X|/|Z|) Z - 2 X
  const Vector gu = (3.0 - xnorm_ / zn) * znorm * z - 2.0 * x_.dot(u) * x_;
  if (!gu.allFinite()) throw NumericError("gradient has non-finite entries");
  return psd_gradient(p, gu);
}

RealizationObjective::RealizationObjective(Measurements meas) : meas_(std::move(meas)) {
  if (meas_.m() < 1) throw ParameterError("need at least one measurement");
}

Vector RealizationObjective::quad_forms(const Matrix& z) const {
  return (meas_.a * z).cwiseProduct(meas_.a).rowwise().sum();
}

Matrix RealizationObjective::weighted_gram(const Vector& w) const {
  return meas_.a.transpose() * (w.asDiagonal() * meas_.a) / static_cast<double>(meas_.m());
}

double RealizationObjective::value(const Matrix& z) const {
  return (quad_forms(z) - meas_.y).squaredNorm() / (2.0 * static_cast<double>(meas_.m()));
}

Matrix RealizationObjective::gradient(const Matrix& z) const {
  return weighted_gram(quad_forms(z) - meas_.y);
}

Matrix RealizationObjective::hessian_action(const Matrix&, const Matrix& d) const {
  return weighted_gram(quad_forms(d));
}

double RealizationObjective::value_at(const Point& p) const {
  require_psd(p);
  const Vector s = meas_.a * p.as<PsdRankOnePoint>().z;
  return (s.array().square().matrix() - meas_.y).squaredNorm() / (2.0 * static_cast<double>(meas_.m()));
}

TangentVector RealizationObjective::riemannian_gradient(const Point& p) const {
  require_psd(p);
  const Vector& z = p.as<PsdRankOnePoint>().z;
  const Vector s = meas_.a * z;
  const Vector r = s.array().square().matrix() - meas_.y;
  const Vector gu = meas_.a.transpose() * r.cwiseProduct(s) / (static_cast<double>(meas_.m()) * z.norm());
  if (!gu.allFinite()) throw NumericError("gradient has non-finite entries");
  return psd_gradient(p, gu);
}

Vector first_order_residual(const Vector& z, const Measurements& meas) {
  if (z.size() != meas.n()) throw DimensionError("z has the wrong length");
  const Vector s = meas.a * z;
  const Vector r = s.array().square().matrix() - meas.y;
  return meas.a.transpose() * r.cwiseProduct(s) / static_cast<double>(meas.m());
}

Matrix first_order_jacobian(const Vector& z, const Measurements& meas) {
  if (z.size() != meas.n()) throw DimensionError("z has the wrong length");
  const Vector s = meas.a * z;
  const Vector w = 3.0 * s.array().square().matrix() - meas.y;
  return meas.a.transpose() * (w.asDiagonal() * meas.a) / static_cast<double>(meas.m());
}

bool homogeneous_triviality_check(const Measurements& meas) {
  if (meas.m() < meas.n()) return false;
  Eigen::JacobiSVD<Matrix> svd(meas.a);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return false;
  const double cut = std::max(meas.m(), meas.n()) * std::numeric_limits<double>::epsilon() * sv(0);
  return sv(sv.size() - 1) > cut;
}

std::optional<Vector> newton_solve(const Measurements& meas, const Vector& z0, const NewtonOptions& opt) {
  Vector z = z0;
  Vector f = first_order_residual(z, meas);
  double fn = f.norm();
  for (int it = 0; it < opt.max_iters; ++it) {
    if (!std::isfinite(fn)) return std::nullopt;
    if (fn <= opt.tol) return z;
    const Matrix j = first_order_jacobian(z, meas);
    Eigen::JacobiSVD<Matrix> svd(j, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-13 * sv(0)) return std::nullopt;
    const Vector dz = svd.solve(-f);
    double t = 1.0;
    bool improved = false;
    while (t > 1e-12) {
      const Vector zt = z + t * dz;
      const Vector ft = first_order_residual(zt, meas);
      const double ftn = ft.norm();
      if (ftn < fn) {
        z = zt;
        f = ft;
        fn = ftn;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) return fn <= opt.tol ? std::optional<Vector>(z) : std::nullopt;
  }
  return fn <= opt.tol ? std::optional<Vector>(z) : std::nullopt;
}

std::vector<Vector> enumerate_critical_points(const Measurements& meas, int n_starts, double newton_tol,
                                              double cluster_tol, std::uint64_t seed) {
  if (meas.n() > 6) throw ParameterError("critical point enumeration is limited to n <= 6");
  if (n_starts < 1) throw ParameterError("n_starts must be positive");
  if (!homogeneous_triviality_check(meas)) {
    throw MisuseError("sensing vectors do not certify finitely many critical points");
  }
  const double xn = meas.x.norm();
  RandomStream rng(seed);
  NewtonOptions opt;
  opt.tol = newton_tol;
  std::vector<Vector> roots;
  for (int k = 0; k < n_starts; ++k) {
    Vector g = rng.normal_vector(meas.n());
    const double radius = rng.uniform(0.0, 1.5) * xn;
    const Vector z0 = g / g.norm() * radius;
    const auto root = newton_solve(meas, z0, opt);
    if (!root) continue;
    Vector z = *root;
    for (Index i = 0; i < z.size(); ++i) {
      if (z(i) != 0.0) {
        if (z(i) < 0.0) z = -z;
        break;
      }
    }
    const bool seen = std::any_of(roots.begin(), roots.end(), [&](const Vector& r) {
      return std::min((r - z).norm(), (r + z).norm()) < cluster_tol * xn;
    });
    if (!seen) roots.push_back(z);
  }
  std::sort(roots.begin(), roots.end(), [](const Vector& a, const Vector& b) {
    if (a.norm() != b.norm()) return a.norm() < b.norm();
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  return roots;
}

RingRegion::RingRegion(double d0) : delta0(d0) {
  if (!(d0 > 0.0 && d0 < 1.0 / 3.0)) throw ParameterError("ring region needs 0 < delta0 < 1/3");
}

bool RingRegion::contains(const Vector& z, const Vector& x) const {
  const double zn = z.squaredNorm();
  const double xn = x.squaredNorm();
  const double zx = z.dot(x);
  const double ratio = zn / xn;
  return zx * zx <= delta0 * zn * xn && ratio >= 1.0 / 3.0 - delta0 && ratio <= 1.0 / 3.0 + delta0;
}

double ring_rayleigh_bound(const Vector& z, const Measurements& meas, const Vector& x) {
  if (z.norm() == 0.0) throw SingularPointError("Rayleigh quotient undefined at z = 0");
  const Vector s = meas.a * z;
  const Vector t = meas.a * x;
  const Eigen::ArrayXd s2 = s.array().square();
  const Eigen::ArrayXd t2 = t.array().square();
  const double num = (3.0 * s2 * t2 - t2 * t2).sum() / static_cast<double>(meas.m());
  const double zx = z.dot(x);
  return num / (z.squaredNorm() * x.squaredNorm() + zx * zx);
}

double ring_lambda_bound(double d0, double d1) {
  const double q = 1.0 / 3.0 + d0;
  const double num = 3.0 * (1.0 + d1) * (q + 2.0 * d0 * q) - (3.0 - d1);
  const double den = q + d0 * q;
  return num / den;
}

TangentVector ring_saddle_direction(const Point& z_point, const Vector& x) {
  require_psd(z_point);
  const Vector& z = z_point.as<PsdRankOnePoint>().z;
  if (x.size() != z.size()) throw DimensionError("signal has the wrong length");
  const Vector u = z / z.norm();
  const double ux = u.dot(x);
  Vector v = x - ux * u;
  v -= u * u.dot(v);
  return TangentVector::psd(z_point, 2.0 * ux, std::move(v));
}

Point random_ring_point(const Vector& x, RandomStream& rng) {
  if (x.size() < 2) throw DimensionError("ring needs n >= 2");
  Vector g = rng.normal_vector(x.size());
  g -= x * (x.dot(g) / x.squaredNorm());
  g /= g.norm();
  return Point::psd_rank_one(g * (x.norm() / std::sqrt(3.0)));
}

}  // namespace saddle
