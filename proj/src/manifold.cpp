#include "saddle/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace saddle {

namespace {

constexpr double kUnitTol = 1e-12;
constexpr double kFrameTol = 1e-10;
constexpr double kTangentTol = 1e-10;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + " has non-finite entries");
}

void require_shape(const Point& p, const Matrix& y) {
  if (y.rows() != p.ambient_rows() || y.cols() != p.ambient_cols()) {
    throw DimensionError("ambient shape " + std::to_string(y.rows()) + "x" +
                         std::to_string(y.cols()) + " does not match " +
                         std::to_string(p.ambient_rows()) + "x" +
                         std::to_string(p.ambient_cols()));
  }
}

void require_orthonormal(const Matrix& q, const char* what) {
  const Index k = q.cols();
  if ((q.transpose() * q - Matrix::Identity(k, k)).norm() > kFrameTol) {
    throw InvalidPointError(std::string(what) + " columns are not orthonormal");
  }
}

// Q factor of a thin QR with diag(R) made positive.
Matrix qf(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  Matrix q = qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
  const Matrix& r = qr.matrixQR();
  for (Index j = 0; j < y.cols(); ++j) {
    if (r(j, j) == 0.0) throw DegenerateRetractionError("qf: rank-deficient input");
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

// Best rank-<=r approximation as a fixed-rank point. When `strict` the
// numerical rank must not exceed r.
Point truncate_to_rank(const Matrix& x, Index r, bool strict) {
  require_finite(x, "matrix");
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Index s = 0;
  if (sv.size() > 0 && sv(0) > 0.0) {
    const double cut = kRankThreshold * sv(0);
    while (s < sv.size() && sv(s) > cut) ++s;
  }
  if (strict && s > r) {
    throw InvalidPointError("matrix has numerical rank " + std::to_string(s) +
                            " above the bound " + std::to_string(r));
  }
  s = std::min(s, r);
  return Point::fixed_rank(svd.matrixU().leftCols(s), sv.head(s), svd.matrixV().leftCols(s), r);
}

PsdStructure psd_structure_of(const Point& p, const Matrix& xi) {
  const Vector& z = p.as<PsdRankOnePoint>().z;
  const Vector u = z / z.norm();
  const Vector g = xi * u;
  PsdStructure st;
  st.w = u.dot(g);
  st.v = g - st.w * u;
  return st;
}

Matrix psd_ambient(const Vector& u, double w, const Vector& v) {
  return w * u * u.transpose() + u * v.transpose() + v * u.transpose();
}

// Orthonormal complement of a unit vector u (n x (n-1)).
Matrix complement_of(const Vector& u) {
  const Matrix um = u;
  Eigen::HouseholderQR<Matrix> qr(um);
  Matrix q = qr.householderQ();
  return q.rightCols(u.size() - 1);
}

double fit_slope(const std::vector<double>& alphas, const std::vector<double>& res) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (res[i] > 0.0) {
      lx.push_back(std::log10(alphas[i]));
      ly.push_back(std::log10(res[i]));
    }
  }
  if (lx.size() < 2) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

const char* to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::Sphere: return "sphere";
    case ManifoldKind::Stiefel: return "stiefel";
    case ManifoldKind::FixedRankAsym: return "fixed-rank";
    case ManifoldKind::PsdRankOne: return "psd-rank-one";
    case ManifoldKind::Box: return "box";
  }
  return "unknown";
}

Index ManifoldSpec::ambient_rows() const { return kind == ManifoldKind::Box ? 2 : rows; }

Index ManifoldSpec::ambient_cols() const {
  switch (kind) {
    case ManifoldKind::Sphere:
    case ManifoldKind::Box: return 1;
    case ManifoldKind::PsdRankOne: return rows;
    default: return cols;
  }
}

void ManifoldSpec::validate() const {
  switch (kind) {
    case ManifoldKind::Sphere:
      if (rows < 2) throw ParameterError("sphere needs n >= 2");
      break;
    case ManifoldKind::Stiefel:
      if (cols < 1 || rows < cols) throw ParameterError("stiefel needs 1 <= m <= n");
      break;
    case ManifoldKind::FixedRankAsym:
      if (rows < 1 || cols < 1 || max_rank < 1 || max_rank > std::min(rows, cols)) {
        throw ParameterError("fixed-rank needs 1 <= r <= min(n1, n2)");
      }
      break;
    case ManifoldKind::PsdRankOne:
      if (rows < 1) throw ParameterError("psd-rank-one needs n >= 1");
      break;
    case ManifoldKind::Box: break;
  }
}

Point Point::sphere(Vector z) {
  require_finite(z, "sphere point");
  if (z.size() < 2) throw DimensionError("sphere needs n >= 2");
  if (std::abs(z.norm() - 1.0) > kUnitTol) throw InvalidPointError("sphere point is not unit norm");
  return Point(SpherePoint{std::move(z)});
}

Point Point::stiefel(Matrix frame) {
  require_finite(frame, "stiefel frame");
  if (frame.cols() < 1 || frame.rows() < frame.cols()) {
    throw DimensionError("stiefel frame must be n x m with 1 <= m <= n");
  }
  require_orthonormal(frame, "stiefel frame");
  return Point(StiefelPoint{std::move(frame)});
}

Point Point::fixed_rank(Matrix u, Vector sigma, Matrix v, Index max_rank) {
  require_finite(u, "U");
  require_finite(v, "V");
  require_finite(sigma, "sigma");
  const Index s = sigma.size();
  if (u.cols() != s || v.cols() != s || u.rows() < 1 || v.rows() < 1) {
    throw DimensionError("fixed-rank factor shapes are inconsistent");
  }
  if (max_rank < 1 || max_rank > std::min(u.rows(), v.rows())) {
    throw ParameterError("fixed-rank bound r must satisfy 1 <= r <= min(n1, n2)");
  }
  if (s > max_rank) throw InvalidPointError("rank exceeds the bound r");
  require_orthonormal(u, "U");
  require_orthonormal(v, "V");
  for (Index i = 0; i < s; ++i) {
    if (!(sigma(i) > kRankThreshold * sigma(0))) {
      throw InvalidPointError("singular values must be positive and above the rank threshold");
    }
    if (i > 0 && sigma(i) > sigma(i - 1)) throw InvalidPointError("singular values not descending");
  }
  return Point(FixedRankPoint{std::move(u), std::move(sigma), std::move(v), max_rank});
}

Point Point::fixed_rank_from_matrix(const Matrix& x, Index max_rank) {
  return truncate_to_rank(x, max_rank, true);
}

Point Point::psd_rank_one(Vector z) {
  require_finite(z, "psd factor");
  if (z.size() < 1) throw DimensionError("psd factor must be nonempty");
  if (z.norm() == 0.0) throw InvalidPointError("psd rank-one factor must be nonzero");
  return Point(PsdRankOnePoint{std::move(z)});
}

Point Point::box(double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y)) throw NumericError("box point is not finite");
  if (x < BoxBounds::x_lo || x > BoxBounds::x_hi || y < BoxBounds::y_lo || y > BoxBounds::y_hi) {
    throw InvalidPointError("box point outside [-1,2] x [-1,1]");
  }
  return Point(BoxPoint{x, y});
}

ManifoldKind Point::kind() const {
  return std::visit(Overloaded{
                        [](const SpherePoint&) { return ManifoldKind::Sphere; },
                        [](const StiefelPoint&) { return ManifoldKind::Stiefel; },
                        [](const FixedRankPoint&) { return ManifoldKind::FixedRankAsym; },
                        [](const PsdRankOnePoint&) { return ManifoldKind::PsdRankOne; },
                        [](const BoxPoint&) { return ManifoldKind::Box; },
                    },
                    data_);
}

ManifoldSpec Point::spec() const {
  return std::visit(
      Overloaded{
          [](const SpherePoint& d) { return ManifoldSpec::sphere(d.z.size()); },
          [](const StiefelPoint& d) { return ManifoldSpec::stiefel(d.frame.rows(), d.frame.cols()); },
          [](const FixedRankPoint& d) {
            return ManifoldSpec::fixed_rank(d.u.rows(), d.v.rows(), d.max_rank);
          },
          [](const PsdRankOnePoint& d) { return ManifoldSpec::psd_rank_one(d.z.size()); },
          [](const BoxPoint&) { return ManifoldSpec::box(); },
      },
      data_);
}

Matrix Point::ambient() const {
  return std::visit(Overloaded{
                        [](const SpherePoint& d) -> Matrix { return d.z; },
                        [](const StiefelPoint& d) -> Matrix { return d.frame; },
                        [](const FixedRankPoint& d) -> Matrix {
                          return d.u * d.sigma.asDiagonal() * d.v.transpose();
                        },
                        [](const PsdRankOnePoint& d) -> Matrix { return d.z * d.z.transpose(); },
                        [](const BoxPoint& d) -> Matrix { return Eigen::Vector2d(d.x, d.y); },
                    },
                    data_);
}

Index Point::ambient_rows() const { return spec().ambient_rows(); }
Index Point::ambient_cols() const { return spec().ambient_cols(); }

Index Point::rank() const {
  if (const auto* d = std::get_if<FixedRankPoint>(&data_)) return d->sigma.size();
  if (std::holds_alternative<PsdRankOnePoint>(data_)) return 1;
  throw MisuseError("rank is defined for bounded-rank points only");
}

Vector Point::canonical_factor() const {
  Vector z = as<PsdRankOnePoint>().z;
  for (Index i = 0; i < z.size(); ++i) {
    if (z(i) != 0.0) {
      if (z(i) < 0.0) z = -z;
      break;
    }
  }
  return z;
}

bool same_point(const Point& a, const Point& b) {
  if (a.kind() != b.kind()) return false;
  return std::visit(
      Overloaded{
          [&](const SpherePoint& d) { return d.z == b.as<SpherePoint>().z; },
          [&](const StiefelPoint& d) {
            const Matrix& o = b.as<StiefelPoint>().frame;
            return d.frame.rows() == o.rows() && d.frame.cols() == o.cols() && d.frame == o;
          },
          [&](const FixedRankPoint& d) {
            const auto& o = b.as<FixedRankPoint>();
            return d.max_rank == o.max_rank && d.sigma.size() == o.sigma.size() &&
                   d.u.rows() == o.u.rows() && d.v.rows() == o.v.rows() && d.sigma == o.sigma &&
                   d.u == o.u && d.v == o.v;
          },
          [&](const PsdRankOnePoint& d) {
            const Vector& o = b.as<PsdRankOnePoint>().z;
            return d.z.size() == o.size() && d.z == o;
          },
          [&](const BoxPoint& d) {
            const auto& o = b.as<BoxPoint>();
            return d.x == o.x && d.y == o.y;
          },
      },
      a.data());
}

TangentVector TangentVector::checked(Point base, Matrix ambient) {
  require_shape(base, ambient);
  require_finite(ambient, "tangent vector");
  const double tol = kTangentTol * std::max(1.0, ambient.norm());
  switch (base.kind()) {
    case ManifoldKind::Sphere: {
      if (std::abs(base.as<SpherePoint>().z.dot(ambient.col(0))) > tol) {
        throw InvalidPointError("vector is not tangent to the sphere");
      }
      break;
    }
    case ManifoldKind::Stiefel: {
      const Matrix& z = base.as<StiefelPoint>().frame;
      const Matrix zx = z.transpose() * ambient;
      if ((zx + zx.transpose()).norm() > tol) {
        throw InvalidPointError("vector is not tangent to the Stiefel manifold");
      }
      break;
    }
    case ManifoldKind::PsdRankOne: {
      PsdStructure st = psd_structure_of(base, ambient);
      const Vector& z = base.as<PsdRankOnePoint>().z;
      const Matrix rebuilt = psd_ambient(z / z.norm(), st.w, st.v);
      if ((rebuilt - ambient).norm() > tol) {
        throw InvalidPointError("vector is not tangent to the rank-one PSD manifold");
      }
      return TangentVector(std::move(base), rebuilt, std::move(st));
    }
    default: break;
  }
  return TangentVector(std::move(base), std::move(ambient), std::nullopt);
}

TangentVector TangentVector::psd(Point base, double w, Vector v) {
  const Vector& z = base.as<PsdRankOnePoint>().z;
  if (v.size() != z.size()) throw DimensionError("psd structure vector has wrong length");
  if (!std::isfinite(w) || !v.allFinite()) throw NumericError("psd structure is not finite");
  const Vector u = z / z.norm();
  if (std::abs(u.dot(v)) > kTangentTol * std::max(1.0, v.norm())) {
    throw InvalidPointError("psd structure vector v is not orthogonal to u");
  }
  Matrix amb = psd_ambient(u, w, v);
  return TangentVector(std::move(base), std::move(amb), PsdStructure{w, std::move(v)});
}

TangentVector TangentVector::zero(Point base) {
  Matrix amb = Matrix::Zero(base.ambient_rows(), base.ambient_cols());
  std::optional<PsdStructure> st;
  if (base.kind() == ManifoldKind::PsdRankOne) {
    st = PsdStructure{0.0, Vector::Zero(base.ambient_rows())};
  }
  return TangentVector(std::move(base), std::move(amb), std::move(st));
}

TangentVector TangentVector::scaled(double c) const {
  std::optional<PsdStructure> st;
  if (psd_) st = PsdStructure{c * psd_->w, c * psd_->v};
  return TangentVector(base_, c * ambient_, std::move(st));
}

TangentVector TangentVector::plus(const TangentVector& other) const {
  if (!same_point(base_, other.base_)) throw BaseMismatchError("tangent vectors at different points");
  std::optional<PsdStructure> st;
  if (psd_ && other.psd_) st = PsdStructure{psd_->w + other.psd_->w, psd_->v + other.psd_->v};
  return TangentVector(base_, ambient_ + other.ambient_, std::move(st));
}

TangentVector project_tangent(const Point& p, const Matrix& y) {
  require_shape(p, y);
  require_finite(y, "ambient input");
  switch (p.kind()) {
    case ManifoldKind::Sphere: {
      const Vector& z = p.as<SpherePoint>().z;
      Vector out = y.col(0) - z * z.dot(y.col(0));
      return TangentVector::checked(p, out);
    }
    case ManifoldKind::Stiefel: {
      const Matrix& z = p.as<StiefelPoint>().frame;
      const Matrix zy = z.transpose() * y;
      Matrix out = y - z * (0.5 * (zy + zy.transpose()));
      return TangentVector::checked(p, std::move(out));
    }
    case ManifoldKind::FixedRankAsym: {
      const auto& d = p.as<FixedRankPoint>();
      const Matrix uty = d.u.transpose() * y;
      const Matrix yv = y * d.v;
      Matrix out = d.u * uty + yv * d.v.transpose() - d.u * (uty * d.v) * d.v.transpose();
      return TangentVector::checked(p, std::move(out));
    }
    case ManifoldKind::PsdRankOne: {
      const Vector& z = p.as<PsdRankOnePoint>().z;
      const Vector u = z / z.norm();
      const Vector g = 0.5 * (y * u + y.transpose() * u);
      const double w = u.dot(g);
      Vector v = g - w * u;
      v -= u * u.dot(v);
      return TangentVector::psd(p, w, std::move(v));
    }
    case ManifoldKind::Box: return TangentVector::checked(p, y);
  }
  throw MisuseError("unknown manifold kind");
}

TangentVector project_tangent_cone(const Point& p, const Matrix& y) {
  if (!is_rank_deficient(p)) {
    throw MisuseError("tangent cone projection needs a rank-deficient fixed-rank point");
  }
  const auto& d = p.as<FixedRankPoint>();
  const Index k = d.max_rank - d.sigma.size();
  TangentVector t = project_tangent(p, y);
  const Matrix resid = y - t.ambient();
  Eigen::BDCSVD<Matrix> svd(resid, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Matrix extra = Matrix::Zero(y.rows(), y.cols());
  if (sv.size() > 0 && sv(0) > 0.0) {
    const double cut = kRankThreshold * sv(0);
    for (Index i = 0; i < std::min(k, sv.size()) && sv(i) > cut; ++i) {
      extra += sv(i) * svd.matrixU().col(i) * svd.matrixV().col(i).transpose();
    }
  }
  return TangentVector(p, t.ambient() + extra, std::nullopt);
}

bool is_rank_deficient(const Point& p) {
  if (p.kind() != ManifoldKind::FixedRankAsym) return false;
  const auto& d = p.as<FixedRankPoint>();
  return d.sigma.size() < d.max_rank;
}

TangentVector project_feasible(const Point& p, const Matrix& y) {
  return is_rank_deficient(p) ? project_tangent_cone(p, y) : project_tangent(p, y);
}

Point retract(const Point& p, const TangentVector& xi) {
  if (!same_point(p, xi.base())) throw BaseMismatchError("tangent vector is based elsewhere");
  const Matrix& a = xi.ambient();
  require_finite(a, "tangent vector");
  switch (p.kind()) {
    case ManifoldKind::Sphere: {
      const Vector y = p.as<SpherePoint>().z + a.col(0);
      const double nrm = y.norm();
      if (!(nrm > 0.0) || !std::isfinite(nrm)) {
        throw DegenerateRetractionError("p + xi vanishes on the sphere");
      }
      return Point::sphere(y / nrm);
    }
    case ManifoldKind::Stiefel: {
      if (a.isZero(0.0)) return p;
      return Point::stiefel(qf(p.as<StiefelPoint>().frame + a));
    }
    case ManifoldKind::FixedRankAsym: {
      if (a.isZero(0.0)) return p;
      return truncate_to_rank(p.ambient() + a, p.as<FixedRankPoint>().max_rank, false);
    }
    case ManifoldKind::PsdRankOne: {
      if (a.isZero(0.0)) return p;
      const Vector& z = p.as<PsdRankOnePoint>().z;
      const double zn = z.norm();
      const Vector u = z / zn;
      const PsdStructure st = xi.psd_structure() ? *xi.psd_structure() : psd_structure_of(p, a);
      // p + xi restricted to span{u, v/|v|} is [[|z|^2 + w, |v|], [|v|, 0]].
      const double alpha = zn * zn + st.w;
      const double beta = st.v.norm();
      double lambda;
      const double rad = std::hypot(0.5 * alpha, beta);
      if (alpha >= 0.0) {
        lambda = 0.5 * alpha + rad;
      } else {
        lambda = beta * beta / (rad - 0.5 * alpha);
      }
      if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw DegenerateRetractionError("p + xi has no positive eigenvalue");
      }
      Vector dir;
      if (beta == 0.0) {
        dir = u;
      } else {
        const double c1 = lambda;
        const double c2 = beta;
        const double cn = std::hypot(c1, c2);
        dir = (c1 / cn) * u + (c2 / (cn * beta)) * st.v;
      }
      return Point::psd_rank_one(std::sqrt(lambda) * dir);
    }
    case ManifoldKind::Box: {
      const auto& b = p.as<BoxPoint>();
      const double x = std::clamp(b.x + a(0, 0), BoxBounds::x_lo, BoxBounds::x_hi);
      const double y = std::clamp(b.y + a(1, 0), BoxBounds::y_lo, BoxBounds::y_hi);
      return Point::box(x, y);
    }
  }
  throw MisuseError("unknown manifold kind");
}

double inner(const Point& p, const TangentVector& xi, const TangentVector& zeta) {
  if (!same_point(p, xi.base()) || !same_point(p, zeta.base())) {
    throw BaseMismatchError("inner product of tangent vectors at different points");
  }
  return xi.ambient().cwiseProduct(zeta.ambient()).sum();
}

Index tangent_dimension(const Point& p) {
  const ManifoldSpec s = p.spec();
  switch (p.kind()) {
    case ManifoldKind::Sphere: return s.rows - 1;
    case ManifoldKind::Stiefel: return s.rows * s.cols - s.cols * (s.cols + 1) / 2;
    case ManifoldKind::FixedRankAsym: {
      const Index r = p.rank();
      return (s.rows + s.cols - r) * r;
    }
    case ManifoldKind::PsdRankOne: return s.rows;
    case ManifoldKind::Box: return 2;
  }
  return 0;
}

namespace {

Matrix projector_matrix(const Point& p) {
  const Index rows = p.ambient_rows();
  const Index cols = p.ambient_cols();
  const Index n = rows * cols;
  Matrix out(n, n);
  Matrix e = Matrix::Zero(rows, cols);
  for (Index k = 0; k < n; ++k) {
    e(k % rows, k / rows) = 1.0;
    const Matrix t = project_tangent(p, e).ambient();
    out.col(k) = Eigen::Map<const Vector>(t.data(), n);
    e(k % rows, k / rows) = 0.0;
  }
  return out;
}

}  // namespace

Index numerical_tangent_rank(const Point& p) {
  const Matrix pm = projector_matrix(p);
  Eigen::ColPivHouseholderQR<Matrix> qr(pm);
  qr.setThreshold(1e-8);
  return qr.rank();
}

Matrix tangent_basis(const Point& p) {
  const Index d = tangent_dimension(p);
  const Index rows = p.ambient_rows();
  const Index cols = p.ambient_cols();
  if (p.kind() == ManifoldKind::Box) return Matrix::Identity(2, 2);
  if (p.kind() == ManifoldKind::PsdRankOne) {
    const Vector& z = p.as<PsdRankOnePoint>().z;
    const Vector u = z / z.norm();
    const Index n = u.size();
    Matrix out(n * n, n);
    Matrix uu = u * u.transpose();
    out.col(0) = Eigen::Map<const Vector>(uu.data(), n * n);
    if (n > 1) {
      const Matrix q = complement_of(u);
      for (Index j = 0; j < n - 1; ++j) {
        Matrix b = (u * q.col(j).transpose() + q.col(j) * u.transpose()) / std::sqrt(2.0);
        out.col(j + 1) = Eigen::Map<const Vector>(b.data(), n * n);
      }
    }
    return out;
  }
  if (p.kind() == ManifoldKind::Sphere) {
    return complement_of(p.as<SpherePoint>().z);
  }
  const Matrix pm = projector_matrix(p);
  Eigen::ColPivHouseholderQR<Matrix> qr(pm);
  Matrix q = qr.householderQ() * Matrix::Identity(rows * cols, d);
  return q;
}

Matrix unvectorize(const Point& p, const Eigen::Ref<const Vector>& column) {
  const Index rows = p.ambient_rows();
  const Index cols = p.ambient_cols();
  if (column.size() != rows * cols) throw DimensionError("vectorized column has wrong length");
  return Eigen::Map<const Matrix>(column.data(), rows, cols);
}

Matrix retraction_second_order_term(const Point& p, const TangentVector& xi) {
  if (!same_point(p, xi.base())) throw BaseMismatchError("tangent vector is based elsewhere");
  const Matrix& a = xi.ambient();
  switch (p.kind()) {
    case ManifoldKind::Sphere: {
      const Vector& z = p.as<SpherePoint>().z;
      return -0.5 * a.squaredNorm() * z;
    }
    case ManifoldKind::FixedRankAsym: {
      const auto& d = p.as<FixedRankPoint>();
      if (d.sigma.size() == 0) throw MisuseError("second-order term undefined at the zero matrix");
      const Matrix xv = a * d.v;
      const Matrix up = xv - d.u * (d.u.transpose() * xv);
      const Matrix xtu = a.transpose() * d.u;
      const Matrix vp = xtu - d.v * (d.v.transpose() * xtu);
      return up * d.sigma.cwiseInverse().asDiagonal() * vp.transpose();
    }
    case ManifoldKind::PsdRankOne: {
      const Vector& z = p.as<PsdRankOnePoint>().z;
      const PsdStructure st = xi.psd_structure() ? *xi.psd_structure() : psd_structure_of(p, a);
      return st.v * st.v.transpose() / z.squaredNorm();
    }
    case ManifoldKind::Box: return Matrix::Zero(2, 1);
    case ManifoldKind::Stiefel: break;
  }
  throw MisuseError("no closed-form second-order term for this manifold");
}

double retraction_check_floor() { return std::cbrt(std::numeric_limits<double>::epsilon()); }

RetractionOrderReport retraction_order_check(const Point& p, const TangentVector& xi,
                                             std::span<const double> alphas) {
  if (alphas.size() < 4) throw ParameterError("need at least 4 step scales");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double a : alphas) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("step scales must be positive");
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  if (lo < retraction_check_floor()) {
    throw IllConditionedError("step scales below the double-precision floor");
  }
  if (hi / lo < 1e3 * (1.0 - 1e-12)) throw ParameterError("step scales must span at least 4 decades");

  RetractionOrderReport rep;
  rep.alphas.assign(alphas.begin(), alphas.end());
  const bool has_second = p.kind() != ManifoldKind::Stiefel &&
                          !(p.kind() == ManifoldKind::FixedRankAsym && p.rank() == 0);
  Matrix eta;
  if (has_second) eta = retraction_second_order_term(p, xi);
  const Matrix base = p.ambient();
  for (double a : alphas) {
    const Matrix q = retract(p, xi.scaled(a)).ambient();
    const Matrix lin = base + a * xi.ambient();
    rep.residual_first.push_back((q - lin).norm() / a);
    if (has_second) rep.residual_second.push_back((q - lin - a * a * eta).norm() / a);
  }
  rep.slope_first = fit_slope(rep.alphas, rep.residual_first);
  if (has_second) rep.slope_second = fit_slope(rep.alphas, rep.residual_second);
  return rep;
}

Point random_point(const ManifoldSpec& spec, std::uint64_t seed) {
  RandomStream rng(seed);
  return random_point(spec, rng);
}

Point random_point(const ManifoldSpec& spec, RandomStream& rng) {
  spec.validate();
  switch (spec.kind) {
    case ManifoldKind::Sphere: {
      Vector z = rng.normal_vector(spec.rows);
      return Point::sphere(z / z.norm());
    }
    case ManifoldKind::Stiefel: return Point::stiefel(qf(rng.normal_matrix(spec.rows, spec.cols)));
    case ManifoldKind::FixedRankAsym: {
      const Matrix g1 = rng.normal_matrix(spec.rows, spec.max_rank);
      const Matrix g2 = rng.normal_matrix(spec.cols, spec.max_rank);
      return Point::fixed_rank_from_matrix(g1 * g2.transpose(), spec.max_rank);
    }
    case ManifoldKind::PsdRankOne: return Point::psd_rank_one(rng.normal_vector(spec.rows));
    case ManifoldKind::Box: {
      const double x = rng.uniform(BoxBounds::x_lo, BoxBounds::x_hi);
      const double y = rng.uniform(BoxBounds::y_lo, BoxBounds::y_hi);
      return Point::box(x, y);
    }
  }
  throw MisuseError("unknown manifold kind");
}

TangentVector random_tangent(const Point& p, RandomStream& rng) {
  return project_tangent(p, rng.normal_matrix(p.ambient_rows(), p.ambient_cols()));
}

}  // namespace saddle
