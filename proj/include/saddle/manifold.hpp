#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "saddle/errors.hpp"
#include "saddle/random.hpp"

namespace saddle {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kRankThreshold = 1e-12;

enum class ManifoldKind { Sphere, Stiefel, FixedRankAsym, PsdRankOne, Box };

const char* to_string(ManifoldKind kind);

/// The closed rectangle [-1,2] x [-1,1] used by the flat box manifold.
struct BoxBounds {
  static constexpr double x_lo = -1.0;
  static constexpr double x_hi = 2.0;
  static constexpr double y_lo = -1.0;
  static constexpr double y_hi = 1.0;
};

/// Shape data that determines a manifold (not a point on it).
///   Sphere:        rows = n
///   Stiefel:       rows = n, cols = m (frames of m columns)
///   FixedRankAsym: rows = n1, cols = n2, max_rank = r
///   PsdRankOne:    rows = n
///   Box:           no parameters
struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::Sphere;
  Index rows = 0;
  Index cols = 1;
  Index max_rank = 1;

  static ManifoldSpec sphere(Index n) { return {ManifoldKind::Sphere, n, 1, 1}; }
  static ManifoldSpec stiefel(Index n, Index m) { return {ManifoldKind::Stiefel, n, m, m}; }
  static ManifoldSpec fixed_rank(Index n1, Index n2, Index r) {
    return {ManifoldKind::FixedRankAsym, n1, n2, r};
  }
  static ManifoldSpec psd_rank_one(Index n) { return {ManifoldKind::PsdRankOne, n, n, 1}; }
  static ManifoldSpec box() { return {ManifoldKind::Box, 2, 1, 2}; }

  Index ambient_rows() const;
  Index ambient_cols() const;
  void validate() const;
};

struct SpherePoint {
  Vector z;
};

struct StiefelPoint {
  Matrix frame;
};

/// Compact SVD factors U diag(sigma) V^T with s = sigma.size() <= max_rank.
struct FixedRankPoint {
  Matrix u;
  Vector sigma;
  Matrix v;
  Index max_rank;
};

/// The rank-one PSD matrix z z^T, stored by its factor.
struct PsdRankOnePoint {
  Vector z;
};

struct BoxPoint {
  double x;
  double y;
};

/// A validated point on one of the supported manifolds. Immutable.
class Point {
 public:
  using Data = std::variant<SpherePoint, StiefelPoint, FixedRankPoint, PsdRankOnePoint, BoxPoint>;

  static Point sphere(Vector z);
  static Point stiefel(Matrix frame);
  static Point fixed_rank(Matrix u, Vector sigma, Matrix v, Index max_rank);
  /// Compact SVD of `x`; throws InvalidPointError when rank(x) > max_rank.
  static Point fixed_rank_from_matrix(const Matrix& x, Index max_rank);
  static Point psd_rank_one(Vector z);
  static Point box(double x, double y);

  ManifoldKind kind() const;
  ManifoldSpec spec() const;
  const Data& data() const { return data_; }

  template <class T>
  const T& as() const;

  /// The point as an element of the ambient space (vectors are n x 1).
  Matrix ambient() const;
  Index ambient_rows() const;
  Index ambient_cols() const;

  /// Current rank s of a bounded-rank point (1 for PsdRankOne).
  Index rank() const;

  /// PsdRankOne factor with its first nonzero entry made positive. z and -z
  /// represent the same matrix, so comparisons should use this form.
  Vector canonical_factor() const;

 private:
  explicit Point(Data data) : data_(std::move(data)) {}
  Data data_;
};

template <class T>
const T& Point::as() const {
  if (const T* held = std::get_if<T>(&data_)) return *held;
  throw MisuseError("point is not of the requested manifold kind");
}

/// Exact representation equality (same kind, same stored factors).
bool same_point(const Point& a, const Point& b);

/// Structured form of a PsdRankOne tangent vector:
/// xi = w u u^T + u v^T + v u^T with u = z/|z| and v orthogonal to u.
struct PsdStructure {
  double w = 0.0;
  Vector v;
};

/// An ambient element tagged with its base point and known to lie in the
/// tangent space (or, for rank-deficient bounded-rank points, the tangent cone).
class TangentVector {
 public:
  /// Validates the tangent constraint for sphere, Stiefel and PsdRankOne bases.
  static TangentVector checked(Point base, Matrix ambient);
  static TangentVector psd(Point base, double w, Vector v);
  static TangentVector zero(Point base);

  const Point& base() const { return base_; }
  const Matrix& ambient() const { return ambient_; }
  const std::optional<PsdStructure>& psd_structure() const { return psd_; }

  double norm() const { return ambient_.norm(); }
  TangentVector scaled(double c) const;
  /// Sum of two tangent vectors at the same base.
  TangentVector plus(const TangentVector& other) const;

 private:
  friend TangentVector project_tangent_cone(const Point& p, const Matrix& y);
  TangentVector(Point base, Matrix ambient, std::optional<PsdStructure> psd)
      : base_(std::move(base)), ambient_(std::move(ambient)), psd_(std::move(psd)) {}

  Point base_;
  Matrix ambient_;
  std::optional<PsdStructure> psd_;
};

/// Orthogonal projection of `y` onto T_p (the Frobenius metric is inherited).
TangentVector project_tangent(const Point& p, const Matrix& y);

/// Tangent-cone projection at a rank-deficient bounded-rank point: tangent
/// projection at the rank-s stratum plus a best rank-(r - s) approximation of
/// the residual. When the residual has rank below r - s all of it is kept.
TangentVector project_tangent_cone(const Point& p, const Matrix& y);

/// True when p is a FixedRankAsym point with rank s < r.
bool is_rank_deficient(const Point& p);

/// Descent-direction projection used by PGD: the cone projection at
/// rank-deficient points, the tangent projection elsewhere.
TangentVector project_feasible(const Point& p, const Matrix& y);

/// Sphere: normalization. Stiefel: Q factor with positive diag(R).
/// FixedRankAsym: best rank-<=r approximation. PsdRankOne: best rank-1 PSD
/// approximation. Box: clamp to the rectangle.
Point retract(const Point& p, const TangentVector& xi);

/// Frobenius inner product of two tangent vectors at p.
double inner(const Point& p, const TangentVector& xi, const TangentVector& zeta);

/// Analytic dimension of T_p.
Index tangent_dimension(const Point& p);

/// Numerical rank of the tangent projector applied to the ambient coordinate
/// basis. Intended for small ambient spaces (cross-check of tangent_dimension).
Index numerical_tangent_rank(const Point& p);

/// Orthonormal basis of T_p, one column per basis vector, each column the
/// column-major vectorization of an ambient element.
Matrix tangent_basis(const Point& p);

/// Turns a vectorized ambient column back into an ambient matrix shaped for p.
Matrix unvectorize(const Point& p, const Eigen::Ref<const Vector>& column);

/// Second-order term of the natural retraction at a bounded-rank point:
/// U_p S^{-1} V_p^T with U_p = (I - UU^T) xi V, V_p = (I - VV^T) xi^T U.
/// For PsdRankOne this is v v^T / |Z|_F.
Matrix retraction_second_order_term(const Point& p, const TangentVector& xi);

struct RetractionOrderReport {
  std::vector<double> alphas;
  /// |R(p + a xi) - (p + a xi)| / a.
  std::vector<double> residual_first;
  /// |R(p + a xi) - (p + a xi + a^2 eta)| / a  (bounded-rank points only).
  std::vector<double> residual_second;
  /// Least-squares log-log slopes; +inf when every residual vanishes.
  double slope_first = 0.0;
  std::optional<double> slope_second;
};

/// Smallest admissible step in retraction_order_check: third-order remainders
/// below this scale are lost to rounding.
double retraction_check_floor();

RetractionOrderReport retraction_order_check(const Point& p, const TangentVector& xi,
                                             std::span<const double> alphas);

/// Sphere: normalized Gaussian. Stiefel: Q factor of a Gaussian matrix.
/// FixedRankAsym: product of Gaussian factors of rank r. PsdRankOne: Gaussian
/// factor. Box: uniform on the rectangle.
Point random_point(const ManifoldSpec& spec, std::uint64_t seed);
Point random_point(const ManifoldSpec& spec, RandomStream& rng);

/// Projection of a Gaussian ambient element onto T_p.
TangentVector random_tangent(const Point& p, RandomStream& rng);

}  // namespace saddle
