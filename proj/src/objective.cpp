#include "saddle/objective.hpp"

#include <algorithm>
#include <cmath>

namespace saddle {

Matrix Objective::hessian_action(const Matrix&, const Matrix&) const {
  throw CapabilityError("objective has no ambient Hessian action");
}

TangentVector Objective::riemannian_gradient(const Point& p) const {
  Matrix g = gradient_at(p);
  if (!g.allFinite()) throw NumericError("gradient has non-finite entries");
  return project_feasible(p, g);
}

Matrix FunctionObjective::hessian_action(const Matrix& y, const Matrix& d) const {
  if (!h_) throw CapabilityError("objective has no ambient Hessian action");
  return h_(y, d);
}

double fd_gradient_check(const Objective& obj, const Point& p, double h, std::uint64_t seed) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw ParameterError("finite-difference step must lie in [1e-7, 1e-3]");
  const Matrix y = p.ambient();
  const Matrix g = obj.gradient(y);
  if (!g.allFinite()) throw NumericError("gradient has non-finite entries");
  RandomStream rng(seed);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Matrix d = rng.normal_matrix(y.rows(), y.cols());
    const double fp = obj.value(y + h * d);
    const double fm = obj.value(y - h * d);
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw NumericError("objective value is not finite");
    const double fd = (fp - fm) / (2.0 * h);
    const double an = g.cwiseProduct(d).sum();
    const double scale = g.norm() * d.norm();
    const double err = scale > 0.0 ? std::abs(fd - an) / scale : std::abs(fd - an);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace saddle
