#include "saddle/hessian.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace saddle {

namespace {

Matrix sym(const Matrix& a) { return 0.5 * (a + a.transpose()); }

TangentVector basis_vector(const Point& p, const Matrix& basis, Index i) {
  return project_tangent(p, unvectorize(p, basis.col(i)));
}

Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix analytic_apply(const Objective& obj, const Point& p, const TangentVector& xi) {
  if (!obj.has_hessian_action()) {
    throw CapabilityError("analytic Hessian requested but the objective has no Hessian action");
  }
  const Matrix y = p.ambient();
  const Matrix& a = xi.ambient();
  const Matrix d = obj.hessian_action(y, a);
  switch (p.kind()) {
    case ManifoldKind::Sphere: {
      const Matrix g = obj.gradient_at(p);
      const double zg = p.as<SpherePoint>().z.dot(g.col(0));
      return project_tangent(p, d - zg * a).ambient();
    }
    case ManifoldKind::Stiefel: {
      const Matrix g = obj.gradient_at(p);
      const Matrix& z = p.as<StiefelPoint>().frame;
      return project_tangent(p, d - a * sym(z.transpose() * g)).ambient();
    }
    case ManifoldKind::FixedRankAsym: {
      const auto& fr = p.as<FixedRankPoint>();
      if (fr.sigma.size() == 0) return project_feasible(p, d).ambient();
      const Matrix g = obj.gradient_at(p);
      const Matrix& u = fr.u;
      const Matrix& v = fr.v;
      const Vector sinv = fr.sigma.cwiseInverse();
      const Matrix xv = a * v;
      const Matrix up = xv - u * (u.transpose() * xv);
      const Matrix xtu = a.transpose() * u;
      const Matrix vp = xtu - v * (v.transpose() * xtu);
      // U S^-1 Up^T G (I - VV^T)
      Matrix tg = up.transpose() * g;
      tg -= (tg * v) * v.transpose();
      const Matrix m1 = u * sinv.asDiagonal() * tg;
      // (I - UU^T) G Vp S^-1 V^T
      Matrix gv = g * vp;
      gv -= u * (u.transpose() * gv);
      const Matrix m2 = gv * sinv.asDiagonal() * v.transpose();
      return project_tangent(p, d + m1 + m2).ambient();
    }
    case ManifoldKind::PsdRankOne: {
      const Matrix g = obj.gradient_at(p);
      const Vector& z = p.as<PsdRankOnePoint>().z;
      const double sigma = z.squaredNorm();
      const Vector u = z / z.norm();
      const Vector v = xi.psd_structure() ? xi.psd_structure()->v : project_tangent(p, a).psd_structure()->v;
      // u v^T G (I - uu^T) / sigma and its transpose partner
      Vector gtv = g.transpose() * v;
      gtv -= u * u.dot(gtv);
      Vector gv = g * v;
      gv -= u * u.dot(gv);
      const Matrix extra = (u * gtv.transpose() + gv * u.transpose()) / sigma;
      return project_tangent(p, d + extra).ambient();
    }
    case ManifoldKind::Box: return d;
  }
  throw MisuseError("unknown manifold kind");
}

Matrix fd_apply(const Objective& obj, const Point& p, const TangentVector& xi, double h) {
  const double nrm = xi.norm();
  if (nrm == 0.0) return Matrix::Zero(p.ambient_rows(), p.ambient_cols());
  const TangentVector unit = xi.scaled(1.0 / nrm);
  const Point qp = retract(p, unit.scaled(h));
  const Point qm = retract(p, unit.scaled(-h));
  const Matrix gp = project_tangent(qp, obj.gradient_at(qp)).ambient();
  const Matrix gm = project_tangent(qm, obj.gradient_at(qm)).ambient();
  return project_tangent(p, (gp - gm) / (2.0 * h)).ambient() * nrm;
}

double composition_quadform(const Objective& obj, const Point& p, const TangentVector& xi, double h0) {
  const double nrm = xi.norm();
  if (nrm == 0.0) return 0.0;
  const double h = h0 * (1.0 + p.ambient().norm());
  const TangentVector unit = xi.scaled(1.0 / nrm);
  const double fp = obj.value_at(retract(p, unit.scaled(h)));
  const double f0 = obj.value_at(p);
  const double fm = obj.value_at(retract(p, unit.scaled(-h)));
  return (fp - 2.0 * f0 + fm) / (h * h) * nrm * nrm;
}

}  // namespace

const char* to_string(HessianMode mode) {
  switch (mode) {
    case HessianMode::Analytic: return "analytic";
    case HessianMode::RetractionComposition: return "retraction-composition";
    case HessianMode::FiniteDifference: return "finite-difference";
  }
  return "unknown";
}

const char* to_string(CriticalClass c) {
  switch (c) {
    case CriticalClass::StrictSaddleNondegenerate: return "strict-saddle-nondegenerate";
    case CriticalClass::StrictSaddle: return "strict-saddle";
    case CriticalClass::LocalMinimizer: return "local-minimizer";
    case CriticalClass::Degenerate: return "degenerate";
  }
  return "unknown";
}

void HessianProbe::validate() const {
  if (mode != HessianMode::Analytic && !(h >= 1e-6 && h <= 1e-2)) {
    throw ParameterError("Hessian difference step must lie in [1e-6, 1e-2]");
  }
}

Matrix hessian_apply(const Objective& obj, const Point& p, const TangentVector& xi,
                     const HessianProbe& probe) {
  probe.validate();
  if (!same_point(p, xi.base())) throw BaseMismatchError("tangent vector is based elsewhere");
  switch (probe.mode) {
    case HessianMode::Analytic: return analytic_apply(obj, p, xi);
    case HessianMode::FiniteDifference: return fd_apply(obj, p, xi, probe.h);
    case HessianMode::RetractionComposition: break;
  }
  throw MisuseError("the retraction-composition probe only provides quadratic forms");
}

double hessian_quadform(const Objective& obj, const Point& p, const TangentVector& xi,
                        const HessianProbe& probe) {
  probe.validate();
  if (!same_point(p, xi.base())) throw BaseMismatchError("tangent vector is based elsewhere");
  if (probe.mode == HessianMode::RetractionComposition) {
    return composition_quadform(obj, p, xi, probe.h);
  }
  return hessian_apply(obj, p, xi, probe).cwiseProduct(xi.ambient()).sum();
}

Matrix assemble_hessian(const Objective& obj, const Point& p, const HessianProbe& probe) {
  probe.validate();
  const Index d = tangent_dimension(p);
  if (d > kDenseHessianLimit) {
    throw ResourceError("tangent dimension " + std::to_string(d) + " exceeds the dense limit");
  }
  const Matrix basis = tangent_basis(p);
  Matrix h(d, d);
  if (probe.mode == HessianMode::RetractionComposition) {
    std::vector<TangentVector> b;
    b.reserve(d);
    for (Index i = 0; i < d; ++i) b.push_back(basis_vector(p, basis, i));
    for (Index i = 0; i < d; ++i) {
      h(i, i) = composition_quadform(obj, p, b[i], probe.h);
      for (Index j = 0; j < i; ++j) {
        const double qp = composition_quadform(obj, p, b[i].plus(b[j]), probe.h);
        const double qm = composition_quadform(obj, p, b[i].plus(b[j].scaled(-1.0)), probe.h);
        h(i, j) = h(j, i) = 0.25 * (qp - qm);
      }
    }
    return h;
  }
  for (Index i = 0; i < d; ++i) {
    const Matrix col = hessian_apply(obj, p, basis_vector(p, basis, i), probe);
    h.col(i) = basis.transpose() * vec(col);
  }
  return h;
}

HessianSpectrum hessian_spectrum(const Objective& obj, const Point& p, const HessianProbe& probe,
                                 bool full) {
  const Matrix h = assemble_hessian(obj, p, probe);
  HessianSpectrum out;
  out.dimension = h.rows();
  if (h.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(h), full ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("Hessian eigendecomposition failed");
  out.lambda_min = es.eigenvalues()(0);
  out.lambda_max = es.eigenvalues()(h.rows() - 1);
  if (full) {
    out.eigenvalues = es.eigenvalues();
    out.eigenvectors = es.eigenvectors();
  }
  return out;
}

CriticalPointReport classify_critical_point(const Objective& obj, const Point& p,
                                            const HessianProbe& probe, double rel_tol) {
  const double gn = obj.riemannian_gradient(p).norm();
  const HessianSpectrum s = hessian_spectrum(obj, p, probe, true);
  CriticalPointReport rep{p};
  rep.grad_norm = gn;
  rep.lambda_min = s.lambda_min;
  rep.lambda_max = s.lambda_max;
  const double radius = std::max(std::abs(s.lambda_min), std::abs(s.lambda_max));
  rep.index_tol = rel_tol * radius;
  for (Index i = 0; i < s.eigenvalues.size(); ++i) {
    const double l = s.eigenvalues(i);
    if (l < -rep.index_tol) {
      ++rep.morse_index;
    } else if (l > rep.index_tol) {
      ++rep.positive_count;
    } else {
      ++rep.zero_count;
    }
  }
  if (rep.zero_count == s.dimension) {
    rep.classification = CriticalClass::Degenerate;
  } else if (rep.morse_index > 0 && rep.positive_count > 0 && rep.zero_count == 0) {
    rep.classification = CriticalClass::StrictSaddleNondegenerate;
  } else if (rep.morse_index > 0) {
    rep.classification = CriticalClass::StrictSaddle;
  } else {
    rep.classification = CriticalClass::LocalMinimizer;
  }
  return rep;
}

double pgd_map_jacobian_check(const Objective& obj, const Point& p_star, double alpha, double h) {
  if (!(h > 0.0)) throw ParameterError("difference step must be positive");
  if (!(alpha >= 0.0)) throw ParameterError("step size must be nonnegative");
  if (obj.riemannian_gradient(p_star).norm() > 1e-10) {
    throw MisuseError("Jacobian identity only holds at critical points");
  }
  HessianProbe probe;
  if (!obj.has_hessian_action()) probe.mode = HessianMode::FiniteDifference;
  const Matrix hess = assemble_hessian(obj, p_star, probe);
  const Matrix basis = tangent_basis(p_star);
  const Index d = basis.cols();
  const Matrix expected = Matrix::Identity(d, d) - alpha * hess;
  double worst = 0.0;
  for (Index i = 0; i < d; ++i) {
    const Point q = retract(p_star, basis_vector(p_star, basis, i).scaled(h));
    const Point phi_q = pgd_step(q, obj, alpha);
    Vector col = basis.transpose() * vec(phi_q.ambient() - q.ambient()) / h;
    col(i) += 1.0;
    worst = std::max(worst, (col - expected.col(i)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace saddle
