#pragma once

#include "saddle/pgd.hpp"

namespace saddle {

enum class HessianMode { Analytic, RetractionComposition, FiniteDifference };

const char* to_string(HessianMode mode);

/// How Riemannian Hessians are evaluated. `h` is the base difference step of
/// the two finite-difference modes and must lie in [1e-6, 1e-2]; the
/// composition stencil scales it by (1 + |p|).
struct HessianProbe {
  HessianMode mode = HessianMode::Analytic;
  double h = 1e-4;

  void validate() const;
};

/// Largest tangent dimension handled by dense assembly.
inline constexpr Index kDenseHessianLimit = 2000;

/// Riemannian Hessian applied to xi, as an ambient tangent element. Analytic
/// and FiniteDifference modes only (the composition mode yields quadratic
/// forms, not an operator).
Matrix hessian_apply(const Objective& obj, const Point& p, const TangentVector& xi,
                     const HessianProbe& probe);

/// <Hess f(p)[xi], xi>. In composition mode the second central difference of
/// t -> f(R_p(t xi)) at 0.
double hessian_quadform(const Objective& obj, const Point& p, const TangentVector& xi,
                        const HessianProbe& probe);

/// Matrix of the Hessian in the orthonormal basis returned by tangent_basis.
/// Not symmetrized.
Matrix assemble_hessian(const Objective& obj, const Point& p, const HessianProbe& probe);

struct HessianSpectrum {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  /// Ascending; empty unless requested.
  Vector eigenvalues;
  /// Eigenvectors in the tangent basis (columns), present with eigenvalues.
  Matrix eigenvectors;
  Index dimension = 0;
};

/// Dense eigendecomposition of the symmetrized assembled Hessian.
/// Throws ResourceError above kDenseHessianLimit.
HessianSpectrum hessian_spectrum(const Objective& obj, const Point& p, const HessianProbe& probe,
                                 bool full = false);

enum class CriticalClass { StrictSaddleNondegenerate, StrictSaddle, LocalMinimizer, Degenerate };

const char* to_string(CriticalClass c);

struct CriticalPointReport {
  Point point;
  double grad_norm = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  /// Eigenvalues below -index_tol.
  Index morse_index = 0;
  /// Eigenvalues with |lambda| <= index_tol.
  Index zero_count = 0;
  Index positive_count = 0;
  double index_tol = 0.0;
  CriticalClass classification = CriticalClass::Degenerate;
};

/// `rel_tol` is scaled by the spectral radius to give index_tol.
CriticalPointReport classify_critical_point(const Objective& obj, const Point& p,
                                            const HessianProbe& probe, double rel_tol = 1e-8);

/// Finite-difference Jacobian of phi(p) = R(p - alpha grad f(p)) at a fixed
/// point, in the chart q = R(p*, t) of the tangent basis, compared entrywise
/// with I - alpha Hess f(p*). Returns the max absolute deviation.
double pgd_map_jacobian_check(const Objective& obj, const Point& p_star, double alpha, double h);

}  // namespace saddle
