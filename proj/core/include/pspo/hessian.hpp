#pragma once

#include <functional>
#include <vector>

#include "pspo/types.hpp"

namespace pspo {

/// Symmetric rank-<=2 curvature estimate tied to a probe direction d:
///
///   H_d = [dG d^T + d dG^T] / (4 ||d||^2),   dG = g(x + d) - g(x - d).
///
/// The /4 combines the symmetrizing 1/2 with the two-sided difference dG
/// spanning a step of 2d, so on a quadratic d^T H_d d equals d^T H d
/// exactly. Only the factors (dG, d) are stored; the matrix is materialized
/// on demand since optimizers only ever need quadratic forms through it.
class ReducedHessian {
 public:
  ReducedHessian(Vector gradient_difference, Vector direction);

  /// v^T H_d v without forming the matrix.
  double quadratic_form(const Vector& v) const;

  /// The full p x p matrix (symmetric, rank <= 2).
  Matrix materialize() const;

  const Vector& direction() const { return direction_; }
  const Vector& gradient_difference() const { return delta_g_; }
  double step() const { return step_; }
  int dim() const { return static_cast<int>(direction_.size()); }

 private:
  Vector delta_g_;
  Vector direction_;
  double step_ = 0.0;  ///< ||direction||
};

/// Builds the reduced Hessian from gradient estimates at x + d and x - d.
/// Requires ||d_tilde|| > 0.
ReducedHessian reduced_hessian(const Vector& g_plus, const Vector& g_minus,
                               const Vector& d_tilde);

/// v^T H_d v.
double curvature_along(const ReducedHessian& h, const Vector& v);

/// Full-Hessian probe used as a verification oracle: given gradients along p
/// mutually orthogonal nonzero directions,
///   H(x) ~= sum_i (g(x + d_i) - g(x)) d_i^T / ||d_i||^2.
/// Exact (returns 2A) on quadratics x^T A x with exact gradients. Directions
/// failing the pairwise orthogonality check (|cos| > 1e-8) are rejected.
Matrix full_hessian_estimate(const std::function<Vector(const Vector&)>& gradient_fn,
                             const Vector& x, const std::vector<Vector>& dirs);

}  // namespace pspo
