#include "pspo/hessian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace pspo {

ReducedHessian::ReducedHessian(Vector gradient_difference, Vector direction)
    : delta_g_(std::move(gradient_difference)), direction_(std::move(direction)) {
  if (delta_g_.size() != direction_.size())
    throw std::invalid_argument("ReducedHessian: dimension mismatch");
  step_ = direction_.norm();
  if (step_ <= 0.0)
    throw std::invalid_argument("ReducedHessian: probe direction must be nonzero");
}

double ReducedHessian::quadratic_form(const Vector& v) const {
  if (v.size() != direction_.size())
    throw std::invalid_argument("ReducedHessian: dimension mismatch");
  // v^T [dG d^T + d dG^T] v / (4 ||d||^2) collapses to a product of two dots.
  return (delta_g_.dot(v)) * (direction_.dot(v)) / (2.0 * step_ * step_);
}

Matrix ReducedHessian::materialize() const {
  Matrix outer = delta_g_ * direction_.transpose();
  return (outer + outer.transpose()) / (4.0 * step_ * step_);
}

ReducedHessian reduced_hessian(const Vector& g_plus, const Vector& g_minus,
                               const Vector& d_tilde) {
  if (g_plus.size() != g_minus.size() || g_plus.size() != d_tilde.size())
    throw std::invalid_argument("reduced_hessian: dimension mismatch");
  return ReducedHessian(g_plus - g_minus, d_tilde);
}

double curvature_along(const ReducedHessian& h, const Vector& v) {
  return h.quadratic_form(v);
}

Matrix full_hessian_estimate(const std::function<Vector(const Vector&)>& gradient_fn,
                             const Vector& x, const std::vector<Vector>& dirs) {
  const auto dim = x.size();
  if (static_cast<Eigen::Index>(dirs.size()) != dim)
    throw std::invalid_argument("full_hessian_estimate: need exactly dim directions, got " +
                                std::to_string(dirs.size()));
  for (std::size_t a = 0; a < dirs.size(); ++a) {
    if (dirs[a].size() != dim)
      throw std::invalid_argument("full_hessian_estimate: direction dimension mismatch");
    double na = dirs[a].norm();
    if (na <= 0.0)
      throw std::invalid_argument("full_hessian_estimate: direction " + std::to_string(a) +
                                  " is zero");
    for (std::size_t b = a + 1; b < dirs.size(); ++b) {
      double cosine = std::abs(dirs[a].dot(dirs[b])) / (na * dirs[b].norm());
      if (cosine > 1e-8)
        throw std::invalid_argument("full_hessian_estimate: directions " + std::to_string(a) +
                                    " and " + std::to_string(b) + " are not orthogonal");
    }
  }

  Vector g0 = gradient_fn(x);
  Matrix h = Matrix::Zero(dim, dim);
  for (const auto& d : dirs) {
    Vector dg = gradient_fn(x + d) - g0;
    h += dg * (d.transpose() / d.squaredNorm());
  }
  return h;
}

}  // namespace pspo
