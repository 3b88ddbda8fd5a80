#pragma once

#include <cstdint>

#include "pspo/types.hpp"

namespace pspo {

/// f(x) = ||x - 1||^2 + w with w ~ N(0, sigma^2): a convex benchmark whose
/// noiseless minimum (0 at the all-ones vector) is known exactly, so
/// convergence can be measured in absolute terms.
struct NoisyQuadratic {
  int dim = 5;
  double sigma = 3.0;

  double noiseless(const Vector& x) const;
  ObjectiveSpec as_objective() const;
};

/// One draw of the noisy quadratic at `point`. Deterministic in seed.
double noisy_quadratic_eval(const Vector& point, double sigma, std::uint64_t seed);

}  // namespace pspo
