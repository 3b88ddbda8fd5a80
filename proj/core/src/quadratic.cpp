#include "pspo/problems/quadratic.hpp"

#include <random>
#include <stdexcept>

#include "pspo/seeding.hpp"

namespace pspo {

double noisy_quadratic_eval(const Vector& point, double sigma, std::uint64_t seed) {
  if (point.size() < 1) throw std::invalid_argument("noisy_quadratic_eval: empty point");
  if (sigma < 0) throw std::invalid_argument("noisy_quadratic_eval: sigma must be >= 0");
  double value = (point.array() - 1.0).matrix().squaredNorm();
  if (sigma > 0) {
    std::mt19937_64 rng(splitmix64(seed));
    std::normal_distribution<double> noise(0.0, sigma);
    value += noise(rng);
  }
  return value;
}

double NoisyQuadratic::noiseless(const Vector& x) const {
  return (x.array() - 1.0).matrix().squaredNorm();
}

ObjectiveSpec NoisyQuadratic::as_objective() const {
  double s = sigma;
  return ObjectiveSpec{
      [s](const Vector& x, std::uint64_t seed) { return noisy_quadratic_eval(x, s, seed); },
      dim,
      s > 0 ? std::optional<double>(s) : std::nullopt,
  };
}

}  // namespace pspo
