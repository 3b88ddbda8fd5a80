#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>

#include <Eigen/Core>

namespace pspo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A noisy black-box objective. `eval` must be replayable: the same
/// (point, seed) pair always returns the identical value, and it must be
/// safe to call from several threads at once. Distinct seeds at a fixed
/// point are modeled as i.i.d. draws y ~ N(mu(theta), sigma^2).
struct ObjectiveSpec {
  std::function<double(const Vector&, std::uint64_t)> eval;
  int dim = 0;
  std::optional<double> noise_sigma_hint;  ///< known noise std, if any
};

/// Outcome of a single objective evaluation. `ok` is false when the
/// objective returned a non-finite value; the record is kept so callers
/// can decide how to react.
struct EvalRecord {
  Vector point;
  std::uint64_t seed = 0;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::chrono::duration<double> wall_time{0.0};
  bool ok = false;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace pspo
