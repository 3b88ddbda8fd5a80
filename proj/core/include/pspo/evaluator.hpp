#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "pspo/types.hpp"

namespace pspo {

/// Executes batches of objective evaluations, possibly concurrently, and
/// keeps a running count of every evaluation issued through it. Results are
/// returned in input order no matter how workers interleave.
class BatchEvaluator {
 public:
  /// workers = 0 picks hardware concurrency, 1 forces serial execution.
  explicit BatchEvaluator(ObjectiveSpec spec, int workers = 0);

  /// Evaluates objective at points[i] with seeds[i]. Dimension or size
  /// mismatches are rejected before any evaluation runs. A non-finite
  /// result flags that record (ok = false) but the batch is still returned
  /// in full.
  std::vector<EvalRecord> evaluate_batch(std::span<const Vector> points,
                                         std::span<const std::uint64_t> seeds);

  /// Convenience single-point wrapper (still counted).
  EvalRecord evaluate(const Vector& point, std::uint64_t seed);

  std::uint64_t total_evaluations() const { return total_evals_.load(); }
  const ObjectiveSpec& objective() const { return spec_; }
  int workers() const { return workers_; }

 private:
  ObjectiveSpec spec_;
  int workers_;
  std::atomic<std::uint64_t> total_evals_{0};
};

/// Unbiased sample variance of `replicates` evaluations at one point, each
/// with a distinct seed derived from `seed`. Requires replicates >= 2.
/// Throws if any evaluation comes back non-finite.
double estimate_noise_variance(BatchEvaluator& evaluator, const Vector& point,
                               int replicates, std::uint64_t seed);

}  // namespace pspo
