#include "pspo/evaluator.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "pspo/parallel.hpp"
#include "pspo/seeding.hpp"

namespace pspo {

BatchEvaluator::BatchEvaluator(ObjectiveSpec spec, int workers)
    : spec_(std::move(spec)), workers_(workers) {
  if (!spec_.eval) throw std::invalid_argument("BatchEvaluator: objective has no eval function");
  if (spec_.dim < 1) throw std::invalid_argument("BatchEvaluator: objective dim must be >= 1");
}

std::vector<EvalRecord> BatchEvaluator::evaluate_batch(std::span<const Vector> points,
                                                       std::span<const std::uint64_t> seeds) {
  if (points.empty()) throw std::invalid_argument("evaluate_batch: empty batch");
  if (points.size() != seeds.size())
    throw std::invalid_argument("evaluate_batch: " + std::to_string(points.size()) +
                                " points vs " + std::to_string(seeds.size()) + " seeds");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != spec_.dim)
      throw std::invalid_argument("evaluate_batch: point " + std::to_string(i) +
                                  " has dimension " + std::to_string(points[i].size()) +
                                  ", objective expects " + std::to_string(spec_.dim));
  }

  std::vector<EvalRecord> records(points.size());
  parallel_for(points.size(), workers_, [&](std::size_t i) {
    auto start = std::chrono::steady_clock::now();
    double value = spec_.eval(points[i], seeds[i]);
    auto end = std::chrono::steady_clock::now();
    records[i] = EvalRecord{points[i], seeds[i], value, end - start, std::isfinite(value)};
  });
  total_evals_.fetch_add(points.size(), std::memory_order_relaxed);
  return records;
}

EvalRecord BatchEvaluator::evaluate(const Vector& point, std::uint64_t seed) {
  return evaluate_batch(std::span(&point, 1), std::span(&seed, 1)).front();
}

double estimate_noise_variance(BatchEvaluator& evaluator, const Vector& point, int replicates,
                               std::uint64_t seed) {
  if (replicates < 2)
    throw std::invalid_argument("estimate_noise_variance: need at least 2 replicates, got " +
                                std::to_string(replicates));

  std::vector<Vector> points(static_cast<std::size_t>(replicates), point);
  std::vector<std::uint64_t> seeds(points.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = mix_seed(seed, 0x5e1fu, i);

  auto records = evaluator.evaluate_batch(points, seeds);
  double mean = 0.0;
  for (const auto& rec : records) {
    if (!rec.ok)
      throw std::runtime_error("estimate_noise_variance: non-finite evaluation at replicate " +
                               std::to_string(&rec - records.data()));
    mean += rec.value;
  }
  mean /= static_cast<double>(replicates);
  double ss = 0.0;
  for (const auto& rec : records) {
    double d = rec.value - mean;
    ss += d * d;
  }
  return ss / static_cast<double>(replicates - 1);
}

}  // namespace pspo
