#include "pspo/gradient.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

#include "pspo/seeding.hpp"

namespace pspo {

RoundCount rounds_for_tolerance(const ToleranceSpec& spec, int dim) {
  if (dim < 1) throw std::invalid_argument("rounds_for_tolerance: dim must be >= 1");
  if (spec.epsilon <= 0) throw std::invalid_argument("rounds_for_tolerance: epsilon must be > 0");
  if (spec.c <= 0) throw std::invalid_argument("rounds_for_tolerance: c must be > 0");
  if (spec.sigma2 < 0) throw std::invalid_argument("rounds_for_tolerance: sigma2 must be >= 0");
  if (spec.m_max < 1) throw std::invalid_argument("rounds_for_tolerance: m_max must be >= 1");

  double demand = static_cast<double>(dim);
  if (spec.sigma2 > 0) {
    double noise_rounds = spec.sigma2 * dim / (spec.c * spec.c * spec.epsilon * spec.epsilon);
    demand = std::max(demand, noise_rounds);
  }
  double rounds = std::ceil(demand);
  if (rounds >= static_cast<double>(spec.m_max)) return {spec.m_max, true};
  return {std::max(1, static_cast<int>(rounds)), false};
}

std::vector<double> function_differences(BatchEvaluator& evaluator, const Vector& theta,
                                         double c, const PerturbationMatrix& delta,
                                         std::span<const std::uint64_t> seeds) {
  if (delta.dim != theta.size())
    throw std::invalid_argument("function_differences: perturbation dim " +
                                std::to_string(delta.dim) + " vs point dim " +
                                std::to_string(theta.size()));
  if (c <= 0) throw std::invalid_argument("function_differences: c must be > 0");
  if (seeds.size() != static_cast<std::size_t>(delta.rounds) + 1)
    throw std::invalid_argument("function_differences: need rounds+1 seeds (base first), got " +
                                std::to_string(seeds.size()));

  // Base point plus all forward points go out as a single batch.
  std::vector<Vector> points;
  points.reserve(static_cast<std::size_t>(delta.rounds) + 1);
  points.push_back(theta);
  for (int i = 0; i < delta.rounds; ++i) points.push_back(theta + c * delta.columns.col(i));

  auto records = evaluator.evaluate_batch(points, seeds);
  if (!records[0].ok)
    throw std::runtime_error("function_differences: non-finite value at the base point");
  std::vector<double> df(static_cast<std::size_t>(delta.rounds));
  for (int i = 0; i < delta.rounds; ++i) {
    const auto& rec = records[static_cast<std::size_t>(i) + 1];
    if (!rec.ok)
      throw std::runtime_error("function_differences: non-finite value at column " +
                               std::to_string(i));
    df[static_cast<std::size_t>(i)] = rec.value - records[0].value;
  }
  return df;
}

Vector least_squares_gradient(const PerturbationMatrix& delta, std::span<const double> deltaf,
                              double c) {
  if (delta.rounds < delta.dim)
    throw std::invalid_argument("least_squares_gradient: needs rounds >= dim");
  if (deltaf.size() != static_cast<std::size_t>(delta.rounds))
    throw std::invalid_argument("least_squares_gradient: differences/rounds mismatch");
  if (c <= 0) throw std::invalid_argument("least_squares_gradient: c must be > 0");
  if (!spans_space(delta))
    throw std::runtime_error("least_squares_gradient: perturbation columns do not span R^p");

  Eigen::Map<const Vector> df(deltaf.data(), static_cast<Eigen::Index>(deltaf.size()));
  Matrix gram = delta.columns * delta.columns.transpose();  // p x p, SPD given full rank
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("least_squares_gradient: Gram factorization failed");
  return llt.solve(delta.columns * df) / c;
}

Vector min_norm_gradient(const PerturbationMatrix& delta, std::span<const double> deltaf,
                         double c) {
  if (delta.rounds >= delta.dim)
    throw std::invalid_argument("min_norm_gradient: needs rounds < dim");
  if (deltaf.size() != static_cast<std::size_t>(delta.rounds))
    throw std::invalid_argument("min_norm_gradient: differences/rounds mismatch");
  if (c <= 0) throw std::invalid_argument("min_norm_gradient: c must be > 0");

  Eigen::Map<const Vector> df(deltaf.data(), static_cast<Eigen::Index>(deltaf.size()));
  Matrix gram = delta.columns.transpose() * delta.columns;  // M x M
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("min_norm_gradient: columns are linearly dependent");
  return delta.columns * llt.solve(df) / c;
}

GradientEstimate psp_gradient(BatchEvaluator& evaluator, const Vector& theta, double c,
                              int rounds, std::uint64_t seed) {
  if (rounds < 1) throw std::invalid_argument("psp_gradient: rounds must be >= 1");
  if (c <= 0) throw std::invalid_argument("psp_gradient: c must be > 0");
  const int dim = static_cast<int>(theta.size());

  std::uint64_t delta_seed = mix_seed(seed, 0xde17au);
  PerturbationMatrix delta = build_perturbations(dim, rounds, delta_seed);

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(rounds) + 1);
  seeds[0] = mix_seed(seed, 0xba5eu);
  for (int i = 0; i < rounds; ++i)
    seeds[static_cast<std::size_t>(i) + 1] = mix_seed(seed, 0xf0d0u, static_cast<std::uint64_t>(i));

  std::vector<double> df = function_differences(evaluator, theta, c, delta, seeds);

  GradientEstimate est;
  est.rounds = rounds;
  est.c = c;
  est.n_evals = rounds + 1;
  est.delta_seed = delta_seed;
  est.g_hat = rounds >= dim ? least_squares_gradient(delta, df, c)
                            : min_norm_gradient(delta, df, c);
  return est;
}

}  // namespace pspo
