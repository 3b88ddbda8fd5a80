#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pspo/evaluator.hpp"
#include "pspo/perturbation.hpp"
#include "pspo/types.hpp"

namespace pspo {

/// Gradient estimate from one batch of simultaneous perturbations, plus the
/// bookkeeping needed to replay or audit it. n_evals is always rounds + 1:
/// the base value is evaluated once and shared by all differences.
struct GradientEstimate {
  Vector g_hat;
  int rounds = 0;                ///< M
  double c = 0.0;                ///< perturbation size
  std::int64_t n_evals = 0;      ///< = rounds + 1
  std::uint64_t delta_seed = 0;  ///< seed of the perturbation matrix
};

/// Inputs of the round-count rule: gradient error tolerance epsilon, noise
/// variance sigma^2, perturbation size c, and a hard cap on rounds.
struct ToleranceSpec {
  double epsilon = 1.0;
  double sigma2 = 0.0;
  double c = 0.1;
  int m_max = 1u << 20;
};

struct RoundCount {
  int rounds = 1;
  bool capped = false;  ///< true when m_max was binding
};

/// Rounds needed to keep the expected gradient error near spec.epsilon:
/// M = min(m_max, ceil(max(p, sigma^2 p / (c^2 eps^2)))).
RoundCount rounds_for_tolerance(const ToleranceSpec& spec, int dim);

/// One-sided function differences df_i = f(theta + c * Delta_i, seeds[1+i])
/// - f(theta, seeds[0]). The base point is evaluated once; base and forward
/// points are issued as a single concurrent batch. seeds.size() must be
/// delta.rounds + 1. A non-finite evaluation is a hard error naming the
/// offending column.
std::vector<double> function_differences(BatchEvaluator& evaluator, const Vector& theta,
                                         double c, const PerturbationMatrix& delta,
                                         std::span<const std::uint64_t> seeds);

/// Least-squares gradient (1/c) (Delta Delta^T)^-1 Delta df for M >= p.
/// Requires the columns to span R^p. Solved by Cholesky factorization, the
/// Gram matrix is never inverted explicitly.
Vector least_squares_gradient(const PerturbationMatrix& delta, std::span<const double> deltaf,
                              double c);

/// Minimum-norm gradient (1/c) Delta (Delta^T Delta)^-1 df for M < p. The
/// result interpolates Delta^T g = df / c exactly and has the smallest
/// Euclidean norm among all interpolants. Requires independent columns.
Vector min_norm_gradient(const PerturbationMatrix& delta, std::span<const double> deltaf,
                         double c);

/// Full parallel simultaneous-perturbation gradient estimate: builds the
/// perturbation matrix, evaluates the differences as one batch of M+1, and
/// applies the least-squares (M >= p) or minimum-norm (M < p) solve.
GradientEstimate psp_gradient(BatchEvaluator& evaluator, const Vector& theta, double c,
                              int rounds, std::uint64_t seed);

}  // namespace pspo
