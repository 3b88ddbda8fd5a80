#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>

#include "pspo/evaluator.hpp"
#include "pspo/gradient.hpp"
#include "pspo/hessian.hpp"
#include "pspo/trace.hpp"

namespace pspo {

/// Configuration of the PSPO conjugate-gradient optimizer.
struct PspoConfig {
  double c = 0.1;        ///< perturbation size of gradient estimates
  double c_tilde = 0.05; ///< curvature probe step, smaller than c by default

  /// Per-iteration gradient tolerance eps_k = epsilon0 / (k+1)^gamma_eps.
  /// The schedule starts coarse and tightens as iterates approach the
  /// optimum; rounds are sized from it each iteration.
  double epsilon0 = 1.0;
  double gamma_eps = 0.5;

  int m_min = 0;  ///< lower clamp on rounds per iteration; 0 = dim
  int m_max = 0;  ///< upper clamp on rounds per iteration; 0 = 10 * dim

  /// When set, every iteration uses exactly this many rounds and the
  /// tolerance schedule is ignored (round-count sweeps use this).
  std::optional<int> fixed_rounds;

  /// Lower bound on the curvature d^T H d, as a multiple of ||d||^2. Keeps
  /// the Newton step finite when noise makes the estimate nonpositive.
  double curvature_floor = 1e-6;

  StoppingCriteria stop;
  std::uint64_t seed = 0;

  /// Noise variance used by the round-count rule. When unset it is
  /// estimated at theta0 from `noise_replicates` evaluations, and
  /// re-estimated at the current iterate every `noise_reestimate_every`
  /// iterations (0 = only once).
  std::optional<double> sigma2;
  int noise_replicates = 10;
  int noise_reestimate_every = 0;

  /// Replicates for the per-iteration objective sample mean reported in the
  /// trace. Diagnostics only; never used by the optimizer, never counted in
  /// budgets. 0 disables the report (NaN recorded).
  int objective_report_replicates = 3;
};

/// Conjugate direction coefficient beta = g_new^T (g_new - g_old) / g_old^T
/// g_old. The caller must restart the direction instead of calling this when
/// ||g_old|| = 0 (rejected here).
double conjugate_beta(const Vector& g_new, const Vector& g_old);

/// Curvature-safeguarded Newton step size along d:
/// alpha = -g^T d / max(d^T H d, floor * ||d||^2). Requires ||d|| > 0.
double newton_step_size(const Vector& g, const Vector& d, const ReducedHessian& h,
                        double floor, bool* floored = nullptr);

/// PSPO: conjugate-gradient iteration on PSP gradient estimates with a
/// reduced-Hessian step size. Gradient and curvature sources are replaceable
/// so exact oracles can be injected in tests.
class PspoOptimizer {
 public:
  using GradientFn =
      std::function<GradientEstimate(const Vector& theta, int rounds, std::uint64_t seed)>;
  /// Returns gradient estimates at (theta_plus, theta_minus).
  using ProbeFn = std::function<std::pair<GradientEstimate, GradientEstimate>(
      const Vector& theta_plus, const Vector& theta_minus, int rounds, std::uint64_t seed)>;

  PspoOptimizer(BatchEvaluator& evaluator, PspoConfig config);

  void set_gradient_source(GradientFn fn) { gradient_ = std::move(fn); }
  void set_probe_source(ProbeFn fn) { probe_ = std::move(fn); }

  std::pair<Vector, OptimizerTrace> minimize(const Vector& theta0);

 private:
  BatchEvaluator& evaluator_;
  PspoConfig config_;
  GradientFn gradient_;
  ProbeFn probe_;
};

std::pair<Vector, OptimizerTrace> pspo_minimize(BatchEvaluator& evaluator,
                                                const Vector& theta0,
                                                const PspoConfig& config);

}  // namespace pspo
