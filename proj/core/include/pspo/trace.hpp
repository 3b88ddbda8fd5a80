#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "pspo/types.hpp"

namespace pspo {

enum class StopReason {
  running,            ///< not stopped (only while iterating)
  gradient_norm,      ///< ||g_hat|| fell below grad_norm_tol
  step_size,          ///< ||alpha d|| fell below step_tol
  max_iterations,     ///< iteration budget exhausted
  objective_failure,  ///< an evaluation failed; trace is partial
};

std::string_view to_string(StopReason reason);

/// Stopping rules, combined by OR. A tolerance of 0 (or less) disables that
/// rule; max_iters always applies.
struct StoppingCriteria {
  double grad_norm_tol = 0.0;
  double step_tol = 0.0;
  int max_iters = 100;
};

/// One optimizer iteration. `theta` is the iterate after this iteration's
/// update. Evaluations used for `objective_mean` are diagnostics only and
/// are excluded from every budget figure.
struct IterationRecord {
  int k = 0;
  Vector theta;
  double objective_mean = 0.0;      ///< sample mean at theta (diagnostic)
  double grad_norm = 0.0;           ///< ||g_hat_k||
  int rounds = 0;                   ///< M_k used for the iteration's gradient
  int probe_rounds = 0;             ///< rounds used per curvature probe gradient
  double alpha = 0.0;               ///< step size
  double beta = 0.0;                ///< conjugate direction coefficient
  double step_norm = 0.0;           ///< ||alpha d||
  std::uint64_t cumulative_evals = 0;
  bool restarted = false;           ///< direction reset to steepest descent
  bool rounds_capped = false;       ///< M cap was binding this iteration
  bool curvature_floored = false;   ///< curvature safeguard engaged
};

struct OptimizerTrace {
  Vector theta0;
  std::vector<IterationRecord> iterations;
  bool converged = false;
  StopReason stop_reason = StopReason::running;
  std::uint64_t total_evals = 0;
};

}  // namespace pspo
