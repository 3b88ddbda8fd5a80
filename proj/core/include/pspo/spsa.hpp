#pragma once

#include <cstdint>
#include <utility>

#include "pspo/evaluator.hpp"
#include "pspo/trace.hpp"

namespace pspo {

/// Configuration of the second-order SPSA baseline. Gains follow the usual
/// power schedules a_k = a / (A + k + 1)^alpha_exp and
/// c_k = c0 / (k + 1)^gamma_exp; the curvature probe step is
/// ct_k = c_tilde_factor * c_k.
struct SpsaConfig {
  double a = 0.2;
  double A = 0.0;  ///< 0 = 10% of max_iters
  double alpha_exp = 0.602;
  double c0 = 0.1;
  double gamma_exp = 0.101;
  double c_tilde_factor = 0.5;
  double pd_floor = 1e-4;  ///< eigenvalue floor of the Hessian projection
  StoppingCriteria stop;
  std::uint64_t seed = 0;
  int objective_report_replicates = 3;  ///< diagnostics only, not budgeted
};

/// Two-sided simultaneous-perturbation gradient estimate
/// (y+ - y-) / (2 c_k) * delta^-1 with the elementwise inverse (delta^-1 =
/// delta for +-1 entries). Issues both evaluations as one batch.
Vector two_sided_gradient(BatchEvaluator& evaluator, const Vector& theta, double c_k,
                          const Vector& delta_k, std::uint64_t seed_plus,
                          std::uint64_t seed_minus);

struct ProjectedMatrix {
  Matrix matrix;
  bool symmetrized = false;  ///< input asymmetry above 1e-8 was repaired
};

/// Projection onto the positive definite cone: eigenvalues are clamped to
/// >= floor. Idempotent on matrices already satisfying the floor. Inputs
/// asymmetric beyond 1e-8 are symmetrized first and flagged.
ProjectedMatrix project_pd(const Matrix& h, double floor);

/// Second-order SPSA: Newton-like recursion theta <- theta - a_k
/// (Pi(H_bar_k))^-1 g_hat_k with the running Hessian average
/// H_bar_k = (k H_bar_{k-1} + H_hat_k) / (k + 1). Gradients are one-sided;
/// the per-iteration Hessian uses a fresh probe direction and the
/// symmetrized outer-product form. Traces are recorded with the same record
/// layout as PSPO so runs compare directly.
std::pair<Vector, OptimizerTrace> spsa2_minimize(BatchEvaluator& evaluator,
                                                 const Vector& theta0,
                                                 const SpsaConfig& config);

}  // namespace pspo
