#include "pspo/pspo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pspo/seeding.hpp"

namespace pspo {

namespace {

constexpr double kZeroDirection = 1e-12;

void validate(const PspoConfig& cfg) {
  if (cfg.c <= 0) throw std::invalid_argument("PspoConfig: c must be > 0");
  if (cfg.c_tilde <= 0) throw std::invalid_argument("PspoConfig: c_tilde must be > 0");
  if (cfg.epsilon0 <= 0) throw std::invalid_argument("PspoConfig: epsilon0 must be > 0");
  if (cfg.gamma_eps < 0) throw std::invalid_argument("PspoConfig: gamma_eps must be >= 0");
  if (cfg.curvature_floor <= 0)
    throw std::invalid_argument("PspoConfig: curvature_floor must be > 0");
  if (cfg.stop.max_iters < 1) throw std::invalid_argument("PspoConfig: max_iters must be >= 1");
  if (cfg.fixed_rounds && *cfg.fixed_rounds < 1)
    throw std::invalid_argument("PspoConfig: fixed_rounds must be >= 1");
  if (cfg.sigma2 && *cfg.sigma2 < 0) throw std::invalid_argument("PspoConfig: sigma2 must be >= 0");
}

// Diagnostic objective sample mean. Bypasses the evaluator on purpose:
// these draws are reporting only and must not show up in any budget.
double report_objective(const ObjectiveSpec& spec, const Vector& theta, int replicates,
                        std::uint64_t seed) {
  if (replicates < 1) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (int r = 0; r < replicates; ++r) sum += spec.eval(theta, mix_seed(seed, 0xd1a6u, r));
  return sum / replicates;
}

}  // namespace

double conjugate_beta(const Vector& g_new, const Vector& g_old) {
  double denom = g_old.squaredNorm();
  if (denom <= 0.0)
    throw std::invalid_argument("conjugate_beta: ||g_old|| = 0, restart the direction instead");
  return g_new.dot(g_new - g_old) / denom;
}

double newton_step_size(const Vector& g, const Vector& d, const ReducedHessian& h, double floor,
                        bool* floored) {
  double dnorm2 = d.squaredNorm();
  if (dnorm2 <= 0.0) throw std::invalid_argument("newton_step_size: ||d|| = 0");
  double curvature = h.quadratic_form(d);
  double safeguarded = std::max(curvature, floor * dnorm2);
  if (floored) *floored = curvature < floor * dnorm2;
  return -g.dot(d) / safeguarded;
}

PspoOptimizer::PspoOptimizer(BatchEvaluator& evaluator, PspoConfig config)
    : evaluator_(evaluator), config_(std::move(config)) {
  validate(config_);
  gradient_ = [this](const Vector& theta, int rounds, std::uint64_t seed) {
    return psp_gradient(evaluator_, theta, config_.c, rounds, seed);
  };
  // Both probe gradients reuse one seed: identical perturbation columns and
  // evaluation seeds on the two sides, so the finite-difference bias (and,
  // for seed-replayable objectives, the noise) cancels out of their
  // difference instead of swamping the curvature signal.
  probe_ = [this](const Vector& plus, const Vector& minus, int rounds, std::uint64_t seed) {
    auto gp = psp_gradient(evaluator_, plus, config_.c, rounds, seed);
    auto gm = psp_gradient(evaluator_, minus, config_.c, rounds, seed);
    return std::make_pair(gp, gm);
  };
}

std::pair<Vector, OptimizerTrace> PspoOptimizer::minimize(const Vector& theta0) {
  const auto& cfg = config_;
  const int dim = static_cast<int>(theta0.size());
  if (dim != evaluator_.objective().dim)
    throw std::invalid_argument("pspo_minimize: theta0 dimension does not match objective");
  if (!all_finite(theta0)) throw std::invalid_argument("pspo_minimize: theta0 is not finite");

  const int m_min = cfg.m_min > 0 ? cfg.m_min : dim;
  const int m_max = cfg.m_max > 0 ? cfg.m_max : 10 * dim;

  OptimizerTrace trace;
  trace.theta0 = theta0;
  Vector theta = theta0;
  // Budgets are relative to this run, so a reused evaluator stays accurate.
  const std::uint64_t evals_at_start = evaluator_.total_evaluations();

  try {
    double sigma2 = cfg.sigma2.value_or(0.0);
    if (!cfg.sigma2 && cfg.noise_replicates >= 2)
      sigma2 = estimate_noise_variance(evaluator_, theta0, cfg.noise_replicates,
                                       mix_seed(cfg.seed, 0x0au, 1));

    // The warm-up gradient (a single round) seeds both the residual and the
    // first search direction; iteration 0 reuses it rather than
    // re-estimating at theta0.
    GradientEstimate g_init = gradient_(theta0, 1, mix_seed(cfg.seed, 0x0au, 2));
    Vector g_new = g_init.g_hat;
    Vector direction = -g_new;
    int init_rounds = g_init.rounds;
    int conjugate_steps = 0;  // directions built since the last restart

    for (int k = 0; k < cfg.stop.max_iters; ++k) {
      std::uint64_t it_seed = mix_seed(cfg.seed, 0x17e2u, k);
      IterationRecord rec;
      rec.k = k;

      // Size this iteration's rounds from the tolerance schedule.
      double eps_k = cfg.epsilon0 / std::pow(k + 1, cfg.gamma_eps);
      int rounds;
      if (cfg.fixed_rounds) {
        rounds = *cfg.fixed_rounds;
      } else {
        RoundCount rc = rounds_for_tolerance({eps_k, sigma2, cfg.c, m_max}, dim);
        rounds = std::clamp(rc.rounds, std::min(m_min, m_max), m_max);
        rec.rounds_capped = rc.capped;
      }

      if (cfg.noise_reestimate_every > 0 && k > 0 && k % cfg.noise_reestimate_every == 0)
        sigma2 = estimate_noise_variance(evaluator_, theta, cfg.noise_replicates,
                                         mix_seed(it_seed, 0x0au));

      // Gradient at the current iterate; iteration 0 reuses the warm-up.
      double beta = 0.0;
      bool restarted = false;
      if (k == 0) {
        rec.rounds = init_rounds;
      } else {
        GradientEstimate g_k = gradient_(theta, rounds, mix_seed(it_seed, 1u));
        rec.rounds = g_k.rounds;
        Vector g_old = g_new;
        g_new = g_k.g_hat;
        Vector residual = -g_new;

        // Direction update happens before the step so the move uses the
        // gradient just computed; restarts fall back to steepest descent
        // when the conjugate cycle completes or the candidate is not a
        // descent direction.
        if (g_old.squaredNorm() > 0) {
          beta = conjugate_beta(g_new, g_old);
          Vector candidate = residual + beta * direction;
          ++conjugate_steps;
          if (conjugate_steps == dim || residual.dot(candidate) <= 0.0) {
            direction = residual;
            conjugate_steps = 0;
            restarted = true;
          } else {
            direction = candidate;
          }
        } else {
          beta = 0.0;
          direction = residual;
          conjugate_steps = 0;
          restarted = true;
        }
      }
      rec.grad_norm = g_new.norm();
      rec.beta = beta;
      rec.restarted = restarted;

      if (cfg.stop.grad_norm_tol > 0 && rec.grad_norm <= cfg.stop.grad_norm_tol) {
        rec.theta = theta;
        rec.probe_rounds = 0;
        rec.objective_mean = report_objective(evaluator_.objective(), theta,
                                              cfg.objective_report_replicates, it_seed);
        rec.cumulative_evals = evaluator_.total_evaluations() - evals_at_start;
        trace.iterations.push_back(std::move(rec));
        trace.converged = true;
        trace.stop_reason = StopReason::gradient_norm;
        break;
      }

      // Curvature probe along the step direction (unit-scaled to c_tilde),
      // falling back to the first axis when the direction degenerates.
      Vector d_tilde;
      double dir_norm = direction.norm();
      if (dir_norm < kZeroDirection) {
        d_tilde = Vector::Zero(dim);
        d_tilde[0] = cfg.c_tilde;
      } else {
        d_tilde = (cfg.c_tilde / dir_norm) * direction;
      }
      auto [g_plus, g_minus] =
          probe_(theta + d_tilde, theta - d_tilde, rounds, mix_seed(it_seed, 2u));
      rec.probe_rounds = g_plus.rounds;
      ReducedHessian h = reduced_hessian(g_plus.g_hat, g_minus.g_hat, d_tilde);

      double alpha;
      if (dir_norm < kZeroDirection) {
        alpha = 0.0;
      } else {
        alpha = newton_step_size(g_new, direction, h, cfg.curvature_floor,
                                 &rec.curvature_floored);
      }
      if (!std::isfinite(alpha)) {
        // Steepest-descent restart with a fixed-length fallback step.
        direction = -g_new;
        dir_norm = direction.norm();
        alpha = dir_norm > 0 ? cfg.c_tilde / dir_norm : 0.0;
        conjugate_steps = 0;
        rec.restarted = true;
        rec.curvature_floored = true;
      }

      theta += alpha * direction;
      rec.alpha = alpha;
      rec.step_norm = std::abs(alpha) * dir_norm;
      rec.theta = theta;
      rec.objective_mean = report_objective(evaluator_.objective(), theta,
                                            cfg.objective_report_replicates, it_seed);
      rec.cumulative_evals = evaluator_.total_evaluations() - evals_at_start;
      double step_norm = rec.step_norm;
      trace.iterations.push_back(std::move(rec));

      if (cfg.stop.step_tol > 0 && step_norm <= cfg.stop.step_tol) {
        trace.converged = true;
        trace.stop_reason = StopReason::step_size;
        break;
      }
    }
  } catch (const std::runtime_error&) {
    trace.stop_reason = StopReason::objective_failure;
    trace.total_evals = evaluator_.total_evaluations() - evals_at_start;
    return {theta, trace};
  }

  if (trace.stop_reason == StopReason::running) trace.stop_reason = StopReason::max_iterations;
  trace.total_evals = evaluator_.total_evaluations() - evals_at_start;
  return {theta, trace};
}

std::pair<Vector, OptimizerTrace> pspo_minimize(BatchEvaluator& evaluator, const Vector& theta0,
                                                const PspoConfig& config) {
  return PspoOptimizer(evaluator, config).minimize(theta0);
}

}  // namespace pspo
