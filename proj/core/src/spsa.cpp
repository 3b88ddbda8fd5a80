#include "pspo/spsa.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "pspo/seeding.hpp"

namespace pspo {

namespace {

void validate(const SpsaConfig& cfg) {
  if (cfg.a <= 0) throw std::invalid_argument("SpsaConfig: a must be > 0");
  if (cfg.A < 0) throw std::invalid_argument("SpsaConfig: A must be >= 0");
  if (cfg.alpha_exp <= 0 || cfg.alpha_exp > 1)
    throw std::invalid_argument("SpsaConfig: alpha_exp must be in (0, 1]");
  if (cfg.c0 <= 0) throw std::invalid_argument("SpsaConfig: c0 must be > 0");
  if (cfg.gamma_exp <= 0) throw std::invalid_argument("SpsaConfig: gamma_exp must be > 0");
  if (cfg.c_tilde_factor <= 0)
    throw std::invalid_argument("SpsaConfig: c_tilde_factor must be > 0");
  if (cfg.pd_floor <= 0) throw std::invalid_argument("SpsaConfig: pd_floor must be > 0");
  if (cfg.stop.max_iters < 1) throw std::invalid_argument("SpsaConfig: max_iters must be >= 1");
}

Vector rademacher(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed));
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = (rng() & 1u) ? 1.0 : -1.0;
  return v;
}

double checked_value(const EvalRecord& rec, const char* where) {
  if (!rec.ok) throw std::runtime_error(std::string("spsa: non-finite value at ") + where);
  return rec.value;
}

// One-sided gradient (y(theta + c delta) - y(theta)) / c * delta^-1, with
// both values taken from an already evaluated batch.
Vector one_sided(const Vector& delta, double y_forward, double y_base, double c) {
  return ((y_forward - y_base) / c) * delta;
}

double report_objective(const ObjectiveSpec& spec, const Vector& theta, int replicates,
                        std::uint64_t seed) {
  if (replicates < 1) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (int r = 0; r < replicates; ++r) sum += spec.eval(theta, mix_seed(seed, 0xd1a6u, r));
  return sum / replicates;
}

}  // namespace

Vector two_sided_gradient(BatchEvaluator& evaluator, const Vector& theta, double c_k,
                          const Vector& delta_k, std::uint64_t seed_plus,
                          std::uint64_t seed_minus) {
  if (c_k <= 0) throw std::invalid_argument("two_sided_gradient: c_k must be > 0");
  if (delta_k.size() != theta.size())
    throw std::invalid_argument("two_sided_gradient: delta dimension mismatch");

  const Vector points[2] = {theta + c_k * delta_k, theta - c_k * delta_k};
  const std::uint64_t seeds[2] = {seed_plus, seed_minus};
  auto records = evaluator.evaluate_batch(std::span(points, 2), std::span(seeds, 2));
  double y_plus = checked_value(records[0], "theta + c delta");
  double y_minus = checked_value(records[1], "theta - c delta");
  // Elementwise inverse of a +-1 vector is the vector itself.
  return ((y_plus - y_minus) / (2.0 * c_k)) * delta_k;
}

ProjectedMatrix project_pd(const Matrix& h, double floor) {
  if (h.rows() != h.cols()) throw std::invalid_argument("project_pd: matrix must be square");
  if (floor <= 0) throw std::invalid_argument("project_pd: floor must be > 0");

  ProjectedMatrix out;
  double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
  Matrix sym = h;
  if (asym > 1e-8) {
    sym = 0.5 * (h + h.transpose());
    out.symmetrized = true;
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eigen(sym);
  if (eigen.info() != Eigen::Success)
    throw std::runtime_error("project_pd: eigendecomposition failed");
  if (eigen.eigenvalues().minCoeff() >= floor && !out.symmetrized) {
    out.matrix = h;  // idempotent on admissible input
    return out;
  }
  Vector clamped = eigen.eigenvalues().cwiseMax(floor);
  out.matrix = eigen.eigenvectors() * clamped.asDiagonal() * eigen.eigenvectors().transpose();
  return out;
}

std::pair<Vector, OptimizerTrace> spsa2_minimize(BatchEvaluator& evaluator, const Vector& theta0,
                                                 const SpsaConfig& config) {
  validate(config);
  const int dim = static_cast<int>(theta0.size());
  if (dim != evaluator.objective().dim)
    throw std::invalid_argument("spsa2_minimize: theta0 dimension does not match objective");
  if (!all_finite(theta0)) throw std::invalid_argument("spsa2_minimize: theta0 is not finite");

  const double gain_offset = config.A > 0 ? config.A : 0.1 * config.stop.max_iters;

  OptimizerTrace trace;
  trace.theta0 = theta0;
  Vector theta = theta0;
  Matrix h_bar = Matrix::Zero(dim, dim);
  const std::uint64_t evals_at_start = evaluator.total_evaluations();

  try {
    for (int k = 0; k < config.stop.max_iters; ++k) {
      std::uint64_t it_seed = mix_seed(config.seed, 0x5b5au, k);
      double a_k = config.a / std::pow(gain_offset + k + 1, config.alpha_exp);
      double c_k = config.c0 / std::pow(k + 1, config.gamma_exp);
      double ct_k = config.c_tilde_factor * c_k;

      Vector delta = rademacher(dim, mix_seed(it_seed, 1u));
      Vector delta_tilde = rademacher(dim, mix_seed(it_seed, 2u));

      // One batch carries the gradient pair and the four curvature-probe
      // points; the inner one-sided gradients at theta +- ct delta_tilde
      // reuse the iteration's delta.
      Vector probe_plus = theta + ct_k * delta_tilde;
      Vector probe_minus = theta - ct_k * delta_tilde;
      const Vector points[6] = {theta,
                                theta + c_k * delta,
                                probe_plus,
                                probe_plus + c_k * delta,
                                probe_minus,
                                probe_minus + c_k * delta};
      std::uint64_t seeds[6];
      for (int s = 0; s < 6; ++s) seeds[s] = mix_seed(it_seed, 3u, s);
      auto records = evaluator.evaluate_batch(std::span(points, 6), std::span(seeds, 6));

      Vector g_hat = one_sided(delta, checked_value(records[1], "gradient forward"),
                               checked_value(records[0], "gradient base"), c_k);
      Vector g_probe_plus = one_sided(delta, checked_value(records[3], "probe+ forward"),
                                      checked_value(records[2], "probe+ base"), c_k);
      Vector g_probe_minus = one_sided(delta, checked_value(records[5], "probe- forward"),
                                       checked_value(records[4], "probe- base"), c_k);

      Vector delta_g = g_probe_plus - g_probe_minus;
      Matrix outer = (delta_g / (2.0 * ct_k)) * delta_tilde.transpose();
      Matrix h_hat = 0.5 * (outer + outer.transpose());
      h_bar = (static_cast<double>(k) / (k + 1)) * h_bar + h_hat / (k + 1);

      ProjectedMatrix projected = project_pd(h_bar, config.pd_floor);
      Eigen::LDLT<Matrix> ldlt(projected.matrix);
      Vector step = ldlt.solve(g_hat);
      theta -= a_k * step;

      IterationRecord rec;
      rec.k = k;
      rec.theta = theta;
      rec.grad_norm = g_hat.norm();
      rec.rounds = 1;
      rec.probe_rounds = 1;
      rec.alpha = a_k;
      rec.beta = 0.0;
      rec.step_norm = a_k * step.norm();
      rec.objective_mean = report_objective(evaluator.objective(), theta,
                                            config.objective_report_replicates, it_seed);
      rec.cumulative_evals = evaluator.total_evaluations() - evals_at_start;
      double grad_norm = rec.grad_norm;
      double step_norm = rec.step_norm;
      trace.iterations.push_back(std::move(rec));

      if (config.stop.grad_norm_tol > 0 && grad_norm <= config.stop.grad_norm_tol) {
        trace.converged = true;
        trace.stop_reason = StopReason::gradient_norm;
        break;
      }
      if (config.stop.step_tol > 0 && step_norm <= config.stop.step_tol) {
        trace.converged = true;
        trace.stop_reason = StopReason::step_size;
        break;
      }
    }
  } catch (const std::runtime_error&) {
    trace.stop_reason = StopReason::objective_failure;
    trace.total_evals = evaluator.total_evaluations() - evals_at_start;
    return {theta, trace};
  }

  if (trace.stop_reason == StopReason::running) trace.stop_reason = StopReason::max_iterations;
  trace.total_evals = evaluator.total_evaluations() - evals_at_start;
  return {theta, trace};
}

}  // namespace pspo
