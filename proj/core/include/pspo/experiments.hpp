#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pspo/pspo.hpp"
#include "pspo/problems/quadratic.hpp"
#include "pspo/problems/sir.hpp"
#include "pspo/spsa.hpp"

namespace pspo {

/// Bad or inconsistent experiment configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem failure (unwritable output directory, unreadable data file).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ProblemKind { quadratic, sir };
enum class OptimizerKind { pspo, spsa, both };

struct QuadraticSettings {
  int dim = 5;
  double sigma = 3.0;
  /// Initial iterates are drawn per repeat from the uniform cube
  /// [-radius, radius]^dim, shared between optimizers for a fair race.
  double radius = 3.0;
};

struct SirSettings {
  /// Generating parameters of the synthetic outbreak (used when no data
  /// file is given).
  double beta = 0.5;
  double gamma = 0.25;
  long s0 = 187;
  long i0 = 1;
  long r0 = 0;
  double horizon = 60.0;
  double dt = 1.0;
  /// Pinned to a major-outbreak realization (final size 162 of 188) so the
  /// synthetic series carries calibration signal, like the real outbreak
  /// data it stands in for.
  std::uint64_t data_seed = 2025;
  /// Pseudo-likelihood smoothing.
  int replicates = 25;
  double noise_scale = 1.0;
  /// Calibration start point (natural scale).
  double beta0 = 1.0;
  double gamma0 = 0.5;
};

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::quadratic;
  std::string data_path;  ///< SIR series CSV; empty = synthesize
  OptimizerKind optimizer = OptimizerKind::both;
  int repeats = 200;
  int max_iters = 100;
  /// Convergence threshold: on the true noiseless objective for the
  /// quadratic, on the update size ||alpha d|| for SIR.
  double threshold = 0.5;
  QuadraticSettings quadratic;
  SirSettings sir;
  PspoConfig pspo;
  SpsaConfig spsa;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int workers = 0;  ///< concurrent repeats; 0 = hardware concurrency
};

/// Config pre-tuned for the given problem (optimizer gains, perturbation
/// sizes, curvature floor). The CLI starts from this and applies overrides.
ExperimentConfig default_config(ProblemKind kind);

/// A runnable problem instance: the noisy objective, the experiment's
/// convergence predicate over trace records, per-repeat initial points, and
/// (when one exists) the exact noiseless objective.
struct ProblemBundle {
  ObjectiveSpec objective;
  std::function<double(const Vector&)> true_objective;  ///< null for SIR
  std::function<Vector(int repeat)> initial_point;
  std::function<bool(const IterationRecord&)> converged_at;
  std::string convergence_metric;  ///< emitted into summary metadata
};

ProblemBundle make_problem(const ExperimentConfig& config);

/// First 1-based iteration index whose record satisfies the predicate,
/// censored at max_iters for runs that never satisfy it.
int iterations_to_converge(const OptimizerTrace& trace,
                           const std::function<bool(const IterationRecord&)>& converged_at,
                           int max_iters);

struct OptimizerSummary {
  std::string optimizer;
  int repeats = 0;
  int converged = 0;
  double median_iters = 0;
  double mean_iters = 0;
  double q25_iters = 0;
  double q75_iters = 0;
  double mean_evals = 0;
  double median_evals = 0;
};

struct CompareResult {
  std::vector<OptimizerSummary> summaries;
  std::filesystem::path runs_csv;
  std::filesystem::path summary_csv;
  std::filesystem::path histogram_csv;
};

/// Races the selected optimizers over `repeats` runs and writes runs.csv
/// (one row per optimizer/repeat/iteration), summary.csv (per-optimizer
/// aggregates plus the convergence definition), and histogram.csv
/// (iterations-to-converge counts, bins 1..max_iters, one column per
/// optimizer). Fully deterministic in (config, seed).
CompareResult run_compare(const ExperimentConfig& config);

struct MSweepRow {
  int rounds = 0;
  int repeat = 0;
  int iterations = 0;
  bool converged = false;
  std::uint64_t total_evals = 0;
};

struct MSweepResult {
  std::vector<MSweepRow> rows;
  std::filesystem::path csv;
  /// Mean iterations-to-converge per swept round count, in input order.
  std::vector<std::pair<int, double>> mean_iterations;
};

/// Reruns PSPO with the round count pinned to each value in `rounds_values`
/// (the tolerance schedule is bypassed) and writes m_sweep.csv.
MSweepResult run_m_sweep(const ExperimentConfig& config, const std::vector<int>& rounds_values);

struct NoiseProbeRow {
  double c = 0;
  double epsilon = 0;
  int rounds = 0;
  bool capped = false;
};

struct NoiseProbeResult {
  double sigma2_hat = 0;
  int replicates = 0;
  std::vector<NoiseProbeRow> rows;
};

/// Estimates the noise variance at `point` (default: the problem's initial
/// point) from `replicates` evaluations and tabulates the recommended round
/// count over the (c, epsilon) grid.
NoiseProbeResult run_noise_probe(const ExperimentConfig& config,
                                 const std::optional<Vector>& point, int replicates,
                                 const std::vector<double>& c_grid,
                                 const std::vector<double>& eps_grid);

struct CalibrateResult {
  SirParams fitted;
  bool converged = false;
  StopReason stop_reason = StopReason::running;
  int iterations = 0;
  std::uint64_t total_evals = 0;
  std::filesystem::path trace_csv;
};

/// Single SIR calibration run with the selected optimizer (PSPO unless spsa
/// is chosen); writes the trace to calibration.csv.
CalibrateResult run_calibrate(const ExperimentConfig& config);

}  // namespace pspo
