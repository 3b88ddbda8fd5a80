// pspo: batch experiment runner for the PSPO/SPSA optimizers.
//
// Subcommands: compare, m-sweep, noise-probe, calibrate. Options can come
// from flags, PSPO_* environment variables, or an INI config file
// (--config); flags win over the environment, which wins over the file.
// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 run failure.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pspo/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitRun = 4;

struct CliOptions {
  pspo::ExperimentConfig config = pspo::default_config(pspo::ProblemKind::quadratic);
  std::string problem = "quadratic";
  std::string optimizer = "both";
  std::vector<int> sweep_rounds{1, 2, 5, 10, 20};
  int probe_replicates = 1000;
  std::vector<double> probe_c{0.01, 0.05, 0.1, 0.5, 1.0};
  std::vector<double> probe_eps{0.25, 0.5, 1.0, 2.0};
  std::vector<double> probe_point;
};

pspo::ProblemKind parse_problem(const std::string& name) {
  if (name == "quadratic") return pspo::ProblemKind::quadratic;
  if (name == "sir") return pspo::ProblemKind::sir;
  throw pspo::ConfigError("unknown problem '" + name + "' (expected quadratic|sir)");
}

pspo::OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "pspo") return pspo::OptimizerKind::pspo;
  if (name == "spsa") return pspo::OptimizerKind::spsa;
  if (name == "both") return pspo::OptimizerKind::both;
  throw pspo::ConfigError("unknown optimizer '" + name + "' (expected pspo|spsa|both)");
}

void print_summaries(const pspo::CompareResult& result) {
  std::printf("%-6s %8s %10s %13s %11s %11s %12s\n", "opt", "repeats", "converged",
              "median_iters", "mean_iters", "q25..q75", "mean_evals");
  for (const auto& s : result.summaries)
    std::printf("%-6s %8d %10d %13.1f %11.2f %5.1f..%-5.1f %12.1f\n", s.optimizer.c_str(),
                s.repeats, s.converged, s.median_iters, s.mean_iters, s.q25_iters, s.q75_iters,
                s.mean_evals);
  std::printf("wrote %s\n", result.runs_csv.string().c_str());
  std::printf("wrote %s\n", result.summary_csv.string().c_str());
  std::printf("wrote %s\n", result.histogram_csv.string().c_str());
}

int run(const CliOptions& opts, const std::string& command) {
  pspo::ExperimentConfig config = opts.config;
  config.problem = parse_problem(opts.problem);
  config.optimizer = parse_optimizer(opts.optimizer);

  if (command == "compare") {
    print_summaries(pspo::run_compare(config));
    return kExitOk;
  }
  if (command == "m-sweep") {
    auto result = pspo::run_m_sweep(config, opts.sweep_rounds);
    std::printf("%8s %18s\n", "rounds", "mean_iterations");
    for (auto& [rounds, mean] : result.mean_iterations)
      std::printf("%8d %18.2f\n", rounds, mean);
    std::printf("wrote %s\n", result.csv.string().c_str());
    return kExitOk;
  }
  if (command == "noise-probe") {
    std::optional<pspo::Vector> point;
    if (!opts.probe_point.empty()) {
      pspo::Vector v(static_cast<Eigen::Index>(opts.probe_point.size()));
      for (std::size_t i = 0; i < opts.probe_point.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = opts.probe_point[i];
      point = v;
    }
    auto result =
        pspo::run_noise_probe(config, point, opts.probe_replicates, opts.probe_c, opts.probe_eps);
    std::printf("estimated noise variance: %.6g (from %d replicates)\n", result.sigma2_hat,
                result.replicates);
    std::printf("%10s %10s %10s %8s\n", "c", "epsilon", "rounds", "capped");
    for (const auto& row : result.rows)
      std::printf("%10.4g %10.4g %10d %8s\n", row.c, row.epsilon, row.rounds,
                  row.capped ? "yes" : "no");
    return kExitOk;
  }
  if (command == "calibrate") {
    auto result = pspo::run_calibrate(config);
    std::printf("fitted rates: beta = %.6g, gamma = %.6g (per day)\n", result.fitted.beta,
                result.fitted.gamma);
    std::printf("iterations: %d, evaluations: %llu, stop: %s\n", result.iterations,
                static_cast<unsigned long long>(result.total_evals),
                std::string(pspo::to_string(result.stop_reason)).c_str());
    std::printf("wrote %s\n", result.trace_csv.string().c_str());
    return kExitOk;
  }
  throw pspo::ConfigError("no subcommand given (expected compare|m-sweep|noise-probe|calibrate)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Derivative-free stochastic optimization experiments (PSPO vs second-order SPSA)"};
  app.set_config("--config", "", "INI config file; flags and PSPO_* env vars override it");
  app.footer("Every long option can also be set via the environment with prefix PSPO_,\n"
             "e.g. PSPO_SEED=7, PSPO_OUT=results, PSPO_PSPO_C=0.5.");

  CliOptions opts;
  auto& config = opts.config;

  auto* opt_problem = app.add_option("--problem", opts.problem, "Benchmark problem: quadratic|sir")
                          ->envname("PSPO_PROBLEM")
                          ->capture_default_str();
  app.add_option("--optimizer", opts.optimizer, "Optimizer selection: pspo|spsa|both")
      ->envname("PSPO_OPTIMIZER")
      ->capture_default_str();
  app.add_option("--seed", config.seed, "Master seed; every output is a pure function of it")
      ->envname("PSPO_SEED")
      ->capture_default_str();
  app.add_option("--out", config.out_dir, "Output directory for CSV artifacts")
      ->envname("PSPO_OUT")
      ->capture_default_str();
  auto* opt_repeats = app.add_option("--repeats", config.repeats, "Independent runs per optimizer")
                          ->envname("PSPO_REPEATS");
  auto* opt_max_iters = app.add_option("--max-iters", config.max_iters, "Iteration budget per run")
                            ->envname("PSPO_MAX_ITERS");
  auto* opt_threshold =
      app.add_option("--threshold", config.threshold,
                     "Convergence threshold (true objective for quadratic, step size for sir)")
          ->envname("PSPO_THRESHOLD");
  app.add_option("--data", config.data_path, "Epidemic series CSV (t,S,I,R); implies --problem sir")
      ->envname("PSPO_DATA");
  app.add_option("--workers", config.workers, "Concurrent repeats (0 = hardware)")
      ->envname("PSPO_WORKERS");

  app.add_option("--dim", config.quadratic.dim, "Quadratic dimension");
  app.add_option("--sigma", config.quadratic.sigma, "Quadratic noise standard deviation");
  app.add_option("--radius", config.quadratic.radius, "Initial-point cube half-width");

  app.add_option("--sir-beta", config.sir.beta, "Synthetic data transmission rate");
  app.add_option("--sir-gamma", config.sir.gamma, "Synthetic data recovery rate");
  app.add_option("--sir-horizon", config.sir.horizon, "Synthetic data horizon (days)");
  app.add_option("--sir-dt", config.sir.dt, "Synthetic data step (days)");
  app.add_option("--sir-data-seed", config.sir.data_seed, "Synthetic data seed");
  app.add_option("--sir-replicates", config.sir.replicates, "Pseudo-likelihood replicates");
  app.add_option("--sir-noise-scale", config.sir.noise_scale, "Pseudo-likelihood noise scale");
  app.add_option("--sir-beta0", config.sir.beta0, "Calibration start beta");
  app.add_option("--sir-gamma0", config.sir.gamma0, "Calibration start gamma");

  auto* opt_pspo_c = app.add_option("--pspo-c", config.pspo.c, "PSP perturbation size");
  auto* opt_pspo_ct =
      app.add_option("--pspo-c-tilde", config.pspo.c_tilde, "Curvature probe step");
  app.add_option("--pspo-epsilon0", config.pspo.epsilon0, "Gradient tolerance at iteration 0");
  app.add_option("--pspo-gamma-eps", config.pspo.gamma_eps, "Tolerance decay exponent");
  app.add_option("--pspo-m-min", config.pspo.m_min, "Round count lower clamp (0 = dim)");
  app.add_option("--pspo-m-max", config.pspo.m_max, "Round count upper clamp (0 = 10*dim)");
  auto* opt_pspo_floor = app.add_option("--pspo-curvature-floor", config.pspo.curvature_floor,
                                        "Curvature safeguard, relative to ||d||^2");
  app.add_option("--pspo-grad-tol", config.pspo.stop.grad_norm_tol,
                 "Stop on gradient norm (0 disables)");
  app.add_option("--pspo-step-tol", config.pspo.stop.step_tol, "Stop on step size (0 disables)");
  double sigma2_override = -1.0;
  auto* opt_sigma2 = app.add_option("--pspo-sigma2", sigma2_override,
                                    "Known noise variance (skips estimation)");
  app.add_option("--pspo-noise-replicates", config.pspo.noise_replicates,
                 "Replicates for noise estimation");

  auto* opt_spsa_a = app.add_option("--spsa-a", config.spsa.a, "SPSA gain numerator");
  app.add_option("--spsa-A", config.spsa.A, "SPSA gain offset (0 = 10% of max-iters)");
  app.add_option("--spsa-alpha", config.spsa.alpha_exp, "SPSA gain decay exponent");
  auto* opt_spsa_c0 = app.add_option("--spsa-c0", config.spsa.c0, "SPSA perturbation size");
  app.add_option("--spsa-gamma", config.spsa.gamma_exp, "SPSA perturbation decay exponent");
  app.add_option("--spsa-ct-factor", config.spsa.c_tilde_factor,
                 "Curvature probe step as a fraction of c_k");
  auto* opt_spsa_floor =
      app.add_option("--spsa-pd-floor", config.spsa.pd_floor, "Hessian projection floor");
  app.add_option("--spsa-grad-tol", config.spsa.stop.grad_norm_tol,
                 "Stop on gradient norm (0 disables)");
  app.add_option("--spsa-step-tol", config.spsa.stop.step_tol, "Stop on step size (0 disables)");

  auto* compare = app.add_subcommand("compare", "Race the optimizers and write runs/summary/histogram CSVs");
  auto* sweep = app.add_subcommand("m-sweep", "Fix the PSP round count to each value and compare");
  sweep->add_option("--rounds", opts.sweep_rounds, "Round counts to sweep")
      ->delimiter(',')
      ->capture_default_str();
  auto* probe = app.add_subcommand("noise-probe",
                                   "Estimate the noise variance and tabulate recommended rounds");
  probe->add_option("--replicates,-k", opts.probe_replicates, "Evaluations for the estimate")
      ->capture_default_str();
  probe->add_option("--c-grid", opts.probe_c, "Perturbation sizes")
      ->delimiter(',')
      ->capture_default_str();
  probe->add_option("--eps-grid", opts.probe_eps, "Error tolerances")
      ->delimiter(',')
      ->capture_default_str();
  probe->add_option("--point", opts.probe_point, "Probe point (defaults to the initial point)")
      ->delimiter(',');
  auto* calibrate = app.add_subcommand("calibrate", "Single SIR calibration run");
  app.require_subcommand(0, 1);
  for (auto* sub : {compare, sweep, probe, calibrate}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (!config.data_path.empty()) opts.problem = "sir";
    if (calibrate->parsed() && !*opt_problem) opts.problem = "sir";
    // Problem-dependent defaults: settings the user did not touch follow the
    // selected problem's tuning rather than the quadratic's.
    if (parse_problem(opts.problem) == pspo::ProblemKind::sir) {
      auto sir_defaults = pspo::default_config(pspo::ProblemKind::sir);
      if (!*opt_repeats) config.repeats = sir_defaults.repeats;
      if (!*opt_max_iters) config.max_iters = sir_defaults.max_iters;
      if (!*opt_threshold) config.threshold = sir_defaults.threshold;
      if (!*opt_pspo_c) config.pspo.c = sir_defaults.pspo.c;
      if (!*opt_pspo_ct) config.pspo.c_tilde = sir_defaults.pspo.c_tilde;
      if (!*opt_pspo_floor) config.pspo.curvature_floor = sir_defaults.pspo.curvature_floor;
      if (!*opt_spsa_a) config.spsa.a = sir_defaults.spsa.a;
      if (!*opt_spsa_c0) config.spsa.c0 = sir_defaults.spsa.c0;
      if (!*opt_spsa_floor) config.spsa.pd_floor = sir_defaults.spsa.pd_floor;
    }
    if (*opt_sigma2) {
      if (sigma2_override < 0) throw pspo::ConfigError("--pspo-sigma2 must be >= 0");
      config.pspo.sigma2 = sigma2_override;
    }

    std::string command;
    if (compare->parsed()) command = "compare";
    else if (sweep->parsed()) command = "m-sweep";
    else if (probe->parsed()) command = "noise-probe";
    else if (calibrate->parsed()) command = "calibrate";
    return run(opts, command);
  } catch (const pspo::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const pspo::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return kExitRun;
  }
}
