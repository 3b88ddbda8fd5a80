#include "pspo/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <utility>

#include "pspo/parallel.hpp"
#include "pspo/seeding.hpp"

namespace pspo {

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_theta(const Vector& theta) {
  std::string out;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (i) out += ';';
    out += format_double(theta[i]);
  }
  return out;
}

// Type-7 quantile (linear interpolation), matching the usual default.
double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double h = (static_cast<double>(values.size()) - 1.0) * q;
  auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::string optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::pspo ? "pspo" : "spsa";
}

std::vector<OptimizerKind> selected_optimizers(const ExperimentConfig& config) {
  switch (config.optimizer) {
    case OptimizerKind::pspo: return {OptimizerKind::pspo};
    case OptimizerKind::spsa: return {OptimizerKind::spsa};
    case OptimizerKind::both: return {OptimizerKind::pspo, OptimizerKind::spsa};
  }
  throw ConfigError("unknown optimizer selection");
}

void validate(const ExperimentConfig& config) {
  if (config.repeats < 1) throw ConfigError("repeats must be >= 1");
  if (config.max_iters < 1) throw ConfigError("max-iters must be >= 1");
  if (config.threshold <= 0) throw ConfigError("threshold must be > 0");
  if (config.problem == ProblemKind::quadratic && config.quadratic.dim < 1)
    throw ConfigError("quadratic dim must be >= 1");
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open output file " + path.string());
  return out;
}

std::filesystem::path prepare_out_dir(const ExperimentConfig& config) {
  std::filesystem::path dir(config.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

struct RunOutcome {
  OptimizerTrace trace;
  int iterations = 0;
  bool converged = false;
};

RunOutcome execute_run(const ExperimentConfig& config, const ProblemBundle& bundle,
                       OptimizerKind kind, int repeat, std::optional<int> fixed_rounds) {
  BatchEvaluator evaluator(bundle.objective, /*workers=*/1);
  Vector theta0 = bundle.initial_point(repeat);

  OptimizerTrace trace;
  if (kind == OptimizerKind::pspo) {
    PspoConfig cfg = config.pspo;
    cfg.stop.max_iters = config.max_iters;
    cfg.seed = mix_seed(config.seed, 0x90u, static_cast<std::uint64_t>(repeat));
    if (fixed_rounds) cfg.fixed_rounds = fixed_rounds;
    trace = pspo_minimize(evaluator, theta0, cfg).second;
  } else {
    SpsaConfig cfg = config.spsa;
    cfg.stop.max_iters = config.max_iters;
    cfg.seed = mix_seed(config.seed, 0x5au, static_cast<std::uint64_t>(repeat));
    trace = spsa2_minimize(evaluator, theta0, cfg).second;
  }

  RunOutcome outcome;
  outcome.iterations = iterations_to_converge(trace, bundle.converged_at, config.max_iters);
  for (const auto& rec : trace.iterations)
    if (bundle.converged_at(rec)) {
      outcome.converged = true;
      break;
    }
  outcome.trace = std::move(trace);
  return outcome;
}

void write_runs_csv(std::ofstream& out, const std::string& name, int repeat,
                    const OptimizerTrace& trace) {
  for (const auto& rec : trace.iterations) {
    out << name << ',' << repeat << ',' << rec.k << ',' << format_double(rec.grad_norm) << ','
        << format_double(rec.objective_mean) << ',' << rec.rounds << ',' << rec.probe_rounds
        << ',' << format_double(rec.alpha) << ',' << format_double(rec.beta) << ','
        << format_double(rec.step_norm) << ',' << rec.cumulative_evals << ','
        << (rec.restarted ? 1 : 0) << ',' << format_theta(rec.theta) << '\n';
  }
}

constexpr const char* kRunsHeader =
    "optimizer,repeat,iteration,grad_norm,objective_mean,rounds,probe_rounds,alpha,beta,"
    "step_norm,cumulative_evals,restarted,theta";

OptimizerSummary summarize(const std::string& name, const std::vector<RunOutcome>& outcomes) {
  OptimizerSummary s;
  s.optimizer = name;
  s.repeats = static_cast<int>(outcomes.size());
  std::vector<double> iters, evals;
  iters.reserve(outcomes.size());
  evals.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    if (o.converged) ++s.converged;
    iters.push_back(o.iterations);
    evals.push_back(static_cast<double>(o.trace.total_evals));
  }
  s.median_iters = quantile(iters, 0.5);
  s.q25_iters = quantile(iters, 0.25);
  s.q75_iters = quantile(iters, 0.75);
  s.mean_iters = 0;
  for (double v : iters) s.mean_iters += v;
  s.mean_iters /= static_cast<double>(iters.size());
  s.median_evals = quantile(evals, 0.5);
  s.mean_evals = 0;
  for (double v : evals) s.mean_evals += v;
  s.mean_evals /= static_cast<double>(evals.size());
  return s;
}

}  // namespace

ExperimentConfig default_config(ProblemKind kind) {
  ExperimentConfig config;
  config.problem = kind;
  if (kind == ProblemKind::quadratic) {
    config.repeats = 200;
    config.max_iters = 100;
    config.threshold = 0.5;
    config.pspo.c = 0.6;
    config.pspo.c_tilde = 0.3;
    config.pspo.epsilon0 = 1.0;
    config.pspo.gamma_eps = 0.5;
    config.pspo.curvature_floor = 1.0;
    config.spsa.a = 0.8;
    config.spsa.c0 = 1.5;
    config.spsa.pd_floor = 4.0;
  } else {
    config.repeats = 100;
    config.max_iters = 30;
    config.threshold = 0.01;  // on the update size
    config.pspo.c = 0.1;
    config.pspo.c_tilde = 0.05;
    config.pspo.epsilon0 = 1.0;
    config.pspo.gamma_eps = 0.5;
    config.pspo.curvature_floor = 10.0;
    config.spsa.a = 0.25;
    config.spsa.c0 = 0.1;
    config.spsa.pd_floor = 25.0;
  }
  return config;
}

ProblemBundle make_problem(const ExperimentConfig& config) {
  validate(config);
  ProblemBundle bundle;
  double threshold = config.threshold;

  if (config.problem == ProblemKind::quadratic) {
    NoisyQuadratic problem{config.quadratic.dim, config.quadratic.sigma};
    bundle.objective = problem.as_objective();
    bundle.true_objective = [problem](const Vector& x) { return problem.noiseless(x); };
    double radius = config.quadratic.radius;
    int dim = config.quadratic.dim;
    std::uint64_t seed = config.seed;
    bundle.initial_point = [radius, dim, seed](int repeat) {
      std::mt19937_64 rng(splitmix64(mix_seed(seed, 0x171au, static_cast<std::uint64_t>(repeat))));
      std::uniform_real_distribution<double> coord(-radius, radius);
      Vector theta0(dim);
      for (int i = 0; i < dim; ++i) theta0[i] = coord(rng);
      return theta0;
    };
    auto truth = bundle.true_objective;
    bundle.converged_at = [truth, threshold](const IterationRecord& rec) {
      return truth(rec.theta) <= threshold;
    };
    bundle.convergence_metric = "true_objective";
    return bundle;
  }

  EpidemicSeries data;
  if (!config.data_path.empty()) {
    try {
      data = load_epidemic_csv(config.data_path);
    } catch (const std::runtime_error& e) {
      throw IoError(e.what());
    }
  } else {
    data = simulate_sir(SirParams{config.sir.beta, config.sir.gamma},
                        SirInit{config.sir.s0, config.sir.i0, config.sir.r0},
                        config.sir.horizon, config.sir.dt, config.sir.data_seed);
  }

  SirCalibration calibration{std::move(data), config.sir.replicates, config.sir.noise_scale};
  bundle.objective = calibration.as_objective();
  bundle.true_objective = nullptr;
  Vector start = SirCalibration::log_params_of(SirParams{config.sir.beta0, config.sir.gamma0});
  bundle.initial_point = [start](int) { return start; };
  bundle.converged_at = [threshold](const IterationRecord& rec) {
    return rec.step_norm > 0 && rec.step_norm <= threshold;
  };
  bundle.convergence_metric = "step_norm";
  return bundle;
}

int iterations_to_converge(const OptimizerTrace& trace,
                           const std::function<bool(const IterationRecord&)>& converged_at,
                           int max_iters) {
  for (const auto& rec : trace.iterations)
    if (converged_at(rec)) return rec.k + 1;
  return max_iters;
}

CompareResult run_compare(const ExperimentConfig& config) {
  validate(config);
  ProblemBundle bundle = make_problem(config);
  auto optimizers = selected_optimizers(config);

  auto dir = prepare_out_dir(config);
  CompareResult result;
  result.runs_csv = dir / "runs.csv";
  result.summary_csv = dir / "summary.csv";
  result.histogram_csv = dir / "histogram.csv";
  auto runs_out = open_output(result.runs_csv);
  auto summary_out = open_output(result.summary_csv);
  auto histogram_out = open_output(result.histogram_csv);

  // Flat (optimizer x repeat) grid, each run with an isolated RNG stream.
  std::size_t total = optimizers.size() * static_cast<std::size_t>(config.repeats);
  std::vector<RunOutcome> outcomes(total);
  parallel_for(total, config.workers, [&](std::size_t idx) {
    auto kind = optimizers[idx / static_cast<std::size_t>(config.repeats)];
    int repeat = static_cast<int>(idx % static_cast<std::size_t>(config.repeats));
    outcomes[idx] = execute_run(config, bundle, kind, repeat, std::nullopt);
  });

  runs_out << kRunsHeader << '\n';
  for (std::size_t o = 0; o < optimizers.size(); ++o) {
    auto name = optimizer_name(optimizers[o]);
    for (int repeat = 0; repeat < config.repeats; ++repeat)
      write_runs_csv(runs_out, name, repeat,
                     outcomes[o * static_cast<std::size_t>(config.repeats) +
                              static_cast<std::size_t>(repeat)]
                         .trace);
  }

  summary_out << "optimizer,repeats,converged,median_iters,mean_iters,q25_iters,q75_iters,"
                 "mean_evals,median_evals,convergence_metric,threshold,max_iters,seed\n";
  for (std::size_t o = 0; o < optimizers.size(); ++o) {
    std::vector<RunOutcome> slice(
        outcomes.begin() + static_cast<std::ptrdiff_t>(o * config.repeats),
        outcomes.begin() + static_cast<std::ptrdiff_t>((o + 1) * config.repeats));
    auto s = summarize(optimizer_name(optimizers[o]), slice);
    result.summaries.push_back(s);
    summary_out << s.optimizer << ',' << s.repeats << ',' << s.converged << ','
                << format_double(s.median_iters) << ',' << format_double(s.mean_iters) << ','
                << format_double(s.q25_iters) << ',' << format_double(s.q75_iters) << ','
                << format_double(s.mean_evals) << ',' << format_double(s.median_evals) << ','
                << bundle.convergence_metric << ',' << format_double(config.threshold) << ','
                << config.max_iters << ',' << config.seed << '\n';
  }

  histogram_out << "iterations";
  for (auto kind : optimizers) histogram_out << ',' << optimizer_name(kind);
  histogram_out << '\n';
  std::vector<std::vector<int>> bins(optimizers.size(),
                                     std::vector<int>(static_cast<std::size_t>(config.max_iters), 0));
  for (std::size_t o = 0; o < optimizers.size(); ++o)
    for (int repeat = 0; repeat < config.repeats; ++repeat) {
      int iters = outcomes[o * static_cast<std::size_t>(config.repeats) +
                           static_cast<std::size_t>(repeat)]
                      .iterations;
      iters = std::clamp(iters, 1, config.max_iters);
      ++bins[o][static_cast<std::size_t>(iters - 1)];
    }
  for (int b = 1; b <= config.max_iters; ++b) {
    histogram_out << b;
    for (std::size_t o = 0; o < optimizers.size(); ++o)
      histogram_out << ',' << bins[o][static_cast<std::size_t>(b - 1)];
    histogram_out << '\n';
  }

  if (!runs_out || !summary_out || !histogram_out)
    throw IoError("write failed in " + dir.string());
  return result;
}

MSweepResult run_m_sweep(const ExperimentConfig& config, const std::vector<int>& rounds_values) {
  validate(config);
  if (rounds_values.empty()) throw ConfigError("m-sweep: empty rounds list");
  for (int m : rounds_values)
    if (m < 1) throw ConfigError("m-sweep: round counts must be >= 1, got " + std::to_string(m));

  ProblemBundle bundle = make_problem(config);
  auto dir = prepare_out_dir(config);
  MSweepResult result;
  result.csv = dir / "m_sweep.csv";
  auto out = open_output(result.csv);

  std::size_t total = rounds_values.size() * static_cast<std::size_t>(config.repeats);
  std::vector<RunOutcome> outcomes(total);
  parallel_for(total, config.workers, [&](std::size_t idx) {
    int rounds = rounds_values[idx / static_cast<std::size_t>(config.repeats)];
    int repeat = static_cast<int>(idx % static_cast<std::size_t>(config.repeats));
    outcomes[idx] = execute_run(config, bundle, OptimizerKind::pspo, repeat, rounds);
  });

  out << "rounds,repeat,iterations,converged,total_evals\n";
  for (std::size_t g = 0; g < rounds_values.size(); ++g) {
    double mean = 0.0;
    for (int repeat = 0; repeat < config.repeats; ++repeat) {
      const auto& o =
          outcomes[g * static_cast<std::size_t>(config.repeats) + static_cast<std::size_t>(repeat)];
      result.rows.push_back({rounds_values[g], repeat, o.iterations, o.converged,
                             o.trace.total_evals});
      out << rounds_values[g] << ',' << repeat << ',' << o.iterations << ','
          << (o.converged ? 1 : 0) << ',' << o.trace.total_evals << '\n';
      mean += o.iterations;
    }
    result.mean_iterations.emplace_back(rounds_values[g], mean / config.repeats);
  }
  if (!out) throw IoError("write failed in " + dir.string());
  return result;
}

NoiseProbeResult run_noise_probe(const ExperimentConfig& config,
                                 const std::optional<Vector>& point, int replicates,
                                 const std::vector<double>& c_grid,
                                 const std::vector<double>& eps_grid) {
  validate(config);
  if (c_grid.empty() || eps_grid.empty()) throw ConfigError("noise-probe: empty grid");
  for (double c : c_grid)
    if (c <= 0) throw ConfigError("noise-probe: c values must be > 0");
  for (double eps : eps_grid)
    if (eps <= 0) throw ConfigError("noise-probe: epsilon values must be > 0");

  ProblemBundle bundle = make_problem(config);
  BatchEvaluator evaluator(bundle.objective, config.workers);
  Vector at = point ? *point : bundle.initial_point(0);
  if (at.size() != bundle.objective.dim)
    throw ConfigError("noise-probe: point dimension does not match the problem");

  NoiseProbeResult result;
  result.replicates = replicates;
  result.sigma2_hat =
      estimate_noise_variance(evaluator, at, replicates, mix_seed(config.seed, 0x0bu));
  for (double c : c_grid)
    for (double eps : eps_grid) {
      RoundCount rc = rounds_for_tolerance({eps, result.sigma2_hat, c, ToleranceSpec{}.m_max},
                                           bundle.objective.dim);
      result.rows.push_back({c, eps, rc.rounds, rc.capped});
    }
  return result;
}

CalibrateResult run_calibrate(const ExperimentConfig& config) {
  validate(config);
  if (config.problem != ProblemKind::sir)
    throw ConfigError("calibrate requires the sir problem");

  ProblemBundle bundle = make_problem(config);
  auto dir = prepare_out_dir(config);
  CalibrateResult result;
  result.trace_csv = dir / "calibration.csv";
  auto out = open_output(result.trace_csv);

  OptimizerKind kind =
      config.optimizer == OptimizerKind::spsa ? OptimizerKind::spsa : OptimizerKind::pspo;
  RunOutcome outcome = execute_run(config, bundle, kind, /*repeat=*/0, std::nullopt);

  out << kRunsHeader << '\n';
  write_runs_csv(out, optimizer_name(kind), 0, outcome.trace);
  if (!out) throw IoError("write failed in " + dir.string());

  Vector theta = outcome.trace.iterations.empty() ? bundle.initial_point(0)
                                                  : outcome.trace.iterations.back().theta;
  result.fitted = SirCalibration::params_from(theta);
  result.converged = outcome.trace.converged;
  result.stop_reason = outcome.trace.stop_reason;
  result.iterations = static_cast<int>(outcome.trace.iterations.size());
  result.total_evals = outcome.trace.total_evals;
  return result;
}

}  // namespace pspo
