// Acceptance suite: one check per release criterion, each printed as a
// single PASS/FAIL line. A failing criterion fails the binary (nonzero
// exit), so ctest reports it.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "pspo/evaluator.hpp"
#include "pspo/experiments.hpp"
#include "pspo/gradient.hpp"
#include "pspo/hessian.hpp"
#include "pspo/perturbation.hpp"
#include "pspo/problems/quadratic.hpp"
#include "pspo/problems/sir.hpp"
#include "pspo/pspo.hpp"
#include "pspo/seeding.hpp"

using namespace pspo;

namespace {

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> run;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("pspo_acceptance_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

double wilson_lower_99(double p_hat, int n) {
  const double z = 2.5758293035489004;  // two-sided 99%
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = p_hat + z2 / (2.0 * n);
  double margin = z * std::sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n));
  return (center - margin) / denom;
}

Matrix random_symmetric(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Matrix a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = r; c < dim; ++c) a(r, c) = a(c, r) = unif(rng);
  return a;
}

// --- 1. gradient error bound at the scheduled round count -----------------

bool gradient_error_bound(std::string& detail) {
  const int dim = 5;
  const double sigma = 3.0, c = 0.1, epsilon = 1.0;
  const int rounds = rounds_for_tolerance({epsilon, sigma * sigma, c, 1 << 20}, dim).rounds;
  const int n_estimates = 200;

  BatchEvaluator ev(NoisyQuadratic{dim, sigma}.as_objective(), 2);
  Vector theta = Vector::Zero(dim);
  Vector g_true = 2.0 * (theta - Vector::Ones(dim));

  int exceed = 0;
  for (int rep = 0; rep < n_estimates; ++rep) {
    auto est = psp_gradient(ev, theta, c, rounds, mix_seed(101, rep));
    if ((est.g_hat - g_true).norm() >= epsilon) ++exceed;
  }
  double freq = static_cast<double>(exceed) / n_estimates;
  double ci_lower = wilson_lower_99(freq, n_estimates);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "M=%d, freq(||err||>=1) = %.3f, 99%% CI lower = %.3f (must be <= 0.5)", rounds,
                freq, ci_lower);
  detail = buf;
  return ci_lower <= 0.5;
}

// --- 2. scheme blocks span R^p, dim 2 as the negative control --------------

bool block_rank(std::string& detail) {
  int failures = 0;
  for (int dim = 1; dim <= 25; ++dim) {
    if (dim == 2) continue;
    for (int s = 0; s < 100; ++s)
      if (!spans_space(build_perturbations(dim, dim, mix_seed(202, dim, s)))) ++failures;
  }
  int dim2_spans = 0;
  for (int s = 0; s < 100; ++s) {
    Vector a = sample_delta0(2, mix_seed(203, s));
    PerturbationMatrix literal;
    literal.dim = 2;
    literal.rounds = 2;
    literal.columns.resize(2, 2);
    literal.columns.col(0) = flip_column(a, 0);
    literal.columns.col(1) = flip_column(a, 1);
    if (spans_space(literal)) ++dim2_spans;
  }
  detail = "rank failures: " + std::to_string(failures) +
           ", dim-2 literal blocks wrongly spanning: " + std::to_string(dim2_spans);
  return failures == 0 && dim2_spans == 0;
}

// --- 3. Gram trace bound over the (p, M) grid ------------------------------

bool gram_trace_bound(std::string& detail) {
  int violations = 0, cells_hit = 0, total = 0;
  double worst = 0.0;
  int worst_p = 0, worst_m = 0;
  for (int dim = 3; dim <= 25; ++dim) {
    for (int rounds = std::max(4, dim); rounds <= 3 * dim; ++rounds) {
      bool cell_bad = false;
      for (int s = 0; s < 50; ++s) {
        auto m = build_perturbations(dim, rounds, mix_seed(303, dim, rounds, s));
        Matrix gram = m.columns * m.columns.transpose();
        double tr = gram.inverse().trace();
        ++total;
        if (tr > dim / 4.0 + 1e-9) {
          ++violations;
          cell_bad = true;
          if (tr / (dim / 4.0) > worst) {
            worst = tr / (dim / 4.0);
            worst_p = dim;
            worst_m = rounds;
          }
        }
      }
      if (cell_bad) ++cells_hit;
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "%d/%d samples above p/4 (worst %.3fx at p=%d, M=%d; %d grid cells affected)",
                violations, total, worst, worst_p, worst_m, cells_hit);
  detail = buf;
  return violations == 0;
}

// --- 4. unbiasedness on a noisy linear objective ----------------------------

bool linear_unbiasedness(std::string& detail) {
  const int dim = 6, rounds = 6, n_rep = 10000;
  Vector a(dim);
  a << 1.0, -1.0, 2.0, 0.5, -2.0, 1.5;
  ObjectiveSpec spec;
  spec.dim = dim;
  spec.eval = [a](const Vector& x, std::uint64_t seed) {
    std::mt19937_64 rng(splitmix64(seed));
    return a.dot(x) + std::normal_distribution<double>(0.0, 1.0)(rng);
  };
  BatchEvaluator ev(spec, 2);

  Vector sum = Vector::Zero(dim), sumsq = Vector::Zero(dim);
  for (int rep = 0; rep < n_rep; ++rep) {
    auto est = psp_gradient(ev, Vector::Zero(dim), 0.5, rounds, mix_seed(404, rep));
    sum += est.g_hat;
    sumsq += est.g_hat.cwiseProduct(est.g_hat);
  }
  Vector mean = sum / n_rep;
  double worst_sigma = 0.0;
  for (int i = 0; i < dim; ++i) {
    double var = (sumsq[i] - n_rep * mean[i] * mean[i]) / (n_rep - 1);
    double se = std::sqrt(var / n_rep);
    worst_sigma = std::max(worst_sigma, std::abs(mean[i] - a[i]) / se);
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf), "worst per-coordinate deviation %.2f standard errors (<= 4)",
                worst_sigma);
  detail = buf;
  return worst_sigma <= 4.0;
}

// --- 5. reduced-Hessian identity and full-Hessian oracle -------------------

bool reduced_hessian_identity(std::string& detail) {
  std::mt19937_64 rng(505);
  std::normal_distribution<double> gauss;
  double worst_rel = 0.0, worst_full = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    int dim = 2 + trial % 7;
    Matrix a = random_symmetric(dim, mix_seed(505, trial));
    auto grad = [&a](const Vector& x) { return Vector(2.0 * a * x); };

    Vector x(dim), d(dim);
    for (int i = 0; i < dim; ++i) {
      x[i] = gauss(rng);
      d[i] = gauss(rng);
    }
    if (d.norm() < 1e-3) d[0] += 1.0;
    auto h = reduced_hessian(grad(x + d), grad(x - d), d);
    double truth = 2.0 * d.dot(a * d);
    if (std::abs(truth) > 1e-12)
      worst_rel = std::max(worst_rel, std::abs(curvature_along(h, d) - truth) / std::abs(truth));

    std::vector<Vector> dirs;
    for (int i = 0; i < dim; ++i) {
      Vector e = Vector::Zero(dim);
      e[i] = 1e-3;
      dirs.push_back(e);
    }
    Matrix full = full_hessian_estimate(grad, x, dirs);
    worst_full = std::max(worst_full, (full - 2.0 * a).cwiseAbs().maxCoeff());
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "identity rel err %.2e (<= 1e-8), oracle err %.2e (<= 1e-9)",
                worst_rel, worst_full);
  detail = buf;
  return worst_rel <= 1e-8 && worst_full <= 1e-9;
}

// --- 6. quadratic race: median iterations and convergence rate -------------

bool quadratic_race(std::string& detail) {
  auto config = default_config(ProblemKind::quadratic);
  config.repeats = 200;
  config.max_iters = 100;
  config.optimizer = OptimizerKind::both;
  config.seed = 606;
  config.out_dir = fresh_dir("race").string();
  config.workers = 2;
  auto result = run_compare(config);

  const OptimizerSummary* pspo_summary = nullptr;
  const OptimizerSummary* spsa_summary = nullptr;
  for (const auto& s : result.summaries) {
    if (s.optimizer == "pspo") pspo_summary = &s;
    if (s.optimizer == "spsa") spsa_summary = &s;
  }
  if (!pspo_summary || !spsa_summary) {
    detail = "missing summaries";
    return false;
  }
  int pspo_fail = pspo_summary->repeats - pspo_summary->converged;
  int spsa_fail = spsa_summary->repeats - spsa_summary->converged;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "median iters pspo %.1f vs spsa %.1f; non-converged pspo %d vs spsa %d",
                pspo_summary->median_iters, spsa_summary->median_iters, pspo_fail, spsa_fail);
  detail = buf;
  return pspo_summary->median_iters < spsa_summary->median_iters && pspo_fail <= spsa_fail;
}

// --- 7. round-count sweep trend ---------------------------------------------

bool sweep_trend(std::string& detail) {
  auto config = default_config(ProblemKind::quadratic);
  config.repeats = 50;
  config.max_iters = 100;
  config.seed = 707;
  config.out_dir = fresh_dir("sweep").string();
  config.workers = 2;
  auto result = run_m_sweep(config, {1, 2, 5, 10, 20});

  double at_1 = 0, at_20 = 0;
  for (auto& [rounds, mean] : result.mean_iterations) {
    if (rounds == 1) at_1 = mean;
    if (rounds == 20) at_20 = mean;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "mean iters M=20: %.1f vs M=1: %.1f (ratio %.2f <= 0.8)",
                at_20, at_1, at_20 / at_1);
  detail = buf;
  return at_20 <= 0.8 * at_1;
}

// --- 8. conjugate-gradient finite termination with exact oracles ------------

bool cg_termination(std::string& detail) {
  const int dim = 6;
  Matrix a = random_symmetric(dim, 808);
  a += (dim + 2.0) * Matrix::Identity(dim, dim);
  Vector target = Vector::LinSpaced(dim, -2.0, 1.5);

  ObjectiveSpec spec;
  spec.dim = dim;
  spec.eval = [&a, &target](const Vector& x, std::uint64_t) {
    return (x - target).dot(a * (x - target));
  };
  BatchEvaluator ev(spec);

  PspoConfig cfg;
  cfg.sigma2 = 0.0;
  cfg.stop.max_iters = dim;
  cfg.objective_report_replicates = 0;
  PspoOptimizer opt(ev, cfg);
  opt.set_gradient_source([&](const Vector& theta, int rounds, std::uint64_t) {
    GradientEstimate est;
    est.g_hat = 2.0 * a * (theta - target);
    est.rounds = rounds;
    return est;
  });
  opt.set_probe_source([&](const Vector& plus, const Vector& minus, int rounds, std::uint64_t) {
    GradientEstimate gp, gm;
    gp.g_hat = 2.0 * a * (plus - target);
    gm.g_hat = 2.0 * a * (minus - target);
    gp.rounds = gm.rounds = rounds;
    return std::make_pair(gp, gm);
  });

  auto [theta, trace] = opt.minimize(Vector::Zero(dim));
  double err = (theta - target).cwiseAbs().maxCoeff();
  char buf[120];
  std::snprintf(buf, sizeof(buf), "||theta - theta*||_inf = %.2e after %zu iterations (<= 1e-8)",
                err, trace.iterations.size());
  detail = buf;
  return err <= 1e-8 && trace.iterations.size() <= static_cast<std::size_t>(dim);
}

// --- 9. SIR calibration recovery and artifact format ------------------------

bool sir_recovery(std::string& detail) {
  auto config = default_config(ProblemKind::sir);
  const double beta_true = config.sir.beta, gamma_true = config.sir.gamma;
  config.max_iters = 30;

  // Part 1: recovery across optimizer seeds on the pinned synthetic outbreak.
  ProblemBundle bundle = make_problem(config);
  int hits = 0;
  const int n_trials = 20;
  for (int trial = 0; trial < n_trials; ++trial) {
    BatchEvaluator ev(bundle.objective, 1);
    PspoConfig cfg = config.pspo;
    cfg.stop.max_iters = config.max_iters;
    cfg.seed = mix_seed(909, trial);
    auto [theta, trace] = pspo_minimize(ev, bundle.initial_point(0), cfg);
    SirParams fitted = SirCalibration::params_from(theta);
    double err_beta = std::abs(fitted.beta - beta_true) / beta_true;
    double err_gamma = std::abs(fitted.gamma - gamma_true) / gamma_true;
    if (err_beta <= 0.25 && err_gamma <= 0.25) ++hits;
  }

  // Part 2: both optimizers produce complete traces and the histogram file.
  config.repeats = 20;
  config.optimizer = OptimizerKind::both;
  config.seed = 910;
  config.out_dir = fresh_dir("sir").string();
  config.workers = 2;
  auto result = run_compare(config);
  std::ifstream hist(result.histogram_csv);
  std::string header;
  std::getline(hist, header);
  int bins = 0;
  for (std::string line; std::getline(hist, line);) ++bins;
  bool format_ok = header == "iterations,pspo,spsa" && bins == config.max_iters;
  bool traces_ok = result.summaries.size() == 2;
  for (const auto& s : result.summaries) traces_ok = traces_ok && s.repeats == 20;

  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "recovered within 25%% in %d/%d trials (need >= 14); histogram format %s", hits,
                n_trials, format_ok && traces_ok ? "ok" : "BAD");
  detail = buf;
  return hits >= 14 && format_ok && traces_ok;
}

// --- 10. byte-identical reruns ----------------------------------------------

bool determinism(std::string& detail) {
  auto make_cfg = [](const std::string& dir) {
    auto config = default_config(ProblemKind::quadratic);
    config.repeats = 10;
    config.max_iters = 25;
    config.seed = 1010;
    config.out_dir = dir;
    config.workers = 2;
    return config;
  };
  auto ra = run_compare(make_cfg(fresh_dir("det_a").string()));
  auto rb = run_compare(make_cfg(fresh_dir("det_b").string()));
  bool compare_ok = slurp(ra.runs_csv) == slurp(rb.runs_csv) &&
                    slurp(ra.summary_csv) == slurp(rb.summary_csv) &&
                    slurp(ra.histogram_csv) == slurp(rb.histogram_csv);

  auto sa = run_m_sweep(make_cfg(fresh_dir("det_c").string()), {1, 5});
  auto sb = run_m_sweep(make_cfg(fresh_dir("det_d").string()), {1, 5});
  bool sweep_ok = slurp(sa.csv) == slurp(sb.csv);

  auto sir_cfg = [](const std::string& dir) {
    auto config = default_config(ProblemKind::sir);
    config.repeats = 1;
    config.max_iters = 6;
    config.seed = 77;
    config.out_dir = dir;
    return config;
  };
  auto ca = run_calibrate(sir_cfg(fresh_dir("det_e").string()));
  auto cb = run_calibrate(sir_cfg(fresh_dir("det_f").string()));
  bool cal_ok = slurp(ca.trace_csv) == slurp(cb.trace_csv);

  detail = std::string("compare ") + (compare_ok ? "ok" : "DIFFERS") + ", sweep " +
           (sweep_ok ? "ok" : "DIFFERS") + ", calibrate " + (cal_ok ? "ok" : "DIFFERS");
  return compare_ok && sweep_ok && cal_ok;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria{
      {"PSP gradient error bound at the scheduled round count", gradient_error_bound},
      {"sign-flip blocks span R^p (dim 2 negative control)", block_rank},
      {"Gram trace bound p/4 across the (p, M) grid", gram_trace_bound},
      {"PSP unbiasedness on a noisy linear objective", linear_unbiasedness},
      {"reduced-Hessian curvature identity and full-Hessian oracle", reduced_hessian_identity},
      {"noisy quadratic race: PSPO beats SPSA on median iterations", quadratic_race},
      {"round-count sweep: more rounds, fewer iterations", sweep_trend},
      {"conjugate-gradient finite termination with exact oracles", cg_termination},
      {"SIR calibration recovery and comparison artifacts", sir_recovery},
      {"byte-identical experiment reruns", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %2zu. %s — %s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
