#include <benchmark/benchmark.h>

#include <random>

#include "pspo/evaluator.hpp"
#include "pspo/gradient.hpp"
#include "pspo/perturbation.hpp"
#include "pspo/problems/quadratic.hpp"
#include "pspo/problems/sir.hpp"
#include "pspo/pspo.hpp"
#include "pspo/seeding.hpp"
#include "pspo/spsa.hpp"

namespace {

using namespace pspo;

void BM_BuildPerturbations(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto m = build_perturbations(dim, 3 * dim, seed++);
    benchmark::DoNotOptimize(m.columns.data());
  }
  state.SetComplexityN(dim);
}
BENCHMARK(BM_BuildPerturbations)->RangeMultiplier(2)->Range(4, 256)->Complexity();

void BM_PspGradient(benchmark::State& state) {
  const int dim = 5;
  const int rounds = static_cast<int>(state.range(0));
  BatchEvaluator ev(NoisyQuadratic{dim, 3.0}.as_objective(), 1);
  Vector theta = Vector::Zero(dim);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto est = psp_gradient(ev, theta, 0.1, rounds, seed++);
    benchmark::DoNotOptimize(est.g_hat.data());
  }
  state.SetItemsProcessed(state.iterations() * (rounds + 1));
}
BENCHMARK(BM_PspGradient)->Arg(5)->Arg(50)->Arg(500)->Arg(4500);

void BM_EvaluateBatchWorkers(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  // A deliberately slow objective so the worker pool has something to hide.
  ObjectiveSpec spec;
  spec.dim = 5;
  spec.eval = [](const Vector& x, std::uint64_t seed) {
    double acc = 0.0;
    std::uint64_t s = seed;
    for (int i = 0; i < 2000; ++i) acc += static_cast<double>(s = splitmix64(s)) * 1e-20;
    return (x - Vector::Ones(5)).squaredNorm() + (acc > 1e30 ? 1e-12 : 0.0);
  };
  BatchEvaluator ev(spec, workers);
  std::vector<Vector> points(256, Vector::Zero(5));
  std::vector<std::uint64_t> seeds(points.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i;
  for (auto _ : state) {
    auto records = ev.evaluate_batch(points, seeds);
    benchmark::DoNotOptimize(records.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(points.size()));
}
BENCHMARK(BM_EvaluateBatchWorkers)->Arg(1)->Arg(2)->Arg(4);

void BM_SimulateSir(benchmark::State& state) {
  const double dt = 1.0 / static_cast<double>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto series = simulate_sir({0.5, 0.25}, {187, 1, 0}, 60, dt, seed++);
    benchmark::DoNotOptimize(series.s.data());
  }
}
BENCHMARK(BM_SimulateSir)->Arg(1)->Arg(10)->Arg(100);

void BM_SirPseudoLikelihood(benchmark::State& state) {
  auto data = simulate_sir({0.5, 0.25}, {187, 1, 0}, 60, 1.0, 2025);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    double v = sir_neg_log_pseudolikelihood({0.6, 0.2}, data, 25, seed++, 1.0);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_SirPseudoLikelihood);

void BM_PspoIteration(benchmark::State& state) {
  // Cost of a full optimizer run on the noisy quadratic, per iteration.
  const int iters = 10;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    BatchEvaluator ev(NoisyQuadratic{5, 3.0}.as_objective(), 1);
    PspoConfig cfg;
    cfg.c = 0.6;
    cfg.c_tilde = 0.3;
    cfg.sigma2 = 9.0;
    cfg.seed = seed++;
    cfg.stop.max_iters = iters;
    cfg.objective_report_replicates = 0;
    auto result = pspo_minimize(ev, Vector::Zero(5), cfg);
    benchmark::DoNotOptimize(result.first.data());
  }
  state.SetItemsProcessed(state.iterations() * iters);
}
BENCHMARK(BM_PspoIteration);

void BM_ProjectPd(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  Matrix h = Matrix::Zero(dim, dim);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int r = 0; r < dim; ++r)
    for (int c = r; c < dim; ++c) h(r, c) = h(c, r) = unif(rng);
  for (auto _ : state) {
    auto out = project_pd(h, 1e-4);
    benchmark::DoNotOptimize(out.matrix.data());
  }
  state.SetComplexityN(dim);
}
BENCHMARK(BM_ProjectPd)->RangeMultiplier(2)->Range(4, 64)->Complexity();

}  // namespace

BENCHMARK_MAIN();
