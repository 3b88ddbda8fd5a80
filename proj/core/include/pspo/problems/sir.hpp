#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pspo/types.hpp"

namespace pspo {

/// Epidemic time series of S/I/R compartment counts. Counts conserve
/// S + I + R = population at every time point.
struct EpidemicSeries {
  std::vector<double> time;  ///< days, strictly increasing
  std::vector<long> s;
  std::vector<long> i;
  std::vector<long> r;
  long population = 0;

  std::size_t size() const { return time.size(); }
  /// Throws std::invalid_argument naming the first offending time point if
  /// conservation is violated.
  void validate() const;
};

/// Transmission and recovery rates per day; both strictly positive.
/// Calibration runs over log-parameters to keep positivity.
struct SirParams {
  double beta = 0.5;
  double gamma = 0.25;
};

struct SirInit {
  long s0 = 187;
  long i0 = 1;
  long r0 = 0;
};

/// Discrete-time chain-binomial SIR simulation: per step of length dt,
///   infections ~ Binomial(S, 1 - exp(-beta I dt / N)),
///   recoveries ~ Binomial(I, 1 - exp(-gamma dt)).
/// Deterministic given seed; state recorded at every step including t = 0.
EpidemicSeries simulate_sir(const SirParams& params, const SirInit& init, double horizon,
                            double dt, std::uint64_t seed);

/// Negative log of the chain-binomial transition likelihood of the observed
/// increments, plus a simulation-smoothing noise term with standard
/// deviation noise_scale / sqrt(replicates). Transition probabilities are
/// clamped away from {0, 1} by 1e-12 so the value is finite for all positive
/// parameters. Lower is better fit; replayable in (params, seed).
double sir_neg_log_pseudolikelihood(const SirParams& params, const EpidemicSeries& data,
                                    int replicates, std::uint64_t seed,
                                    double noise_scale = 1.0);

/// Loads a series from CSV with header `t,S,I,R`. Malformed rows are
/// rejected with their line number; the population is inferred from the
/// first row and conservation is checked on every row.
EpidemicSeries load_epidemic_csv(const std::string& path);

/// Writes the `t,S,I,R` format read back by load_epidemic_csv.
void write_epidemic_csv(const EpidemicSeries& series, const std::string& path);

/// Calibration objective over log-parameters x = (log beta, log gamma).
struct SirCalibration {
  EpidemicSeries data;
  int replicates = 25;
  double noise_scale = 1.0;

  ObjectiveSpec as_objective() const;
  static SirParams params_from(const Vector& log_params);
  static Vector log_params_of(const SirParams& params);
};

}  // namespace pspo
