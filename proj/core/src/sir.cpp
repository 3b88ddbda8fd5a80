#include "pspo/problems/sir.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pspo/seeding.hpp"

namespace pspo {

namespace {

constexpr double kProbClamp = 1e-12;
// Stand-in log-pmf for impossible observations, keeps the value finite.
constexpr double kLogTiny = -690.77552789821368;  // log(1e-300)

double clamp_prob(double p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}

double log_binomial_pmf(long k, long n, double p) {
  if (k < 0 || k > n) return kLogTiny;
  p = clamp_prob(p);
  double nd = static_cast<double>(n);
  double kd = static_cast<double>(k);
  return std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) +
         kd * std::log(p) + (nd - kd) * std::log1p(-p);
}

}  // namespace

void EpidemicSeries::validate() const {
  if (time.empty()) throw std::invalid_argument("EpidemicSeries: empty series");
  if (s.size() != time.size() || i.size() != time.size() || r.size() != time.size())
    throw std::invalid_argument("EpidemicSeries: column lengths differ");
  if (population <= 0) throw std::invalid_argument("EpidemicSeries: population must be positive");
  for (std::size_t j = 0; j < time.size(); ++j) {
    if (s[j] < 0 || i[j] < 0 || r[j] < 0)
      throw std::invalid_argument("EpidemicSeries: negative count at t=" +
                                  std::to_string(time[j]));
    if (s[j] + i[j] + r[j] != population)
      throw std::invalid_argument("EpidemicSeries: S+I+R != population at t=" +
                                  std::to_string(time[j]));
    if (j > 0 && time[j] <= time[j - 1])
      throw std::invalid_argument("EpidemicSeries: time must be strictly increasing at t=" +
                                  std::to_string(time[j]));
  }
}

EpidemicSeries simulate_sir(const SirParams& params, const SirInit& init, double horizon,
                            double dt, std::uint64_t seed) {
  if (params.beta < 0 || params.gamma < 0)
    throw std::invalid_argument("simulate_sir: rates must be nonnegative");
  if (init.s0 < 0 || init.i0 < 1 || init.r0 < 0)
    throw std::invalid_argument("simulate_sir: need s0, r0 >= 0 and i0 >= 1");
  if (dt <= 0) throw std::invalid_argument("simulate_sir: dt must be > 0");
  if (horizon < dt) throw std::invalid_argument("simulate_sir: horizon shorter than one step");

  const long n = init.s0 + init.i0 + init.r0;
  const long steps = std::lround(horizon / dt);
  std::mt19937_64 rng(splitmix64(seed));

  EpidemicSeries series;
  series.population = n;
  series.time.reserve(static_cast<std::size_t>(steps) + 1);
  long s = init.s0, i = init.i0, r = init.r0;
  series.time.push_back(0.0);
  series.s.push_back(s);
  series.i.push_back(i);
  series.r.push_back(r);

  for (long k = 1; k <= steps; ++k) {
    double p_inf = 1.0 - std::exp(-params.beta * static_cast<double>(i) * dt / n);
    double p_rec = 1.0 - std::exp(-params.gamma * dt);
    long d_inf = 0;
    if (s > 0 && p_inf > 0)
      d_inf = std::binomial_distribution<long>(s, p_inf)(rng);
    long d_rec = 0;
    if (i > 0 && p_rec > 0)
      d_rec = std::binomial_distribution<long>(i, p_rec)(rng);
    s -= d_inf;
    i += d_inf - d_rec;
    r += d_rec;
    series.time.push_back(static_cast<double>(k) * dt);
    series.s.push_back(s);
    series.i.push_back(i);
    series.r.push_back(r);
  }
  return series;
}

double sir_neg_log_pseudolikelihood(const SirParams& params, const EpidemicSeries& data,
                                    int replicates, std::uint64_t seed, double noise_scale) {
  if (replicates < 1)
    throw std::invalid_argument("sir_neg_log_pseudolikelihood: replicates must be >= 1");
  if (params.beta <= 0 || params.gamma <= 0)
    throw std::invalid_argument("sir_neg_log_pseudolikelihood: rates must be positive");
  data.validate();

  double nll = 0.0;
  for (std::size_t j = 0; j + 1 < data.size(); ++j) {
    double dt = data.time[j + 1] - data.time[j];
    long new_infections = data.s[j] - data.s[j + 1];
    long new_recoveries = data.r[j + 1] - data.r[j];
    double p_inf =
        1.0 - std::exp(-params.beta * static_cast<double>(data.i[j]) * dt / data.population);
    double p_rec = 1.0 - std::exp(-params.gamma * dt);
    nll -= log_binomial_pmf(new_infections, data.s[j], p_inf);
    nll -= log_binomial_pmf(new_recoveries, data.i[j], p_rec);
  }

  // Simulation-smoothing noise: the mean of `replicates` unit normal draws,
  // so the objective noise shrinks as 1/sqrt(replicates).
  if (noise_scale > 0) {
    std::mt19937_64 rng(splitmix64(mix_seed(seed, 0x51f0u)));
    std::normal_distribution<double> unit(0.0, 1.0);
    double noise = 0.0;
    for (int rep = 0; rep < replicates; ++rep) noise += unit(rng);
    nll += noise_scale * noise / replicates;
  }
  return nll;
}

EpidemicSeries load_epidemic_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_epidemic_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_epidemic_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,S,I,R")
    throw std::runtime_error("load_epidemic_csv: expected header 't,S,I,R', got '" + line + "'");

  EpidemicSeries series;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    double t;
    long s, i, r;
    char c1, c2, c3;
    if (!(row >> t >> c1 >> s >> c2 >> i >> c3 >> r) || c1 != ',' || c2 != ',' || c3 != ',' ||
        (row >> std::ws, !row.eof()))
      throw std::runtime_error("load_epidemic_csv: malformed row at line " +
                               std::to_string(line_no));
    if (s < 0 || i < 0 || r < 0)
      throw std::runtime_error("load_epidemic_csv: negative count at line " +
                               std::to_string(line_no));
    series.time.push_back(t);
    series.s.push_back(s);
    series.i.push_back(i);
    series.r.push_back(r);
  }
  if (series.time.empty())
    throw std::runtime_error("load_epidemic_csv: no data rows in " + path);

  series.population = series.s[0] + series.i[0] + series.r[0];
  for (std::size_t j = 0; j < series.size(); ++j) {
    if (series.s[j] + series.i[j] + series.r[j] != series.population)
      throw std::runtime_error("load_epidemic_csv: S+I+R breaks conservation at t=" +
                               std::to_string(series.time[j]));
    if (j > 0 && series.time[j] <= series.time[j - 1])
      throw std::runtime_error("load_epidemic_csv: time not increasing at t=" +
                               std::to_string(series.time[j]));
  }
  return series;
}

void write_epidemic_csv(const EpidemicSeries& series, const std::string& path) {
  series.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_epidemic_csv: cannot open " + path);
  out << "t,S,I,R\n";
  for (std::size_t j = 0; j < series.size(); ++j) {
    out << series.time[j] << ',' << series.s[j] << ',' << series.i[j] << ',' << series.r[j]
        << '\n';
  }
  if (!out) throw std::runtime_error("write_epidemic_csv: write failed for " + path);
}

Vector SirCalibration::log_params_of(const SirParams& params) {
  Vector v(2);
  v << std::log(params.beta), std::log(params.gamma);
  return v;
}

SirParams SirCalibration::params_from(const Vector& log_params) {
  if (log_params.size() != 2)
    throw std::invalid_argument("SirCalibration: expected 2 log-parameters");
  // Clamp the exponents so wandering optimizer iterates map to extreme but
  // strictly positive rates instead of under/overflowing to 0 or inf.
  auto bounded_exp = [](double x) { return std::exp(std::clamp(x, -700.0, 700.0)); };
  return SirParams{bounded_exp(log_params[0]), bounded_exp(log_params[1])};
}

ObjectiveSpec SirCalibration::as_objective() const {
  data.validate();
  if (replicates < 1) throw std::invalid_argument("SirCalibration: replicates must be >= 1");
  EpidemicSeries series = data;
  int reps = replicates;
  double scale = noise_scale;
  return ObjectiveSpec{
      [series, reps, scale](const Vector& x, std::uint64_t seed) {
        return sir_neg_log_pseudolikelihood(params_from(x), series, reps, seed, scale);
      },
      2,
      scale > 0 ? std::optional<double>(scale / std::sqrt(static_cast<double>(reps)))
                : std::nullopt,
  };
}

}  // namespace pspo
