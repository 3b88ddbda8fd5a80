#include "pspo/perturbation.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "pspo/seeding.hpp"

namespace pspo {

Vector sample_delta0(int dim, std::uint64_t rng_seed) {
  if (dim < 1) throw std::invalid_argument("sample_delta0: dim must be >= 1");
  std::mt19937_64 rng(splitmix64(rng_seed));
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = (rng() & 1u) ? 1.0 : -1.0;
  return v;
}

Vector flip_column(const Vector& delta0, int index) {
  if (index < 0 || index >= delta0.size())
    throw std::out_of_range("flip_column: index " + std::to_string(index) +
                            " out of range for dimension " + std::to_string(delta0.size()));
  Vector v = delta0;
  v[index] = -v[index];
  return v;
}

namespace {

// Pairwise rejection sampling for dim 2, where the sign-flip block is
// singular: the second column of each pair is re-drawn until it is not
// (anti-)parallel to the first.
PerturbationMatrix build_dim2(int rounds, std::uint64_t rng_seed) {
  PerturbationMatrix out;
  out.dim = 2;
  out.rounds = rounds;
  out.columns.resize(2, rounds);
  std::uint64_t draw = 0;
  for (int i = 0; i < rounds; ++i) {
    Vector col = sample_delta0(2, mix_seed(rng_seed, draw++));
    if (i % 2 == 1) {
      const auto prev = out.columns.col(i - 1);
      while (col[0] * prev[0] + col[1] * prev[1] != 0.0)
        col = sample_delta0(2, mix_seed(rng_seed, draw++));
    }
    out.columns.col(i) = col;
  }
  return out;
}

}  // namespace

PerturbationMatrix build_perturbations(int dim, int rounds, std::uint64_t rng_seed) {
  if (dim < 1) throw std::invalid_argument("build_perturbations: dim must be >= 1");
  if (rounds < 1) throw std::invalid_argument("build_perturbations: rounds must be >= 1");
  if (dim == 2) return build_dim2(rounds, rng_seed);

  PerturbationMatrix out;
  out.dim = dim;
  out.rounds = rounds;
  out.columns.resize(dim, rounds);
  Vector delta0;
  for (int i = 0; i < rounds; ++i) {
    int j = i % dim;
    if (j == 0) {
      delta0 = sample_delta0(dim, mix_seed(rng_seed, static_cast<std::uint64_t>(i / dim)));
      out.block_delta0.push_back(delta0);
    }
    out.columns.col(i) = flip_column(delta0, j);
  }
  return out;
}

bool spans_space(const PerturbationMatrix& delta) {
  if (delta.columns.size() == 0) return false;
  if (delta.rounds < delta.dim) return false;
  Eigen::JacobiSVD<Matrix> svd(delta.columns);
  const auto& sv = svd.singularValues();
  double tol = static_cast<double>(delta.dim) * static_cast<double>(delta.rounds) *
               std::numeric_limits<double>::epsilon() * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return rank == delta.dim;
}

}  // namespace pspo
