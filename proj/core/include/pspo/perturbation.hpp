#pragma once

#include <cstdint>
#include <vector>

#include "pspo/types.hpp"

namespace pspo {

/// A p x M matrix of +-1 perturbation columns. Columns are generated in
/// blocks of p by the sign-flip scheme: a base vector Delta0 is sampled for
/// the block and column i (0-based) negates entry (i mod p) of it. Every
/// block of min(M, p) columns from one base spans R^p for p != 2.
///
/// For p = 2 the sign-flip block is singular (the two columns are
/// anti-parallel), so columns are drawn by rejection instead: each pair is
/// re-sampled until it is full rank.
struct PerturbationMatrix {
  Matrix columns;  ///< p x M, entries exactly +1 or -1
  int dim = 0;     ///< p
  int rounds = 0;  ///< M
  /// Base vector of each sign-flip block, in order. Empty when dim == 2
  /// (rejection sampling has no block base).
  std::vector<Vector> block_delta0;
};

/// Samples a +-1 vector with independent fair signs. Deterministic in seed.
Vector sample_delta0(int dim, std::uint64_t rng_seed);

/// Returns delta0 with the sign of entry `index` (0-based) negated.
Vector flip_column(const Vector& delta0, int index);

/// Builds the p x M perturbation matrix described above.
PerturbationMatrix build_perturbations(int dim, int rounds, std::uint64_t rng_seed);

/// True iff rank(columns) == dim. Rank is decided from singular values
/// above dim * rounds * machine-epsilon * sigma_max; +-1 entries keep the
/// conditioning benign so the scaled threshold is safe.
bool spans_space(const PerturbationMatrix& delta);

}  // namespace pspo
