#pragma once

#include <cstddef>
#include <functional>

namespace pspo {

/// Runs fn(0..n-1) on up to `workers` threads (0 = hardware concurrency,
/// 1 = inline). Work items are claimed from a shared atomic counter, so the
/// assignment of items to threads is arbitrary but each index runs exactly
/// once. The first exception thrown by any item is rethrown after all
/// threads join.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace pspo
