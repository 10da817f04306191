#pragma once

#include <cstddef>
#include <functional>

namespace plateprice {

/// Runs fn(0..n-1) across `workers` threads (n <= 1 or workers <= 1 runs
/// inline). The first exception thrown by any task is rethrown after all
/// workers finish. Tasks must not share mutable state.
void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace plateprice
