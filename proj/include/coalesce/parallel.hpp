#pragma once

#include <cstddef>
#include <functional>

namespace coalesce {

/// Worker count: an explicit request wins, then the THREADS environment
/// variable, then the hardware concurrency. Always at least 1.
std::size_t resolve_threads(std::size_t requested = 0);

/// Runs body(i) for i in [0, count) on `threads` workers with a static
/// contiguous partition. Results must be written to per-index slots; the
/// partition never influences what body(i) computes.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t worker, std::size_t index)>& body);

}  // namespace coalesce
