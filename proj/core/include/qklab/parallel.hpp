#pragma once

#include <cstddef>
#include <functional>

namespace qklab {

/// Number of workers actually used: `requested` if > 0, else the
/// QKLAB_WORKERS environment variable, else hardware concurrency.
int resolve_workers(int requested);

/// Run fn(begin, end) over contiguous chunks of [0, total) on `workers`
/// threads and join. Chunk boundaries depend only on (total, workers), and
/// callers write disjoint outputs, so results never depend on scheduling.
void parallel_for(std::size_t total, int workers,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace qklab
