#include "qklab/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace qklab {

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QKLAB_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

void parallel_for(std::size_t total, int workers,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  workers = resolve_workers(workers);
  if (total == 0) return;
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), total);
  if (n_threads <= 1) {
    fn(0, total);
    return;
  }
  const std::size_t chunk = (total + n_threads - 1) / n_threads;
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(begin + chunk, total);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace qklab
