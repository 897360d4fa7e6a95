#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace ghostsr {

/// Intra-op thread count. Defaults to 1, which is the deterministic test mode.
void set_num_threads(int n);
int num_threads();

/// Reads GHOSTSR_THREADS from the environment, if set.
void init_threads_from_env();

/// Splits [0, n) into contiguous chunks, one per worker. Each index is
/// handled by exactly one worker, so kernels that write disjoint outputs per
/// index give bitwise identical results for any thread count.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, num_threads()));
  if (workers == 1 || n < 2) {
    fn(std::size_t{0}, n);
    return;
  }
  const std::size_t used = std::min(workers, n);
  const std::size_t chunk = (n + used - 1) / used;
  std::vector<std::jthread> pool;
  pool.reserve(used - 1);
  for (std::size_t t = 1; t < used; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
}

}  // namespace ghostsr
