#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace tmsq {

// Global worker bound for data-parallel loops. Results never depend on it:
// work is split into chunks whose boundaries depend only on the problem size,
// and reductions run in chunk order after the loop.

inline std::atomic<int>& worker_count_ref() {
  static std::atomic<int> n{0};
  return n;
}

inline void set_worker_count(int n) { worker_count_ref().store(n); }

inline int worker_count() {
  int n = worker_count_ref().load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// Runs fn(chunk_index, begin, end) over [0, count) in chunks of chunk_size.
template <class Fn>
void parallel_chunks(std::size_t count, std::size_t chunk_size, Fn&& fn) {
  if (count == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t nchunks = (count + chunk_size - 1) / chunk_size;
  const int workers = worker_count();
  if (workers <= 1 || nchunks <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c)
      fn(c, c * chunk_size, std::min(count, (c + 1) * chunk_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= nchunks) return;
      fn(c, c * chunk_size, std::min(count, (c + 1) * chunk_size));
    }
  };
  std::vector<std::thread> pool;
  const std::size_t spawn =
      std::min<std::size_t>(static_cast<std::size_t>(workers), nchunks) - 1;
  pool.reserve(spawn);
  for (std::size_t i = 0; i < spawn; ++i) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
}

}  // namespace tmsq
