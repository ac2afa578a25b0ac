#pragma once

// Minimal fork-join helper.  Jobs write into caller-owned slots indexed by job
// id, so aggregation order never depends on scheduling; results are identical
// for any worker count as long as each job derives its own RNG stream.

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace regmix {

inline int default_worker_count() {
  if (const char* env = std::getenv("REGMIX_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

template <typename Fn>
void parallel_for(std::size_t job_count, int workers, Fn&& body) {
  if (workers <= 1 || job_count <= 1) {
    for (std::size_t i = 0; i < job_count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= job_count) return;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  const int spawn = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), job_count));
  pool.reserve(spawn - 1);
  for (int t = 0; t < spawn - 1; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
}

}  // namespace regmix
