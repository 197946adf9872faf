#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rbmlab {

// Runs body(i) for i in [0, n) on `workers` threads. Items are claimed in
// fixed-size blocks; body must write its result into slot i of a caller-owned
// buffer. Reductions happen afterwards, in index order, on the calling
// thread, so results never depend on the worker count.
template <class Body>
void parallel_for(std::size_t n, std::size_t workers, Body&& body) {
  constexpr std::size_t kBlock = 256;
  workers = std::max<std::size_t>(1, workers);
  if (workers == 1 || n <= kBlock) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    try {
      while (true) {
        const std::size_t start = next.fetch_add(kBlock);
        if (start >= n) break;
        const std::size_t stop = std::min(n, start + kBlock);
        for (std::size_t i = start; i < stop; ++i) body(i);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(n);
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  pool.clear();  // joins
  if (failure) std::rethrow_exception(failure);
}

}  // namespace rbmlab
