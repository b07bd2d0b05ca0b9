#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace knockoffs {

// Worker count resolution: explicit request > KNOCKOFF_WORKERS > hardware.
int resolve_workers(int requested = 0);

// Runs fn(i) for i in [0, count) across `workers` threads. Work items are
// claimed atomically, so partitioning never affects which indices run, only
// who runs them; deterministic work must not depend on thread identity.
// The first exception thrown by any item is rethrown on the caller.
template <class Fn>
void parallel_for(std::int64_t count, int workers, Fn&& fn) {
  workers = std::min<std::int64_t>(std::max(workers, 1), count);
  if (workers <= 1 || count <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (!failed.load(std::memory_order_relaxed)) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          break;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace knockoffs
