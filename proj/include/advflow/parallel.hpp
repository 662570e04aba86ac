#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace advflow {

/// Number of workers to use when the caller asks for `requested` (<= 0 means
/// one per hardware thread).
inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Calls fn(begin, end) for consecutive chunks of [0, n) of length `chunk`
/// (the last may be shorter). Chunk boundaries do not depend on `workers`,
/// so work that writes only to its own range is reproducible for any worker
/// count. The first exception thrown by any chunk is rethrown.
template <class Fn>
void for_each_chunk(std::size_t n, std::size_t chunk, int workers, Fn&& fn) {
  if (n == 0) return;
  chunk = std::max<std::size_t>(chunk, 1);
  const std::size_t chunks = (n + chunk - 1) / chunk;
  const auto run = [&](std::size_t c) { fn(c * chunk, std::min(n, (c + 1) * chunk)); };
  const std::size_t threads = std::min<std::size_t>(chunks, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < chunks; c = next++) {
          try {
            run(c);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace advflow
