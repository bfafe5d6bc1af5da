#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace glandseg {

/// Runs fn(i) for i in [0, count) on up to `workers` threads (<= 0 means the
/// hardware concurrency). The first exception thrown by any task is rethrown
/// after all workers have stopped.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  std::size_t n = workers > 0 ? static_cast<std::size_t>(workers) : std::thread::hardware_concurrency();
  n = std::clamp<std::size_t>(n, 1, std::max<std::size_t>(count, 1));
  if (n == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace glandseg
