#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "../detail/eigensolver.hpp"

namespace wigner::harness {

/// Runs fn(i) for i in [0, count) on `threads` workers. Each index is written by exactly one
/// worker into caller-owned slots, so results never depend on scheduling. The first exception
/// (lowest index) is rethrown after all workers finish.
inline void parallel_for(std::int64_t count, int threads, const std::function<void(std::int64_t)>& fn) {
  apply_blas_threads();
  threads = std::max(1, threads);
  if (threads == 1 || count <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  auto worker = [&] {
    for (std::int64_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < std::min<std::int64_t>(threads, count); ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline int default_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

}  // namespace wigner::harness
