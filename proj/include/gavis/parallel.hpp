// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gavis {

// 0 or negative means "use the machine"; anything else is taken literally.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

inline int threads_from_env() {
  const char* v = std::getenv("GAVIS_THREADS");
  if (!v || !*v) return 1;
  int n = std::atoi(v);
  return n > 0 ? n : 1;
}

// Static block partition over [0, n). Workers own disjoint index ranges, so a
// caller that writes to per-index slots needs no synchronization, and any
// order-sensitive reduction can run over the same fixed partition afterwards.
// Results must not depend on the thread count; callers guarantee that by
// keeping per-index work independent.
template <class F>
void parallel_for(int n, int threads, F&& body) {
  threads = std::min(std::max(threads, 1), std::max(n, 1));
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int w = 0; w < threads; ++w) {
    int begin = static_cast<int>(static_cast<long long>(n) * w / threads);
    int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / threads);
    pool.emplace_back([&, begin, end] {
      try {
        for (int i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gavis
