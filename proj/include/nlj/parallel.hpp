#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nlj {

// Worker count: NLJ_THREADS env var if set (>=1), else hardware concurrency.
// set_thread_count overrides both (0 restores the default); used by tests to
// prove results are identical across parallelism degrees.
inline int& thread_count_override() {
  static int value = 0;
  return value;
}

inline void set_thread_count(int n) { thread_count_override() = n < 0 ? 0 : n; }

inline int thread_count() {
  if (thread_count_override() > 0) return thread_count_override();
  if (const char* env = std::getenv("NLJ_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(i) for i in [0, n). The body must write its result to a
// preallocated slot keyed by i; together with per-index seed derivation this
// makes every reduction independent of the scheduling order. The first
// exception thrown by any worker is rethrown after all workers join.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  const int threads = thread_count();
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t spawn =
      std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  pool.reserve(spawn);
  for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace nlj
