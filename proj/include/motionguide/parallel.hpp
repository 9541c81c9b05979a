#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace mg {

// Runs fn(i) for i in [0, n) on `workers` threads. Work items must write only
// to their own output slot; results are then independent of the worker count.
template <class F>
void parallel_for(long n, int workers, F&& fn) {
  if (n <= 0) return;
  if (workers < 1) throw std::invalid_argument("parallel_for: workers must be >= 1");
  if (workers == 1 || n == 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto body = [&] {
    for (;;) {
      long i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int count = static_cast<int>(std::min<long>(workers, n));
  pool.reserve(static_cast<std::size_t>(count));
  for (int w = 0; w < count; ++w) pool.emplace_back(body);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mg
