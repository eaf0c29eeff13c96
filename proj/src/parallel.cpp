#include "enkfcal/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace enkfcal {
namespace {

std::size_t threads_from_env() {
  const char* raw = std::getenv("ENKF_CAL_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  try {
    return static_cast<std::size_t>(std::stoul(raw));
  } catch (const std::exception&) {
    return 0;
  }
}

std::atomic<std::size_t>& thread_setting() {
  static std::atomic<std::size_t> setting{threads_from_env()};
  return setting;
}

}  // namespace

std::size_t max_threads() { return thread_setting().load(); }

void set_max_threads(std::size_t n) { thread_setting().store(n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(max_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  // Failures are reported for the lowest failing index, matching what a
  // sequential run would throw.
  std::atomic<std::size_t> next{0};
  std::size_t failed_index = n;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace enkfcal
