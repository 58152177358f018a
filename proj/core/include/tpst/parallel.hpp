#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace tpst {

namespace detail {
inline std::atomic<int>& thread_budget_slot() {
  static std::atomic<int> budget{0};
  return budget;
}
}  // namespace detail

/// Process-wide worker budget. The CLI sets this from --threads; 0 means
/// "use hardware_concurrency". Results never depend on the value: parallel
/// loops write to disjoint, preallocated slots.
inline int thread_budget() {
  int b = detail::thread_budget_slot().load();
  if (b > 0) return b;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

inline void set_thread_budget(int n) { detail::thread_budget_slot().store(n); }

/// Run fn(i) for i in [0, n). Work items are claimed from an atomic counter;
/// each item must only touch its own output slot. The first exception thrown
/// by any item is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  int budget = thread_budget();
  std::size_t workers = std::min<std::size_t>(budget > 0 ? budget : 1, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace tpst
