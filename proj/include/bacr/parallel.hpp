#ifndef BACR_PARALLEL_HPP
#define BACR_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bacr {

/// Runs fn(i) for i in [0, n) on up to `workers` threads using static
/// contiguous chunks. Callers write results by index and reduce serially, so
/// output never depends on the worker count. The first exception is rethrown.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  const std::size_t w = std::min<std::size_t>(std::max(workers, 1), std::max<std::size_t>(n, 1));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> threads;
  threads.reserve(w);
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t t = 0; t < w; ++t) {
    threads.emplace_back([&, t] {
      try {
        const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace bacr

#endif  // BACR_PARALLEL_HPP
