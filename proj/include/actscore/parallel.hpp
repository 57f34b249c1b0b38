#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace actscore {

/// Worker count: ACTSCORE_THREADS if set and positive, else the hardware count.
inline std::size_t thread_count() {
  if (const char* env = std::getenv("ACTSCORE_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<std::size_t>(n);
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, n) over contiguous chunks. Results must not depend
/// on which worker ran which index; callers write to disjoint slots.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t end = std::min(n, (w + 1) * chunk);
        for (std::size_t i = w * chunk; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Pairwise reduction over a fixed tree: slot i absorbs slot i+s for
/// s = 1, 2, 4, ... The result depends only on the number of parts.
template <typename T, typename AddInto>
T tree_reduce(std::vector<T> parts, AddInto&& add_into) {
  const std::size_t n = parts.size();
  if (n == 0) throw std::invalid_argument("tree_reduce: nothing to reduce");
  for (std::size_t s = 1; s < n; s *= 2)
    for (std::size_t i = 0; i + s < n; i += 2 * s) add_into(parts[i], parts[i + s]);
  return std::move(parts.front());
}

}  // namespace actscore
