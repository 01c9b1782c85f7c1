#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace provtrack {

/// Splits [0, n) into at most `workers` contiguous chunks and runs
/// fn(chunk_index, begin, end) on each, one thread per chunk. The first
/// exception thrown by any chunk is rethrown after all chunks finish.
template <class Fn>
void parallel_chunks(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, workers);
  std::size_t chunks = std::min<std::size_t>(workers, std::max<std::size_t>(n, 1));
  if (chunks <= 1 || n < 2 * chunks) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(chunks);
  std::size_t step = (n + chunks - 1) / chunks;
  for (std::size_t c = 0; c < chunks; ++c) {
    std::size_t b = c * step, e = std::min(n, b + step);
    threads.emplace_back([&, c, b, e] {
      try {
        fn(c, b, e);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::size_t chunk_count(std::size_t n, unsigned workers) {
  workers = std::max(1u, workers);
  std::size_t chunks = std::min<std::size_t>(workers, std::max<std::size_t>(n, 1));
  return (chunks <= 1 || n < 2 * chunks) ? 1 : chunks;
}

}  // namespace provtrack
