#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bbconic {

inline unsigned default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n ? n : 1;
}

/// Splits [0, n) into contiguous chunks, runs `fn(chunk, begin, end)` on up to
/// `threads` workers and returns the per-chunk results in chunk order, so any
/// in-order fold over them is independent of scheduling.
template <class Fn>
auto parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  using R = decltype(fn(std::size_t{}, std::size_t{}, std::size_t{}));
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads ? threads : 1, n));
  const std::size_t chunks = n == 0 ? 0 : std::min<std::size_t>(n, workers * 4);
  std::vector<R> results(chunks);
  if (chunks == 0) return results;
  auto bounds = [&](std::size_t c) { return std::pair{n * c / chunks, n * (c + 1) / chunks}; };
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      const auto [b, e] = bounds(c);
      results[c] = fn(c, b, e);
    }
    return results;
  }
  std::vector<std::exception_ptr> errors(chunks);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < chunks; c += workers) {
        try {
          const auto [b, e] = bounds(c);
          results[c] = fn(c, b, e);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace bbconic
