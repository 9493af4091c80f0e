#pragma once

#include <cstddef>
#include <functional>

namespace fuq {

// Worker count: FRAGILITY_UQ_THREADS if set (>= 1), else hardware concurrency.
std::size_t thread_count();
// Process-wide override for tests and the CLI; 0 restores the environment default.
void set_thread_count(std::size_t n);

// Splits [0, n) into contiguous chunks and runs body(begin, end) on each. The
// chunk boundaries are a function of n and min_chunk only; callers write to
// disjoint slots so results do not depend on scheduling or worker count. The first exception
// thrown by any chunk is rethrown.
void parallel_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                     std::size_t min_chunk = 1);

template <class F>
void parallel_for(std::size_t n, F&& fn, std::size_t min_chunk = 1) {
  parallel_chunks(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      },
      min_chunk);
}

}  // namespace fuq
