#include "fuq/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fuq {
namespace {

std::atomic<std::size_t> g_override{0};

std::size_t env_threads() {
  if (const char* env = std::getenv("FRAGILITY_UQ_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

std::size_t thread_count() {
  const std::size_t o = g_override.load();
  return o ? o : env_threads();
}

void set_thread_count(std::size_t n) { g_override.store(n); }

void parallel_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                     std::size_t min_chunk) {
  if (n == 0) return;
  // Chunk boundaries depend on n only, so per-chunk arithmetic (blocked products,
  // partial sums) is identical for every worker count.
  constexpr std::size_t kTargetChunks = 64;
  const std::size_t chunk = std::max<std::size_t>(std::max<std::size_t>(1, min_chunk),
                                                  (n + kTargetChunks - 1) / kTargetChunks);
  const std::size_t chunks = (n + chunk - 1) / chunk;
  const std::size_t workers = std::min(thread_count(), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) {
        try {
          body(c * chunk, std::min(n, (c + 1) * chunk));
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = chunks;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fuq
