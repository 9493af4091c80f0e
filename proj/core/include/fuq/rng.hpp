#pragma once

#include <cstdint>
#include <string_view>

namespace fuq {

// Keyed streams: every random quantity is addressed by (seed, tag, indices) so
// results never depend on evaluation order or thread count.
std::uint64_t mix64(std::uint64_t z) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t i) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t i, std::uint64_t j) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t key) noexcept : state_(mix64(key ^ 0x6a09e667f3bcc909ULL)) {}

  std::uint64_t next_u64() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  // (0, 1)
  double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal() noexcept;
  // Uniform integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fuq
