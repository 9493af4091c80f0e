#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "fuq/kernel.hpp"

namespace fuq {

struct UniformLaw {
  double lower = 0.0;
  double upper = 1.0;

  void validate() const;
  double mean() const noexcept { return 0.5 * (lower + upper); }
};

// count x laws.size() independent draws; column k uses stream (seed, k).
RowMatrix sample_uniform(std::span<const UniformLaw> laws, std::size_t count, std::uint64_t seed);

}  // namespace fuq
