#include "fuq/distributions.hpp"

#include <cmath>

#include "fuq/error.hpp"
#include "fuq/rng.hpp"

namespace fuq {

void UniformLaw::validate() const {
  if (!std::isfinite(lower) || !std::isfinite(upper) || lower > upper)
    throw InputError("uniform law needs finite ordered bounds");
}

RowMatrix sample_uniform(std::span<const UniformLaw> laws, std::size_t count, std::uint64_t seed) {
  for (const auto& law : laws) law.validate();
  RowMatrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(laws.size()));
  for (std::size_t k = 0; k < laws.size(); ++k) {
    Rng rng(derive_seed(seed, k));
    const double lo = laws[k].lower;
    const double width = laws[k].upper - laws[k].lower;
    for (std::size_t j = 0; j < count; ++j)
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
          width == 0.0 ? lo : lo + width * rng.uniform();
  }
  return out;
}

}  // namespace fuq
