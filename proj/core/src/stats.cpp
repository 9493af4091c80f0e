#include "fuq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "fuq/error.hpp"

namespace fuq {

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("normal_quantile: p must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

std::size_t lower_quantile_rank(std::size_t m, double gamma) {
  if (m == 0) throw InputError("quantile of an empty sample");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("quantile level must lie in (0, 1]");
  // The small slack keeps e.g. 0.7 * 10 from rounding up to rank 8.
  const double r = std::ceil(gamma * static_cast<double>(m) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(r, 1.0)), 1, m);
}

double lower_quantile_inplace(std::span<double> scratch, double gamma) {
  const std::size_t k = lower_quantile_rank(scratch.size(), gamma) - 1;
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k),
                   scratch.end());
  return scratch[k];
}

double lower_quantile(std::span<const double> values, double gamma) {
  std::vector<double> scratch(values.begin(), values.end());
  return lower_quantile_inplace(scratch, gamma);
}

double mean(std::span<const double> v) {
  if (v.empty()) throw InputError("mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size() - 1);
}

double median(std::vector<double> v) {
  if (v.empty()) throw InputError("median of an empty sample");
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  if (v.size() % 2 == 1) return v[h];
  const double hi = v[h];
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h));
  return 0.5 * (lo + hi);
}

}  // namespace fuq
