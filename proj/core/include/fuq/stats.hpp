#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fuq {

double normal_cdf(double x) noexcept;
double normal_quantile(double p);

// Lower empirical quantile inf{q : F_m(q) >= gamma}: the ceil(gamma m)-th order
// statistic. gamma in (0, 1]. The input span is not modified.
double lower_quantile(std::span<const double> values, double gamma);
// Same, but partially reorders `scratch` in place.
double lower_quantile_inplace(std::span<double> scratch, double gamma);
// 1-based rank used by lower_quantile.
std::size_t lower_quantile_rank(std::size_t m, double gamma);

double mean(std::span<const double> v);
// Unbiased sample variance (n - 1 denominator); 0 for n < 2.
double sample_variance(std::span<const double> v);
double median(std::vector<double> v);

}  // namespace fuq
