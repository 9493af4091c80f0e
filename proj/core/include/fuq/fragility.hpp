#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fuq/gp.hpp"
#include "fuq/kernel.hpp"
#include "fuq/surrogate.hpp"

namespace fuq {

class ImGrid {
 public:
  explicit ImGrid(std::vector<double> values);
  static ImGrid regular(double a0, double a1, std::size_t count);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t t) const noexcept { return values_[t]; }
  const std::vector<double>& values() const noexcept { return values_; }
  double lower() const noexcept { return values_.front(); }
  double upper() const noexcept { return values_.back(); }
  // Trapezoid weights on the grid; sum to upper() - lower().
  std::vector<double> trapezoid_weights() const;

  friend bool operator==(const ImGrid&, const ImGrid&) = default;

 private:
  std::vector<double> values_;
};

struct FragilityCurve {
  ImGrid grid;
  std::vector<double> probabilities;
};

// P x m curves on a shared grid, stored [p][j][t]. The plug-in field is the P = 1
// layout.
class CurveEnsemble {
 public:
  CurveEnsemble(ImGrid grid, std::size_t draws, std::size_t samples);

  const ImGrid& grid() const noexcept { return grid_; }
  std::size_t draws() const noexcept { return draws_; }
  std::size_t samples() const noexcept { return samples_; }
  double& operator()(std::size_t p, std::size_t j, std::size_t t) noexcept {
    return values_[(p * samples_ + j) * grid_.size() + t];
  }
  double operator()(std::size_t p, std::size_t j, std::size_t t) const noexcept {
    return values_[(p * samples_ + j) * grid_.size() + t];
  }
  std::span<const double> curve(std::size_t p, std::size_t j) const noexcept {
    return {values_.data() + (p * samples_ + j) * grid_.size(), grid_.size()};
  }
  std::span<double> curve(std::size_t p, std::size_t j) noexcept {
    return {values_.data() + (p * samples_ + j) * grid_.size(), grid_.size()};
  }

 private:
  ImGrid grid_;
  std::size_t draws_;
  std::size_t samples_;
  std::vector<double> values_;
};

// Phi((m_n - log c) / sigma_n)
double psi1(const FragilitySurrogate& model, double a, std::span<const double> x, double c);
CurveEnsemble psi1_curves(const FragilitySurrogate& model, const ImGrid& grid,
                          const RowMatrix& x_samples, double c);
// Phi((G_p - log c) / noise_sd(a)) over joint posterior draws G_p on grid x samples.
CurveEnsemble psi2_samples(const FragilitySurrogate& model, const ImGrid& grid,
                           const RowMatrix& x_samples, double c, std::size_t draws,
                           std::uint64_t seed, const SamplingOptions& options = {});

FragilityCurve mean_curve(const CurveEnsemble& ensemble);
// Lower empirical gamma-quantile over the samples of a single-draw ensemble.
FragilityCurve quantile_curve(const CurveEnsemble& psi1_values, double gamma);
// gamma_g-quantile over draws per (a_t, x_j), then gamma_x-quantile over j.
FragilityCurve bilevel_quantile_curve(const CurveEnsemble& ensemble, double gamma_g,
                                      double gamma_x);
// Pool-adjacent-violators projection onto non-decreasing curves.
FragilityCurve isotonic(const FragilityCurve& curve);

struct BinnedReference {
  FragilityCurve curve;  // on the sorted cluster centers
  std::vector<double> halfwidths;
  std::vector<std::size_t> counts;
  std::size_t merged_clusters = 0;  // clusters that ended up empty and were merged
};

// Empirical exceedance of log c per 1-D k-means cluster of the IM values.
BinnedReference binned_mc_reference(const Dataset& data, double c, std::size_t clusters,
                                    std::uint64_t seed, std::size_t restarts = 20);

// a,value[,lo,hi]
void write_curve_csv(std::ostream& out, const FragilityCurve& curve,
                     const std::vector<double>* lower = nullptr,
                     const std::vector<double>* upper = nullptr);
// p,j,a,value
void write_ensemble_csv(std::ostream& out, const CurveEnsemble& ensemble);

}  // namespace fuq
