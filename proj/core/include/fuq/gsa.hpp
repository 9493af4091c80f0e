#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fuq/distributions.hpp"
#include "fuq/fragility.hpp"
#include "fuq/kernel.hpp"
#include "fuq/surrogate.hpp"

namespace fuq {

// Base sample X and independent copy X~. frozen(i) is X~ with coordinate i taken
// from X; complement(i) is X with coordinate i taken from X~.
class PickFreezeDesign {
 public:
  PickFreezeDesign(RowMatrix base, RowMatrix copy);

  std::size_t size() const noexcept { return static_cast<std::size_t>(base_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(base_.cols()); }
  const RowMatrix& base() const noexcept { return base_; }
  const RowMatrix& copy() const noexcept { return copy_; }
  RowMatrix frozen(std::size_t i) const;
  RowMatrix complement(std::size_t i) const;

  // Points evaluated per sample index: base, copy, frozen_0.., complement_0..
  std::size_t group_size() const noexcept { return 2 + 2 * dim(); }
  // All design points, j-major: row j * group_size() + g.
  RowMatrix stacked() const;
  // Joint reordering of base and copy rows.
  PickFreezeDesign permuted(std::span<const std::size_t> order) const;

 private:
  RowMatrix base_;
  RowMatrix copy_;
};

PickFreezeDesign pickfreeze_design(std::size_t m, std::span<const UniformLaw> dists,
                                   std::uint64_t seed);

enum class IndexKind { SobolFirst, SobolTotal, BetaKFirst, BetaKTotal };
std::string_view to_string(IndexKind kind);

struct SensitivityResult {
  IndexKind kind = IndexKind::SobolFirst;
  std::vector<double> point_estimate;  // per input
  std::size_t draws = 0;               // P
  std::size_t bootstrap = 0;           // B
  std::vector<double> replicates;      // [(p * B + b) * d + i]; NaN marks a dropped replicate
  std::vector<double> sigma_gp;        // metamodel sd
  std::vector<double> sigma_mc;        // Monte-Carlo sd
  std::vector<std::size_t> dropped;    // per input

  std::size_t inputs() const noexcept { return point_estimate.size(); }
  double replicate(std::size_t p, std::size_t b, std::size_t i) const {
    return replicates[(p * bootstrap + b) * inputs() + i];
  }
  // Lower empirical quantile over the valid replicates of input i (NaN if none).
  double replicate_quantile(std::size_t i, double gamma) const;
};

// Fills sigma_gp, sigma_mc and dropped from the replicate array.
void compute_variance_split(SensitivityResult& result);

class CurveKernel {
 public:
  CurveKernel(double bandwidth, ImGrid grid);
  double bandwidth() const noexcept { return bandwidth_; }
  const ImGrid& grid() const noexcept { return grid_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  // exp(-|c1 - c2|^2_L2 / (2 l^2))
  double operator()(std::span<const double> c1, std::span<const double> c2) const;

 private:
  double bandwidth_;
  ImGrid grid_;
  std::vector<double> weights_;
};

// Trapezoid rule for the squared difference.
double l2_distance_sq(const FragilityCurve& c1, const FragilityCurve& c2);
double l2_distance_sq(std::span<const double> c1, std::span<const double> c2,
                      std::span<const double> weights);

// Curve values on every design group; each matrix is m x T.
struct DesignCurves {
  ImGrid grid;
  std::size_t dim = 0;
  std::vector<RowMatrix> groups;  // base, copy, frozen_0.., complement_0..

  const RowMatrix& base() const { return groups[0]; }
  const RowMatrix& copy() const { return groups[1]; }
  const RowMatrix& frozen(std::size_t i) const { return groups[2 + i]; }
  const RowMatrix& complement(std::size_t i) const { return groups[2 + dim + i]; }
  std::size_t size() const { return static_cast<std::size_t>(groups[0].rows()); }
};

DesignCurves design_curves_psi1(const FragilitySurrogate& model, const PickFreezeDesign& design,
                                const ImGrid& grid, double c);

struct IndexPair {
  SensitivityResult first;
  SensitivityResult total;
};

// Point estimates only. Throw DegenerateError("non-informative output") when the
// denominator vanishes.
IndexPair aggregated_sobol(const DesignCurves& curves);
IndexPair betak(const DesignCurves& curves, const CurveKernel& kernel);

// Unbiased U-statistic; rows are curves on kernel.grid().
double mmd2(const RowMatrix& sample_u, const RowMatrix& sample_v, const CurveKernel& kernel);

// Median pairwise L2 distance over the first min(max_curves, m) rows, over sqrt 2.
double bandwidth_heuristic(const RowMatrix& curves, const ImGrid& grid,
                           std::size_t max_curves = 500);

struct PosteriorGsaConfig {
  std::size_t draws = 200;      // P
  std::size_t bootstrap = 150;  // B
  std::uint64_t seed = 0;
  std::optional<double> bandwidth;  // default: heuristic on the plug-in base curves
  SamplingOptions sampling{};
  bool sobol = true;
  bool betak = true;
  // Test hook: B explicit index sets of size m replacing the random resamples.
  std::vector<std::vector<std::size_t>> bootstrap_indices;
};

struct PosteriorGsaResult {
  SensitivityResult sobol_first;
  SensitivityResult sobol_total;
  SensitivityResult betak_first;
  SensitivityResult betak_total;
  double bandwidth = 0.0;
};

// Algorithm: one joint posterior draw over all design points per p, plug-in
// fragility draws, B bootstrap resamples of the sample index shared by every
// group, ratio estimators per (p, b), then the variance split.
PosteriorGsaResult posterior_sensitivity(const FragilitySurrogate& model,
                                         const PickFreezeDesign& design, const ImGrid& grid,
                                         double c, const PosteriorGsaConfig& config);

IndexPair aggregated_sobol_posterior(const FragilitySurrogate& model,
                                     const PickFreezeDesign& design, const ImGrid& grid, double c,
                                     std::size_t draws, std::size_t bootstrap, std::uint64_t seed,
                                     const SamplingOptions& sampling = {});
IndexPair betak_posterior(const FragilitySurrogate& model, const PickFreezeDesign& design,
                          const ImGrid& grid, double c, const CurveKernel& kernel,
                          std::size_t draws, std::size_t bootstrap, std::uint64_t seed,
                          const SamplingOptions& sampling = {});

// {"inputs": [...], "indices": {kind: [{name, estimate, q10, q90, sigma_gp,
// sigma_mc, ratio_mc_gp, dropped_replicates, negative_estimate}]}}
nlohmann::json sensitivity_to_json(std::span<const SensitivityResult> results,
                                   std::span<const std::string> names);
// kind,input,p,b,value (dropped replicates omitted)
void write_replicates_csv(std::ostream& out, std::span<const SensitivityResult> results,
                          std::span<const std::string> names);

}  // namespace fuq
