#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fuq/distributions.hpp"
#include "fuq/fragility.hpp"
#include "fuq/gp.hpp"
#include "fuq/gsa.hpp"
#include "fuq/surrogate.hpp"

namespace fuq {

// Uniform input with mean mu and coefficient of variation c on
// [mu (1 - c sqrt3), mu (1 + c sqrt3)].
struct InputSpec {
  std::string name;
  double mean = 1.0;
  double cov = 0.0;

  UniformLaw law() const;
};

using InputDistributionSpec = std::vector<InputSpec>;

// E, Sy, H, TPX29, TPY29, TPZ29 at 15% CoV.
InputDistributionSpec default_inputs();
std::vector<UniformLaw> input_laws(const InputDistributionSpec& spec);
RowMatrix sample_inputs(const InputDistributionSpec& spec, std::size_t count, std::uint64_t seed);

struct LogNormalIm {
  double mu = 0.0;  // log-median
  double sigma = 1.0;
};
struct UniformIm {
  double a0 = 1.0;
  double a1 = 1.0;
};
using ImLaw = std::variant<LogNormalIm, UniformIm>;

// Median 5, log-sd 0.6.
ImLaw default_im_law();
std::vector<double> sample_im(const ImLaw& law, std::size_t count, std::uint64_t seed);

// kappa tanh(lambda log a) xbar_1 xbar_2 added to the linear form.
struct Interaction {
  double kappa = 0.1;
  double lambda = 2.0;
};

// log z = g(a, x) + phi(a) xi with
// g = beta0 + beta_a log a + sum_i beta_i xbar_i [+ interaction], where
// xbar_i = (x_i - mean_i) / (mean_i cov_i sqrt3) lies in [-1, 1].
struct SyntheticModelSpec {
  double beta0 = 0.0;
  double beta_a = 1.0;
  std::vector<double> betas;
  std::optional<Interaction> interaction;
  std::optional<NuggetModel> noise;  // unset: noiseless
  double threshold_c = 1.0;
  InputDistributionSpec inputs;

  void validate() const;
  std::size_t dim() const noexcept { return inputs.size(); }
  double standardized(std::size_t i, double x) const;
  double g(double a, std::span<const double> x) const;
  double g_standardized(double a, std::span<const double> xbar) const;
  double noise_sd(double a) const;
};

SyntheticModelSpec linear_testbed();
SyntheticModelSpec nonlinear_testbed();

double synthetic_edp(double a, std::span<const double> x, const SyntheticModelSpec& spec,
                     std::uint64_t seed);
// Phi((g - log c) / phi); a step function when the model has no noise.
double true_fragility(const SyntheticModelSpec& spec, double a, std::span<const double> x);
Dataset generate_dataset(const SyntheticModelSpec& spec, const ImLaw& im_law, std::size_t n,
                         std::uint64_t seed);

// The known truth behind the testbed, exposed through the surrogate interface:
// latent sd zero, noise phi.
class AnalyticSurrogate final : public FragilitySurrogate {
 public:
  explicit AnalyticSurrogate(SyntheticModelSpec spec);

  const SyntheticModelSpec& spec() const noexcept { return spec_; }
  std::size_t param_dim() const override { return spec_.dim(); }
  PredictionMoments predict(const InputPoint& query) const override;
  double noise_sd(double im) const override { return spec_.noise_sd(im); }
  void sample_product(std::span<const double> grid, const RowMatrix& points, std::size_t draws,
                      std::uint64_t seed, const SamplingOptions& options,
                      const ProductDrawSink& sink) const override;

 private:
  SyntheticModelSpec spec_;
};

// E_X[Psi(a, X)] by tensor Gauss-Legendre over the inputs g depends on.
FragilityCurve quadrature_mean_curve(const SyntheticModelSpec& spec, const ImGrid& grid);
// Pointwise gamma-quantile over X of the true curves; needs a spec without the
// interaction term (Psi is then monotone in the linear score).
FragilityCurve analytic_quantile_curve(const SyntheticModelSpec& spec, const ImGrid& grid,
                                       double gamma);

struct OracleIndices {
  std::vector<double> first;
  std::vector<double> first_se;
  std::vector<double> total;
  std::vector<double> total_se;
};

// Nested Monte Carlo on the true curves. Standard errors come from 10 batches of
// the outer loop.
OracleIndices oracle_aggregated_sobol(const SyntheticModelSpec& spec, const ImGrid& grid,
                                      std::size_t n_outer, std::size_t n_inner,
                                      std::uint64_t seed);
OracleIndices oracle_betak(const SyntheticModelSpec& spec, const ImGrid& grid,
                           const CurveKernel& kernel, std::size_t n_outer, std::size_t n_inner,
                           std::uint64_t seed);

}  // namespace fuq
