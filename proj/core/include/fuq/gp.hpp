#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "fuq/kernel.hpp"
#include "fuq/optimize.hpp"
#include "fuq/surrogate.hpp"

namespace fuq {

struct Dataset {
  std::vector<InputPoint> points;
  std::vector<double> responses;  // log-EDP

  std::size_t size() const noexcept { return responses.size(); }
  std::size_t param_dim() const noexcept { return points.empty() ? 0 : points[0].params.size(); }
  void validate() const;
};

struct Homoskedastic {
  double sigma_eps = 0.1;
};

// phi(a) = max(theta0 + theta1 a, theta2)
struct Heteroskedastic {
  double theta0 = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.1;
};

using NuggetModel = std::variant<Homoskedastic, Heteroskedastic>;

double noise_sd(const NuggetModel& nugget, double im) noexcept;
void validate_nugget(const NuggetModel& nugget);
inline bool is_heteroskedastic(const NuggetModel& n) noexcept {
  return std::holds_alternative<Heteroskedastic>(n);
}

struct FitConfig {
  std::uint64_t seed = 0;
  std::size_t restarts = 10;
  // Jointly robust prior penalty. Unset: on for the homoskedastic model, off for
  // the heteroskedastic one.
  std::optional<bool> map_prior;
  // Lower bound of the noise sd, relative to sd(y).
  double noise_floor = 1e-4;
  // Fix the noise sd at its lower bound instead of estimating it.
  bool pin_noise_to_floor = false;
  LbfgsOptions optimizer{};
};

struct FitReport {
  std::vector<double> start_objective;  // negative log posterior at each start
  std::vector<double> final_objective;  // after local optimization
  std::size_t best_start = 0;
  bool map_prior = false;
};

class GpModel final : public FragilitySurrogate {
 public:
  // Rebuilds the factorization; throws FactorizationError if that fails.
  GpModel(KernelParams kernel, NuggetModel nugget, Dataset training, Standardizer standardization,
          double prior_mean);

  const KernelParams& kernel_params() const noexcept { return kernel_; }
  const NuggetModel& nugget() const noexcept { return nugget_; }
  const Dataset& training() const noexcept { return training_; }
  const Standardizer& standardization() const noexcept { return standardizer_; }
  double prior_mean() const noexcept { return prior_mean_; }
  // Lower Cholesky factor of K + diag(nugget^2) + jitter I over the training set.
  const Eigen::MatrixXd& factor() const noexcept { return factor_; }
  // Solves (K + diag(nugget^2) + jitter I) w = y - prior_mean.
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  double jitter() const noexcept { return jitter_; }
  // Training covariance the factor was computed from (including jitter).
  Eigen::MatrixXd training_covariance() const;
  double log_marginal_likelihood() const;

  std::size_t param_dim() const override { return training_.param_dim(); }
  PredictionMoments predict(const InputPoint& query) const override;
  std::vector<PredictionMoments> predict(std::span<const InputPoint> queries) const;
  double noise_sd(double im) const override { return fuq::noise_sd(nugget_, im); }
  void predict_product(std::span<const double> grid, const RowMatrix& points, RowMatrix& mean,
                       RowMatrix& observation_sd) const override;

  // count joint draws of the latent process; returns |queries| x count.
  Eigen::MatrixXd sample_posterior(std::span<const InputPoint> queries, std::size_t count,
                                   std::uint64_t seed, const SamplingOptions& options = {}) const;
  Eigen::MatrixXd posterior_covariance(std::span<const InputPoint> queries) const;
  void sample_product(std::span<const double> grid, const RowMatrix& points, std::size_t draws,
                      std::uint64_t seed, const SamplingOptions& options,
                      const ProductDrawSink& sink) const override;

  // Standardized internals, exposed for the samplers and diagnostics.
  RowMatrix standardize(std::span<const InputPoint> queries) const;
  double standardize_im(double a) const { return standardizer_.apply(0, a); }
  RowMatrix standardize_params(const RowMatrix& params) const;
  // sigma^2 k(query_i, training_j) for standardized query rows.
  Eigen::MatrixXd cross_covariance(const RowMatrix& standardized_queries) const;
  const RowMatrix& standardized_training() const noexcept { return z_; }
  const Eigen::VectorXd& nugget_variances() const noexcept { return nugget_var_; }

 private:
  KernelParams kernel_;
  NuggetModel nugget_;
  Dataset training_;
  Standardizer standardizer_;
  double prior_mean_;

  RowMatrix z_;  // n x (d + 1), column 0 is the IM
  Eigen::VectorXd centered_;
  Eigen::VectorXd nugget_var_;
  Eigen::MatrixXd factor_;
  Eigen::VectorXd weights_;
  double jitter_ = 0.0;
};

// Gaussian log marginal likelihood of the data under the given hyperparameters
// (lengthscales in standardized units).
double log_marginal_likelihood(const Dataset& data, const Standardizer& standardization,
                               const KernelParams& kernel, const NuggetModel& nugget,
                               double prior_mean);

GpModel fit_homoskedastic(const Dataset& data, const FitConfig& config = {},
                          FitReport* report = nullptr);
GpModel fit_heteroskedastic(const Dataset& data, const FitConfig& config = {},
                            FitReport* report = nullptr);

struct LooPredictions {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;  // predictive sd of the held-out observation
};

// Closed form with hyperparameters and prior mean held fixed.
LooPredictions loo_predictions(const GpModel& model);
// Rebuilds the model on each n-1 subset; slow, for cross-checking.
LooPredictions loo_predictions_refit(const GpModel& model);
double loo_q2(const GpModel& model, const Dataset& data);
std::vector<double> coverage_curve(const GpModel& model, const Dataset& data,
                                   std::span<const double> alphas);

nlohmann::json model_to_json(const GpModel& model);
GpModel model_from_json(const nlohmann::json& doc);
void save_model(const GpModel& model, const std::filesystem::path& path);
GpModel load_model(const std::filesystem::path& path);

}  // namespace fuq
