#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include <Eigen/Core>

#include "fuq/kernel.hpp"

namespace fuq {

struct PredictionMoments {
  double mean = 0.0;
  double latent_sd = 0.0;
  double observation_sd = 0.0;
};

struct SamplingOptions {
  // Joint sizes up to this use an exact Cholesky of the posterior covariance.
  std::size_t exact_threshold = 4000;
  // Number of query anchors for the low-rank path; 0 means min(1000, |queries| / 2).
  std::size_t nystrom_rank = 0;
  // Draws produced per pass over the points; 0 picks a memory-bounded value.
  std::size_t draw_chunk = 0;
  // Points per emitted block; 0 picks a memory-bounded value. Always a multiple
  // of point_group so consecutive groups are never split.
  std::size_t block_points = 0;
  std::size_t point_group = 1;
};

// Latent draws on (grid x points) for a run of consecutive points and a chunk of
// consecutive draws.
struct ProductDrawBlock {
  std::size_t draw_begin = 0;
  std::size_t draw_count = 0;
  std::size_t point_begin = 0;
  std::size_t point_count = 0;
  std::size_t grid_size = 0;
  // point_count x (grid_size * draw_count); column t * draw_count + p.
  const Eigen::MatrixXd* values = nullptr;

  double operator()(std::size_t p, std::size_t point, std::size_t t) const {
    return (*values)(static_cast<Eigen::Index>(point),
                     static_cast<Eigen::Index>(t * draw_count + p));
  }
};

// Called sequentially: draw chunks in increasing order, blocks within a chunk in
// increasing point order.
using ProductDrawSink = std::function<void(const ProductDrawBlock&)>;

// Anything that yields predictive moments and joint latent draws of log-EDP on a
// grid of IM values crossed with parameter vectors.
class FragilitySurrogate {
 public:
  virtual ~FragilitySurrogate() = default;

  virtual std::size_t param_dim() const = 0;
  virtual PredictionMoments predict(const InputPoint& query) const = 0;
  // Observation-noise sd at the given IM.
  virtual double noise_sd(double im) const = 0;

  // mean and observation sd, each points x grid.
  virtual void predict_product(std::span<const double> grid, const RowMatrix& points,
                               RowMatrix& mean, RowMatrix& observation_sd) const;

  virtual void sample_product(std::span<const double> grid, const RowMatrix& points,
                              std::size_t draws, std::uint64_t seed,
                              const SamplingOptions& options,
                              const ProductDrawSink& sink) const = 0;
};

struct ProductPlan {
  std::size_t draw_chunk = 1;
  std::size_t block_points = 1;
};

// `coefficient_rows` is the per-draw, per-grid-point working set a sampler keeps
// for a whole chunk (0 if none).
ProductPlan plan_product(std::size_t grid_size, std::size_t points, std::size_t draws,
                         std::size_t coefficient_rows, const SamplingOptions& options);

}  // namespace fuq
