#include <algorithm>

#include "fuq/error.hpp"
#include "fuq/parallel.hpp"
#include "fuq/surrogate.hpp"

namespace fuq {

void FragilitySurrogate::predict_product(std::span<const double> grid, const RowMatrix& points,
                                         RowMatrix& mean, RowMatrix& observation_sd) const {
  if (static_cast<std::size_t>(points.cols()) != param_dim())
    throw DimensionError("predict_product: parameter dimension mismatch",
                         static_cast<std::size_t>(points.cols()));
  const auto m = points.rows();
  const auto t_count = static_cast<Eigen::Index>(grid.size());
  mean.resize(m, t_count);
  observation_sd.resize(m, t_count);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t j) {
    InputPoint q;
    q.params.assign(points.row(static_cast<Eigen::Index>(j)).data(),
                    points.row(static_cast<Eigen::Index>(j)).data() + points.cols());
    for (Eigen::Index t = 0; t < t_count; ++t) {
      q.im = grid[static_cast<std::size_t>(t)];
      const auto pm = predict(q);
      mean(static_cast<Eigen::Index>(j), t) = pm.mean;
      observation_sd(static_cast<Eigen::Index>(j), t) = pm.observation_sd;
    }
  });
}

ProductPlan plan_product(std::size_t grid_size, std::size_t points, std::size_t draws,
                         std::size_t coefficient_rows, const SamplingOptions& options) {
  constexpr std::size_t kCoefficientBudget = std::size_t{1} << 25;  // doubles
  constexpr std::size_t kBlockBudget = std::size_t{1} << 22;
  ProductPlan plan;
  plan.draw_chunk = options.draw_chunk ? std::min(options.draw_chunk, draws) : draws;
  if (!options.draw_chunk && coefficient_rows > 0)
    plan.draw_chunk = std::clamp<std::size_t>(kCoefficientBudget / coefficient_rows, 1, draws);
  plan.draw_chunk = std::max<std::size_t>(plan.draw_chunk, 1);

  const std::size_t group = std::max<std::size_t>(options.point_group, 1);
  std::size_t block = options.block_points
                          ? options.block_points
                          : kBlockBudget / std::max<std::size_t>(grid_size * plan.draw_chunk, 1);
  block = std::max(group, block / group * group);
  const std::size_t all = (points + group - 1) / group * group;
  plan.block_points = std::max<std::size_t>(std::min(block, all), 1);
  return plan;
}

}  // namespace fuq
