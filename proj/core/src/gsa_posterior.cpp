#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fuq/error.hpp"
#include "fuq/gsa.hpp"
#include "fuq/parallel.hpp"
#include "fuq/rng.hpp"
#include "fuq/stats.hpp"
#include "pickfreeze_features.hpp"

namespace fuq {
namespace {

// B x m multiplicities of each sample index in each resample.
Eigen::MatrixXd bootstrap_counts(std::size_t m, const PosteriorGsaConfig& config) {
  const std::size_t big_b = config.bootstrap;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(big_b),
                                                 static_cast<Eigen::Index>(m));
  if (!config.bootstrap_indices.empty()) {
    if (config.bootstrap_indices.size() != big_b)
      throw InputError("explicit bootstrap indices: expected " + std::to_string(big_b) + " sets");
    for (std::size_t b = 0; b < big_b; ++b) {
      const auto& idx = config.bootstrap_indices[b];
      if (idx.size() != m) throw InputError("explicit bootstrap indices: each set needs m entries");
      for (std::size_t j : idx) {
        if (j >= m) throw InputError("explicit bootstrap indices: index out of range");
        counts(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) += 1.0;
      }
    }
    return counts;
  }
  if (big_b == 1) {
    counts.setOnes();
    return counts;
  }
  const std::uint64_t key = derive_seed(config.seed, "bootstrap");
  for (std::size_t b = 0; b < big_b; ++b) {
    Rng rng(derive_seed(key, b));
    for (std::size_t j = 0; j < m; ++j)
      counts(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(rng.below(m))) += 1.0;
  }
  return counts;
}

SensitivityResult make_result(IndexKind kind, std::vector<double> point, std::size_t draws,
                              std::size_t bootstrap, std::size_t d) {
  SensitivityResult r;
  r.kind = kind;
  r.point_estimate = std::move(point);
  r.draws = draws;
  r.bootstrap = bootstrap;
  r.replicates.assign(draws * bootstrap * d, std::numeric_limits<double>::quiet_NaN());
  return r;
}

}  // namespace

PosteriorGsaResult posterior_sensitivity(const FragilitySurrogate& model,
                                         const PickFreezeDesign& design, const ImGrid& grid,
                                         double c, const PosteriorGsaConfig& config) {
  if (config.draws < 1 || config.bootstrap < 1)
    throw InputError("posterior sensitivity needs P >= 1 and B >= 1");
  if (!config.sobol && !config.betak) throw InputError("no index family requested");
  if (design.dim() != model.param_dim())
    throw DimensionError("design dimension differs from the model", design.dim());
  if (!(c > 0.0)) throw InputError("threshold must be positive");
  const double lc = std::log(c);
  const std::size_t d = design.dim();
  const std::size_t m = design.size();
  const std::size_t groups = design.group_size();
  const std::size_t big_p = config.draws;
  const std::size_t big_b = config.bootstrap;
  const auto w = grid.trapezoid_weights();
  const std::size_t t_count = grid.size();

  // Plug-in estimates, and the bandwidth they calibrate.
  const DesignCurves plug = design_curves_psi1(model, design, grid, c);
  PosteriorGsaResult res;
  res.bandwidth = config.betak ? config.bandwidth.value_or(bandwidth_heuristic(plug.base(), grid))
                               : 1.0;
  if (!(res.bandwidth > 0.0)) throw InputError("bandwidth must be positive");
  {
    const std::size_t dd = d;
    std::vector<double> nan(dd, std::numeric_limits<double>::quiet_NaN());
    IndexPair sob{make_result(IndexKind::SobolFirst, nan, big_p, big_b, dd),
                  make_result(IndexKind::SobolTotal, nan, big_p, big_b, dd)};
    IndexPair bk{make_result(IndexKind::BetaKFirst, nan, big_p, big_b, dd),
                 make_result(IndexKind::BetaKTotal, nan, big_p, big_b, dd)};
    if (config.sobol) {
      auto s = aggregated_sobol(plug);
      sob.first.point_estimate = s.first.point_estimate;
      sob.total.point_estimate = s.total.point_estimate;
    }
    if (config.betak) {
      auto b = betak(plug, CurveKernel(res.bandwidth, grid));
      bk.first.point_estimate = b.first.point_estimate;
      bk.total.point_estimate = b.total.point_estimate;
    }
    res.sobol_first = std::move(sob.first);
    res.sobol_total = std::move(sob.total);
    res.betak_first = std::move(bk.first);
    res.betak_total = std::move(bk.total);
  }

  const detail::PickFreezeFeatures features(d, w, config.sobol, config.betak, res.bandwidth);
  const auto nf = static_cast<Eigen::Index>(features.size());
  const Eigen::MatrixXd counts = bootstrap_counts(m, config);
  std::vector<double> noise(t_count);
  for (std::size_t t = 0; t < t_count; ++t) noise[t] = model.noise_sd(grid[t]);

  std::vector<Eigen::MatrixXd> acc;  // per draw in the current chunk, B x nf
  const std::size_t total_points = m * groups;
  SamplingOptions sampling = config.sampling;
  sampling.point_group = groups;

  auto sink = [&](const ProductDrawBlock& blk) {
    if (blk.point_begin == 0) {
      acc.assign(blk.draw_count, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(big_b), nf));
    }
    const std::size_t j0 = blk.point_begin / groups;
    const std::size_t rows = blk.point_count / groups;
    const auto cblk = counts.middleCols(static_cast<Eigen::Index>(j0), static_cast<Eigen::Index>(rows));
    parallel_for(blk.draw_count, [&](std::size_t pl) {
      RowMatrix f;
      features.fill(rows, [&](std::size_t g, std::size_t r, std::size_t t) {
        return normal_cdf((blk(pl, r * groups + g, t) - lc) / noise[t]);
      }, f);
      acc[pl].noalias() += cblk * f;
    });
    if (blk.point_begin + blk.point_count == total_points) {
      parallel_for(blk.draw_count, [&](std::size_t pl) {
        const std::size_t p = blk.draw_begin + pl;
        std::vector<double> out(4 * d);
        for (std::size_t b = 0; b < big_b; ++b) {
          const auto be = static_cast<Eigen::Index>(b);
          const Eigen::VectorXd row = acc[pl].row(be).transpose();
          features.finalize({row.data(), static_cast<std::size_t>(row.size())}, counts.row(be).sum(), out);
          for (std::size_t i = 0; i < d; ++i) {
            const std::size_t slot = (p * big_b + b) * d + i;
            res.sobol_first.replicates[slot] = out[i];
            res.sobol_total.replicates[slot] = out[d + i];
            res.betak_first.replicates[slot] = out[2 * d + i];
            res.betak_total.replicates[slot] = out[3 * d + i];
          }
        }
      });
      acc.clear();
    }
  };
  model.sample_product(grid.values(), design.stacked(), big_p, derive_seed(config.seed, "posterior"),
                       sampling, sink);

  for (auto* r : {&res.sobol_first, &res.sobol_total, &res.betak_first, &res.betak_total})
    compute_variance_split(*r);
  return res;
}

IndexPair aggregated_sobol_posterior(const FragilitySurrogate& model,
                                     const PickFreezeDesign& design, const ImGrid& grid, double c,
                                     std::size_t draws, std::size_t bootstrap, std::uint64_t seed,
                                     const SamplingOptions& sampling) {
  PosteriorGsaConfig cfg;
  cfg.draws = draws;
  cfg.bootstrap = bootstrap;
  cfg.seed = seed;
  cfg.sampling = sampling;
  cfg.betak = false;
  auto r = posterior_sensitivity(model, design, grid, c, cfg);
  return {std::move(r.sobol_first), std::move(r.sobol_total)};
}

IndexPair betak_posterior(const FragilitySurrogate& model, const PickFreezeDesign& design,
                          const ImGrid& grid, double c, const CurveKernel& kernel,
                          std::size_t draws, std::size_t bootstrap, std::uint64_t seed,
                          const SamplingOptions& sampling) {
  if (!(kernel.grid() == grid)) throw InputError("kernel grid differs from the curve grid");
  PosteriorGsaConfig cfg;
  cfg.draws = draws;
  cfg.bootstrap = bootstrap;
  cfg.seed = seed;
  cfg.sampling = sampling;
  cfg.sobol = false;
  cfg.bandwidth = kernel.bandwidth();
  auto r = posterior_sensitivity(model, design, grid, c, cfg);
  return {std::move(r.betak_first), std::move(r.betak_total)};
}

}  // namespace fuq
