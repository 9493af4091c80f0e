#include "fuq/fragility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>


#include "fuq/error.hpp"
#include "fuq/format.hpp"
#include "fuq/parallel.hpp"
#include "fuq/rng.hpp"
#include "fuq/stats.hpp"

namespace fuq {

ImGrid::ImGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) throw InputError("IM grid needs at least 2 points");
  for (std::size_t t = 0; t < values_.size(); ++t) {
    if (!(values_[t] > 0.0) || !std::isfinite(values_[t]))
      throw InputError("IM grid values must be positive");
    if (t > 0 && !(values_[t] > values_[t - 1]))
      throw InputError("IM grid must be strictly increasing");
  }
}

ImGrid ImGrid::regular(double a0, double a1, std::size_t count) {
  if (count < 2) throw InputError("IM grid needs at least 2 points");
  if (!(a0 > 0.0 && a1 > a0)) throw InputError("IM grid bounds must satisfy 0 < a0 < a1");
  std::vector<double> v(count);
  for (std::size_t t = 0; t < count; ++t)
    v[t] = a0 + (a1 - a0) * static_cast<double>(t) / static_cast<double>(count - 1);
  v.back() = a1;
  return ImGrid(std::move(v));
}

std::vector<double> ImGrid::trapezoid_weights() const {
  std::vector<double> w(values_.size(), 0.0);
  for (std::size_t t = 0; t + 1 < values_.size(); ++t) {
    const double h = 0.5 * (values_[t + 1] - values_[t]);
    w[t] += h;
    w[t + 1] += h;
  }
  return w;
}

CurveEnsemble::CurveEnsemble(ImGrid grid, std::size_t draws, std::size_t samples)
    : grid_(std::move(grid)), draws_(draws), samples_(samples),
      values_(draws * samples * grid_.size(), 0.0) {
  if (draws < 1 || samples < 1) throw InputError("curve ensemble must be non-empty");
}

namespace {

double log_threshold(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw InputError("threshold must be positive");
  return std::log(c);
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("quantile level must lie in (0, 1]");
}

}  // namespace

double psi1(const FragilitySurrogate& model, double a, std::span<const double> x, double c) {
  const double lc = log_threshold(c);
  InputPoint q{a, std::vector<double>(x.begin(), x.end())};
  const auto pm = model.predict(q);
  return normal_cdf((pm.mean - lc) / pm.observation_sd);
}

CurveEnsemble psi1_curves(const FragilitySurrogate& model, const ImGrid& grid,
                          const RowMatrix& x_samples, double c) {
  const double lc = log_threshold(c);
  if (x_samples.rows() < 1) throw InputError("psi1_curves: no parameter samples");
  RowMatrix mu;
  RowMatrix sd;
  model.predict_product(grid.values(), x_samples, mu, sd);
  CurveEnsemble out(grid, 1, static_cast<std::size_t>(x_samples.rows()));
  for (std::size_t j = 0; j < out.samples(); ++j)
    for (std::size_t t = 0; t < grid.size(); ++t) {
      const auto je = static_cast<Eigen::Index>(j);
      const auto te = static_cast<Eigen::Index>(t);
      out(0, j, t) = normal_cdf((mu(je, te) - lc) / sd(je, te));
    }
  return out;
}

CurveEnsemble psi2_samples(const FragilitySurrogate& model, const ImGrid& grid,
                           const RowMatrix& x_samples, double c, std::size_t draws,
                           std::uint64_t seed, const SamplingOptions& options) {
  const double lc = log_threshold(c);
  if (draws < 1) throw InputError("psi2_samples: at least one draw is required");
  if (x_samples.rows() < 1) throw InputError("psi2_samples: no parameter samples");
  CurveEnsemble out(grid, draws, static_cast<std::size_t>(x_samples.rows()));
  std::vector<double> noise(grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t) noise[t] = model.noise_sd(grid[t]);
  model.sample_product(grid.values(), x_samples, draws, seed, options,
                       [&](const ProductDrawBlock& b) {
                         parallel_for(b.point_count, [&](std::size_t r) {
                           for (std::size_t p = 0; p < b.draw_count; ++p)
                             for (std::size_t t = 0; t < b.grid_size; ++t)
                               out(b.draw_begin + p, b.point_begin + r, t) =
                                   normal_cdf((b(p, r, t) - lc) / noise[t]);
                         });
                       });
  return out;
}

FragilityCurve mean_curve(const CurveEnsemble& ensemble) {
  const std::size_t t_count = ensemble.grid().size();
  std::vector<double> acc(t_count, 0.0);
  for (std::size_t p = 0; p < ensemble.draws(); ++p)
    for (std::size_t j = 0; j < ensemble.samples(); ++j) {
      const auto c = ensemble.curve(p, j);
      for (std::size_t t = 0; t < t_count; ++t) acc[t] += c[t];
    }
  const double inv = 1.0 / static_cast<double>(ensemble.draws() * ensemble.samples());
  for (double& v : acc) v *= inv;
  return {ensemble.grid(), std::move(acc)};
}

FragilityCurve quantile_curve(const CurveEnsemble& psi1_values, double gamma) {
  check_gamma(gamma);
  if (psi1_values.draws() != 1)
    throw InputError("quantile_curve expects a single-draw ensemble; use bilevel_quantile_curve");
  const std::size_t m = psi1_values.samples();
  std::vector<double> out(psi1_values.grid().size());
  parallel_for(out.size(), [&](std::size_t t) {
    std::vector<double> column(m);
    for (std::size_t j = 0; j < m; ++j) column[j] = psi1_values(0, j, t);
    out[t] = lower_quantile_inplace(column, gamma);
  });
  return {psi1_values.grid(), std::move(out)};
}

FragilityCurve bilevel_quantile_curve(const CurveEnsemble& ensemble, double gamma_g,
                                      double gamma_x) {
  check_gamma(gamma_g);
  check_gamma(gamma_x);
  const std::size_t big_p = ensemble.draws();
  const std::size_t m = ensemble.samples();
  const std::size_t t_count = ensemble.grid().size();
  std::vector<double> inner(m * t_count);
  parallel_for(m, [&](std::size_t j) {
    std::vector<double> column(big_p);
    for (std::size_t t = 0; t < t_count; ++t) {
      for (std::size_t p = 0; p < big_p; ++p) column[p] = ensemble(p, j, t);
      inner[t * m + j] = lower_quantile_inplace(column, gamma_g);
    }
  });
  std::vector<double> out(t_count);
  parallel_for(t_count, [&](std::size_t t) {
    out[t] = lower_quantile_inplace(std::span<double>(inner.data() + t * m, m), gamma_x);
  });
  return {ensemble.grid(), std::move(out)};
}

FragilityCurve isotonic(const FragilityCurve& curve) {
  // Pool adjacent violators with unit weights.
  std::vector<double> level;
  std::vector<std::size_t> width;
  for (double v : curve.probabilities) {
    level.push_back(v);
    width.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const std::size_t w = width[width.size() - 2] + width.back();
      const double merged = (level[level.size() - 2] * static_cast<double>(width[width.size() - 2]) +
                             level.back() * static_cast<double>(width.back())) /
                            static_cast<double>(w);
      level.pop_back();
      width.pop_back();
      level.back() = merged;
      width.back() = w;
    }
  }
  std::vector<double> out;
  out.reserve(curve.probabilities.size());
  for (std::size_t b = 0; b < level.size(); ++b) out.insert(out.end(), width[b], level[b]);
  return {curve.grid, std::move(out)};
}

namespace {

struct KMeans1d {
  std::vector<double> centers;
  std::vector<std::size_t> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

// Lloyd iterations on sorted data; labels are contiguous ranges.
KMeans1d lloyd_1d(const std::vector<double>& sorted, std::vector<double> centers) {
  const std::size_t n = sorted.size();
  KMeans1d res;
  res.labels.assign(n, 0);
  for (int iter = 0; iter < 300; ++iter) {
    std::sort(centers.begin(), centers.end());
    const std::size_t k = centers.size();
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) {
      while (c + 1 < k && std::abs(sorted[i] - centers[c + 1]) < std::abs(sorted[i] - centers[c])) ++c;
      res.labels[i] = c;
      sum[c] += sorted[i];
      ++cnt[c];
    }
    bool moved = false;
    for (std::size_t q = 0; q < k; ++q) {
      if (cnt[q] == 0) continue;
      const double nc = sum[q] / static_cast<double>(cnt[q]);
      if (nc != centers[q]) moved = true;
      centers[q] = nc;
    }
    if (!moved) break;
  }
  res.centers = centers;
  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = sorted[i] - centers[res.labels[i]];
    res.inertia += e * e;
  }
  return res;
}

}  // namespace

BinnedReference binned_mc_reference(const Dataset& data, double c, std::size_t clusters,
                                    std::uint64_t seed, std::size_t restarts) {
  data.validate();
  const double lc = log_threshold(c);
  if (clusters < 2) throw InputError("binned reference needs at least 2 clusters");
  const std::size_t n = data.size();
  if (clusters > n) throw InputError("more clusters than observations");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.points[a].im < data.points[b].im;
  });
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = data.points[order[i]].im;

  // k-means++ seeding, best inertia over the restarts.
  const std::uint64_t key = derive_seed(seed, "kmeans");
  KMeans1d best;
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Rng rng(derive_seed(key, r));
    std::vector<double> centers{sorted[static_cast<std::size_t>(rng.below(n))]};
    std::vector<double> d2(n);
    while (centers.size() < clusters) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double best_d = std::numeric_limits<double>::infinity();
        for (double cc : centers) best_d = std::min(best_d, (sorted[i] - cc) * (sorted[i] - cc));
        d2[i] = best_d;
        total += best_d;
      }
      std::size_t pick = static_cast<std::size_t>(rng.below(n));
      if (total > 0.0) {
        double u = rng.uniform() * total;
        for (std::size_t i = 0; i < n; ++i) {
          u -= d2[i];
          if (u < 0.0) {
            pick = i;
            break;
          }
        }
      }
      centers.push_back(sorted[pick]);
    }
    auto res = lloyd_1d(sorted, std::move(centers));
    if (res.inertia < best.inertia) best = std::move(res);
  }

  // Collapse empty clusters (and duplicate centers) into their neighbours.
  std::vector<double> sum;
  std::vector<std::size_t> cnt;
  std::vector<std::size_t> hits;
  std::vector<double> centers;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lab = best.labels[i];
    if (centers.empty() || best.labels[i - 1] != lab) {
      centers.push_back(0.0);
      sum.push_back(0.0);
      cnt.push_back(0);
      hits.push_back(0);
    }
    sum.back() += sorted[i];
    ++cnt.back();
    if (data.responses[order[i]] > lc) ++hits.back();
  }
  std::vector<double> grid;
  std::vector<double> prob;
  std::vector<double> halfwidths;
  std::vector<std::size_t> counts;
  for (std::size_t q = 0; q < cnt.size(); ++q) {
    const double center = sum[q] / static_cast<double>(cnt[q]);
    const double p = static_cast<double>(hits[q]) / static_cast<double>(cnt[q]);
    if (!grid.empty() && !(center > grid.back()))
      throw NumericalError("binned reference: cluster centers are not separated");
    grid.push_back(center);
    prob.push_back(p);
    halfwidths.push_back(1.3 * std::sqrt(p * (1.0 - p) / static_cast<double>(cnt[q])));
    counts.push_back(cnt[q]);
  }
  if (grid.size() < 2) throw NumericalError("binned reference: fewer than 2 non-empty clusters");
  BinnedReference out{FragilityCurve{ImGrid(std::move(grid)), std::move(prob)},
                      std::move(halfwidths), std::move(counts), clusters - cnt.size()};
  return out;
}

void write_curve_csv(std::ostream& out, const FragilityCurve& curve,
                     const std::vector<double>* lower, const std::vector<double>* upper) {
  const bool bands = lower && upper;
  out << (bands ? "a,value,lo,hi\n" : "a,value\n");
  for (std::size_t t = 0; t < curve.grid.size(); ++t) {
    out << format_double(curve.grid[t]) << ',' << format_double(curve.probabilities[t]);
    if (bands) out << ',' << format_double((*lower)[t]) << ',' << format_double((*upper)[t]);
    out << '\n';
  }
}

void write_ensemble_csv(std::ostream& out, const CurveEnsemble& ensemble) {
  out << "p,j,a,value\n";
  for (std::size_t p = 0; p < ensemble.draws(); ++p)
    for (std::size_t j = 0; j < ensemble.samples(); ++j)
      for (std::size_t t = 0; t < ensemble.grid().size(); ++t)
        out << p << ',' << j << ',' << format_double(ensemble.grid()[t]) << ','
            << format_double(ensemble(p, j, t)) << '\n';
}

}  // namespace fuq
