#include "fuq/gsa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "fuq/error.hpp"
#include "fuq/format.hpp"
#include "fuq/parallel.hpp"
#include "fuq/rng.hpp"
#include "fuq/stats.hpp"
#include "pickfreeze_features.hpp"

namespace fuq {

PickFreezeDesign::PickFreezeDesign(RowMatrix base, RowMatrix copy)
    : base_(std::move(base)), copy_(std::move(copy)) {
  if (base_.rows() != copy_.rows() || base_.cols() != copy_.cols())
    throw InputError("pick-freeze design: base and copy shapes differ");
  if (base_.rows() < 2) throw InputError("pick-freeze design needs m >= 2");
  if (base_.cols() < 1) throw InputError("pick-freeze design needs at least one input");
}

RowMatrix PickFreezeDesign::frozen(std::size_t i) const {
  if (i >= dim()) throw DimensionError("pick-freeze design: input index out of range", i);
  RowMatrix out = copy_;
  out.col(static_cast<Eigen::Index>(i)) = base_.col(static_cast<Eigen::Index>(i));
  return out;
}

RowMatrix PickFreezeDesign::complement(std::size_t i) const {
  if (i >= dim()) throw DimensionError("pick-freeze design: input index out of range", i);
  RowMatrix out = base_;
  out.col(static_cast<Eigen::Index>(i)) = copy_.col(static_cast<Eigen::Index>(i));
  return out;
}

RowMatrix PickFreezeDesign::stacked() const {
  const std::size_t g = group_size();
  const std::size_t d = dim();
  RowMatrix out(static_cast<Eigen::Index>(size() * g), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < size(); ++j) {
    const auto je = static_cast<Eigen::Index>(j);
    const auto r0 = static_cast<Eigen::Index>(j * g);
    out.row(r0) = base_.row(je);
    out.row(r0 + 1) = copy_.row(je);
    for (std::size_t i = 0; i < d; ++i) {
      const auto ie = static_cast<Eigen::Index>(i);
      out.row(r0 + 2 + ie) = copy_.row(je);
      out(r0 + 2 + ie, ie) = base_(je, ie);
      out.row(r0 + 2 + static_cast<Eigen::Index>(d) + ie) = base_.row(je);
      out(r0 + 2 + static_cast<Eigen::Index>(d) + ie, ie) = copy_(je, ie);
    }
  }
  return out;
}

PickFreezeDesign PickFreezeDesign::permuted(std::span<const std::size_t> order) const {
  if (order.size() != size()) throw InputError("permutation has the wrong length");
  RowMatrix b(base_.rows(), base_.cols());
  RowMatrix c(copy_.rows(), copy_.cols());
  for (std::size_t j = 0; j < order.size(); ++j) {
    b.row(static_cast<Eigen::Index>(j)) = base_.row(static_cast<Eigen::Index>(order[j]));
    c.row(static_cast<Eigen::Index>(j)) = copy_.row(static_cast<Eigen::Index>(order[j]));
  }
  return {std::move(b), std::move(c)};
}

PickFreezeDesign pickfreeze_design(std::size_t m, std::span<const UniformLaw> dists,
                                   std::uint64_t seed) {
  if (m < 2) throw InputError("pick-freeze design needs m >= 2");
  if (dists.empty()) throw InputError("pick-freeze design needs at least one input");
  const std::uint64_t key = derive_seed(seed, "design");
  return {sample_uniform(dists, m, derive_seed(key, "base")),
          sample_uniform(dists, m, derive_seed(key, "copy"))};
}

std::string_view to_string(IndexKind kind) {
  switch (kind) {
    case IndexKind::SobolFirst: return "SobolFirst";
    case IndexKind::SobolTotal: return "SobolTotal";
    case IndexKind::BetaKFirst: return "BetaKFirst";
    case IndexKind::BetaKTotal: return "BetaKTotal";
  }
  return "unknown";
}

double SensitivityResult::replicate_quantile(std::size_t i, double gamma) const {
  std::vector<double> valid;
  for (std::size_t p = 0; p < draws; ++p)
    for (std::size_t b = 0; b < bootstrap; ++b) {
      const double v = replicate(p, b, i);
      if (!std::isnan(v)) valid.push_back(v);
    }
  if (valid.empty()) return std::numeric_limits<double>::quiet_NaN();
  return lower_quantile_inplace(valid, gamma);
}

void compute_variance_split(SensitivityResult& r) {
  const std::size_t d = r.inputs();
  r.sigma_gp.assign(d, 0.0);
  r.sigma_mc.assign(d, 0.0);
  r.dropped.assign(d, 0);
  std::vector<double> buf;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t p = 0; p < r.draws; ++p)
      for (std::size_t b = 0; b < r.bootstrap; ++b)
        if (std::isnan(r.replicate(p, b, i))) ++r.dropped[i];
    // Metamodel part: mean over b of the variance over p.
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < r.bootstrap; ++b) {
      buf.clear();
      for (std::size_t p = 0; p < r.draws; ++p)
        if (const double v = r.replicate(p, b, i); !std::isnan(v)) buf.push_back(v);
      if (buf.size() >= 2) {
        acc += sample_variance(buf);
        ++used;
      }
    }
    r.sigma_gp[i] = used ? std::sqrt(acc / static_cast<double>(used)) : 0.0;
    // Monte-Carlo part: mean over p of the variance over b.
    acc = 0.0;
    used = 0;
    for (std::size_t p = 0; p < r.draws; ++p) {
      buf.clear();
      for (std::size_t b = 0; b < r.bootstrap; ++b)
        if (const double v = r.replicate(p, b, i); !std::isnan(v)) buf.push_back(v);
      if (buf.size() >= 2) {
        acc += sample_variance(buf);
        ++used;
      }
    }
    r.sigma_mc[i] = used ? std::sqrt(acc / static_cast<double>(used)) : 0.0;
  }
}

CurveKernel::CurveKernel(double bandwidth, ImGrid grid)
    : bandwidth_(bandwidth), grid_(std::move(grid)), weights_(grid_.trapezoid_weights()) {
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_))
    throw InputError("curve kernel bandwidth must be positive");
}

double CurveKernel::operator()(std::span<const double> c1, std::span<const double> c2) const {
  return std::exp(-l2_distance_sq(c1, c2, weights_) / (2.0 * bandwidth_ * bandwidth_));
}

double l2_distance_sq(std::span<const double> c1, std::span<const double> c2,
                      std::span<const double> weights) {
  if (c1.size() != weights.size() || c2.size() != weights.size())
    throw InputError("curves do not share the grid");
  double s = 0.0;
  for (std::size_t t = 0; t < weights.size(); ++t) {
    const double e = c1[t] - c2[t];
    s += weights[t] * e * e;
  }
  return s;
}

double l2_distance_sq(const FragilityCurve& c1, const FragilityCurve& c2) {
  if (!(c1.grid == c2.grid)) throw InputError("curves do not share the grid");
  const auto w = c1.grid.trapezoid_weights();
  return l2_distance_sq(c1.probabilities, c2.probabilities, w);
}

DesignCurves design_curves_psi1(const FragilitySurrogate& model, const PickFreezeDesign& design,
                                const ImGrid& grid, double c) {
  const CurveEnsemble field = psi1_curves(model, grid, design.stacked(), c);
  const std::size_t g = design.group_size();
  const std::size_t m = design.size();
  const auto tc = static_cast<Eigen::Index>(grid.size());
  DesignCurves out{grid, design.dim(), std::vector<RowMatrix>(g, RowMatrix(static_cast<Eigen::Index>(m), tc))};
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < g; ++k) {
      const auto src = field.curve(0, j * g + k);
      std::copy(src.begin(), src.end(), out.groups[k].row(static_cast<Eigen::Index>(j)).data());
    }
  return out;
}

namespace {

void check_curves(const DesignCurves& curves) {
  if (curves.groups.size() != 2 + 2 * curves.dim)
    throw InputError("design curves: wrong number of groups");
  for (const auto& g : curves.groups)
    if (g.rows() != curves.groups[0].rows() ||
        g.cols() != static_cast<Eigen::Index>(curves.grid.size()))
      throw InputError("design curves: inconsistent shapes");
  if (curves.size() < 2) throw InputError("design curves: m >= 2 required");
}

// Plug-in indices: S, T, beta first, beta total (4d values).
std::vector<double> plugin_indices(const DesignCurves& curves, bool sobol, bool betak,
                                   double bandwidth) {
  check_curves(curves);
  const auto w = curves.grid.trapezoid_weights();
  const detail::PickFreezeFeatures features(curves.dim, w, sobol, betak, bandwidth);
  const std::size_t m = curves.size();
  // Rows are reduced in a canonical order so the result does not depend on how
  // the samples are numbered.
  std::vector<std::size_t> order(m);
  for (std::size_t j = 0; j < m; ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (const auto& g : curves.groups) {
      const auto ra = g.row(static_cast<Eigen::Index>(a));
      const auto rb = g.row(static_cast<Eigen::Index>(b));
      for (Eigen::Index t = 0; t < ra.size(); ++t)
        if (ra[t] != rb[t]) return ra[t] < rb[t];
    }
    return false;
  });
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (m + kBlock - 1) / kBlock;
  std::vector<Eigen::VectorXd> partial(blocks);
  parallel_for(blocks, [&](std::size_t blk) {
    const std::size_t j0 = blk * kBlock;
    const std::size_t rows = std::min(kBlock, m - j0);
    RowMatrix f;
    features.fill(rows, [&](std::size_t g, std::size_t r, std::size_t t) {
      return curves.groups[g](static_cast<Eigen::Index>(order[j0 + r]), static_cast<Eigen::Index>(t));
    }, f);
    partial[blk] = f.colwise().sum().transpose();
  });
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features.size()));
  for (const auto& p : partial) acc += p;
  std::vector<double> out(4 * curves.dim);
  features.finalize({acc.data(), static_cast<std::size_t>(acc.size())}, static_cast<double>(m), out);
  return out;
}

SensitivityResult point_result(IndexKind kind, std::vector<double> values) {
  for (double v : values)
    if (std::isnan(v)) throw DegenerateError("non-informative output");
  SensitivityResult r;
  r.kind = kind;
  r.point_estimate = std::move(values);
  return r;
}

}  // namespace

IndexPair aggregated_sobol(const DesignCurves& curves) {
  const auto all = plugin_indices(curves, true, false, 1.0);
  const auto d = static_cast<std::ptrdiff_t>(curves.dim);
  return {point_result(IndexKind::SobolFirst, {all.begin(), all.begin() + d}),
          point_result(IndexKind::SobolTotal, {all.begin() + d, all.begin() + 2 * d})};
}

IndexPair betak(const DesignCurves& curves, const CurveKernel& kernel) {
  if (!(kernel.grid() == curves.grid)) throw InputError("kernel grid differs from the curve grid");
  const auto all = plugin_indices(curves, false, true, kernel.bandwidth());
  const auto d = static_cast<std::ptrdiff_t>(curves.dim);
  return {point_result(IndexKind::BetaKFirst, {all.begin() + 2 * d, all.begin() + 3 * d}),
          point_result(IndexKind::BetaKTotal, {all.begin() + 3 * d, all.end()})};
}

double mmd2(const RowMatrix& u, const RowMatrix& v, const CurveKernel& kernel) {
  const auto tc = static_cast<Eigen::Index>(kernel.grid().size());
  if (u.cols() != tc || v.cols() != tc) throw InputError("mmd2: samples do not share the grid");
  if (u.rows() < 2 || v.rows() < 2)
    throw InputError("mmd2: within-sample terms need at least 2 curves per sample");
  auto row = [&](const RowMatrix& x, Eigen::Index i) {
    return std::span<const double>(x.row(i).data(), static_cast<std::size_t>(tc));
  };
  // Each term reduced per row in parallel, then summed in row order.
  auto cross_sum = [&](const RowMatrix& a, const RowMatrix& b, bool exclude_diagonal) {
    std::vector<double> rows(static_cast<std::size_t>(a.rows()));
    parallel_for(rows.size(), [&](std::size_t i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < b.rows(); ++j) {
        if (exclude_diagonal && j == static_cast<Eigen::Index>(i)) continue;
        s += kernel(row(a, static_cast<Eigen::Index>(i)), row(b, j));
      }
      rows[i] = s;
    });
    double total = 0.0;
    for (double s : rows) total += s;
    return total;
  };
  const double nu = static_cast<double>(u.rows());
  const double nv = static_cast<double>(v.rows());
  return cross_sum(u, u, true) / (nu * (nu - 1.0)) + cross_sum(v, v, true) / (nv * (nv - 1.0)) -
         2.0 * cross_sum(u, v, false) / (nu * nv);
}

double bandwidth_heuristic(const RowMatrix& curves, const ImGrid& grid, std::size_t max_curves) {
  if (curves.cols() != static_cast<Eigen::Index>(grid.size()))
    throw InputError("bandwidth heuristic: curves do not match the grid");
  const std::size_t m = std::min(static_cast<std::size_t>(curves.rows()), max_curves);
  if (m < 2) throw InputError("bandwidth heuristic needs at least 2 curves");
  const auto w = grid.trapezoid_weights();
  std::vector<double> dist;
  dist.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      dist.push_back(std::sqrt(l2_distance_sq(
          {curves.row(static_cast<Eigen::Index>(i)).data(), grid.size()},
          {curves.row(static_cast<Eigen::Index>(j)).data(), grid.size()}, w)));
  double med = median(dist);
  if (!(med > 0.0)) {
    std::vector<double> positive;
    for (double v : dist)
      if (v > 0.0) positive.push_back(v);
    if (positive.empty()) throw DegenerateError("degenerate bandwidth: all curves are identical");
    med = median(std::move(positive));
  }
  return med / std::sqrt(2.0);
}

nlohmann::json sensitivity_to_json(std::span<const SensitivityResult> results,
                                   std::span<const std::string> names) {
  using nlohmann::json;
  json doc;
  doc["inputs"] = std::vector<std::string>(names.begin(), names.end());
  json indices = json::object();
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (const auto& r : results) {
    if (r.inputs() != names.size()) throw InputError("sensitivity export: name count mismatch");
    json rows = json::array();
    for (std::size_t i = 0; i < r.inputs(); ++i) {
      const double sgp = r.sigma_gp.empty() ? 0.0 : r.sigma_gp[i];
      const double smc = r.sigma_mc.empty() ? 0.0 : r.sigma_mc[i];
      json row;
      row["name"] = names[i];
      row["estimate"] = num(r.point_estimate[i]);
      row["q10"] = num(r.draws ? r.replicate_quantile(i, 0.1) : r.point_estimate[i]);
      row["q90"] = num(r.draws ? r.replicate_quantile(i, 0.9) : r.point_estimate[i]);
      row["sigma_gp"] = sgp;
      row["sigma_mc"] = smc;
      row["ratio_mc_gp"] = num(sgp > 0.0 ? smc / sgp : std::numeric_limits<double>::quiet_NaN());
      row["dropped_replicates"] = r.dropped.empty() ? 0 : r.dropped[i];
      row["negative_estimate"] = r.point_estimate[i] < 0.0;
      rows.push_back(row);
    }
    indices[std::string(to_string(r.kind))] = rows;
  }
  doc["indices"] = indices;
  return doc;
}

void write_replicates_csv(std::ostream& out, std::span<const SensitivityResult> results,
                          std::span<const std::string> names) {
  out << "kind,input,p,b,value\n";
  for (const auto& r : results) {
    if (r.inputs() != names.size()) throw InputError("replicate export: name count mismatch");
    for (std::size_t p = 0; p < r.draws; ++p)
      for (std::size_t b = 0; b < r.bootstrap; ++b)
        for (std::size_t i = 0; i < r.inputs(); ++i) {
          const double v = r.replicate(p, b, i);
          if (std::isnan(v)) continue;
          out << to_string(r.kind) << ',' << names[i] << ',' << p << ',' << b << ','
              << format_double(v) << '\n';
        }
  }
}

}  // namespace fuq
