#include "fuq/testbed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include "fuq/error.hpp"
#include "fuq/parallel.hpp"
#include "fuq/rng.hpp"
#include "fuq/stats.hpp"

namespace fuq {

namespace {

const double kSqrt3 = std::sqrt(3.0);

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

template <class Fn>
std::vector<double> grid_map(const ImGrid& grid, Fn fn) {
  std::vector<double> out(grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t) out[t] = fn(grid[t]);
  return out;
}

// Coordinates g depends on.
std::vector<std::size_t> active_inputs(const SyntheticModelSpec& spec) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < spec.dim(); ++i) {
    const bool in_product = spec.interaction && spec.interaction->kappa != 0.0 && i < 2;
    if (spec.betas[i] != 0.0 || in_product) out.push_back(i);
  }
  return out;
}

// Precomputed pieces of Psi(a_t, xbar) on a grid.
class TrueCurves {
 public:
  TrueCurves(const SyntheticModelSpec& spec, const ImGrid& grid) : spec_(spec) {
    if (!spec.noise) throw InputError("true curves need a noise model");
    offset_ = grid_map(grid, [&](double a) {
      return spec.beta0 + spec.beta_a * std::log(a) - std::log(spec.threshold_c);
    });
    product_ = grid_map(grid, [&](double a) {
      return spec.interaction ? spec.interaction->kappa * std::tanh(spec.interaction->lambda * std::log(a))
                              : 0.0;
    });
    noise_ = grid_map(grid, [&](double a) { return spec.noise_sd(a); });
  }

  std::size_t size() const noexcept { return offset_.size(); }

  void curve(std::span<const double> xbar, std::span<double> out) const {
    double lin = 0.0;
    for (std::size_t i = 0; i < xbar.size(); ++i) lin += spec_.betas[i] * xbar[i];
    const double prod = spec_.interaction ? xbar[0] * xbar[1] : 0.0;
    for (std::size_t t = 0; t < out.size(); ++t)
      out[t] = normal_cdf((offset_[t] + lin + product_[t] * prod) / noise_[t]);
  }

 private:
  const SyntheticModelSpec& spec_;
  std::vector<double> offset_;
  std::vector<double> product_;
  std::vector<double> noise_;
};

void fill_uniform(Rng& rng, std::span<double> xbar, std::span<const std::size_t> coords) {
  for (std::size_t c : coords) xbar[c] = rng.uniform(-1.0, 1.0);
}

std::vector<std::size_t> complement_of(std::size_t i, std::size_t d) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < d; ++k)
    if (k != i) out.push_back(k);
  return out;
}

double batch_se(const std::vector<double>& estimates) {
  return std::sqrt(sample_variance(estimates) / static_cast<double>(estimates.size()));
}

constexpr std::size_t kBatches = 10;

// Outer samples fix the `frozen` coordinates; inner samples redraw `varied`.
// Returns per-outer conditional means and variances (n_outer x T each).
struct NestedMoments {
  RowMatrix mean;
  RowMatrix var;
  RowMatrix pooled_sum;  // per outer: sum and sum of squares, for D
  RowMatrix pooled_sq;
};

NestedMoments nested_moments(const TrueCurves& curves, std::size_t d,
                             std::span<const std::size_t> frozen,
                             std::span<const std::size_t> varied, std::size_t n_outer,
                             std::size_t n_inner, std::uint64_t seed) {
  const auto T = static_cast<Eigen::Index>(curves.size());
  NestedMoments m;
  m.mean.resize(static_cast<Eigen::Index>(n_outer), T);
  m.var.resize(static_cast<Eigen::Index>(n_outer), T);
  parallel_for(n_outer, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k));
    std::vector<double> xbar(d, 0.0), psi(curves.size());
    fill_uniform(rng, xbar, frozen);
    std::vector<double> s(curves.size(), 0.0), s2(curves.size(), 0.0);
    for (std::size_t r = 0; r < n_inner; ++r) {
      fill_uniform(rng, xbar, varied);
      curves.curve(xbar, psi);
      for (std::size_t t = 0; t < psi.size(); ++t) {
        s[t] += psi[t];
        s2[t] += psi[t] * psi[t];
      }
    }
    const double n = static_cast<double>(n_inner);
    for (Eigen::Index t = 0; t < T; ++t) {
      const double mu = s[static_cast<std::size_t>(t)] / n;
      m.mean(static_cast<Eigen::Index>(k), t) = mu;
      m.var(static_cast<Eigen::Index>(k), t) =
          std::max(0.0, (s2[static_cast<std::size_t>(t)] - n * mu * mu) / (n - 1.0));
    }
  }, 8);
  return m;
}

struct Aggregates {
  double first = 0.0;
  double expected_var = 0.0;
  double total_var = 0.0;
};

// Over outer rows [begin, end): trapezoid-aggregated Var(E[.|frozen]) (bias
// corrected), E[Var(.|frozen)] and total variance.
Aggregates aggregate(const NestedMoments& m, std::size_t begin, std::size_t end,
                     std::size_t n_inner, std::span<const double> w) {
  Aggregates out;
  const double n = static_cast<double>(end - begin);
  for (std::size_t t = 0; t < w.size(); ++t) {
    const auto tc = static_cast<Eigen::Index>(t);
    double mu = 0.0, ev = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      mu += m.mean(static_cast<Eigen::Index>(k), tc);
      ev += m.var(static_cast<Eigen::Index>(k), tc);
    }
    mu /= n;
    ev /= n;
    double vm = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      const double e = m.mean(static_cast<Eigen::Index>(k), tc) - mu;
      vm += e * e;
    }
    vm /= n - 1.0;
    const double first = vm - ev / static_cast<double>(n_inner);
    out.first += w[t] * first;
    out.expected_var += w[t] * ev;
    out.total_var += w[t] * (first + ev);
  }
  return out;
}

void check_oracle_sizes(std::size_t n_outer, std::size_t n_inner) {
  if (n_outer < 100 || n_inner < 100) throw InputError("oracle needs n_outer, n_inner >= 100");
}

// Sum over sign patterns of the n-fold box-spline: CDF of sum_i U(-b_i, b_i).
double uniform_sum_cdf(std::span<const double> half_widths, double s) {
  const std::size_t n = half_widths.size();
  if (n == 0) return s >= 0.0 ? 1.0 : 0.0;
  const double total = std::accumulate(half_widths.begin(), half_widths.end(), 0.0);
  if (s <= -total) return 0.0;
  if (s >= total) return 1.0;
  double denom = std::tgamma(static_cast<double>(n) + 1.0);
  for (double b : half_widths) denom *= 2.0 * b;
  double acc = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double shift = s + total;
    int sign = 1;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1U) {
        shift -= 2.0 * half_widths[i];
        sign = -sign;
      }
    if (shift > 0.0) acc += sign * std::pow(shift, static_cast<double>(n));
  }
  return std::clamp(acc / denom, 0.0, 1.0);
}

}  // namespace

UniformLaw InputSpec::law() const {
  const double half = mean * cov * kSqrt3;
  return {mean - std::abs(half), mean + std::abs(half)};
}

InputDistributionSpec default_inputs() {
  return {{"E", 1.9236e11, 0.15},  {"Sy", 300.0, 0.15},   {"H", 4.27e8, 0.15},
          {"TPX29", 1.0e6, 0.15},  {"TPY29", 2.0e5, 0.15}, {"TPZ29", 1.0e6, 0.15}};
}

std::vector<UniformLaw> input_laws(const InputDistributionSpec& spec) {
  std::vector<UniformLaw> out;
  for (const auto& in : spec) {
    if (!std::isfinite(in.mean) || !std::isfinite(in.cov) || in.cov < 0.0)
      throw InputError("input '" + in.name + "' needs a finite mean and nonnegative CoV");
    out.push_back(in.law());
    out.back().validate();
  }
  return out;
}

RowMatrix sample_inputs(const InputDistributionSpec& spec, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw InputError("sample count must be positive");
  const auto laws = input_laws(spec);
  return sample_uniform(laws, count, seed);
}

ImLaw default_im_law() { return LogNormalIm{std::log(5.0), 0.6}; }

std::vector<double> sample_im(const ImLaw& law, std::size_t count, std::uint64_t seed) {
  std::vector<double> out(count);
  Rng rng(seed);
  if (const auto* ln = std::get_if<LogNormalIm>(&law)) {
    if (!std::isfinite(ln->mu) || !std::isfinite(ln->sigma) || ln->sigma < 0.0)
      throw InputError("log-normal IM law needs finite mu and sigma >= 0");
    for (auto& a : out) a = std::exp(ln->mu + ln->sigma * rng.normal());
  } else {
    const auto& u = std::get<UniformIm>(law);
    if (!(u.a0 > 0.0) || !std::isfinite(u.a1) || u.a1 < u.a0)
      throw InputError("uniform IM law needs 0 < a0 <= a1");
    for (auto& a : out) a = u.a0 == u.a1 ? u.a0 : rng.uniform(u.a0, u.a1);
  }
  return out;
}

void SyntheticModelSpec::validate() const {
  if (!std::isfinite(beta0) || !std::isfinite(beta_a) || !all_finite(betas))
    throw InputError("testbed coefficients must be finite");
  if (betas.size() != inputs.size())
    throw DimensionError("testbed needs one coefficient per input", inputs.size());
  if (interaction) {
    if (!std::isfinite(interaction->kappa) || !std::isfinite(interaction->lambda))
      throw InputError("interaction coefficients must be finite");
    if (inputs.size() < 2) throw DimensionError("interaction term needs two inputs", inputs.size());
  }
  if (noise) validate_nugget(*noise);
  if (!(threshold_c > 0.0) || !std::isfinite(threshold_c))
    throw InputError("threshold must be positive");
  (void)input_laws(inputs);
}

double SyntheticModelSpec::standardized(std::size_t i, double x) const {
  const double half = inputs[i].mean * inputs[i].cov * kSqrt3;
  return half == 0.0 ? 0.0 : (x - inputs[i].mean) / half;
}

double SyntheticModelSpec::g_standardized(double a, std::span<const double> xbar) const {
  const double log_a = std::log(a);
  double g = beta0 + beta_a * log_a;
  for (std::size_t i = 0; i < betas.size(); ++i) g += betas[i] * xbar[i];
  if (interaction) g += interaction->kappa * std::tanh(interaction->lambda * log_a) * xbar[0] * xbar[1];
  return g;
}

double SyntheticModelSpec::g(double a, std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("parameter vector has wrong dimension", x.size());
  std::vector<double> xbar(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xbar[i] = standardized(i, x[i]);
  return g_standardized(a, xbar);
}

double SyntheticModelSpec::noise_sd(double a) const {
  return noise ? fuq::noise_sd(*noise, a) : 0.0;
}

SyntheticModelSpec linear_testbed() {
  SyntheticModelSpec spec;
  spec.beta0 = -2.4;
  spec.beta_a = 1.5;
  spec.betas = {0.15, 0.0, 0.08, 0.10, 0.12, 0.0};
  spec.noise = Heteroskedastic{0.15, 0.02, 0.2};
  spec.threshold_c = 1.0;
  spec.inputs = default_inputs();
  return spec;
}

SyntheticModelSpec nonlinear_testbed() {
  SyntheticModelSpec spec = linear_testbed();
  spec.interaction = Interaction{};
  return spec;
}

double synthetic_edp(double a, std::span<const double> x, const SyntheticModelSpec& spec,
                     std::uint64_t seed) {
  const double g = spec.g(a, x);
  if (!spec.noise) return g;
  Rng rng(seed);
  return g + spec.noise_sd(a) * rng.normal();
}

double true_fragility(const SyntheticModelSpec& spec, double a, std::span<const double> x) {
  const double margin = spec.g(a, x) - std::log(spec.threshold_c);
  if (!spec.noise) return margin > 0.0 ? 1.0 : (margin < 0.0 ? 0.0 : 0.5);
  return normal_cdf(margin / spec.noise_sd(a));
}

Dataset generate_dataset(const SyntheticModelSpec& spec, const ImLaw& im_law, std::size_t n,
                         std::uint64_t seed) {
  spec.validate();
  const RowMatrix x = sample_inputs(spec.inputs, n, derive_seed(seed, "inputs"));
  const std::vector<double> a = sample_im(im_law, n, derive_seed(seed, "im"));
  const std::uint64_t noise_key = derive_seed(seed, "noise");
  Dataset data;
  data.points.reserve(n);
  data.responses.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    InputPoint p{a[i], std::vector<double>(x.row(static_cast<Eigen::Index>(i)).begin(),
                                           x.row(static_cast<Eigen::Index>(i)).end())};
    data.responses.push_back(synthetic_edp(a[i], p.params, spec, derive_seed(noise_key, i)));
    data.points.push_back(std::move(p));
  }
  return data;
}

AnalyticSurrogate::AnalyticSurrogate(SyntheticModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (!spec_.noise) throw InputError("analytic surrogate needs a noise model");
}

PredictionMoments AnalyticSurrogate::predict(const InputPoint& query) const {
  if (!(query.im > 0.0)) throw InputError("IM must be positive");
  const double phi = spec_.noise_sd(query.im);
  return {spec_.g(query.im, query.params), 0.0, phi};
}

void AnalyticSurrogate::sample_product(std::span<const double> grid, const RowMatrix& points,
                                       std::size_t draws, std::uint64_t /*seed*/,
                                       const SamplingOptions& options,
                                       const ProductDrawSink& sink) const {
  if (static_cast<std::size_t>(points.cols()) != spec_.dim())
    throw DimensionError("parameter vectors have wrong dimension",
                         static_cast<std::size_t>(points.cols()));
  if (draws == 0) throw InputError("draw count must be positive");
  const std::size_t m = static_cast<std::size_t>(points.rows());
  const std::size_t T = grid.size();
  const ProductPlan plan = plan_product(T, m, draws, 0, options);

  std::vector<double> log_a(T), tanh_term(T);
  for (std::size_t t = 0; t < T; ++t) {
    log_a[t] = std::log(grid[t]);
    tanh_term[t] = spec_.interaction
                       ? spec_.interaction->kappa * std::tanh(spec_.interaction->lambda * log_a[t])
                       : 0.0;
  }

  Eigen::MatrixXd values;
  for (std::size_t d0 = 0; d0 < draws; d0 += plan.draw_chunk) {
    const std::size_t pc = std::min(plan.draw_chunk, draws - d0);
    for (std::size_t j0 = 0; j0 < m; j0 += plan.block_points) {
      const std::size_t count = std::min(plan.block_points, m - j0);
      values.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(T * pc));
      parallel_for(count, [&](std::size_t r) {
        const auto row = points.row(static_cast<Eigen::Index>(j0 + r));
        double lin = spec_.beta0;
        std::vector<double> xbar(spec_.dim());
        for (std::size_t i = 0; i < spec_.dim(); ++i) {
          xbar[i] = spec_.standardized(i, row(static_cast<Eigen::Index>(i)));
          lin += spec_.betas[i] * xbar[i];
        }
        const double prod = spec_.interaction ? xbar[0] * xbar[1] : 0.0;
        for (std::size_t t = 0; t < T; ++t) {
          const double g = lin + spec_.beta_a * log_a[t] + tanh_term[t] * prod;
          for (std::size_t p = 0; p < pc; ++p)
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t * pc + p)) = g;
        }
      }, 64);
      sink(ProductDrawBlock{d0, pc, j0, count, T, &values});
    }
  }
}

FragilityCurve quadrature_mean_curve(const SyntheticModelSpec& spec, const ImGrid& grid) {
  spec.validate();
  using Rule = boost::math::quadrature::gauss<double, 10>;
  std::vector<double> nodes, weights;
  for (std::size_t k = 0; k < Rule::abscissa().size(); ++k) {
    const double x = Rule::abscissa()[k];
    const double w = Rule::weights()[k] * 0.5;  // uniform density on [-1, 1]
    nodes.push_back(x);
    weights.push_back(w);
    if (x != 0.0) {
      nodes.push_back(-x);
      weights.push_back(w);
    }
  }
  const auto active = active_inputs(spec);
  const std::size_t q = nodes.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < active.size(); ++i) total *= q;

  TrueCurves curves(spec, grid);
  const std::size_t T = grid.size();
  // Fixed partition of the tensor grid; the sum order does not depend on threads.
  const std::size_t parts = std::min<std::size_t>(64, total);
  std::vector<std::vector<double>> partial(parts, std::vector<double>(T, 0.0));
  const std::size_t per = (total + parts - 1) / parts;
  parallel_for(parts, [&](std::size_t w) {
    std::vector<double> xbar(spec.dim(), 0.0), psi(T);
    for (std::size_t flat = w * per; flat < std::min(total, (w + 1) * per); ++flat) {
      double weight = 1.0;
      std::size_t rest = flat;
      for (std::size_t c : active) {
        const std::size_t k = rest % q;
        rest /= q;
        xbar[c] = nodes[k];
        weight *= weights[k];
      }
      curves.curve(xbar, psi);
      for (std::size_t t = 0; t < T; ++t) partial[w][t] += weight * psi[t];
    }
  });
  std::vector<double> out(T, 0.0);
  for (const auto& p : partial)
    for (std::size_t t = 0; t < T; ++t) out[t] += p[t];
  return {grid, std::move(out)};
}

FragilityCurve analytic_quantile_curve(const SyntheticModelSpec& spec, const ImGrid& grid,
                                       double gamma) {
  spec.validate();
  if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("gamma must lie in (0, 1)");
  if (spec.interaction && spec.interaction->kappa != 0.0)
    throw InputError("analytic quantile needs a spec without the interaction term");
  if (!spec.noise) throw InputError("analytic quantile needs a noise model");
  std::vector<double> half;
  for (double b : spec.betas)
    if (b != 0.0) half.push_back(std::abs(b));
  const double reach = std::accumulate(half.begin(), half.end(), 0.0);
  double score = 0.0;
  if (!half.empty()) {
    auto f = [&](double s) { return uniform_sum_cdf(half, s) - gamma; };
    boost::math::tools::eps_tolerance<double> tol(50);
    std::uintmax_t iters = 200;
    const auto root = boost::math::tools::bisect(f, -reach, reach, tol, iters);
    score = 0.5 * (root.first + root.second);
  }
  std::vector<double> out = grid_map(grid, [&](double a) {
    return normal_cdf((spec.beta0 + spec.beta_a * std::log(a) + score -
                       std::log(spec.threshold_c)) /
                      spec.noise_sd(a));
  });
  return {grid, std::move(out)};
}

OracleIndices oracle_aggregated_sobol(const SyntheticModelSpec& spec, const ImGrid& grid,
                                      std::size_t n_outer, std::size_t n_inner,
                                      std::uint64_t seed) {
  spec.validate();
  check_oracle_sizes(n_outer, n_inner);
  const TrueCurves curves(spec, grid);
  const auto w = grid.trapezoid_weights();
  const std::size_t d = spec.dim();
  OracleIndices out;
  for (std::size_t i = 0; i < d; ++i) {
    const std::array<std::size_t, 1> just_i{i};
    const auto rest = complement_of(i, d);
    const auto fix_i = nested_moments(curves, d, just_i, rest, n_outer, n_inner,
                                      derive_seed(derive_seed(seed, "first"), i));
    const auto fix_rest = nested_moments(curves, d, rest, just_i, n_outer, n_inner,
                                         derive_seed(derive_seed(seed, "total"), i));
    auto indices = [&](std::size_t begin, std::size_t end) {
      // Each loop is normalized by its own total-variance split.
      const Aggregates a = aggregate(fix_i, begin, end, n_inner, w);
      const Aggregates b = aggregate(fix_rest, begin, end, n_inner, w);
      if (!(a.total_var > 0.0) || !(b.total_var > 0.0)) throw DegenerateError("oracle variance is zero");
      return std::pair{a.first / a.total_var, b.expected_var / b.total_var};
    };
    const auto [s, t] = indices(0, n_outer);
    std::vector<double> sb, tb;
    for (std::size_t k = 0; k < kBatches; ++k) {
      const auto [bs, bt] = indices(k * n_outer / kBatches, (k + 1) * n_outer / kBatches);
      sb.push_back(bs);
      tb.push_back(bt);
    }
    out.first.push_back(s);
    out.total.push_back(t);
    out.first_se.push_back(batch_se(sb));
    out.total_se.push_back(batch_se(tb));
  }
  return out;
}

namespace {

// Per outer group: mean kernel over within-group pairs, and over pairs with the
// next group (independent curves).
struct KernelMoments {
  std::vector<double> within;
  std::vector<double> across;
};

KernelMoments nested_kernel(const TrueCurves& curves, const CurveKernel& kernel, std::size_t d,
                            std::span<const std::size_t> frozen,
                            std::span<const std::size_t> varied, std::size_t n_outer,
                            std::size_t n_inner, std::uint64_t seed) {
  const std::size_t T = curves.size();
  auto group_curves = [&](std::size_t k, std::vector<double>& buf) {
    Rng rng(derive_seed(seed, k % n_outer));
    std::vector<double> xbar(d, 0.0);
    fill_uniform(rng, xbar, frozen);
    buf.resize(n_inner * T);
    for (std::size_t r = 0; r < n_inner; ++r) {
      fill_uniform(rng, xbar, varied);
      curves.curve(xbar, std::span<double>(buf.data() + r * T, T));
    }
  };
  KernelMoments out{std::vector<double>(n_outer), std::vector<double>(n_outer)};
  parallel_for(n_outer, [&](std::size_t k) {
    std::vector<double> mine, next;
    group_curves(k, mine);
    group_curves(k + 1, next);
    auto c = [&](const std::vector<double>& b, std::size_t r) {
      return std::span<const double>(b.data() + r * T, T);
    };
    double within = 0.0;
    for (std::size_t r = 0; r < n_inner; ++r)
      for (std::size_t s = r + 1; s < n_inner; ++s) within += kernel(c(mine, r), c(mine, s));
    double across = 0.0;
    for (std::size_t r = 0; r < n_inner; ++r) across += kernel(c(mine, r), c(next, r));
    const double n = static_cast<double>(n_inner);
    out.within[k] = within / (0.5 * n * (n - 1.0));
    out.across[k] = across / n;
  }, 4);
  return out;
}

double betak_ratio(const KernelMoments& m, std::size_t begin, std::size_t end) {
  double within = 0.0, across = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    within += m.within[k];
    across += m.across[k];
  }
  const double n = static_cast<double>(end - begin);
  within /= n;
  across /= n;
  if (!(1.0 - across > 1e-12)) throw DegenerateError("oracle kernel variance is zero");
  return (within - across) / (1.0 - across);
}

}  // namespace

OracleIndices oracle_betak(const SyntheticModelSpec& spec, const ImGrid& grid,
                           const CurveKernel& kernel, std::size_t n_outer, std::size_t n_inner,
                           std::uint64_t seed) {
  spec.validate();
  check_oracle_sizes(n_outer, n_inner);
  if (!(kernel.grid() == grid)) throw InputError("kernel grid differs from the oracle grid");
  const TrueCurves curves(spec, grid);
  const std::size_t d = spec.dim();
  OracleIndices out;
  for (std::size_t i = 0; i < d; ++i) {
    const std::array<std::size_t, 1> just_i{i};
    const auto rest = complement_of(i, d);
    const auto fix_i = nested_kernel(curves, kernel, d, just_i, rest, n_outer, n_inner,
                                     derive_seed(derive_seed(seed, "first"), i));
    const auto fix_rest = nested_kernel(curves, kernel, d, rest, just_i, n_outer, n_inner,
                                        derive_seed(derive_seed(seed, "total"), i));
    std::vector<double> sb, tb;
    for (std::size_t k = 0; k < kBatches; ++k) {
      const std::size_t b0 = k * n_outer / kBatches, b1 = (k + 1) * n_outer / kBatches;
      sb.push_back(betak_ratio(fix_i, b0, b1));
      tb.push_back(1.0 - betak_ratio(fix_rest, b0, b1));
    }
    out.first.push_back(betak_ratio(fix_i, 0, n_outer));
    out.total.push_back(1.0 - betak_ratio(fix_rest, 0, n_outer));
    out.first_se.push_back(batch_se(sb));
    out.total_se.push_back(batch_se(tb));
  }
  return out;
}

}  // namespace fuq
