#include "fuq/validate/acceptance.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>

#include <Eigen/LU>

#include "fuq/error.hpp"
#include "fuq/fragility.hpp"
#include "fuq/gp.hpp"
#include "fuq/gsa.hpp"
#include "fuq/parallel.hpp"
#include "fuq/rng.hpp"
#include "fuq/stats.hpp"
#include "fuq/testbed.hpp"

namespace fuq::validate {
namespace {

using json = nlohmann::json;

struct Scale {
  std::size_t n_fit;
  std::size_t n_small;
  std::size_t restarts;
  std::size_t identity_queries;
  std::size_t mean_samples;
  std::size_t mean_grid;
  std::size_t c4_points;
  std::size_t c4_reps;
  std::array<std::size_t, 3> c4_draws;
  std::size_t c5_samples;
  std::size_t c5_grid;
  std::size_t c5_draws;
  std::size_t gsa_grid;
  std::size_t c6_m;
  std::size_t oracle_n;
  std::size_t c7_m;
  std::size_t c8_m;
  std::size_t c8_draws;
  std::size_t c8_boot;
  std::size_t c9_m;
};

constexpr Scale kFull{500, 200, 10, 10000, 10000, 100, 20, 20, {100, 400, 1600}, 500, 50, 200,
                      30,  20000, 1000, 15000, 20000, 200, 150, 15000};
constexpr Scale kQuick{120, 60, 2, 1000, 1000, 20, 5, 4, {25, 50, 100}, 60, 15, 30,
                       10,  1500, 100, 1500, 1000, 10, 10, 1500};

constexpr double kImLow = 0.1;
constexpr double kImHigh = 25.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double closed_form_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Shared artifacts, built on first use.
class Context {
 public:
  Context(std::uint64_t seed, const Scale& scale, std::ostream* log)
      : seed_(seed), scale_(scale), log_(log), linear_(linear_testbed()) {}

  std::uint64_t seed(std::string_view tag) const { return derive_seed(seed_, tag); }
  const Scale& scale() const { return scale_; }
  const SyntheticModelSpec& linear() const { return linear_; }
  double threshold() const { return linear_.threshold_c; }
  std::vector<UniformLaw> laws() const { return input_laws(linear_.inputs); }

  void note(const std::string& msg) const {
    if (log_) *log_ << "  " << msg << std::endl;
  }

  const Dataset& data() {
    if (!data_) data_ = generate_dataset(linear_, default_im_law(), scale_.n_fit, seed("dataset"));
    return *data_;
  }

  const GpModel& gp() {
    if (!gp_) gp_ = fit(data(), "fit", "heteroskedastic fit, n = " + std::to_string(scale_.n_fit));
    return *gp_;
  }

  const GpModel& gp_small() {
    if (!gp_small_) {
      const Dataset& full = data();
      Dataset small;
      small.points.assign(full.points.begin(), full.points.begin() + static_cast<std::ptrdiff_t>(scale_.n_small));
      small.responses.assign(full.responses.begin(), full.responses.begin() + static_cast<std::ptrdiff_t>(scale_.n_small));
      gp_small_ = fit(small, "fit-small", "heteroskedastic fit, n = " + std::to_string(scale_.n_small));
    }
    return *gp_small_;
  }

  const PickFreezeDesign& design() {
    if (!design_) design_ = pickfreeze_design(scale_.c8_m, laws(), seed("design"));
    return *design_;
  }

  GpModel fit(const Dataset& d, std::string_view tag, const std::string& what) const {
    note(what);
    FitConfig cfg;
    cfg.seed = seed(tag);
    cfg.restarts = scale_.restarts;
    return fit_heteroskedastic(d, cfg);
  }

 private:
  std::uint64_t seed_;
  Scale scale_;
  std::ostream* log_;
  SyntheticModelSpec linear_;
  std::optional<Dataset> data_;
  std::optional<GpModel> gp_;
  std::optional<GpModel> gp_small_;
  std::optional<PickFreezeDesign> design_;
};

InputPoint random_point(Rng& rng, const std::vector<UniformLaw>& laws) {
  InputPoint p;
  p.im = rng.uniform(kImLow, kImHigh);
  for (const auto& law : laws) p.params.push_back(rng.uniform(law.lower, law.upper));
  return p;
}

// Linear score written out from the coefficients.
double reference_g(const SyntheticModelSpec& spec, double a, std::span<const double> x) {
  double g = spec.beta0 + spec.beta_a * std::log(a);
  std::vector<double> xbar(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& in = spec.inputs[i];
    xbar[i] = (x[i] - in.mean) / (in.mean * in.cov * std::sqrt(3.0));
    g += spec.betas[i] * xbar[i];
  }
  if (spec.interaction)
    g += spec.interaction->kappa * std::tanh(spec.interaction->lambda * std::log(a)) * xbar[0] * xbar[1];
  return g;
}

double reference_phi(const NuggetModel& nugget, double a) {
  if (const auto* h = std::get_if<Heteroskedastic>(&nugget))
    return std::max(h->theta0 + h->theta1 * a, h->theta2);
  return std::get<Homoskedastic>(nugget).sigma_eps;
}

json nugget_json(const NuggetModel& nugget) {
  if (const auto* h = std::get_if<Heteroskedastic>(&nugget))
    return {{"theta0", h->theta0}, {"theta1", h->theta1}, {"theta2", h->theta2}};
  return {{"sigma_eps", std::get<Homoskedastic>(nugget).sigma_eps}};
}

// ---------------------------------------------------------------------------

CriterionResult gp_correctness(Context& ctx) {
  CriterionResult r;
  Rng rng(ctx.seed("c1"));
  Dataset toy;
  for (int i = 0; i < 5; ++i) {
    InputPoint p{rng.uniform(0.5, 10.0), {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}};
    toy.responses.push_back(std::sin(p.im / 3.0) + p.params[0] - 0.5 * p.params[1] + 0.1 * rng.normal());
    toy.points.push_back(std::move(p));
  }
  const KernelParams kp{1.3, {4.0, 0.9, 1.7}};
  const Heteroskedastic noise{0.05, 0.02, 0.08};
  const double mu = 0.2;
  // Identity standardization: lengthscales act on raw coordinates.
  const GpModel gp(kp, noise, toy, Standardizer({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}), mu);

  auto kern = [&](const InputPoint& u, const InputPoint& v) {
    double k = kp.intensity * kp.intensity;
    for (std::size_t c = 0; c < 3; ++c) {
      const double h = std::abs(u.coord(c) - v.coord(c)) / kp.lengthscales[c];
      k *= (1.0 + std::sqrt(5.0) * h + 5.0 * h * h / 3.0) * std::exp(-std::sqrt(5.0) * h);
    }
    return k;
  };
  Eigen::MatrixXd big_k(5, 5);
  Eigen::VectorXd resid(5);
  for (int i = 0; i < 5; ++i) {
    resid[i] = toy.responses[static_cast<std::size_t>(i)] - mu;
    for (int j = 0; j < 5; ++j)
      big_k(i, j) = kern(toy.points[static_cast<std::size_t>(i)], toy.points[static_cast<std::size_t>(j)]);
    const double phi = reference_phi(noise, toy.points[static_cast<std::size_t>(i)].im);
    big_k(i, i) += phi * phi + gp.jitter();
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(big_k);
  const Eigen::VectorXd alpha = lu.solve(resid);
  const auto laws = std::vector<UniformLaw>{{-1.0, 1.0}, {-1.0, 1.0}};

  double mean_err = 0.0;
  double var_err = 0.0;
  for (int q = 0; q < 200; ++q) {
    const InputPoint x = random_point(rng, laws);
    Eigen::VectorXd kx(5);
    for (int i = 0; i < 5; ++i) kx[i] = kern(x, toy.points[static_cast<std::size_t>(i)]);
    const double m = mu + kx.dot(alpha);
    const double v = kern(x, x) - kx.dot(lu.solve(kx));
    const auto pm = gp.predict(x);
    mean_err = std::max(mean_err, std::abs(pm.mean - m));
    var_err = std::max(var_err, std::abs(pm.latent_sd * pm.latent_sd - v));
  }

  std::vector<InputPoint> queries;
  for (std::size_t q = 0; q < ctx.scale().identity_queries; ++q) queries.push_back(random_point(rng, laws));
  const auto pred = gp.predict(std::span<const InputPoint>(queries));
  double identity_err = 0.0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const double phi = reference_phi(noise, queries[q].im);
    const double rhs = pred[q].latent_sd * pred[q].latent_sd + phi * phi;
    const double lhs = pred[q].observation_sd * pred[q].observation_sd;
    identity_err = std::max(identity_err, std::abs(lhs - rhs) / rhs);
  }
  const double eps = std::numeric_limits<double>::epsilon();
  r.pass = mean_err <= 1e-10 && var_err <= 1e-10 && identity_err <= 4.0 * eps;
  r.summary = "max mean err " + num(mean_err) + ", max variance err " + num(var_err) +
              " (tol 1e-10); variance identity rel err " + num(identity_err) + " (tol 4 eps)";
  r.measured = {{"mean_error", mean_err},
                {"latent_variance_error", var_err},
                {"identity_relative_error", identity_err},
                {"identity_queries", queries.size()}};
  return r;
}

CriterionResult surrogate_quality(Context& ctx) {
  CriterionResult r;
  const Dataset& data = ctx.data();
  const GpModel& gp = ctx.gp();
  const double q2 = loo_q2(gp, data);
  const double ybar = mean(data.responses);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = data.responses[i] - reference_g(ctx.linear(), data.points[i].im, data.points[i].params);
    ss_res += e * e;
    ss_tot += (data.responses[i] - ybar) * (data.responses[i] - ybar);
  }
  const double ceiling = 1.0 - ss_res / ss_tot;
  const std::vector<double> alphas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const auto cov = coverage_curve(gp, data, alphas);
  double worst = 0.0;
  json rows = json::array();
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    worst = std::max(worst, std::abs(cov[k] - alphas[k]));
    rows.push_back({{"alpha", alphas[k]}, {"empirical", cov[k]}});
  }
  r.pass = q2 >= 0.85 && ceiling >= 0.9 && worst <= 0.07;
  r.summary = "LOO Q2 " + num(q2) + " (>= 0.85), oracle ceiling " + num(ceiling) +
              " (>= 0.9), worst coverage gap " + num(worst) + " (<= 0.07)";
  r.measured = {{"n", data.size()},
                {"q2", q2},
                {"oracle_q2_ceiling", ceiling},
                {"coverage", rows},
                {"max_coverage_gap", worst},
                {"noise", nugget_json(gp.nugget())},
                {"lengthscales", gp.kernel_params().lengthscales},
                {"intensity", gp.kernel_params().intensity}};
  return r;
}

CriterionResult fragility_convergence(Context& ctx) {
  CriterionResult r;
  const auto& spec = ctx.linear();
  const AnalyticSurrogate truth(spec);
  const double c = ctx.threshold();
  Rng rng(ctx.seed("c3"));
  const auto laws = ctx.laws();
  double psi_err = 0.0;
  for (int q = 0; q < 1000; ++q) {
    const InputPoint x = random_point(rng, laws);
    const double expected =
        closed_form_cdf((reference_g(spec, x.im, x.params) - std::log(c)) / reference_phi(*spec.noise, x.im));
    psi_err = std::max(psi_err, std::abs(psi1(truth, x.im, x.params, c) - expected));
  }

  const ImGrid grid = ImGrid::regular(kImLow, kImHigh, ctx.scale().mean_grid);
  const RowMatrix xs = sample_inputs(spec.inputs, ctx.scale().mean_samples, ctx.seed("c3-design"));
  const GpModel& gp = ctx.gp();
  const FragilityCurve fitted = mean_curve(psi1_curves(gp, grid, xs, c));
  const FragilityCurve exact = quadrature_mean_curve(spec, grid);
  double sup = 0.0;
  double where = grid[0];
  for (std::size_t t = 0; t < grid.size(); ++t) {
    const double e = std::abs(fitted.probabilities[t] - exact.probabilities[t]);
    if (e > sup) {
      sup = e;
      where = grid[t];
    }
  }
  r.pass = psi_err <= 1e-12 && sup <= 0.05;
  r.summary = "injected-truth psi1 err " + num(psi_err) + " (<= 1e-12); fitted mean-curve sup err " +
              num(sup) + " at a = " + num(where) + " (<= 0.05)";
  r.measured = {{"psi1_max_error", psi_err},
                {"mean_curve_sup_error", sup},
                {"sup_error_at", where},
                {"x_samples", xs.rows()},
                {"grid_size", grid.size()}};
  return r;
}

CriterionResult posterior_consistency(Context& ctx) {
  CriterionResult r;
  const GpModel& gp = ctx.gp();
  const Scale& s = ctx.scale();
  const double lc = std::log(ctx.threshold());
  Rng rng(ctx.seed("c4-points"));
  const auto laws = ctx.laws();
  std::vector<InputPoint> pts;
  std::vector<double> plug;
  for (std::size_t i = 0; i < s.c4_points; ++i) {
    pts.push_back(random_point(rng, laws));
    plug.push_back(psi1(gp, pts.back().im, pts.back().params, ctx.threshold()));
  }
  // err[k][r][i]
  std::vector<std::vector<std::vector<double>>> err(3, std::vector<std::vector<double>>(s.c4_reps));
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t draws = s.c4_draws[k];
    for (std::size_t rep = 0; rep < s.c4_reps; ++rep) {
      const Eigen::MatrixXd g =
          gp.sample_posterior(pts, draws, derive_seed(ctx.seed("c4"), rep, draws));
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double phi = gp.noise_sd(pts[i].im);
        double acc = 0.0;
        for (std::size_t p = 0; p < draws; ++p)
          acc += normal_cdf((g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) - lc) / phi);
        err[k][rep].push_back(acc / static_cast<double>(draws) - plug[i]);
      }
    }
  }
  double worst = 0.0;
  for (double e : err[2][0]) worst = std::max(worst, std::abs(e));
  std::size_t monotone = 0;
  json rms_rows = json::array();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::array<double, 3> rms{};
    for (std::size_t k = 0; k < 3; ++k) {
      double ss = 0.0;
      for (std::size_t rep = 0; rep < s.c4_reps; ++rep) ss += err[k][rep][i] * err[k][rep][i];
      rms[k] = std::sqrt(ss / static_cast<double>(s.c4_reps));
    }
    if (rms[0] > rms[1] && rms[1] > rms[2]) ++monotone;
    rms_rows.push_back(rms);
  }
  const auto needed = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(pts.size())));
  r.pass = worst <= 0.02 && monotone >= needed;
  r.summary = "max |mean(Psi2) - Psi1| at P = " + std::to_string(s.c4_draws[2]) + ": " + num(worst) +
              " (<= 0.02); RMS error decreasing in " + std::to_string(monotone) + "/" +
              std::to_string(pts.size()) + " points (>= " + std::to_string(needed) + ")";
  r.measured = {{"max_abs_error", worst},
                {"monotone_points", monotone},
                {"points", pts.size()},
                {"replicates", s.c4_reps},
                {"draws", s.c4_draws},
                {"rms_error", rms_rows}};
  return r;
}

CriterionResult algorithm_bands(Context& ctx) {
  CriterionResult r;
  const Scale& s = ctx.scale();
  const double c = ctx.threshold();
  const ImGrid grid = ImGrid::regular(kImLow, kImHigh, s.c5_grid);
  const RowMatrix xs = sample_inputs(ctx.linear().inputs, s.c5_samples, ctx.seed("c5-design"));
  struct Bands {
    FragilityCurve plug_lo, plug_hi, bi_lo, bi_hi;
  };
  auto bands = [&](const GpModel& gp) {
    const CurveEnsemble plug = psi1_curves(gp, grid, xs, c);
    const CurveEnsemble ens = psi2_samples(gp, grid, xs, c, s.c5_draws, ctx.seed("c5-posterior"));
    return Bands{quantile_curve(plug, 0.1), quantile_curve(plug, 0.9), bilevel_quantile_curve(ens, 0.1, 0.1),
                 bilevel_quantile_curve(ens, 0.9, 0.9)};
  };
  const Bands small = bands(ctx.gp_small());
  const Bands large = bands(ctx.gp());
  constexpr double kSlack = 1e-9;
  std::size_t contained = 0;
  std::vector<double> w_small;
  std::vector<double> w_large;
  for (std::size_t t = 0; t < grid.size(); ++t) {
    if (small.bi_lo.probabilities[t] <= small.plug_lo.probabilities[t] + kSlack &&
        small.bi_hi.probabilities[t] >= small.plug_hi.probabilities[t] - kSlack)
      ++contained;
    w_small.push_back(small.bi_hi.probabilities[t] - small.bi_lo.probabilities[t]);
    w_large.push_back(large.bi_hi.probabilities[t] - large.bi_lo.probabilities[t]);
  }
  const double frac = static_cast<double>(contained) / static_cast<double>(grid.size());
  const double med_small = median(w_small);
  const double med_large = median(w_large);
  r.pass = frac >= 0.9 && med_large < med_small;
  r.summary = "bi-level band contains plug-in band on " + num(100.0 * frac) + "% of grid (>= 90%); median width " +
              num(med_small) + " at n = " + std::to_string(s.n_small) + " -> " + num(med_large) + " at n = " +
              std::to_string(s.n_fit);
  r.measured = {{"containment_fraction", frac},
                {"median_width_small", med_small},
                {"median_width_large", med_large},
                {"x_samples", s.c5_samples},
                {"draws", s.c5_draws},
                {"grid_size", grid.size()}};
  return r;
}

CriterionResult sobol_oracle(Context& ctx) {
  CriterionResult r;
  const Scale& s = ctx.scale();
  const auto& spec = ctx.linear();
  const double c = ctx.threshold();
  const ImGrid grid = ImGrid::regular(kImLow, kImHigh, s.gsa_grid);
  const PickFreezeDesign design = pickfreeze_design(s.c6_m, ctx.laws(), ctx.seed("c6-design"));
  const GpModel& gp = ctx.gp();
  ctx.note("plug-in pick-freeze, m = " + std::to_string(s.c6_m));
  const IndexPair fitted = aggregated_sobol(design_curves_psi1(gp, design, grid, c));
  const IndexPair truth = aggregated_sobol(design_curves_psi1(AnalyticSurrogate(spec), design, grid, c));
  ctx.note("double-loop oracle, " + std::to_string(s.oracle_n) + " x " + std::to_string(s.oracle_n));
  const OracleIndices oracle = oracle_aggregated_sobol(spec, grid, s.oracle_n, s.oracle_n, ctx.seed("oracle"));
  double worst = 0.0;
  double truth_worst = 0.0;
  double sum_s = 0.0;
  json rows = json::array();
  for (std::size_t i = 0; i < spec.dim(); ++i) {
    const double es = fitted.first.point_estimate[i] - oracle.first[i];
    const double et = fitted.total.point_estimate[i] - oracle.total[i];
    worst = std::max({worst, std::abs(es), std::abs(et)});
    truth_worst = std::max({truth_worst, std::abs(truth.first.point_estimate[i] - oracle.first[i]),
                            std::abs(truth.total.point_estimate[i] - oracle.total[i])});
    sum_s += fitted.first.point_estimate[i];
    rows.push_back({{"input", spec.inputs[i].name},
                    {"first", fitted.first.point_estimate[i]},
                    {"total", fitted.total.point_estimate[i]},
                    {"oracle_first", oracle.first[i]},
                    {"oracle_first_se", oracle.first_se[i]},
                    {"oracle_total", oracle.total[i]},
                    {"oracle_total_se", oracle.total_se[i]},
                    {"truth_first", truth.first.point_estimate[i]},
                    {"truth_total", truth.total.point_estimate[i]}});
  }
  r.pass = worst <= 0.03 && sum_s >= 0.95 && sum_s <= 1.05;
  r.summary = "max |surrogate - oracle| over S and T " + num(worst) + " (<= 0.03); sum S " + num(sum_s) +
              " (in [0.95, 1.05]); injected truth, not gated: " + num(truth_worst);
  r.measured = {{"max_abs_error", worst},
                {"truth_max_abs_error", truth_worst},
                {"sum_first", sum_s},
                {"m", s.c6_m},
                {"indices", rows}};
  return r;
}

CriterionResult interaction_contrast(Context& ctx) {
  CriterionResult r;
  const Scale& s = ctx.scale();
  const SyntheticModelSpec spec = nonlinear_testbed();
  const double c = spec.threshold_c;
  const ImGrid grid = ImGrid::regular(kImLow, kImHigh, s.gsa_grid);
  const PickFreezeDesign design = pickfreeze_design(s.c7_m, input_laws(spec.inputs), ctx.seed("c7-design"));
  const Dataset data = generate_dataset(spec, default_im_law(), s.n_fit, ctx.seed("dataset-nonlinear"));
  const GpModel gp = ctx.fit(data, "fit-nonlinear", "heteroskedastic fit on the interaction spec");
  const AnalyticSurrogate truth(spec);
  // The interaction couples the first two inputs.
  const std::array<std::size_t, 2> interacting{0, 1};

  bool pass = true;
  json sources = json::object();
  std::string summary;
  for (const auto& [label, model] :
       std::array<std::pair<const char*, const FragilitySurrogate*>, 2>{{{"truth", &truth}, {"surrogate", &gp}}}) {
    ctx.note(std::string("pick-freeze on ") + label);
    const DesignCurves curves = design_curves_psi1(*model, design, grid, c);
    const IndexPair sob = aggregated_sobol(curves);
    const double bw = bandwidth_heuristic(curves.base(), grid);
    const IndexPair bk = betak(curves, CurveKernel(bw, grid));
    json rows = json::array();
    for (std::size_t i = 0; i < spec.dim(); ++i) {
      rows.push_back({{"input", spec.inputs[i].name},
                      {"sobol_first", sob.first.point_estimate[i]},
                      {"sobol_total", sob.total.point_estimate[i]},
                      {"betak_first", bk.first.point_estimate[i]},
                      {"betak_total", bk.total.point_estimate[i]}});
    }
    summary += std::string(summary.empty() ? "" : "; ") + label + ":";
    for (std::size_t i : interacting) {
      const double gap_b = bk.total.point_estimate[i] - bk.first.point_estimate[i];
      const double gap_s = std::abs(sob.total.point_estimate[i] - sob.first.point_estimate[i]);
      pass = pass && gap_b > 0.05 && gap_s < gap_b;
      summary += " x" + std::to_string(i + 1) + " betak gap " + num(gap_b) + " vs sobol gap " + num(gap_s);
    }
    sources[label] = {{"bandwidth", bw}, {"indices", rows}};
  }
  r.pass = pass;
  r.summary = summary + " (betak gap > 0.05 and above the sobol gap)";
  r.measured = {{"m", s.c7_m}, {"n", data.size()}, {"results", sources}};
  return r;
}

CriterionResult variance_split(Context& ctx) {
  CriterionResult r;
  const Scale& s = ctx.scale();
  const auto& spec = ctx.linear();
  const double c = ctx.threshold();
  const ImGrid grid = ImGrid::regular(kImLow, kImHigh, s.gsa_grid);
  const GpModel& gp = ctx.gp();
  PosteriorGsaConfig cfg;
  cfg.draws = s.c8_draws;
  cfg.bootstrap = s.c8_boot;
  cfg.seed = ctx.seed("gsa");
  ctx.note("posterior pick-freeze, m = " + std::to_string(s.c8_m));
  const PosteriorGsaResult full = posterior_sensitivity(gp, ctx.design(), grid, c, cfg);
  const std::size_t m_quarter = s.c8_m / 4;
  ctx.note("posterior pick-freeze, m = " + std::to_string(m_quarter));
  const PickFreezeDesign quarter_design = pickfreeze_design(m_quarter, ctx.laws(), ctx.seed("design-quarter"));
  const PosteriorGsaResult quarter = posterior_sensitivity(gp, quarter_design, grid, c, cfg);

  const auto& sf = full.sobol_first.point_estimate;
  const std::size_t top = static_cast<std::size_t>(std::max_element(sf.begin(), sf.end()) - sf.begin());
  bool dominant_ok = true;
  std::size_t dominant = 0;
  json rows = json::array();
  for (std::size_t i = 0; i < spec.dim(); ++i) {
    json row{{"input", spec.inputs[i].name}};
    for (const auto* res : {&full.sobol_first, &full.sobol_total, &full.betak_first, &full.betak_total}) {
      row[std::string(to_string(res->kind))] = {{"estimate", res->point_estimate[i]},
                                                {"sigma_gp", res->sigma_gp[i]},
                                                {"sigma_mc", res->sigma_mc[i]}};
    }
    if (sf[i] >= 0.1) {
      ++dominant;
      for (const auto* res : {&full.sobol_first, &full.sobol_total})
        dominant_ok = dominant_ok && res->sigma_mc[i] < res->sigma_gp[i];
    }
    rows.push_back(row);
  }
  const double top_ratio_first = full.sobol_first.sigma_gp[top] / full.sobol_first.sigma_mc[top];
  const double top_ratio_total = full.sobol_total.sigma_gp[top] / full.sobol_total.sigma_mc[top];
  auto shrink = [&](const SensitivityResult& a, const SensitivityResult& b) {
    return (a.sigma_mc[top] * a.sigma_mc[top]) / (b.sigma_mc[top] * b.sigma_mc[top]);
  };
  const double shrink_first = shrink(quarter.sobol_first, full.sobol_first);
  const double shrink_total = shrink(quarter.sobol_total, full.sobol_total);
  auto in_band = [](double v) { return v >= 2.5 && v <= 6.0; };
  r.pass = dominant > 0 && dominant_ok && top_ratio_first >= 3.0 && top_ratio_total >= 3.0 &&
           in_band(shrink_first) && in_band(shrink_total);
  r.summary = "sigma_MC < sigma_GP on " + std::string(dominant_ok ? "all " : "not all ") + std::to_string(dominant) +
              " dominant inputs; top input " + spec.inputs[top].name + " sigma_GP/sigma_MC " + num(top_ratio_first) +
              " (S), " + num(top_ratio_total) + " (T) (>= 3); sigma_MC^2 shrink x" + num(shrink_first) + " (S), x" +
              num(shrink_total) + " (T) for 4x m (in [2.5, 6])";
  r.measured = {{"m", s.c8_m},
                {"m_quarter", m_quarter},
                {"draws", s.c8_draws},
                {"bootstrap", s.c8_boot},
                {"top_input", spec.inputs[top].name},
                {"dominant_inputs", dominant},
                {"top_ratio_gp_mc_first", top_ratio_first},
                {"top_ratio_gp_mc_total", top_ratio_total},
                {"mc_variance_shrink_first", shrink_first},
                {"mc_variance_shrink_total", shrink_total},
                {"indices", rows}};
  return r;
}

CriterionResult betak_structure(Context& ctx) {
  CriterionResult r;
  const Scale& s = ctx.scale();
  const auto& spec = ctx.linear();
  const ImGrid grid = ImGrid::regular(kImLow, kImHigh, s.gsa_grid);
  const PickFreezeDesign design = pickfreeze_design(s.c9_m, ctx.laws(), ctx.seed("c9-design"));
  const DesignCurves curves = design_curves_psi1(AnalyticSurrogate(spec), design, grid, spec.threshold_c);
  const CurveKernel kernel(bandwidth_heuristic(curves.base(), grid), grid);
  const IndexPair bk = betak(curves, kernel);
  double dummy_worst = 0.0;
  std::size_t dummies = 0;
  for (std::size_t i = 0; i < spec.dim(); ++i) {
    if (spec.betas[i] != 0.0) continue;
    ++dummies;
    dummy_worst = std::max({dummy_worst, std::abs(bk.first.point_estimate[i]), std::abs(bk.total.point_estimate[i])});
  }

  SyntheticModelSpec single = spec;
  std::fill(single.betas.begin() + 1, single.betas.end(), 0.0);
  const DesignCurves single_curves = design_curves_psi1(AnalyticSurrogate(single), design, grid, single.threshold_c);
  const IndexPair bs = betak(single_curves, CurveKernel(bandwidth_heuristic(single_curves.base(), grid), grid));
  const double single_err =
      std::max(std::abs(bs.first.point_estimate[0] - 1.0), std::abs(bs.total.point_estimate[0] - 1.0));

  ctx.note("MMD U-statistic, m = " + std::to_string(s.c9_m));
  const double mmd = mmd2(curves.base(), curves.copy(), kernel);
  const double mmd_tol = 2.0 / std::sqrt(static_cast<double>(s.c9_m));
  r.pass = dummies > 0 && dummy_worst <= 0.03 && single_err <= 0.05 && std::abs(mmd) < mmd_tol;
  r.summary = "dummy max |index| " + num(dummy_worst) + " (<= 0.03) over " + std::to_string(dummies) +
              " inputs; single-input |index - 1| " + num(single_err) + " (<= 0.05); MMD(P,P) " + num(mmd) +
              " (|.| < " + num(mmd_tol) + ")";
  r.measured = {{"m", s.c9_m},
                {"dummy_max_abs", dummy_worst},
                {"single_input_error", single_err},
                {"mmd2", mmd},
                {"mmd_tolerance", mmd_tol},
                {"bandwidth", kernel.bandwidth()}};
  return r;
}

struct Criterion {
  int id;
  const char* name;
  double budget;
  std::function<CriterionResult(Context&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {1, "gp-correctness", 1.0, gp_correctness},
      {2, "surrogate-quality", 120.0, surrogate_quality},
      {3, "fragility-convergence", 120.0, fragility_convergence},
      {4, "posterior-consistency", 60.0, posterior_consistency},
      {5, "band-containment", 300.0, algorithm_bands},
      {6, "sobol-oracle", 300.0, sobol_oracle},
      {7, "interaction-contrast", 600.0, interaction_contrast},
      {8, "variance-split", 1200.0, variance_split},
      {9, "betak-structure", 120.0, betak_structure},
  };
  return list;
}

CriterionResult determinism(const AcceptanceOptions& options) {
  CriterionResult r;
  AcceptanceOptions inner;
  inner.seed = options.seed;
  inner.quick = true;
  for (int id = 1; id < kCriterionCount; ++id) inner.criteria.insert(id);
  std::vector<std::string> dumps;
  for (std::size_t threads : {1u, 4u, 4u}) {
    if (options.log) *options.log << "  reduced suite, " << threads << " thread(s)" << std::endl;
    set_thread_count(threads);
    try {
      dumps.push_back(run_acceptance(inner).to_json().dump(2));
    } catch (...) {
      set_thread_count(0);
      throw;
    }
  }
  set_thread_count(0);
  const bool same_threads = dumps[1] == dumps[2];
  const bool across_threads = dumps[0] == dumps[1];
  r.pass = same_threads && across_threads;
  r.summary = std::string("rerun ") + (same_threads ? "identical" : "differs") + ", 1 vs 4 threads " +
              (across_threads ? "identical" : "differs") + " (" + std::to_string(dumps[0].size()) + " bytes)";
  r.measured = {{"rerun_identical", same_threads},
                {"thread_invariant", across_threads},
                {"report_bytes", dumps[0].size()}};
  return r;
}

}  // namespace

bool AcceptanceReport::all_pass() const {
  return std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return r.pass; });
}

nlohmann::json AcceptanceReport::to_json() const {
  json doc;
  doc["seed"] = seed;
  doc["quick"] = quick;
  json rows = json::array();
  std::size_t passed = 0;
  for (const auto& r : results) {
    rows.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"summary", r.summary}, {"measured", r.measured}});
    if (r.pass) ++passed;
  }
  doc["criteria"] = rows;
  doc["passed"] = passed;
  doc["total"] = results.size();
  return doc;
}

AcceptanceReport run_acceptance(const AcceptanceOptions& options) {
  for (int id : options.criteria)
    if (id < 1 || id > kCriterionCount) throw InputError("unknown acceptance criterion " + std::to_string(id));
  auto wanted = [&](int id) { return options.criteria.empty() || options.criteria.count(id) > 0; };
  AcceptanceReport report;
  report.seed = options.seed;
  report.quick = options.quick;
  Context ctx(options.seed, options.quick ? kQuick : kFull, options.log);
  using clock = std::chrono::steady_clock;
  double suite_seconds = 0.0;
  std::size_t suite_count = 0;
  for (const auto& c : criteria()) {
    if (!wanted(c.id)) continue;
    if (options.log) *options.log << "criterion " << c.id << " " << c.name << std::endl;
    const auto t0 = clock::now();
    CriterionResult r = c.run(ctx);
    r.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    r.id = c.id;
    r.name = c.name;
    r.budget_seconds = c.budget;
    suite_seconds += r.seconds;
    ++suite_count;
    report.results.push_back(std::move(r));
    if (options.log) *options.log << format_line(report.results.back()) << std::endl;
  }
  if (wanted(kCriterionCount)) {
    if (options.log) *options.log << "criterion 10 determinism" << std::endl;
    const auto t0 = clock::now();
    CriterionResult r = determinism(options);
    r.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    r.id = kCriterionCount;
    r.name = "determinism";
    // Compared against the rest of the suite only when it ran in full here.
    r.budget_seconds = suite_seconds;
    r.budget_applies = suite_count == static_cast<std::size_t>(kCriterionCount - 1) && !options.quick;
    report.results.push_back(std::move(r));
    if (options.log) *options.log << format_line(report.results.back()) << std::endl;
  }
  return report;
}

std::string format_line(const CriterionResult& r) {
  const bool ok = r.pass && r.within_budget();
  std::string line = "criterion " + std::to_string(r.id) + " " + r.name + ": " + (ok ? "PASS" : "FAIL") + " " +
                     r.summary + " (" + num(r.seconds) + " s";
  if (r.budget_applies) line += ", budget " + num(r.budget_seconds) + " s" + (r.within_budget() ? "" : " EXCEEDED");
  return line + ")";
}

std::filesystem::path write_report(const AcceptanceReport& report, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  const auto path = directory / "report.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << report.to_json().dump(2) << '\n';
  return path;
}

}  // namespace fuq::validate
