#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "fuq/error.hpp"
#include "fuq/fragility.hpp"
#include "fuq/gp.hpp"
#include "fuq/parallel.hpp"
#include "fuq/stats.hpp"
#include "fuq/testbed.hpp"

namespace {

using fuq::CurveEnsemble;
using fuq::ImGrid;
using fuq::RowMatrix;

double phi_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Constant predictive moments everywhere.
class FixedSurrogate final : public fuq::FragilitySurrogate {
 public:
  FixedSurrogate(double mean, double latent, double noise) : m_(mean), s_(latent), e_(noise) {}
  std::size_t param_dim() const override { return 1; }
  fuq::PredictionMoments predict(const fuq::InputPoint&) const override {
    return {m_, s_, std::sqrt(s_ * s_ + e_ * e_)};
  }
  double noise_sd(double) const override { return e_; }
  void sample_product(std::span<const double>, const RowMatrix&, std::size_t, std::uint64_t,
                      const fuq::SamplingOptions&, const fuq::ProductDrawSink&) const override {
    throw std::logic_error("not used");
  }

 private:
  double m_, s_, e_;
};

// A GP on testbed data with hand-set hyperparameters; enough latent variance for
// the posterior draws to matter.
const fuq::GpModel& testbed_gp() {
  static const fuq::GpModel model = [] {
    const auto spec = fuq::linear_testbed();
    const auto data = fuq::generate_dataset(spec, fuq::default_im_law(), 60, 42);
    std::vector<double> ls{0.4, 1.0, 2.0, 1.0, 1.0, 1.0, 2.0};
    return fuq::GpModel({0.8, ls}, fuq::Heteroskedastic{0.15, 0.02, 0.2}, data,
                        fuq::Standardizer::from_points(data.points), fuq::mean(data.responses));
  }();
  return model;
}

// Many observations and long lengthscales: latent sd small next to the noise.
const fuq::GpModel& informed_gp() {
  static const fuq::GpModel model = [] {
    const auto spec = fuq::linear_testbed();
    const auto data = fuq::generate_dataset(spec, fuq::default_im_law(), 400, 43);
    std::vector<double> ls{0.6, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0};
    return fuq::GpModel({0.8, ls}, fuq::Heteroskedastic{0.15, 0.02, 0.2}, data,
                        fuq::Standardizer::from_points(data.points), fuq::mean(data.responses));
  }();
  return model;
}

CurveEnsemble constant_members(const std::vector<double>& levels) {
  CurveEnsemble e(ImGrid::regular(1.0, 2.0, 3), 1, levels.size());
  for (std::size_t j = 0; j < levels.size(); ++j)
    for (std::size_t t = 0; t < 3; ++t) e(0, j, t) = levels[j];
  return e;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(ImGrid, RejectsInvalidGrids) {
  EXPECT_THROW(ImGrid({1.0}), fuq::InputError);
  EXPECT_THROW(ImGrid({1.0, 1.0}), fuq::InputError);
  EXPECT_THROW(ImGrid({0.0, 1.0}), fuq::InputError);
  EXPECT_THROW(ImGrid::regular(2.0, 1.0, 5), fuq::InputError);
  const auto g = ImGrid::regular(0.5, 2.5, 5);
  EXPECT_EQ(g.lower(), 0.5);
  EXPECT_EQ(g.upper(), 2.5);
  double s = 0.0;
  for (double w : g.trapezoid_weights()) s += w;
  EXPECT_DOUBLE_EQ(s, 2.0);
}

TEST(Psi1, MedianCrossingAndNormalQuantile) {
  const std::vector<double> x{0.0};
  EXPECT_DOUBLE_EQ(fuq::psi1(FixedSurrogate(std::log(3.0), 0.2, 0.3), 1.0, x, 3.0), 0.5);
  const double sd = std::sqrt(0.2 * 0.2 + 0.3 * 0.3);
  EXPECT_NEAR(fuq::psi1(FixedSurrogate(std::log(3.0) + 1.6449 * sd, 0.2, 0.3), 1.0, x, 3.0), 0.95,
              1e-4);
  EXPECT_THROW(fuq::psi1(FixedSurrogate(0.0, 0.1, 0.1), 1.0, x, 0.0), fuq::InputError);
}

TEST(Psi1, ExactSurrogateMatchesClosedForm) {
  const auto spec = fuq::linear_testbed();
  const fuq::AnalyticSurrogate exact(spec);
  const auto xs = fuq::sample_inputs(spec.inputs, 200, 3);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> ua(0.5, 30.0);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < xs.rows(); ++j) {
    const double a = ua(gen);
    double g = -2.4 + 1.5 * std::log(a);
    const double beta[] = {0.15, 0.0, 0.08, 0.10, 0.12, 0.0};
    for (std::size_t i = 0; i < 6; ++i) {
      const auto& in = spec.inputs[i];
      g += beta[i] * (xs(j, static_cast<Eigen::Index>(i)) - in.mean) / (in.mean * in.cov * std::sqrt(3.0));
    }
    const double phi = std::max(0.15 + 0.02 * a, 0.2);
    const double truth = phi_cdf((g - std::log(spec.threshold_c)) / phi);
    const std::vector<double> x(xs.row(j).begin(), xs.row(j).end());
    worst = std::max(worst, std::abs(fuq::psi1(exact, a, x, spec.threshold_c) - truth));
  }
  EXPECT_LT(worst, 0.02);
}

TEST(Psi1, MonotoneInThreshold) {
  const auto& gp = testbed_gp();
  const auto grid = ImGrid::regular(1.0, 20.0, 15);
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), 30, 4);
  const auto lo = fuq::psi1_curves(gp, grid, xs, 0.8);
  const auto hi = fuq::psi1_curves(gp, grid, xs, 1.2);
  for (std::size_t j = 0; j < 30; ++j)
    for (std::size_t t = 0; t < grid.size(); ++t) {
      EXPECT_GE(lo(0, j, t), hi(0, j, t));
      EXPECT_GE(hi(0, j, t), 0.0);
      EXPECT_LE(lo(0, j, t), 1.0);
    }
  // psi1_curves agrees with pointwise psi1.
  const std::vector<double> x0(xs.row(7).begin(), xs.row(7).end());
  EXPECT_NEAR(lo(0, 7, 4), fuq::psi1(gp, grid[4], x0, 0.8), 1e-12);
}

TEST(Psi2, MeanOverDrawsRecoversPsi1) {
  const auto& gp = testbed_gp();
  const auto grid = ImGrid::regular(2.0, 12.0, 6);
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), 5, 5);
  const auto plug = fuq::psi1_curves(gp, grid, xs, 1.0);
  const auto ens = fuq::psi2_samples(gp, grid, xs, 1.0, 4000, 9);
  for (std::size_t j = 0; j < 5; ++j)
    for (std::size_t t = 0; t < grid.size(); ++t) {
      double s = 0.0;
      for (std::size_t p = 0; p < 4000; ++p) {
        const double v = ens(p, j, t);
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        s += v;
      }
      EXPECT_NEAR(s / 4000.0, plug(0, j, t), 0.02);
    }
}

TEST(Psi2, ErrorShrinksWithDraws) {
  const auto& gp = testbed_gp();
  const auto grid = ImGrid::regular(2.0, 12.0, 8);
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), 40, 6);
  const auto plug = fuq::psi1_curves(gp, grid, xs, 1.0);
  std::vector<double> rmse;
  for (std::size_t P : {100u, 400u, 1600u}) {
    const auto ens = fuq::psi2_samples(gp, grid, xs, 1.0, P, 10);
    double sq = 0.0;
    for (std::size_t j = 0; j < 40; ++j)
      for (std::size_t t = 0; t < grid.size(); ++t) {
        double s = 0.0;
        for (std::size_t p = 0; p < P; ++p) s += ens(p, j, t);
        sq += std::pow(s / P - plug(0, j, t), 2);
      }
    rmse.push_back(std::sqrt(sq / (40.0 * grid.size())));
  }
  EXPECT_GT(rmse[0], rmse[1]);
  EXPECT_GT(rmse[1], rmse[2]);
}

TEST(Psi2, ZeroLatentVarianceGivesIdenticalDraws) {
  const fuq::AnalyticSurrogate exact(fuq::linear_testbed());
  const auto grid = ImGrid::regular(1.0, 10.0, 5);
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), 4, 7);
  const auto ens = fuq::psi2_samples(exact, grid, xs, 1.0, 20, 3);
  for (std::size_t p = 1; p < 20; ++p)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(ens(p, j, t), ens(0, j, t));
}

TEST(Psi2, BandsAgreeWithIndependentJointSampler) {
  const auto& gp = testbed_gp();
  const auto grid = ImGrid::regular(2.0, 12.0, 6);
  const std::size_t m = 20, P = 3000;
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), m, 8);
  const auto ens = fuq::psi2_samples(gp, grid, xs, 1.0, P, 11);

  // Re-simulate through the dense joint sampler on the same T x m points.
  std::vector<fuq::InputPoint> pts;
  for (std::size_t t = 0; t < grid.size(); ++t)
    for (std::size_t j = 0; j < m; ++j)
      pts.push_back({grid[t], std::vector<double>(xs.row(static_cast<Eigen::Index>(j)).begin(),
                                                  xs.row(static_cast<Eigen::Index>(j)).end())});
  const Eigen::MatrixXd g = gp.sample_posterior(pts, P, 12345);

  for (std::size_t t = 0; t < grid.size(); ++t) {
    std::vector<double> a(P), b(P);
    const double noise = gp.noise_sd(grid[t]);
    for (std::size_t p = 0; p < P; ++p) {
      double sa = 0.0, sb = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        sa += ens(p, j, t);
        sb += phi_cdf(g(static_cast<Eigen::Index>(t * m + j), static_cast<Eigen::Index>(p)) / noise);
      }
      a[p] = sa / m;
      b[p] = sb / m;
    }
    for (double q : {0.1, 0.9}) EXPECT_NEAR(fuq::lower_quantile(a, q), fuq::lower_quantile(b, q), 0.03);
  }
}

TEST(Psi2, IndependentOfThreadCount) {
  const auto& gp = testbed_gp();
  const auto grid = ImGrid::regular(2.0, 12.0, 5);
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), 30, 9);
  const std::size_t saved = fuq::thread_count();
  fuq::set_thread_count(1);
  const auto one = fuq::psi2_samples(gp, grid, xs, 1.0, 50, 4);
  fuq::set_thread_count(4);
  const auto four = fuq::psi2_samples(gp, grid, xs, 1.0, 50, 4);
  fuq::set_thread_count(saved);
  for (std::size_t p = 0; p < 50; ++p)
    for (std::size_t j = 0; j < 30; ++j)
      for (std::size_t t = 0; t < 5; ++t) ASSERT_EQ(one(p, j, t), four(p, j, t));
}

TEST(MeanCurve, TrivialCases) {
  const auto same = fuq::mean_curve(constant_members({0.3, 0.3, 0.3}));
  for (double v : same.probabilities) EXPECT_DOUBLE_EQ(v, 0.3);
  const auto two = fuq::mean_curve(constant_members({0.2, 0.6}));
  for (double v : two.probabilities) EXPECT_DOUBLE_EQ(v, 0.4);
  // Draws are averaged as well as samples.
  CurveEnsemble e(ImGrid::regular(1.0, 2.0, 2), 2, 1);
  e(0, 0, 0) = 0.1;
  e(1, 0, 0) = 0.5;
  EXPECT_DOUBLE_EQ(fuq::mean_curve(e).probabilities[0], 0.3);
}

TEST(MeanCurve, MatchesQuadratureOnTestbed) {
  const auto spec = fuq::linear_testbed();
  const fuq::AnalyticSurrogate exact(spec);
  const auto grid = ImGrid::regular(0.5, 30.0, 40);
  const auto xs = fuq::sample_inputs(spec.inputs, 10000, 12);
  const auto mc = fuq::mean_curve(fuq::psi1_curves(exact, grid, xs, spec.threshold_c));
  const auto quad = fuq::quadrature_mean_curve(spec, grid);
  EXPECT_LT(sup_diff(mc.probabilities, quad.probabilities), 0.01);
}

TEST(QuantileCurve, OrderStatistics) {
  std::vector<double> levels;
  for (int k = 10; k >= 1; --k) levels.push_back(k / 10.0);
  const auto e = constant_members(levels);
  for (double v : fuq::quantile_curve(e, 0.5).probabilities) EXPECT_DOUBLE_EQ(v, 0.5);
  for (double v : fuq::quantile_curve(e, 1.0).probabilities) EXPECT_DOUBLE_EQ(v, 1.0);
  for (double v : fuq::quantile_curve(e, 0.05).probabilities) EXPECT_DOUBLE_EQ(v, 0.1);
  EXPECT_THROW(fuq::quantile_curve(e, 0.0), fuq::InputError);
}

TEST(QuantileCurve, MatchesAnalyticQuantile) {
  const auto spec = fuq::linear_testbed();
  const fuq::AnalyticSurrogate exact(spec);
  const auto grid = ImGrid::regular(0.5, 30.0, 40);
  const auto xs = fuq::sample_inputs(spec.inputs, 10000, 13);
  const auto curves = fuq::psi1_curves(exact, grid, xs, spec.threshold_c);
  for (double gamma : {0.1, 0.5, 0.9}) {
    const auto q = fuq::quantile_curve(curves, gamma);
    const auto truth = fuq::analytic_quantile_curve(spec, grid, gamma);
    EXPECT_LT(sup_diff(q.probabilities, truth.probabilities), 0.02) << gamma;
  }
}

TEST(QuantileCurve, OrderedInGamma) {
  const auto& gp = testbed_gp();
  const auto grid = ImGrid::regular(1.0, 20.0, 10);
  const auto curves = fuq::psi1_curves(gp, grid, fuq::sample_inputs(fuq::default_inputs(), 200, 14), 1.0);
  const auto q1 = fuq::quantile_curve(curves, 0.2);
  const auto q2 = fuq::quantile_curve(curves, 0.7);
  for (std::size_t t = 0; t < grid.size(); ++t) EXPECT_LE(q1.probabilities[t], q2.probabilities[t]);
}

TEST(BilevelQuantile, SingleDrawReducesToQuantileCurve) {
  const auto& gp = testbed_gp();
  const auto grid = ImGrid::regular(1.0, 20.0, 10);
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), 50, 15);
  const auto ens = fuq::psi2_samples(gp, grid, xs, 1.0, 1, 3);
  const auto bi = fuq::bilevel_quantile_curve(ens, 0.3, 0.6);
  const auto q = fuq::quantile_curve(ens, 0.6);
  EXPECT_EQ(bi.probabilities, q.probabilities);
}

TEST(BilevelQuantile, MediansTrackPlugInMedian) {
  const auto& gp = informed_gp();
  const auto grid = ImGrid::regular(2.0, 15.0, 10);
  const auto xs = fuq::sample_inputs(fuq::default_inputs(), 200, 16);
  const auto ens = fuq::psi2_samples(gp, grid, xs, 1.0, 400, 5);
  const auto bi = fuq::bilevel_quantile_curve(ens, 0.5, 0.5);
  const auto plug = fuq::quantile_curve(fuq::psi1_curves(gp, grid, xs, 1.0), 0.5);
  EXPECT_LT(sup_diff(bi.probabilities, plug.probabilities), 0.03);

  const auto hi = fuq::bilevel_quantile_curve(ens, 0.9, 0.9);
  const auto lo = fuq::bilevel_quantile_curve(ens, 0.1, 0.1);
  for (std::size_t t = 0; t < grid.size(); ++t) {
    EXPECT_GE(hi.probabilities[t], bi.probabilities[t]);
    EXPECT_GE(bi.probabilities[t], lo.probabilities[t]);
  }
}

TEST(Isotonic, PoolsAdjacentViolators) {
  fuq::FragilityCurve c{ImGrid::regular(1.0, 4.0, 4), {0.1, 0.3, 0.2, 0.4}};
  const auto iso = fuq::isotonic(c);
  const std::vector<double> expected{0.1, 0.25, 0.25, 0.4};
  for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(iso.probabilities[t], expected[t], 1e-15);
}

fuq::Dataset im_only_data(std::size_t n, unsigned seed, double rate) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> ua(1.0, 10.0), u(0.0, 1.0);
  fuq::Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    d.points.push_back({ua(gen), {0.5}});
    d.responses.push_back(u(gen) < rate ? 1.0 : -1.0);
  }
  return d;
}

TEST(BinnedReference, AllExceedances) {
  const auto data = im_only_data(300, 1, 1.0);
  const auto ref = fuq::binned_mc_reference(data, 1.0, 5, 1);
  for (double p : ref.curve.probabilities) EXPECT_EQ(p, 1.0);
  for (double h : ref.halfwidths) EXPECT_EQ(h, 0.0);
  EXPECT_TRUE(std::is_sorted(ref.curve.grid.values().begin(), ref.curve.grid.values().end()));
}

TEST(BinnedReference, BernoulliRateWithinBands) {
  const auto data = im_only_data(2000, 2, 0.3);
  const auto ref = fuq::binned_mc_reference(data, 1.0, 10, 2);
  ASSERT_EQ(ref.curve.probabilities.size(), 10u);
  int inside = 0;
  std::size_t total = 0;
  for (std::size_t k = 0; k < 10; ++k) {
    total += ref.counts[k];
    const double hw = 1.3 * std::sqrt(0.3 * 0.7 / static_cast<double>(ref.counts[k]));
    if (std::abs(ref.curve.probabilities[k] - 0.3) <= hw) ++inside;
  }
  EXPECT_EQ(total, 2000u);
  EXPECT_GE(inside, 8);
}

TEST(BinnedReference, TracksAnalyticMeanCurve) {
  // +-1.3 sd bands cover about 80.6% nominally; pool 40 datasets of 10 bins over
  // the IM range where the curve is away from 0 and 1.
  const auto spec = fuq::linear_testbed();
  int inside = 0;
  for (unsigned s = 0; s < 40; ++s) {
    const auto data = fuq::generate_dataset(spec, fuq::UniformIm{3.0, 8.0}, 2000, 1000 + s);
    const auto ref = fuq::binned_mc_reference(data, spec.threshold_c, 10, s);
    const auto truth = fuq::quadrature_mean_curve(spec, ref.curve.grid);
    for (std::size_t k = 0; k < 10; ++k)
      if (std::abs(ref.curve.probabilities[k] - truth.probabilities[k]) <= ref.halfwidths[k]) ++inside;
  }
  EXPECT_GE(inside / 400.0, 0.75);
}

TEST(CurveCsv, HeaderAndRows) {
  fuq::FragilityCurve c{ImGrid({1.0, 2.5}), {0.25, 0.5}};
  std::ostringstream plain;
  fuq::write_curve_csv(plain, c);
  EXPECT_EQ(plain.str(), "a,value\n1,0.25\n2.5,0.5\n");
  const std::vector<double> lo{0.1, 0.2}, hi{0.3, 0.75};
  std::ostringstream band;
  fuq::write_curve_csv(band, c, &lo, &hi);
  EXPECT_EQ(band.str(), "a,value,lo,hi\n1,0.25,0.1,0.3\n2.5,0.5,0.2,0.75\n");

  CurveEnsemble e(ImGrid({1.0, 2.0}), 1, 1);
  e(0, 0, 1) = 0.5;
  std::ostringstream ens;
  fuq::write_ensemble_csv(ens, e);
  EXPECT_EQ(ens.str(), "p,j,a,value\n0,0,1,0\n0,0,2,0.5\n");
}

}  // namespace
