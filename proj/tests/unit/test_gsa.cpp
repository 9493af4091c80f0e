#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fuq/error.hpp"
#include "fuq/gsa.hpp"
#include "fuq/stats.hpp"
#include "fuq/testbed.hpp"

namespace {

using fuq::ImGrid;
using fuq::RowMatrix;

fuq::SyntheticModelSpec spec_with(std::vector<double> betas) {
  auto s = fuq::linear_testbed();
  s.betas = std::move(betas);
  return s;
}

fuq::DesignCurves analytic_curves(const fuq::SyntheticModelSpec& spec, std::size_t m,
                                  const ImGrid& grid, std::uint64_t seed) {
  const auto design = fuq::pickfreeze_design(m, fuq::input_laws(spec.inputs), seed);
  return fuq::design_curves_psi1(fuq::AnalyticSurrogate(spec), design, grid, spec.threshold_c);
}

const ImGrid& gsa_grid() {
  static const ImGrid g = ImGrid::regular(0.5, 25.0, 30);
  return g;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) s += 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
  return s;
}

TEST(PickFreezeDesign, StructuralIdentities) {
  const auto laws = fuq::input_laws(fuq::default_inputs());
  const auto d = fuq::pickfreeze_design(50, laws, 3);
  for (std::size_t i = 0; i < d.dim(); ++i) {
    const auto f = d.frozen(i), c = d.complement(i);
    for (Eigen::Index j = 0; j < 50; ++j)
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(d.dim()); ++k) {
        const bool own = k == static_cast<Eigen::Index>(i);
        EXPECT_EQ(f(j, k), own ? d.base()(j, k) : d.copy()(j, k));
        EXPECT_EQ(c(j, k), own ? d.copy()(j, k) : d.base()(j, k));
      }
  }
  const std::vector<fuq::UniformLaw> one{{2.0, 3.0}};
  const auto d1 = fuq::pickfreeze_design(10, one, 1);
  EXPECT_EQ(d1.frozen(0), d1.base());
  EXPECT_EQ(fuq::pickfreeze_design(50, laws, 3).base(), d.base());
  EXPECT_THROW(fuq::pickfreeze_design(1, laws, 3), fuq::InputError);
}

TEST(PickFreezeDesign, SampleMeansMatchLaws) {
  const auto laws = fuq::input_laws(fuq::default_inputs());
  const std::size_t m = 20000;
  const auto d = fuq::pickfreeze_design(m, laws, 4);
  for (std::size_t k = 0; k < laws.size(); ++k) {
    const double sd = (laws[k].upper - laws[k].lower) / std::sqrt(12.0);
    for (const RowMatrix* s : {&d.base(), &d.copy()}) {
      const double mean = s->col(static_cast<Eigen::Index>(k)).mean();
      EXPECT_LE(std::abs(mean - laws[k].mean()), 4 * sd / std::sqrt(double(m)));
    }
  }
}

TEST(L2Distance, TrivialValues) {
  const ImGrid g = ImGrid::regular(0.5, 2.5, 11);
  const fuq::FragilityCurve zero{g, std::vector<double>(11, 0.0)};
  const fuq::FragilityCurve one{g, std::vector<double>(11, 1.0)};
  EXPECT_EQ(fuq::l2_distance_sq(one, one), 0.0);
  EXPECT_NEAR(fuq::l2_distance_sq(zero, one), 2.0, 1e-14);
  EXPECT_EQ(fuq::l2_distance_sq(zero, one), fuq::l2_distance_sq(one, zero));
  const fuq::FragilityCurve other{ImGrid::regular(0.5, 3.0, 11), std::vector<double>(11, 0.0)};
  EXPECT_THROW(fuq::l2_distance_sq(zero, other), fuq::InputError);
}

TEST(L2Distance, MatchesFineSimpson) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a0 = 0.1, a1 = 25.0;
  const ImGrid g = ImGrid::regular(a0, a1, 100);
  for (int rep = 0; rep < 20; ++rep) {
    double c[4];
    for (double& v : c) v = u(gen);
    auto f = [&](double a) {
      const double s = (a - a0) / (a1 - a0);
      return 0.5 + 0.2 * c[0] * std::sin(3.0 * s + c[1]) - 0.2 * c[2] * std::cos(5.0 * s + c[3]);
    };
    auto h = [&](double a) { return 1.0 / (1.0 + std::exp(-(a - 8.0) / 3.0)); };
    std::vector<double> p1, p2;
    for (double a : g.values()) {
      p1.push_back(f(a));
      p2.push_back(h(a));
    }
    const std::size_t n = 20000;
    double simpson = 0.0;
    const double step = (a1 - a0) / n;
    for (std::size_t i = 0; i <= n; ++i) {
      const double a = a0 + i * step;
      const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      simpson += wgt * std::pow(f(a) - h(a), 2);
    }
    simpson *= step / 3.0;
    const double got = fuq::l2_distance_sq(fuq::FragilityCurve{g, p1}, fuq::FragilityCurve{g, p2});
    EXPECT_NEAR(got, simpson, 1e-3 * simpson);
  }
}

TEST(AggregatedSobol, SingleActiveInput) {
  const auto spec = spec_with({0.3, 0, 0, 0, 0, 0});
  const auto r = fuq::aggregated_sobol(analytic_curves(spec, 20000, gsa_grid(), 1));
  EXPECT_NEAR(r.first.point_estimate[0], 1.0, 0.03);
  EXPECT_NEAR(r.total.point_estimate[0], 1.0, 0.03);
  for (std::size_t i = 1; i < 6; ++i) {
    EXPECT_NEAR(r.first.point_estimate[i], 0.0, 0.03);
    EXPECT_NEAR(r.total.point_estimate[i], 0.0, 0.03);
  }
}

TEST(AggregatedSobol, ConstantOutputIsNonInformative) {
  const auto spec = spec_with({0, 0, 0, 0, 0, 0});
  const auto curves = analytic_curves(spec, 200, gsa_grid(), 2);
  try {
    fuq::aggregated_sobol(curves);
    FAIL() << "expected DegenerateError";
  } catch (const fuq::DegenerateError& e) {
    EXPECT_NE(std::string(e.what()).find("non-informative output"), std::string::npos);
  }
  EXPECT_THROW(fuq::betak(curves, fuq::CurveKernel(0.1, gsa_grid())), fuq::DegenerateError);
}

TEST(AggregatedSobol, AdditiveModelMatchesDoubleLoopOracle) {
  auto spec = spec_with({0.25, 0.15});
  spec.inputs.resize(2);
  const auto grid = ImGrid::regular(0.5, 25.0, 25);
  const auto r = fuq::aggregated_sobol(analytic_curves(spec, 20000, grid, 3));
  const auto oracle = fuq::oracle_aggregated_sobol(spec, grid, 1000, 1000, 4);
  double sum = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(r.first.point_estimate[i], oracle.first[i], 0.03);
    EXPECT_NEAR(r.total.point_estimate[i], oracle.total[i], 0.03);
    EXPECT_NEAR(r.total.point_estimate[i] - r.first.point_estimate[i], 0.0, 0.05);
    sum += r.first.point_estimate[i];
  }
  EXPECT_GE(sum, 0.95);
  EXPECT_LE(sum, 1.05);
}

// Var(E[Psi(a, X) | X_1]) per grid point by nested sampling, against the
// pick-freeze covariance, each with its standard error.
TEST(AggregatedSobol, PickFreezeCovarianceMatchesNestedVariance) {
  auto spec = spec_with({0.25, 0.15});
  spec.inputs.resize(2);
  const auto laws = fuq::input_laws(spec.inputs);
  const ImGrid grid = ImGrid::regular(3.0, 9.0, 7);
  const std::size_t m = 20000;
  const auto curves = analytic_curves(spec, m, grid, 5);

  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u0(laws[0].lower, laws[0].upper), u1(laws[1].lower, laws[1].upper);
  const std::size_t n_out = 2000, n_in = 500, batches = 10;
  for (std::size_t t = 0; t < grid.size(); ++t) {
    // Pick-freeze estimate and its delta-method standard error.
    double s0 = 0.0, s1 = 0.0, s01 = 0.0;
    std::vector<double> prod(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double y = curves.base()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t));
      const double z = curves.frozen(0)(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t));
      s0 += y;
      s1 += z;
      s01 += y * z;
    }
    const double my = s0 / m, mz = s1 / m;
    const double pf = s01 / m - my * mz;
    double v = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double y = curves.base()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t));
      const double z = curves.frozen(0)(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t));
      v += std::pow((y - my) * (z - mz) - pf, 2);
    }
    const double pf_se = std::sqrt(v / (m - 1.0) / m);

    std::vector<double> batch_est;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<double> means, vars;
      for (std::size_t k = 0; k < n_out / batches; ++k) {
        const double x0 = u0(gen);
        std::vector<double> inner(n_in);
        for (auto& y : inner) {
          const std::vector<double> x{x0, u1(gen)};
          y = fuq::true_fragility(spec, grid[t], x);
        }
        means.push_back(fuq::mean(inner));
        vars.push_back(fuq::sample_variance(inner));
      }
      batch_est.push_back(fuq::sample_variance(means) - fuq::mean(vars) / n_in);
    }
    const double nested = fuq::mean(batch_est);
    const double nested_se = std::sqrt(fuq::sample_variance(batch_est) / batches);
    EXPECT_LE(std::abs(pf - nested), 3.0 * std::hypot(pf_se, nested_se)) << "t=" << t;
  }
}

TEST(Indices, InvariantToSampleOrder) {
  const auto spec = fuq::linear_testbed();
  const auto laws = fuq::input_laws(spec.inputs);
  const auto design = fuq::pickfreeze_design(2000, laws, 7);
  std::vector<std::size_t> order(2000);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(8));
  const fuq::AnalyticSurrogate exact(spec);
  const auto c1 = fuq::design_curves_psi1(exact, design, gsa_grid(), 1.0);
  const auto c2 = fuq::design_curves_psi1(exact, design.permuted(order), gsa_grid(), 1.0);
  const auto s1 = fuq::aggregated_sobol(c1), s2 = fuq::aggregated_sobol(c2);
  EXPECT_EQ(s1.first.point_estimate, s2.first.point_estimate);
  EXPECT_EQ(s1.total.point_estimate, s2.total.point_estimate);
  const fuq::CurveKernel k(0.5, gsa_grid());
  const auto b1 = fuq::betak(c1, k), b2 = fuq::betak(c2, k);
  EXPECT_EQ(b1.first.point_estimate, b2.first.point_estimate);
  EXPECT_EQ(b1.total.point_estimate, b2.total.point_estimate);
}

TEST(Indices, InteractionShowsInTotals) {
  auto spec = spec_with({0.2, 0.05, 0, 0, 0, 0});
  spec.interaction = fuq::Interaction{0.4, 2.0};
  const auto curves = analytic_curves(spec, 20000, gsa_grid(), 9);
  const auto s = fuq::aggregated_sobol(curves);
  const double ell = fuq::bandwidth_heuristic(curves.base(), gsa_grid());
  const auto b = fuq::betak(curves, fuq::CurveKernel(ell, gsa_grid()));
  for (std::size_t i : {0u, 1u}) {
    EXPECT_GT(s.total.point_estimate[i] - s.first.point_estimate[i], 0.05) << i;
    EXPECT_GT(b.total.point_estimate[i] - b.first.point_estimate[i], 0.05) << i;
  }
}

TEST(Mmd, IdenticalSamplesNearZero) {
  const auto curves = analytic_curves(fuq::linear_testbed(), 2000, gsa_grid(), 10);
  const double ell = fuq::bandwidth_heuristic(curves.base(), gsa_grid());
  const fuq::CurveKernel k(ell, gsa_grid());
  const double v = fuq::mmd2(curves.base(), curves.base(), k);
  EXPECT_LE(v, 0.0);
  EXPECT_LT(std::abs(v), 2.0 / std::sqrt(2000.0));
  // Independent samples of the same law.
  EXPECT_LT(std::abs(fuq::mmd2(curves.base(), curves.copy(), k)), 2.0 / std::sqrt(2000.0));
}

TEST(Mmd, TwoPointMassesClosedForm) {
  const ImGrid g = ImGrid::regular(0.5, 2.5, 21);
  RowMatrix u = RowMatrix::Zero(5, 21), v = RowMatrix::Ones(5, 21);
  const double ell = 0.8;
  const fuq::CurveKernel k(ell, g);
  EXPECT_NEAR(fuq::mmd2(u, v, k), 2.0 - 2.0 * std::exp(-2.0 / (2 * ell * ell)), 1e-12);
  EXPECT_THROW(fuq::mmd2(u.topRows(1), v, k), fuq::InputError);
}

// Curves b + xi f with scalar Gaussian xi: the kernel mean embedding has a closed
// form, E exp(-alpha Z^2) for Z ~ N(mu, s2) = exp(-alpha mu^2 / (1 + 2 alpha s2)) / sqrt(1 + 2 alpha s2).
TEST(Mmd, GaussianFamiliesMatchClosedForm) {
  const ImGrid g = ImGrid::regular(1.0, 10.0, 50);
  std::vector<double> base, shape;
  for (double a : g.values()) {
    base.push_back(0.5);
    shape.push_back(0.1 * std::sin(a / 2.0));
  }
  std::vector<double> sq;
  for (double s : shape) sq.push_back(s * s);
  const double norm2 = trapezoid(g.values(), sq);
  const double ell = 0.15;
  const double alpha = norm2 / (2 * ell * ell);
  auto h = [&](double mu, double s2) {
    return std::exp(-alpha * mu * mu / (1 + 2 * alpha * s2)) / std::sqrt(1 + 2 * alpha * s2);
  };
  const double shift = 0.8;
  const double truth = 2.0 * h(0.0, 2.0) - 2.0 * h(shift, 2.0);

  const Eigen::Index n = 3000;
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z;
  RowMatrix u(n, 50), v(n, 50);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xu = z(gen), xv = shift + z(gen);
    for (Eigen::Index t = 0; t < 50; ++t) {
      u(i, t) = base[t] + xu * shape[t];
      v(i, t) = base[t] + xv * shape[t];
    }
  }
  EXPECT_NEAR(fuq::mmd2(u, v, fuq::CurveKernel(ell, g)), truth, 0.1 * truth);
}

TEST(BetaK, DummyAndSingleInput) {
  const auto spec = fuq::linear_testbed();
  const auto curves = analytic_curves(spec, 15000, gsa_grid(), 12);
  const double ell = fuq::bandwidth_heuristic(curves.base(), gsa_grid());
  const auto b = fuq::betak(curves, fuq::CurveKernel(ell, gsa_grid()));
  for (std::size_t i = 0; i < 6; ++i) {
    if (spec.betas[i] == 0.0) EXPECT_NEAR(b.first.point_estimate[i], 0.0, 0.03) << i;
    EXPECT_GE(b.total.point_estimate[i], b.first.point_estimate[i] - 0.05) << i;
  }

  const auto single = spec_with({0.3, 0, 0, 0, 0, 0});
  const auto sc = analytic_curves(single, 15000, gsa_grid(), 13);
  const double sl = fuq::bandwidth_heuristic(sc.base(), gsa_grid());
  const auto sb = fuq::betak(sc, fuq::CurveKernel(sl, gsa_grid()));
  EXPECT_NEAR(sb.first.point_estimate[0], 1.0, 0.05);
}

TEST(BetaK, RelabelingSymmetryForSingleInputModel) {
  const auto spec = spec_with({0.3, 0, 0, 0, 0, 0});
  const auto laws = fuq::input_laws(spec.inputs);
  const auto d = fuq::pickfreeze_design(3, laws, 14);
  const fuq::AnalyticSurrogate exact(spec);
  const fuq::CurveKernel k(0.3, gsa_grid());
  std::vector<std::size_t> perm{0, 1, 2};
  do {
    RowMatrix copy(3, 6);
    for (std::size_t j = 0; j < 3; ++j) copy.row(static_cast<Eigen::Index>(j)) = d.copy().row(static_cast<Eigen::Index>(perm[j]));
    for (bool swap : {false, true}) {
      const fuq::PickFreezeDesign pd = swap ? fuq::PickFreezeDesign(copy, d.base())
                                            : fuq::PickFreezeDesign(d.base(), copy);
      const auto b = fuq::betak(fuq::design_curves_psi1(exact, pd, gsa_grid(), 1.0), k);
      EXPECT_NEAR(b.first.point_estimate[0], 1.0, 1e-12);
      EXPECT_NEAR(b.total.point_estimate[0], 1.0, 1e-12);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST(Bandwidth, HeuristicProperties) {
  const ImGrid g = ImGrid::regular(1.0, 3.0, 5);
  RowMatrix two(2, 5);
  two.row(0) << 0.1, 0.2, 0.3, 0.4, 0.5;
  two.row(1) << 0.0, 0.2, 0.5, 0.5, 0.9;
  const auto w = g.trapezoid_weights();
  double d2 = 0.0;
  for (int t = 0; t < 5; ++t) d2 += w[t] * std::pow(two(0, t) - two(1, t), 2);
  EXPECT_NEAR(fuq::bandwidth_heuristic(two, g), std::sqrt(d2) / std::sqrt(2.0), 1e-15);

  const auto curves = analytic_curves(fuq::linear_testbed(), 1000, gsa_grid(), 15).base();
  const double ell = fuq::bandwidth_heuristic(curves, gsa_grid());
  const RowMatrix scaled = (curves.array() * 3.0).matrix();
  EXPECT_NEAR(fuq::bandwidth_heuristic(scaled, gsa_grid()), 3.0 * ell, 1e-12 * ell);

  const auto gw = gsa_grid().trapezoid_weights();
  std::vector<double> all;
  for (Eigen::Index i = 0; i < 1000; ++i)
    for (Eigen::Index j = i + 1; j < 1000; ++j) {
      double s = 0.0;
      for (Eigen::Index t = 0; t < curves.cols(); ++t) s += gw[t] * std::pow(curves(i, t) - curves(j, t), 2);
      all.push_back(std::sqrt(s));
    }
  std::nth_element(all.begin(), all.begin() + all.size() / 2, all.end());
  const double full = all[all.size() / 2] / std::sqrt(2.0);
  EXPECT_NEAR(ell, full, 0.1 * full);

  RowMatrix same = RowMatrix::Constant(4, 5, 0.3);
  try {
    fuq::bandwidth_heuristic(same, g);
    FAIL() << "expected DegenerateError";
  } catch (const fuq::DegenerateError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate bandwidth"), std::string::npos);
  }
}

TEST(Posterior, ZeroLatentVarianceHasNoMetamodelShare) {
  const auto spec = fuq::linear_testbed();
  const fuq::AnalyticSurrogate exact(spec);
  const auto design = fuq::pickfreeze_design(500, fuq::input_laws(spec.inputs), 16);
  fuq::PosteriorGsaConfig cfg;
  cfg.draws = 2;
  cfg.bootstrap = 5;
  cfg.seed = 3;
  const auto r = fuq::posterior_sensitivity(exact, design, gsa_grid(), 1.0, cfg);
  for (const auto* s : {&r.sobol_first, &r.sobol_total, &r.betak_first, &r.betak_total})
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_EQ(s->sigma_gp[i], 0.0);
      EXPECT_GT(s->sigma_mc[i], 0.0);
    }
}

TEST(Posterior, IdenticalResamplesHaveNoMonteCarloShare) {
  const auto spec = fuq::linear_testbed();
  const fuq::AnalyticSurrogate exact(spec);
  const std::size_t m = 300;
  const auto design = fuq::pickfreeze_design(m, fuq::input_laws(spec.inputs), 17);
  fuq::PosteriorGsaConfig cfg;
  cfg.draws = 2;
  cfg.bootstrap = 2;
  std::vector<std::size_t> idx(m);
  std::mt19937_64 gen(3);
  for (auto& j : idx) j = gen() % m;
  cfg.bootstrap_indices = {idx, idx};
  const auto r = fuq::posterior_sensitivity(exact, design, gsa_grid(), 1.0, cfg);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(r.sobol_first.sigma_mc[i], 0.0);
    EXPECT_EQ(r.betak_total.sigma_mc[i], 0.0);
  }
  cfg.bootstrap_indices = {idx};
  EXPECT_THROW(fuq::posterior_sensitivity(exact, design, gsa_grid(), 1.0, cfg), fuq::InputError);
}

TEST(Posterior, SingleDrawAndResampleReproducePointEstimate) {
  const auto spec = fuq::linear_testbed();
  const fuq::AnalyticSurrogate exact(spec);
  const auto design = fuq::pickfreeze_design(400, fuq::input_laws(spec.inputs), 18);
  fuq::PosteriorGsaConfig cfg;
  cfg.draws = 1;
  cfg.bootstrap = 1;
  const auto r = fuq::posterior_sensitivity(exact, design, gsa_grid(), 1.0, cfg);
  for (const auto* s : {&r.sobol_first, &r.sobol_total, &r.betak_first, &r.betak_total}) {
    ASSERT_EQ(s->replicates.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_NEAR(s->replicate(0, 0, i), s->point_estimate[i], 1e-10);
      EXPECT_EQ(s->sigma_gp[i], 0.0);
      EXPECT_EQ(s->sigma_mc[i], 0.0);
    }
  }
}

TEST(Posterior, MonteCarloVarianceScalesWithSampleSize) {
  const auto spec = fuq::linear_testbed();
  const fuq::AnalyticSurrogate exact(spec);
  const ImGrid grid = ImGrid::regular(0.5, 25.0, 20);
  double v_small = 0.0, v_large = 0.0;
  for (unsigned s = 0; s < 10; ++s) {
    for (std::size_t m : {5000u, 20000u}) {
      const auto design = fuq::pickfreeze_design(m, fuq::input_laws(spec.inputs), 100 + s);
      fuq::PosteriorGsaConfig cfg;
      cfg.draws = 1;
      cfg.bootstrap = 50;
      cfg.seed = s;
      cfg.betak = false;
      const auto r = fuq::posterior_sensitivity(exact, design, grid, 1.0, cfg);
      // Input 0 has the largest coefficient.
      (m == 5000 ? v_small : v_large) += std::pow(r.sobol_first.sigma_mc[0], 2);
    }
  }
  const double factor = v_small / v_large;
  EXPECT_GE(factor, 2.5);
  EXPECT_LE(factor, 6.0);
}

TEST(Export, JsonAndReplicateCsv) {
  const auto spec = fuq::linear_testbed();
  const fuq::AnalyticSurrogate exact(spec);
  const auto design = fuq::pickfreeze_design(200, fuq::input_laws(spec.inputs), 19);
  fuq::PosteriorGsaConfig cfg;
  cfg.draws = 2;
  cfg.bootstrap = 3;
  const auto r = fuq::posterior_sensitivity(exact, design, gsa_grid(), 1.0, cfg);
  std::vector<std::string> names;
  for (const auto& in : spec.inputs) names.push_back(in.name);
  const std::vector<fuq::SensitivityResult> all{r.sobol_first, r.betak_total};
  const auto doc = fuq::sensitivity_to_json(all, names);
  ASSERT_EQ(doc["inputs"].size(), 6u);
  const auto& row = doc["indices"][std::string(fuq::to_string(fuq::IndexKind::SobolFirst))][0];
  for (const char* key : {"name", "estimate", "q10", "q90", "sigma_gp", "sigma_mc", "dropped_replicates"})
    EXPECT_TRUE(row.contains(key)) << key;
  std::ostringstream csv;
  fuq::write_replicates_csv(csv, all, names);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "kind,input,p,b,value");
  std::size_t count = 0;
  while (std::getline(lines, line)) ++count;
  EXPECT_EQ(count, 2u * 2 * 3 * 6);
}

}  // namespace
