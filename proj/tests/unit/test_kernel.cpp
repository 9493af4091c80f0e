#include <cmath>
#include <random>

#include <Eigen/Cholesky>
#include <gtest/gtest.h>

#include "fuq/error.hpp"
#include "fuq/kernel.hpp"

namespace {

using fuq::InputPoint;
using fuq::KernelParams;

// Direct evaluation of the closed form, written out independently of the library.
double matern_oracle(const InputPoint& u, const InputPoint& v, const KernelParams& p) {
  double k = p.intensity * p.intensity;
  for (std::size_t i = 0; i < u.dim(); ++i) {
    const double h = std::abs(u.coord(i) - v.coord(i)) / p.lengthscales[i];
    k *= (1.0 + std::sqrt(5.0) * h + 5.0 * h * h / 3.0) * std::exp(-std::sqrt(5.0) * h);
  }
  return k;
}

std::vector<InputPoint> random_points(std::size_t n, std::size_t d, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<InputPoint> pts(n);
  for (auto& p : pts) {
    p.im = 0.05 + u(gen);
    p.params.resize(d);
    for (auto& x : p.params) x = u(gen);
  }
  return pts;
}

TEST(Matern52, DiagonalIsIntensitySquared) {
  const InputPoint u{3.0, {1.0, -2.0}};
  const KernelParams p{2.0, {0.3, 1.0, 5.0}};
  EXPECT_DOUBLE_EQ(fuq::matern52(u, u, p), 4.0);
}

TEST(Matern52, UnitDistanceOneDimension) {
  const KernelParams p{1.0, {1.0}};
  const double expected = (1.0 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0));
  const double k = fuq::matern52(InputPoint{1.0, {}}, InputPoint{2.0, {}}, p);
  EXPECT_NEAR(k, expected, 1e-15);
  EXPECT_NEAR(k, 0.5240, 5e-5);
}

TEST(Matern52, FarApartDecays) {
  const KernelParams p{1.0, {0.1}};
  EXPECT_LT(fuq::matern52(InputPoint{1.0, {}}, InputPoint{6.0, {}}, p), 1e-20);
}

TEST(Matern52, DimensionMismatchNamesDimension) {
  const KernelParams p{1.0, {1.0, 1.0}};
  try {
    fuq::matern52(InputPoint{1.0, {0.0, 1.0}}, InputPoint{1.0, {0.0, 1.0}}, p);
    FAIL() << "expected DimensionError";
  } catch (const fuq::DimensionError& e) {
    // 0-based index of the first coordinate without a lengthscale.
    EXPECT_EQ(e.dimension(), 2u);
  }
  EXPECT_THROW(fuq::matern52(InputPoint{1.0, {0.0}}, InputPoint{1.0, {}}, KernelParams{1.0, {1.0}}),
               fuq::DimensionError);
}

TEST(Matern52, Symmetric) {
  const auto pts = random_points(20, 3, 1);
  const KernelParams p{1.7, {0.4, 0.2, 0.9, 0.5}};
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      EXPECT_EQ(fuq::matern52(pts[i], pts[j], p), fuq::matern52(pts[j], pts[i], p));
}

TEST(Matern52, TranslationInvariant) {
  const auto pts = random_points(30, 2, 2);
  const KernelParams p{1.0, {0.3, 0.7, 0.2}};
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    InputPoint u = pts[i], v = pts[i + 1];
    const double before = fuq::matern52(u, v, p);
    u.im += 10.0;
    v.im += 10.0;
    for (auto& x : u.params) x -= 3.25;
    for (auto& x : v.params) x -= 3.25;
    EXPECT_NEAR(fuq::matern52(u, v, p), before, 1e-14);
  }
}

TEST(Matern52, NonIncreasingInEachDistance) {
  const KernelParams p{1.0, {0.5, 0.5}};
  double prev = 2.0;
  for (int s = 0; s <= 200; ++s) {
    const double k = fuq::matern52(InputPoint{1.0, {0.0}}, InputPoint{1.0, {0.02 * s}}, p);
    EXPECT_LE(k, prev);
    prev = k;
  }
}

TEST(CovMatrix, SinglePoint) {
  const std::vector<InputPoint> pts{{1.0, {}}};
  const std::vector<double> nug{0.0};
  const auto k = fuq::cov_matrix(pts, KernelParams{1.0, {1.0}}, nug, 0.0);
  ASSERT_EQ(k.rows(), 1);
  EXPECT_EQ(k(0, 0), 1.0);
}

TEST(CovMatrix, DuplicatePointsResolvedByJitter) {
  const std::vector<InputPoint> pts{{2.0, {0.5}}, {2.0, {0.5}}};
  const std::vector<double> nug{0.0, 0.0};
  const auto k = fuq::cov_matrix(pts, KernelParams{1.0, {1.0, 1.0}}, nug, 1e-8);
  EXPECT_EQ(k(0, 0), 1.0 + 1e-8);
  EXPECT_EQ(k(1, 1), 1.0 + 1e-8);
  EXPECT_EQ(k(0, 1), 1.0);
  EXPECT_EQ(k(1, 0), 1.0);
}

TEST(CovMatrix, DuplicatePointsEscalateJitterFromZero) {
  const std::vector<InputPoint> pts{{2.0, {0.5}}, {2.0, {0.5}}};
  const std::vector<double> nug{0.0, 0.0};
  const auto k = fuq::cov_matrix(pts, KernelParams{1.0, {1.0, 1.0}}, nug, 0.0);
  const double jitter = k(0, 0) - 1.0;
  EXPECT_GE(jitter, 1e-10);
  EXPECT_LE(jitter, 1e-4);
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(k).info(), Eigen::Success);
}

TEST(CovMatrix, MatchesElementwiseOracle) {
  const auto pts = random_points(3, 1, 3);
  const KernelParams p{1.3, {0.6, 0.8}};
  const std::vector<double> nug{0.01, 0.02, 0.03};
  const auto k = fuq::cov_matrix(pts, p, nug, 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const double expected = matern_oracle(pts[i], pts[j], p) + (i == j ? nug[i] : 0.0);
      EXPECT_NEAR(k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), expected, 1e-14 * expected);
    }
}

TEST(CovMatrix, ExactlySymmetricAndFactorizable) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const auto pts = random_points(50, 4, 100 + seed);
    const KernelParams p{2.0, {0.5, 1.0, 2.0, 0.3, 0.9}};
    const std::vector<double> nug(50, 0.0);
    const auto k = fuq::cov_matrix(pts, p, nug, 1e-10 * 4.0);
    EXPECT_TRUE((k.array() == k.transpose().array()).all());
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(k).info(), Eigen::Success);
  }
}

TEST(CovMatrix, NuggetLengthChecked) {
  const auto pts = random_points(3, 1, 4);
  const std::vector<double> nug{0.0, 0.0};
  EXPECT_THROW(fuq::cov_matrix(pts, KernelParams{1.0, {1.0, 1.0}}, nug, 0.0), fuq::InputError);
}

TEST(CholeskyWithJitter, FailureCarriesLastJitter) {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 2.0, 2.0, 1.0;  // indefinite
  try {
    fuq::cholesky_with_jitter(a, 1.0);
    FAIL() << "expected FactorizationError";
  } catch (const fuq::FactorizationError& e) {
    EXPECT_DOUBLE_EQ(e.jitter(), 1e-4);
  }
}

TEST(CholeskyWithJitter, ReconstructsMatrix) {
  const auto pts = random_points(40, 2, 5);
  const KernelParams p{1.0, {0.3, 0.3, 0.3}};
  const std::vector<double> nug(40, 1e-3);
  const auto k = fuq::cov_matrix(pts, p, nug, 0.0);
  const auto chol = fuq::cholesky_with_jitter(k, 1.0, 0.0);
  EXPECT_EQ(chol.jitter, 0.0);
  const Eigen::MatrixXd back = chol.lower * chol.lower.transpose();
  EXPECT_LT((back - k).norm() / k.norm(), 1e-12);
}

TEST(MaternCorrelation, AgreesWithPointwiseKernel) {
  const auto pts = random_points(12, 2, 6);
  const std::vector<double> ls{0.4, 0.2, 0.7};
  fuq::RowMatrix a(12, 3);
  for (Eigen::Index i = 0; i < 12; ++i)
    for (Eigen::Index c = 0; c < 3; ++c) a(i, c) = pts[static_cast<std::size_t>(i)].coord(static_cast<std::size_t>(c));
  const auto r = fuq::matern_correlation(a, a, ls);
  const KernelParams p{1.0, ls};
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j)
      EXPECT_NEAR(r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), matern_oracle(pts[i], pts[j], p), 1e-14);
}

TEST(Standardizer, MapsTrainingRangeToUnitInterval) {
  const std::vector<InputPoint> pts{{1.0, {10.0, 5.0}}, {3.0, {30.0, 5.0}}, {2.0, {20.0, 5.0}}};
  const auto st = fuq::Standardizer::from_points(pts);
  EXPECT_DOUBLE_EQ(st.apply(0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(st.apply(0, 3.0), 1.0);
  EXPECT_DOUBLE_EQ(st.apply(1, 20.0), 0.5);
  EXPECT_DOUBLE_EQ(st.scale()[2], 1.0);  // constant coordinate
  EXPECT_DOUBLE_EQ(st.invert(1, st.apply(1, 17.0)), 17.0);
}

}  // namespace
