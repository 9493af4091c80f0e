#include "fuq/kernel.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "fuq/error.hpp"
#include "fuq/parallel.hpp"

namespace fuq {
namespace {

constexpr double kSqrt5 = 2.23606797749978969641;

void check_dims(const InputPoint& u, const InputPoint& v, const KernelParams& p) {
  if (u.dim() != v.dim())
    throw DimensionError("matern52: points have " + std::to_string(u.dim()) + " and " +
                             std::to_string(v.dim()) + " coordinates",
                         std::min(u.dim(), v.dim()));
  if (p.lengthscales.size() != u.dim())
    throw DimensionError("matern52: " + std::to_string(p.lengthscales.size()) +
                             " lengthscales for " + std::to_string(u.dim()) + " coordinates",
                         std::min(p.lengthscales.size(), u.dim()));
}

}  // namespace

void KernelParams::validate(std::size_t input_dim) const {
  if (!(intensity > 0.0) || !std::isfinite(intensity))
    throw InputError("kernel intensity must be positive and finite");
  if (lengthscales.size() != input_dim)
    throw DimensionError("expected " + std::to_string(input_dim) + " lengthscales, got " +
                             std::to_string(lengthscales.size()),
                         std::min(lengthscales.size(), input_dim));
  for (std::size_t k = 0; k < lengthscales.size(); ++k)
    if (!(lengthscales[k] > 0.0) || !std::isfinite(lengthscales[k]))
      throw DimensionError("lengthscale " + std::to_string(k) + " must be positive", k);
}

double matern52_factor(double h) noexcept {
  return (1.0 + kSqrt5 * h + (5.0 / 3.0) * h * h) * std::exp(-kSqrt5 * h);
}

double matern52(const InputPoint& u, const InputPoint& v, const KernelParams& params) {
  check_dims(u, v, params);
  double poly = 1.0;
  double hsum = 0.0;
  for (std::size_t k = 0; k < u.dim(); ++k) {
    const double h = std::abs(u.coord(k) - v.coord(k)) / params.lengthscales[k];
    poly *= 1.0 + kSqrt5 * h + (5.0 / 3.0) * h * h;
    hsum += h;
  }
  return params.intensity * params.intensity * poly * std::exp(-kSqrt5 * hsum);
}

Eigen::MatrixXd cov_matrix(std::span<const InputPoint> points, const KernelParams& params,
                           std::span<const double> nugget_variances, double jitter) {
  const std::size_t n = points.size();
  if (nugget_variances.size() != n)
    throw InputError("cov_matrix: " + std::to_string(nugget_variances.size()) +
                     " nugget variances for " + std::to_string(n) + " points");
  if (!(jitter >= 0.0)) throw InputError("cov_matrix: jitter must be nonnegative");
  if (n == 0) return {};
  params.validate(points[0].dim());
  for (std::size_t i = 0; i < n; ++i)
    if (nugget_variances[i] < 0.0) throw InputError("cov_matrix: negative nugget variance");

  Eigen::MatrixXd k(n, n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < i; ++j) k(i, j) = matern52(points[i], points[j], params);
    k(i, i) = matern52(points[i], points[i], params) + nugget_variances[i];
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) k(j, i) = k(i, j);

  const double scale = params.intensity * params.intensity;
  Eigen::MatrixXd with_jitter = k;
  with_jitter.diagonal().array() += jitter;
  if (Eigen::LLT<Eigen::MatrixXd>(with_jitter).info() == Eigen::Success) return with_jitter;

  const auto chol = cholesky_with_jitter(k, scale, std::max(jitter * 10.0, 1e-10 * scale));
  k.diagonal().array() += chol.jitter;
  return k;
}

JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& a, double scale,
                                      double first_jitter) {
  const double max_jitter = 1e-4 * scale;
  double jitter = first_jitter < 0.0 ? 1e-10 * scale : first_jitter;
  Eigen::MatrixXd work;
  for (;;) {
    work = a;
    work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(work);
    if (llt.info() == Eigen::Success) {
      work.triangularView<Eigen::StrictlyUpper>().setZero();
      return {std::move(work), jitter};
    }
    if (jitter >= max_jitter * (1.0 - 1e-12)) break;
    jitter = jitter > 0.0 ? std::min(jitter * 10.0, max_jitter) : 1e-10 * scale;
  }
  throw FactorizationError("Cholesky factorization failed with jitter up to " +
                               std::to_string(jitter),
                           jitter);
}

Eigen::MatrixXd matern_correlation(const RowMatrix& a, const RowMatrix& b,
                                   std::span<const double> lengthscales) {
  const Eigen::Index dims = a.cols();
  if (b.cols() != dims || static_cast<Eigen::Index>(lengthscales.size()) != dims)
    throw DimensionError("matern_correlation: column count mismatch",
                         static_cast<std::size_t>(std::min(a.cols(), b.cols())));
  const Eigen::Index na = a.rows();
  const Eigen::Index nb = b.rows();
  RowMatrix as = a;
  RowMatrix bs = b;
  for (Eigen::Index k = 0; k < dims; ++k) {
    as.col(k) /= lengthscales[static_cast<std::size_t>(k)];
    bs.col(k) /= lengthscales[static_cast<std::size_t>(k)];
  }
  Eigen::MatrixXd out(na, nb);
  const auto fill_rows = [&](std::size_t r0, std::size_t r1) {
    for (Eigen::Index j = 0; j < nb; ++j) {
      const double* bj = bs.row(j).data();
      for (auto i = static_cast<Eigen::Index>(r0); i < static_cast<Eigen::Index>(r1); ++i) {
        const double* ai = as.row(i).data();
        double poly = 1.0;
        double hsum = 0.0;
        for (Eigen::Index k = 0; k < dims; ++k) {
          const double h = std::abs(ai[k] - bj[k]);
          poly *= 1.0 + kSqrt5 * h + (5.0 / 3.0) * h * h;
          hsum += h;
        }
        out(i, j) = poly * std::exp(-kSqrt5 * hsum);
      }
    }
  };
  if (na * nb * std::max<Eigen::Index>(dims, 1) < 200000)
    fill_rows(0, static_cast<std::size_t>(na));
  else
    parallel_chunks(static_cast<std::size_t>(na), fill_rows, 64);
  return out;
}

Eigen::MatrixXd matern_correlation_1d(std::span<const double> a, std::span<const double> b,
                                      double lengthscale) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j)
    for (std::size_t i = 0; i < a.size(); ++i)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          matern52_factor(std::abs(a[i] - b[j]) / lengthscale);
  return out;
}

Standardizer::Standardizer(std::vector<double> lower, std::vector<double> scale)
    : lower_(std::move(lower)), scale_(std::move(scale)) {
  if (lower_.size() != scale_.size()) throw InputError("standardizer: size mismatch");
  for (double s : scale_)
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("standardizer: scale must be positive");
}

Standardizer Standardizer::from_points(std::span<const InputPoint> points) {
  if (points.empty()) throw InputError("standardizer: no points");
  const std::size_t dim = points[0].dim();
  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (const auto& p : points) {
    if (p.dim() != dim) throw DimensionError("standardizer: inconsistent point dimension", p.dim());
    for (std::size_t k = 0; k < dim; ++k) {
      lo[k] = std::min(lo[k], p.coord(k));
      hi[k] = std::max(hi[k], p.coord(k));
    }
  }
  std::vector<double> scale(dim);
  for (std::size_t k = 0; k < dim; ++k) scale[k] = hi[k] > lo[k] ? hi[k] - lo[k] : 1.0;
  return {std::move(lo), std::move(scale)};
}

}  // namespace fuq
