#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace fuq {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// (a, x): intensity measure plus d mechanical parameters. Coordinate 0 is the IM.
struct InputPoint {
  double im = 1.0;
  std::vector<double> params;

  std::size_t dim() const noexcept { return params.size() + 1; }
  double coord(std::size_t k) const noexcept { return k == 0 ? im : params[k - 1]; }
};

struct KernelParams {
  double intensity = 1.0;            // sigma
  std::vector<double> lengthscales;  // one per coordinate, IM first

  void validate(std::size_t input_dim) const;
};

// (1 + sqrt5 h + 5/3 h^2) exp(-sqrt5 h)
double matern52_factor(double h) noexcept;

// sigma^2 prod_k matern52_factor(|u_k - v_k| / rho_k). No standardization happens
// here: callers pass points in whatever units the lengthscales refer to.
double matern52(const InputPoint& u, const InputPoint& v, const KernelParams& params);

// Gram matrix with (nugget_i + jitter) on the diagonal. If the matrix is not
// numerically positive definite the jitter is escalated (x10, from 1e-10 sigma^2 up
// to 1e-4 sigma^2) and the returned matrix carries the jitter that worked.
Eigen::MatrixXd cov_matrix(std::span<const InputPoint> points, const KernelParams& params,
                           std::span<const double> nugget_variances, double jitter);

struct JitteredCholesky {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

// Cholesky of a + jitter I following the escalation policy relative to `scale`
// (the kernel variance). `first_jitter` < 0 means start at 1e-10 scale.
// Throws FactorizationError with the last jitter tried.
JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& a, double scale,
                                      double first_jitter = -1.0);

// Unit-variance Matern correlation between the rows of a and b (already
// standardized); column k is scaled by 1 / lengthscales[k].
Eigen::MatrixXd matern_correlation(const RowMatrix& a, const RowMatrix& b,
                                   std::span<const double> lengthscales);
// 1-D version for IM coordinates.
Eigen::MatrixXd matern_correlation_1d(std::span<const double> a, std::span<const double> b,
                                      double lengthscale);

// Per-coordinate affine map onto [0, 1] using training ranges. A constant
// coordinate gets unit scale.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<double> lower, std::vector<double> scale);
  static Standardizer from_points(std::span<const InputPoint> points);

  std::size_t dim() const noexcept { return lower_.size(); }
  double apply(std::size_t k, double v) const noexcept { return (v - lower_[k]) / scale_[k]; }
  double invert(std::size_t k, double z) const noexcept { return lower_[k] + z * scale_[k]; }
  const std::vector<double>& lower() const noexcept { return lower_; }
  const std::vector<double>& scale() const noexcept { return scale_; }

 private:
  std::vector<double> lower_;
  std::vector<double> scale_;
};

}  // namespace fuq
