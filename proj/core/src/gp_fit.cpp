#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>

#include "fuq/error.hpp"
#include "fuq/gp.hpp"
#include "fuq/parallel.hpp"
#include "fuq/rng.hpp"
#include "fuq/stats.hpp"

namespace fuq {
namespace {

constexpr double kSqrt5 = 2.23606797749978969641;
constexpr double kRobustA = 0.2;

enum class Variant { Homo, Hetero };

// Negative log marginal likelihood (optionally minus the jointly robust log prior)
// over u = [log rho (D), log sigma, noise...]. Noise block: homoskedastic
// [log sigma_eps] (absent when pinned); heteroskedastic [eta0, eta1, log theta2]
// with phi = max(eta0 + eta1 abar, theta2) on the standardized IM.
class Likelihood {
 public:
  Likelihood(const RowMatrix& z, const Eigen::VectorXd& y, Variant variant, bool map_prior,
             double pinned_noise)
      : z_(z), y_(y), variant_(variant), map_(map_prior), pinned_(pinned_noise) {}

  std::size_t dim() const {
    const auto d = static_cast<std::size_t>(z_.cols()) + 1;
    if (variant_ == Variant::Hetero) return d + 3;
    return pinned_ > 0.0 ? d : d + 1;
  }

  void nugget(const Eigen::VectorXd& u, Eigen::VectorXd& var, Eigen::MatrixXd& dvar) const {
    const auto n = z_.rows();
    const auto D = z_.cols();
    var.resize(n);
    if (variant_ == Variant::Homo) {
      const double s = pinned_ > 0.0 ? pinned_ : std::exp(u[D + 1]);
      var.setConstant(s * s);
      dvar.resize(n, pinned_ > 0.0 ? 0 : 1);
      if (pinned_ <= 0.0) dvar.col(0).setConstant(2.0 * s * s);
      return;
    }
    const double e0 = u[D + 1];
    const double e1 = u[D + 2];
    const double t2 = std::exp(u[D + 3]);
    dvar.setZero(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lin = e0 + e1 * z_(i, 0);
      if (lin > t2) {
        var[i] = lin * lin;
        dvar(i, 0) = 2.0 * lin;
        dvar(i, 1) = 2.0 * lin * z_(i, 0);
      } else {
        var[i] = t2 * t2;
        dvar(i, 2) = 2.0 * t2 * t2;
      }
    }
  }

  double operator()(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const {
    const auto n = z_.rows();
    const auto D = z_.cols();
    const double sigma = std::exp(u[D]);
    const double s2 = sigma * sigma;
    std::vector<double> inv_ls(static_cast<std::size_t>(D));
    for (Eigen::Index k = 0; k < D; ++k) inv_ls[static_cast<std::size_t>(k)] = std::exp(-u[k]);

    Eigen::VectorXd var;
    Eigen::MatrixXd dvar;
    nugget(u, var, dvar);

    Eigen::MatrixXd k(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      k(j, j) = s2;
      for (Eigen::Index i = j + 1; i < n; ++i) {
        double poly = 1.0;
        double hsum = 0.0;
        for (Eigen::Index c = 0; c < D; ++c) {
          const double h = std::abs(z_(i, c) - z_(j, c)) * inv_ls[static_cast<std::size_t>(c)];
          poly *= 1.0 + kSqrt5 * h + (5.0 / 3.0) * h * h;
          hsum += h;
        }
        k(i, j) = s2 * poly * std::exp(-kSqrt5 * hsum);
      }
    }
    Eigen::MatrixXd a = k.selfadjointView<Eigen::Lower>();
    a.diagonal() += var;

    JitteredCholesky chol;
    try {
      chol = cholesky_with_jitter(a, s2);
    } catch (const FactorizationError&) {
      return std::numeric_limits<double>::infinity();
    }
    const auto& l = chol.lower;
    Eigen::VectorXd alpha = l.triangularView<Eigen::Lower>().solve(y_);
    const double quad = alpha.squaredNorm();
    l.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha);
    double value = 0.5 * quad + l.diagonal().array().log().sum() +
                   0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

    // W = A^-1 - alpha alpha^T; dNLL/dtheta = 0.5 tr(W dA).
    Eigen::MatrixXd w = Eigen::MatrixXd::Identity(n, n);
    l.triangularView<Eigen::Lower>().solveInPlace(w);
    w = (w.transpose() * w).eval();
    w.noalias() -= alpha * alpha.transpose();

    grad.setZero(static_cast<Eigen::Index>(dim()));
    double g_sigma = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      g_sigma += 0.5 * w(j, j) * s2;
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const double wk = w(i, j) * k(i, j);
        g_sigma += wk;
        for (Eigen::Index c = 0; c < D; ++c) {
          const double h = std::abs(z_(i, c) - z_(j, c)) * inv_ls[static_cast<std::size_t>(c)];
          const double p = 1.0 + kSqrt5 * h + (5.0 / 3.0) * h * h;
          grad[c] += wk * (5.0 / 3.0) * h * h * (1.0 + kSqrt5 * h) / p;
        }
      }
    }
    grad[D] = 2.0 * g_sigma;  // dA/dlog sigma = 2K; off-diagonal counted once above
    for (Eigen::Index c = 0; c < dvar.cols(); ++c)
      grad[D + 1 + c] = 0.5 * w.diagonal().dot(dvar.col(c));

    if (map_) {
      // log pi = a log t - b t, t = sum_l C / rho_l + nugget ratio.
      const double nn = static_cast<double>(n);
      const double p = static_cast<double>(D);
      const double cl = std::pow(nn, -1.0 / p);
      const double b = cl * (kRobustA + p);
      const double eta = var.mean() / s2;
      double t = eta;
      for (Eigen::Index c = 0; c < D; ++c) t += cl * inv_ls[static_cast<std::size_t>(c)];
      value -= kRobustA * std::log(t) - b * t;
      const double dlp_dt = kRobustA / t - b;
      for (Eigen::Index c = 0; c < D; ++c)
        grad[c] -= dlp_dt * (-cl * inv_ls[static_cast<std::size_t>(c)]);
      grad[D] -= dlp_dt * (-2.0 * eta);
      for (Eigen::Index c = 0; c < dvar.cols(); ++c)
        grad[D + 1 + c] -= dlp_dt * dvar.col(c).mean() / s2;
    }
    return value;
  }

 private:
  const RowMatrix& z_;
  const Eigen::VectorXd& y_;
  Variant variant_;
  bool map_;
  double pinned_;
};

GpModel fit_impl(const Dataset& data, const FitConfig& config, FitReport* report,
                 Variant variant) {
  data.validate();
  if (config.restarts < 1) throw InputError("fit: at least one start is required");
  if (!(config.noise_floor > 0.0 && config.noise_floor < 1.0))
    throw InputError("fit: noise floor must lie in (0, 1)");
  const double y_mean = mean(data.responses);
  const double sdy = std::sqrt(sample_variance(data.responses));
  if (!(sdy > 1e-12 * std::max(1.0, std::abs(y_mean))))
    throw FitError("degenerate data: responses are constant", std::numeric_limits<double>::infinity());

  const Standardizer st = Standardizer::from_points(data.points);
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto D = static_cast<Eigen::Index>(data.param_dim() + 1);
  RowMatrix z(n, D);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < D; ++c)
      z(i, c) = st.apply(static_cast<std::size_t>(c),
                         data.points[static_cast<std::size_t>(i)].coord(static_cast<std::size_t>(c)));
  Eigen::VectorXd yc(n);
  for (Eigen::Index i = 0; i < n; ++i) yc[i] = data.responses[static_cast<std::size_t>(i)] - y_mean;

  const bool map_prior = config.map_prior.value_or(variant == Variant::Homo);
  const double floor_sd = config.noise_floor * sdy;
  const bool pinned = config.pin_noise_to_floor;
  const Likelihood nll(z, yc, variant, map_prior,
                       variant == Variant::Homo && pinned ? floor_sd : 0.0);
  const auto dim = static_cast<Eigen::Index>(nll.dim());

  BoxBounds bounds{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
  bounds.lower.head(D).setConstant(std::log(1e-2));
  bounds.upper.head(D).setConstant(std::log(1e2));
  bounds.lower[D] = std::log(1e-3 * sdy);
  bounds.upper[D] = std::log(1e3 * sdy);
  if (variant == Variant::Homo && !pinned) {
    bounds.lower[D + 1] = std::log(floor_sd);
    bounds.upper[D + 1] = std::log(sdy);
  } else if (variant == Variant::Hetero) {
    bounds.lower[D + 1] = -2.0 * sdy;
    bounds.upper[D + 1] = 2.0 * sdy;
    bounds.lower[D + 2] = -2.0 * sdy;
    bounds.upper[D + 2] = 2.0 * sdy;
    bounds.lower[D + 3] = std::log(floor_sd);
    bounds.upper[D + 3] = pinned ? std::log(floor_sd) : std::log(sdy);
  }

  const std::uint64_t seed = derive_seed(config.seed, "fit");
  std::vector<Eigen::VectorXd> starts(config.restarts, Eigen::VectorXd(dim));
  for (std::size_t r = 0; r < config.restarts; ++r) {
    auto& u = starts[r];
    Rng rng(derive_seed(seed, r));
    if (r == 0) {
      u.head(D).setConstant(std::log(0.5));
      u[D] = std::log(sdy);
      if (variant == Variant::Homo && !pinned) u[D + 1] = std::log(0.3 * sdy);
      if (variant == Variant::Hetero) {
        u[D + 1] = 0.3 * sdy;
        u[D + 2] = 0.0;
        u[D + 3] = std::log(0.2 * sdy);
      }
    } else {
      for (Eigen::Index c = 0; c < D; ++c) u[c] = rng.uniform(std::log(0.05), std::log(5.0));
      u[D] = rng.uniform(std::log(0.3 * sdy), std::log(3.0 * sdy));
      if (variant == Variant::Homo && !pinned)
        u[D + 1] = rng.uniform(std::log(0.01 * sdy), std::log(0.7 * sdy));
      if (variant == Variant::Hetero) {
        u[D + 1] = rng.uniform(0.0, 0.7 * sdy);
        u[D + 2] = rng.uniform(-0.5 * sdy, 0.5 * sdy);
        u[D + 3] = rng.uniform(std::log(0.01 * sdy), std::log(0.7 * sdy));
      }
    }
    u = u.cwiseMax(bounds.lower).cwiseMin(bounds.upper);
  }

  std::vector<OptimResult> results(config.restarts);
  std::vector<double> start_values(config.restarts);
  parallel_for(config.restarts, [&](std::size_t r) {
    Eigen::VectorXd g;
    start_values[r] = nll(starts[r], g);
    if (!std::isfinite(start_values[r])) start_values[r] = std::numeric_limits<double>::infinity();
    results[r] = minimize_box(nll, starts[r], bounds, config.optimizer);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r)
    if (results[r].value < results[best].value) best = r;
  if (!std::isfinite(results[best].value))
    throw FitError("fit: no start produced a finite likelihood", results[best].value);

  if (report) {
    report->start_objective = start_values;
    report->final_objective.clear();
    for (const auto& res : results) report->final_objective.push_back(res.value);
    report->best_start = best;
    report->map_prior = map_prior;
  }

  const Eigen::VectorXd& u = results[best].x;
  KernelParams kernel;
  kernel.intensity = std::exp(u[D]);
  for (Eigen::Index c = 0; c < D; ++c) kernel.lengthscales.push_back(std::exp(u[c]));
  NuggetModel nugget;
  if (variant == Variant::Homo) {
    nugget = Homoskedastic{pinned ? floor_sd : std::exp(u[D + 1])};
  } else {
    // Back to the raw IM: eta0 + eta1 (a - lo) / s.
    const double lo = st.lower()[0];
    const double s = st.scale()[0];
    const double e0 = u[D + 1];
    const double e1 = u[D + 2];
    nugget = Heteroskedastic{e0 - e1 * lo / s, e1 / s, std::exp(u[D + 3])};
  }
  return GpModel(std::move(kernel), nugget, data, st, y_mean);
}

}  // namespace

GpModel fit_homoskedastic(const Dataset& data, const FitConfig& config, FitReport* report) {
  return fit_impl(data, config, report, Variant::Homo);
}

GpModel fit_heteroskedastic(const Dataset& data, const FitConfig& config, FitReport* report) {
  return fit_impl(data, config, report, Variant::Hetero);
}

}  // namespace fuq
