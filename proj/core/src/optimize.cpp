#include "fuq/optimize.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "fuq/error.hpp"

namespace fuq {
namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const BoxBounds& b) {
  return x.cwiseMax(b.lower).cwiseMin(b.upper);
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                               const BoxBounds& b) {
  return (project(x - g, b) - x).lpNorm<Eigen::Infinity>();
}

}  // namespace

OptimResult minimize_box(const Objective& f, Eigen::VectorXd x0, const BoxBounds& bounds,
                         const LbfgsOptions& options) {
  const Eigen::Index n = x0.size();
  if (bounds.lower.size() != n || bounds.upper.size() != n)
    throw InputError("minimize_box: bounds size mismatch");

  OptimResult res;
  auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    ++res.evaluations;
    g.setZero(n);
    double v = f(x, g);
    if (!std::isfinite(v) || !g.allFinite()) v = std::numeric_limits<double>::infinity();
    return v;
  };

  Eigen::VectorXd x = project(x0, bounds);
  Eigen::VectorXd g(n);
  double fx = eval(x, g);
  res.x = x;
  res.value = fx;
  if (!std::isfinite(fx)) return res;

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    res.iterations = iter + 1;
    if (projected_gradient_norm(x, g, bounds) <= options.gradient_tolerance) {
      res.converged = true;
      break;
    }

    // Variables held at a bound by the gradient are frozen for this step.
    Eigen::Array<bool, Eigen::Dynamic, 1> free(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const bool at_lower = x[k] <= bounds.lower[k] && g[k] > 0.0;
      const bool at_upper = x[k] >= bounds.upper[k] && g[k] < 0.0;
      free[k] = !(at_lower || at_upper);
    }
    Eigen::VectorXd q = free.select(g, 0.0);

    // Two-loop recursion.
    const std::size_t mem = s_hist.size();
    std::vector<double> alpha(mem);
    for (std::size_t i = mem; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (mem > 0) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < mem; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd d = -free.select(q, 0.0);
    if (d.dot(g) >= 0.0) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -free.select(g, 0.0);
    }

    // First step without curvature information is capped to unit length.
    double step = 1.0;
    if (s_hist.empty()) step = std::min(1.0, 1.0 / std::max(d.lpNorm<Eigen::Infinity>(), 1e-300));

    Eigen::VectorXd x_new;
    Eigen::VectorXd g_new(n);
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = project(x + step * d, bounds);
      f_new = eval(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!s_hist.empty()) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      break;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double f_old = fx;
    x = x_new;
    g = g_new;
    fx = f_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (std::abs(f_old - fx) <= options.relative_tolerance * std::max(1.0, std::abs(fx))) {
      res.converged = true;
      break;
    }
  }
  res.x = x;
  res.value = fx;
  return res;
}

}  // namespace fuq
