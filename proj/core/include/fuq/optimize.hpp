#pragma once

#include <functional>

#include <Eigen/Core>

namespace fuq {

// Returns f(x) and writes the gradient. Non-finite values are treated as +inf.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct BoxBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct LbfgsOptions {
  int max_iterations = 200;
  int memory = 8;
  double gradient_tolerance = 1e-6;  // on the projected gradient, inf-norm
  double relative_tolerance = 1e-10;  // on successive objective values
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

// Projected L-BFGS with Armijo backtracking along the projected path.
OptimResult minimize_box(const Objective& f, Eigen::VectorXd x0, const BoxBounds& bounds,
                         const LbfgsOptions& options = {});

}  // namespace fuq
