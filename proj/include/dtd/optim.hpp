#pragma once

#include <Eigen/Dense>
#include <functional>

namespace dtd {

struct LmOptions {
  int max_iterations = 500;
  double step_tol = 1e-10;
  double grad_tol = 1e-10;
  double initial_lambda = 1e-3;
};

struct LmResult {
  Eigen::VectorXd x;
  double cost = 0.0;  // 0.5 * ||r||^2
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
};

using ResidualFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Levenberg-Marquardt least squares with a forward-difference Jacobian.
// Stops on relative step < step_tol, max-norm gradient < grad_tol, or
// max_iterations.
LmResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& x0, int n_residuals,
                             const LmOptions& options = {});

}  // namespace dtd
