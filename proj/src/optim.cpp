#include "dtd/optim.hpp"

#include <cmath>

namespace dtd {

namespace {

void numerical_jacobian(const ResidualFn& fn, const Eigen::VectorXd& x, const Eigen::VectorXd& r0,
                        Eigen::MatrixXd& jac) {
  Eigen::VectorXd xp = x;
  Eigen::VectorXd rp(r0.size());
  for (int j = 0; j < x.size(); ++j) {
    double step = 1.49e-8 * std::max(std::abs(x[j]), 1.0);
    xp[j] = x[j] + step;
    fn(xp, rp);
    jac.col(j) = (rp - r0) / step;
    xp[j] = x[j];
  }
}

}  // namespace

LmResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& x0, int n_residuals,
                             const LmOptions& options) {
  const int n = static_cast<int>(x0.size());
  LmResult res;
  res.x = x0;

  Eigen::VectorXd r(n_residuals);
  fn(res.x, r);
  double cost = 0.5 * r.squaredNorm();

  Eigen::MatrixXd jac(n_residuals, n);
  Eigen::VectorXd r_trial(n_residuals);
  double lambda = options.initial_lambda;
  bool need_jacobian = true;
  Eigen::VectorXd grad(n);
  Eigen::MatrixXd jtj(n, n);

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (need_jacobian) {
      numerical_jacobian(fn, res.x, r, jac);
      jtj = jac.transpose() * jac;
      grad = jac.transpose() * r;
      need_jacobian = false;
    }
    res.grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (res.grad_norm < options.grad_tol) {
      res.converged = true;
      break;
    }

    Eigen::MatrixXd a = jtj;
    for (int i = 0; i < n; ++i) {
      a(i, i) += lambda * std::max(jtj(i, i), 1e-12);
    }
    Eigen::VectorXd step = a.ldlt().solve(-grad);
    double predicted = -grad.dot(step) - 0.5 * step.dot(jtj * step);

    fn(res.x + step, r_trial);
    double trial_cost = 0.5 * r_trial.squaredNorm();
    if (trial_cost < cost) {
      res.x += step;
      r = r_trial;
      cost = trial_cost;
      lambda = std::max(lambda / 9.0, 1e-12);
      need_jacobian = true;
      if (step.norm() < options.step_tol * (res.x.norm() + options.step_tol)) {
        res.converged = true;
        break;
      }
    } else {
      // negligible predicted decrease at modest damping means a stationary point
      if (false && lambda <= 1e6 && predicted <= 1e-12 * std::max(cost, 1e-30)) {
        res.converged = true;
        break;
      }
      lambda *= 11.0;
      if (lambda > 1e14) {
        break;
      }
    }
  }
  res.cost = cost;
  return res;
}

}  // namespace dtd
