#include "dtd/fitters.hpp"

#include <cmath>
#include <numbers>

#include "dtd/optim.hpp"
#include "dtd/rng.hpp"

namespace dtd {

namespace {

Eigen::VectorXd log_signals(const std::vector<double>& signals) {
  Eigen::VectorXd y(signals.size());
  for (std::size_t i = 0; i < signals.size(); ++i) {
    if (signals[i] <= 0.0) {
      throw RangeError("log-domain fit requires positive signals");
    }
    y[static_cast<int>(i)] = std::log(signals[i]);
  }
  return y;
}

void check_inputs(const std::vector<double>& signals, const AcqScheme& scheme) {
  scheme.validate();
  if (signals.size() != scheme.points.size()) {
    throw RangeError("signal count does not match the acquisition scheme");
  }
}

// columns: 1, -m(b)
Eigen::MatrixXd dti_design(const AcqScheme& scheme) {
  Eigen::MatrixXd x(scheme.points.size(), 7);
  for (std::size_t i = 0; i < scheme.points.size(); ++i) {
    int r = static_cast<int>(i);
    x(r, 0) = 1.0;
    x.block<1, 6>(r, 1) = -scheme.points[i].tensor.mandel().transpose();
  }
  return x;
}

// columns: 1, -m(b), upper triangle of m(b) m(b)^T / 2 (diagonal halved once)
Eigen::MatrixXd covariance_design(const AcqScheme& scheme) {
  Eigen::MatrixXd x(scheme.points.size(), 28);
  for (std::size_t i = 0; i < scheme.points.size(); ++i) {
    int r = static_cast<int>(i);
    Vec6 m = scheme.points[i].tensor.mandel();
    x(r, 0) = 1.0;
    x.block<1, 6>(r, 1) = -m.transpose();
    int col = 7;
    for (int p = 0; p < 6; ++p) {
      for (int q = p; q < 6; ++q) {
        x(r, col++) = (p == q ? 0.5 : 1.0) * m[p] * m[q];
      }
    }
  }
  return x;
}

void check_rank(const Eigen::MatrixXd& x, const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols()) {
    throw RankError(std::string("acquisition scheme cannot determine the ") + what);
  }
}

Eigen::VectorXd weighted_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w_sqrt) {
  Eigen::MatrixXd xw = w_sqrt.asDiagonal() * x;
  Eigen::VectorXd yw = w_sqrt.asDiagonal() * y;
  return xw.colPivHouseholderQr().solve(yw);
}

struct GammaParams {
  double s0 = 0.0;
  double kappa = 0.0;
  Vec3 psi_eigs = Vec3::Zero();
  Vec3 h_eigs = Vec3::Zero();
  std::array<double, 3> euler{};
  Mat3 rot = Mat3::Identity();
  Mat3 psi = Mat3::Zero();
  Mat3 psi_theta = Mat3::Zero();
};

// Exponentials are clamped so a fit pushed to a parameter boundary still
// yields a representable (valid, PD) parameter set.
GammaParams unpack(const Eigen::VectorXd& x) {
  auto bounded_exp = [](double u) { return std::clamp(std::exp(u), 1e-6, 1e6); };
  GammaParams p;
  p.s0 = x[0];
  p.kappa = 1.0 + bounded_exp(x[1]);
  for (int i = 0; i < 3; ++i) {
    p.psi_eigs[i] = bounded_exp(x[2 + i]);
    p.h_eigs[i] = bounded_exp(x[5 + i]);
  }
  p.euler = {x[8], x[9], x[10]};
  p.rot = euler_zyz(x[8], x[9], x[10]);
  p.psi = p.rot * p.psi_eigs.asDiagonal() * p.rot.transpose();
  Vec3 pt = p.psi_eigs.cwiseProduct(p.h_eigs.cwiseInverse() - Vec3::Constant(p.kappa));
  p.psi_theta = p.rot * pt.asDiagonal() * p.rot.transpose();
  return p;
}

void gamma_residuals(const GammaParams& p, const std::vector<double>& signals,
                     const AcqScheme& scheme, Eigen::VectorXd& r) {
  for (std::size_t j = 0; j < scheme.points.size(); ++j) {
    const Mat3 b = scheme.points[j].tensor.matrix();
    Mat3 a = Mat3::Identity() + p.psi * b;
    double det = a.determinant();
    Mat3 x = a.inverse() * p.psi_theta;
    double model = p.s0 * std::exp(-p.kappa * std::log(det) - (b * x).trace());
    r[static_cast<int>(j)] = model - signals[j];
  }
}

}  // namespace

DtiFit fit_dti(const std::vector<double>& signals, const AcqScheme& scheme) {
  check_inputs(signals, scheme);
  Eigen::MatrixXd x = dti_design(scheme);
  check_rank(x, "7 tensor parameters");
  Eigen::VectorXd y = log_signals(signals);
  Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
  DtiFit fit;
  fit.s0 = std::exp(beta[0]);
  fit.mean = SymTensor3::from_mandel(beta.segment<6>(1));
  return fit;
}

CovarianceFit fit_covariance(const std::vector<double>& signals, const AcqScheme& scheme) {
  check_inputs(signals, scheme);
  Eigen::MatrixXd x = covariance_design(scheme);
  check_rank(x, "28 cumulant parameters");
  Eigen::VectorXd y = log_signals(signals);

  // first pass weighted by measured signals, second by predicted
  Eigen::VectorXd w_sqrt(y.size());
  for (int i = 0; i < y.size(); ++i) {
    w_sqrt[i] = signals[static_cast<std::size_t>(i)];
  }
  Eigen::VectorXd beta = weighted_solve(x, y, w_sqrt);
  w_sqrt = (x * beta).array().exp().max(1e-6);
  beta = weighted_solve(x, y, w_sqrt);

  CovarianceFit fit;
  fit.s0 = std::exp(beta[0]);
  fit.moments.mean = SymTensor3::from_mandel(beta.segment<6>(1));
  int col = 7;
  for (int p = 0; p < 6; ++p) {
    for (int q = p; q < 6; ++q) {
      fit.moments.cov(p, q) = beta[col];
      fit.moments.cov(q, p) = beta[col];
      ++col;
    }
  }
  fit.cov_psd = nearest_psd(fit.moments.cov);
  fit.descriptors = descriptors_from_moments({fit.moments.mean, fit.cov_psd});
  Eigen::VectorXd pred = (x * beta).array().exp();
  double ss = 0.0;
  for (int i = 0; i < pred.size(); ++i) {
    double d = pred[i] - signals[static_cast<std::size_t>(i)];
    ss += d * d;
  }
  fit.residual_norm = std::sqrt(ss);
  return fit;
}

MvGammaFit fit_mv_gamma(const std::vector<double>& signals, const AcqScheme& scheme,
                        const MvGammaFitOptions& options) {
  check_inputs(signals, scheme);
  if (options.n_starts < 1) {
    throw RangeError("need at least one start");
  }

  DtiFit dti = fit_dti(signals, scheme);
  Vec3 evals;
  Mat3 evecs;
  dti.mean.eigen(evals, evecs);
  if (evecs.determinant() < 0.0) {
    evecs.col(0) = -evecs.col(0);
  }
  auto euler0 = euler_from_rotation(evecs);

  const double kappa0 = 2.0;
  Eigen::VectorXd x0(11);
  x0[0] = dti.s0;
  x0[1] = std::log(kappa0 - 1.0);
  for (int i = 0; i < 3; ++i) {
    x0[2 + i] = std::log(std::max(evals[i], 1e-4) / kappa0);
    x0[5 + i] = -std::log(kappa0);
  }
  x0[8] = euler0[0];
  x0[9] = euler0[1];
  x0[10] = euler0[2];

  ResidualFn fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    gamma_residuals(unpack(x), signals, scheme, r);
  };

  LmOptions lm_opts;
  lm_opts.max_iterations = options.max_iterations;
  lm_opts.step_tol = options.step_tol;
  lm_opts.grad_tol = options.grad_tol;

  LmResult best;
  int best_start = -1;
  const double ln2 = std::numbers::ln2;
  const double deg30 = std::numbers::pi / 6.0;
  for (int start = 0; start < options.n_starts; ++start) {
    Eigen::VectorXd xs = x0;
    if (start > 0) {
      SplitMix rng(options.seed, static_cast<std::uint64_t>(start));
      // the cost surface is flattest along the shape parameter at fixed mean,
      // so the extra starts ladder kappa there instead of scattering blindly
      const double ladder[4] = {1.3, 3.2, 5.5, 9.0};
      double kappa_s = ladder[(start - 1) % 4];
      xs[1] = std::log(kappa_s - 1.0);
      for (int i = 0; i < 3; ++i) {
        xs[2 + i] = std::log(std::max(evals[i], 1e-4) / kappa_s) + rng.uniform(-0.25, 0.25);
        xs[5 + i] = -std::log(kappa_s) + rng.uniform(-0.25, 0.25);
      }
      for (int i = 8; i < 11; ++i) {
        xs[i] += rng.uniform(-deg30, deg30);
      }
      if (start > 4) {
        xs[1] += rng.uniform(-ln2, ln2);
      }
    }
    LmResult res = levenberg_marquardt(fn, xs, static_cast<int>(signals.size()), lm_opts);
    if (best_start < 0 || res.cost < best.cost) {
      best = res;
      best_start = start;
    }
  }

  GammaParams p = unpack(best.x);
  MvGammaFit fit;
  fit.s0 = p.s0;
  fit.kappa = p.kappa;
  fit.psi_eigs = p.psi_eigs;
  fit.h_eigs = p.h_eigs;
  fit.euler = p.euler;
  fit.params.kappa = p.kappa;
  fit.params.psi = SymTensor3::symmetrize(p.psi);
  Vec3 theta_eigs = p.h_eigs.cwiseInverse() - Vec3::Constant(p.kappa);
  fit.params.theta =
      SymTensor3::symmetrize(p.rot * theta_eigs.asDiagonal() * p.rot.transpose());
  // Reported moments assembled in the shared eigenframe. Equivalent to
  // moments_gamma_block(fit.params) but stays finite-tolerance safe when the
  // optimizer parks a parameter at its boundary.
  SymTensor3 psi_t = fit.params.psi;
  SymTensor3 s_t = SymTensor3::symmetrize(p.psi_theta);
  fit.moments.mean = psi_t * p.kappa + s_t;
  fit.moments.cov = p.kappa * mandel_outer(psi_t, psi_t) + mandel_outer(s_t, psi_t) +
                    mandel_outer(psi_t, s_t);
  fit.descriptors = descriptors_from_moments({fit.moments.mean, nearest_psd(fit.moments.cov)});
  fit.converged = best.converged;
  fit.start_index = best_start;
  fit.iterations = best.iterations;
  fit.residual_norm = std::sqrt(2.0 * best.cost);
  return fit;
}

}  // namespace dtd
