#pragma once

#include <cstdint>
#include <vector>

#include "dtd/descriptors.hpp"
#include "dtd/distributions.hpp"
#include "dtd/encoding.hpp"

namespace dtd {

// Log-linear diffusion tensor fit (7 parameters), used as initializer.
struct DtiFit {
  double s0 = 0.0;
  SymTensor3 mean;
};

// Throws RankError when the scheme cannot determine all 7 parameters and
// RangeError on nonpositive signals.
DtiFit fit_dti(const std::vector<double>& signals, const AcqScheme& scheme);

// Log-linear cumulant fit of mean and full covariance tensor
// (1 + 6 + 21 = 28 parameters) with one reweighting pass (weights = squared
// predicted signals).
struct CovarianceFit {
  double s0 = 0.0;
  MomentPair moments;        // raw least-squares estimates
  Tensor6 cov_psd;           // eigenvalue-clipped covariance
  Descriptors descriptors;   // computed from the repaired covariance
  double residual_norm = 0.0;  // linear-domain
};

CovarianceFit fit_covariance(const std::vector<double>& signals, const AcqScheme& scheme);

struct MvGammaFitOptions {
  int n_starts = 5;
  std::uint64_t seed = 0;
  int max_iterations = 500;
  double step_tol = 1e-10;
  double grad_tol = 1e-10;
};

// Nonlinear 11-parameter fit of the noncentral matrix-variate Gamma signal
// representation: s0, kappa, eigenvalues of psi and of h, and the ZYZ Euler
// angles of their shared eigenbasis. Linear-domain least squares, multi-start
// (start 0 from the DTI fit, remaining starts perturbed). Non-convergence is
// reported through the flag; the best parameters found are always returned.
struct MvGammaFit {
  double s0 = 0.0;
  double kappa = 0.0;
  Vec3 psi_eigs = Vec3::Zero();
  Vec3 h_eigs = Vec3::Zero();
  std::array<double, 3> euler{};
  NcMvGamma params;
  MomentPair moments;       // moments_gamma_block of params
  Descriptors descriptors;  // from PSD-repaired block covariance
  bool converged = false;
  int start_index = -1;
  int iterations = 0;
  double residual_norm = 0.0;
};

MvGammaFit fit_mv_gamma(const std::vector<double>& signals, const AcqScheme& scheme,
                        const MvGammaFitOptions& options = {});

}  // namespace dtd
