#pragma once

#include <array>
#include <cstdint>
#include <functional>

#include "dtd/tensor.hpp"

namespace dtd {

using Mat3L = Eigen::Matrix<long double, 3, 3>;

// Noncentral matrix-variate Gamma distribution over symmetric 3x3 tensors:
// shape kappa > 1, positive definite scale psi, symmetric noncentrality
// theta whose product with psi is symmetric (they share an eigenbasis).
struct NcMvGamma {
  double kappa = 2.0;
  SymTensor3 psi = SymTensor3::identity();
  SymTensor3 theta = SymTensor3::zero();

  void validate(double commute_tol = 1e-10) const;
};

// Matrix-variate Gaussian with mean m and scale pair (sigma, psi), both
// positive semidefinite.
struct MvGaussian {
  SymTensor3 mean = SymTensor3::zero();
  SymTensor3 sigma = SymTensor3::identity();
  SymTensor3 psi = SymTensor3::identity();

  void validate() const;
};

struct MomentPair {
  SymTensor3 mean;
  Tensor6 cov;
};

// Moment generating function at symmetric argument z. Throws DomainError
// when z psi has an eigenvalue >= 1 (outside the convergence region).
double mgf_gamma(const NcMvGamma& p, const SymTensor3& z);
double log_mgf_gamma(const NcMvGamma& p, const SymTensor3& z);

// Gaussian MGF; defined for all symmetric z.
double mgf_gaussian(const MvGaussian& g, const SymTensor3& z);

// Analytic moments. Products in the covariance are symmetrized Kronecker
// products of symmetric 3x3 tensors (mandel_sym_product in Mandel form).
SymTensor3 mean_gamma(const NcMvGamma& p);  // psi (kappa I + theta), symmetrized
Tensor6 cov_gamma(const NcMvGamma& p);      // kappa psi(x)psi + 2 psi(x)sym(psi theta)
MomentPair moments_gamma(const NcMvGamma& p);

// Covariance reported by the signal representation: outer products of
// Mandel vectors instead of symmetrized Kronecker products. In the shared
// eigenbasis it is zero outside the upper-left 3x3 block, so it carries
// size variance but no shape or orientation variance. cov_gamma is the
// distribution's full second cumulant; this is the reporting convention
// used when the representation is read out as moments and descriptors.
Tensor6 cov_gamma_block(const NcMvGamma& p);
MomentPair moments_gamma_block(const NcMvGamma& p);

// Mean m and the Mandel covariance of the symmetric part of the Gaussian
// variate, mandel_sym_product(sigma, psi).
MomentPair moments_gaussian(const MvGaussian& g);

// Reparametrization psi = mean h, theta = h^{-1} - kappa I. Requires kappa
// > 1, h positive definite and commuting with mean.
NcMvGamma gamma_from_mean_h(double kappa, const SymTensor3& mean, const SymTensor3& h);
// Covariance through the mean/h route: 2 mean(x)psi - kappa psi(x)psi.
Tensor6 cov_gamma_mean_h(double kappa, const SymTensor3& mean, const SymTensor3& h);

// ---------------------------------------------------------------------------
// Finite-difference moment oracle. Functions are evaluated in extended
// precision: with the default step h = 1e-5 the round-off of a double
// evaluation would dominate second differences.
using MgfFn = std::function<long double(const Mat3L&)>;

MgfFn mgf_gamma_fn(const NcMvGamma& p);
MgfFn mgf_gaussian_fn(const MvGaussian& g);

// Central differences of the MGF at zero argument. Off-diagonal entries are
// perturbed in symmetric pairs and divided by the pair multiplicity so the
// result matches the unconstrained-argument derivative convention of the
// analytic formulas. Optional one-step Richardson extrapolation.
SymTensor3 fd_mean(const MgfFn& f, double h = 1e-5, bool richardson = false);
Tensor6 fd_cov(const MgfFn& f, double h = 1e-5, bool richardson = false);

// ---------------------------------------------------------------------------
// Sampling oracle for half-integer shape: kappa = n/2 with integer n >= 3.
// D = sum_{i=1..n} x_i x_i^T with x_i ~ N(mu_i, psi/2) and
// sum_i mu_i mu_i^T = psi theta reproduces the target MGF exactly.
// Throws UnsupportedShape when 2 kappa is not an integer >= 3 and
// UnsupportedNoncentrality when psi theta is not positive semidefinite.
class GammaSampler {
 public:
  GammaSampler(const NcMvGamma& p, std::uint64_t seed);

  // Deterministic in (seed, index); independent draws per index.
  SymTensor3 sample(std::uint64_t index) const;
  int n_summands() const { return n_; }

 private:
  int n_;
  std::uint64_t seed_;
  Mat3 chol_half_psi_;
  std::array<Vec3, 3> mu_;
};

// Empirical mean/covariance with entrywise standard errors (two passes over
// a deterministic sample stream).
struct SampleStats {
  SymTensor3 mean;
  Tensor6 cov;
  Vec6 mean_se;
  Tensor6 cov_se;
  std::uint64_t n = 0;
};

SampleStats sample_moments(const NcMvGamma& p, std::uint64_t n, std::uint64_t seed);

}  // namespace dtd
