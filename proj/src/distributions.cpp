#include "dtd/distributions.hpp"

#include <cmath>

#include "dtd/rng.hpp"

namespace dtd {

namespace {

constexpr int kRow[6] = {0, 1, 2, 1, 0, 0};
constexpr int kCol[6] = {0, 1, 2, 2, 2, 1};
constexpr double kSqrt2 = 1.4142135623730951;

template <typename Real>
using M3 = Eigen::Matrix<Real, 3, 3>;

// log MGF of the noncentral matrix-variate Gamma at symmetric z:
// -kappa log det(I - z psi) + Tr[(I - z psi)^{-1} z psi theta].
// The determinant factor is evaluated through the eigenvalues of the
// symmetric congruence L^T z L (psi = L L^T), which are the eigenvalues of
// z psi; this gives the convergence check and a cancellation-free log-det.
template <typename Real>
Real log_mgf_gamma_t(Real kappa, const M3<Real>& psi, const M3<Real>& theta, const M3<Real>& z) {
  Eigen::LLT<M3<Real>> llt(psi);
  M3<Real> l = llt.matrixL();
  M3<Real> w = l.transpose() * z * l;
  Eigen::SelfAdjointEigenSolver<M3<Real>> es(w, Eigen::EigenvaluesOnly);
  Real log_det = 0;
  for (int i = 0; i < 3; ++i) {
    Real lam = es.eigenvalues()[i];
    if (lam >= Real(1)) {
      throw DomainError("argument outside the MGF convergence region");
    }
    log_det += std::log1p(-lam);
  }
  M3<Real> a = M3<Real>::Identity() - z * psi;
  M3<Real> x = a.partialPivLu().solve(z * psi * theta);
  return -kappa * log_det + x.trace();
}

template <typename Real>
Real log_mgf_gaussian_t(const M3<Real>& mean, const M3<Real>& sigma, const M3<Real>& psi,
                        const M3<Real>& z) {
  return (z * mean).trace() + Real(0.5) * (z * sigma * z * psi).trace();
}

// symmetrized product (a b + b a) / 2
SymTensor3 sym_product(const SymTensor3& a, const SymTensor3& b) {
  Mat3 m = a.matrix() * b.matrix();
  return SymTensor3::symmetrize(m);
}

Mat3L fd_direction(int a) {
  Mat3L p = Mat3L::Zero();
  p(kRow[a], kCol[a]) = 1;
  p(kCol[a], kRow[a]) = 1;
  return p;
}

// number of independent matrix entries perturbed by the direction
long double fd_mult(int a) { return a < 3 ? 1.0L : 2.0L; }

std::array<long double, 6> fd_mean_raw(const MgfFn& f, long double h) {
  std::array<long double, 6> g{};
  for (int a = 0; a < 6; ++a) {
    Mat3L p = fd_direction(a);
    g[a] = (f(h * p) - f(-h * p)) / (2 * h * fd_mult(a));
  }
  return g;
}

Eigen::Matrix<long double, 6, 6> fd_second_raw(const MgfFn& f, long double h) {
  Eigen::Matrix<long double, 6, 6> t;
  long double f0 = f(Mat3L::Zero());
  for (int a = 0; a < 6; ++a) {
    Mat3L p = fd_direction(a);
    long double m = fd_mult(a);
    t(a, a) = (f(h * p) - 2 * f0 + f(-h * p)) / (h * h * m * m);
  }
  for (int a = 0; a < 6; ++a) {
    for (int b = a + 1; b < 6; ++b) {
      Mat3L pa = fd_direction(a), pb = fd_direction(b);
      long double v = (f(h * (pa + pb)) - f(h * (pa - pb)) - f(h * (pb - pa)) + f(-h * (pa + pb))) /
                      (4 * h * h * fd_mult(a) * fd_mult(b));
      t(a, b) = v;
      t(b, a) = v;
    }
  }
  return t;
}

Tensor6 fd_cov_at(const MgfFn& f, long double h) {
  auto g = fd_mean_raw(f, h);
  auto t = fd_second_raw(f, h);
  Tensor6 cov;
  for (int a = 0; a < 6; ++a) {
    double sa = a < 3 ? 1.0 : kSqrt2;
    for (int b = 0; b < 6; ++b) {
      double sb = b < 3 ? 1.0 : kSqrt2;
      cov(a, b) = static_cast<double>(sa * sb * (t(a, b) - g[a] * g[b]));
    }
  }
  return cov;
}

SymTensor3 fd_mean_at(const MgfFn& f, long double h) {
  auto g = fd_mean_raw(f, h);
  return {static_cast<double>(g[0]), static_cast<double>(g[1]), static_cast<double>(g[2]),
          static_cast<double>(g[3]), static_cast<double>(g[4]), static_cast<double>(g[5])};
}

}  // namespace

void NcMvGamma::validate(double commute_tol) const {
  if (!(kappa > 1.0)) {
    throw DomainError("shape parameter must exceed 1");
  }
  if (!psi.is_pd()) {
    throw DomainError("scale tensor must be positive definite");
  }
  Mat3 pt = psi.matrix() * theta.matrix();
  double scale = std::max(1.0, pt.norm());
  if ((pt - pt.transpose()).norm() > commute_tol * scale) {
    throw CommutationError("scale and noncentrality tensors must commute");
  }
}

void MvGaussian::validate() const {
  if (!sigma.is_psd() || !psi.is_psd()) {
    throw DomainError("Gaussian scale tensors must be positive semidefinite");
  }
}

double log_mgf_gamma(const NcMvGamma& p, const SymTensor3& z) {
  p.validate();
  return log_mgf_gamma_t<double>(p.kappa, p.psi.matrix(), p.theta.matrix(), z.matrix());
}

double mgf_gamma(const NcMvGamma& p, const SymTensor3& z) { return std::exp(log_mgf_gamma(p, z)); }

double mgf_gaussian(const MvGaussian& g, const SymTensor3& z) {
  g.validate();
  return std::exp(
      log_mgf_gaussian_t<double>(g.mean.matrix(), g.sigma.matrix(), g.psi.matrix(), z.matrix()));
}

SymTensor3 mean_gamma(const NcMvGamma& p) {
  p.validate();
  return p.psi * p.kappa + sym_product(p.psi, p.theta);
}

Tensor6 cov_gamma(const NcMvGamma& p) {
  p.validate();
  SymTensor3 pt = sym_product(p.psi, p.theta);
  return p.kappa * mandel_sym_product(p.psi, p.psi) + 2.0 * mandel_sym_product(p.psi, pt);
}

MomentPair moments_gamma(const NcMvGamma& p) { return {mean_gamma(p), cov_gamma(p)}; }

Tensor6 cov_gamma_block(const NcMvGamma& p) {
  p.validate();
  SymTensor3 pt = sym_product(p.psi, p.theta);
  return p.kappa * mandel_outer(p.psi, p.psi) + mandel_outer(pt, p.psi) +
         mandel_outer(p.psi, pt);
}

MomentPair moments_gamma_block(const NcMvGamma& p) { return {mean_gamma(p), cov_gamma_block(p)}; }

MomentPair moments_gaussian(const MvGaussian& g) {
  g.validate();
  return {g.mean, mandel_sym_product(g.sigma, g.psi)};
}

NcMvGamma gamma_from_mean_h(double kappa, const SymTensor3& mean, const SymTensor3& h) {
  if (!(kappa > 1.0)) {
    throw DomainError("shape parameter must exceed 1");
  }
  if (!h.is_pd()) {
    throw DomainError("h tensor must be positive definite");
  }
  Mat3 mh = mean.matrix() * h.matrix();
  double scale = std::max(1.0, mh.norm());
  if ((mh - mh.transpose()).norm() > 1e-9 * scale) {
    throw CommutationError("mean and h tensors must commute");
  }
  Vec3 evals;
  Mat3 evecs;
  h.eigen(evals, evecs);
  Mat3 h_inv = evecs * evals.cwiseInverse().asDiagonal() * evecs.transpose();
  NcMvGamma p;
  p.kappa = kappa;
  p.psi = SymTensor3::symmetrize(mh);
  p.theta = SymTensor3::symmetrize(h_inv) -
            SymTensor3::isotropic(kappa);
  p.validate();
  return p;
}

Tensor6 cov_gamma_mean_h(double kappa, const SymTensor3& mean, const SymTensor3& h) {
  NcMvGamma p = gamma_from_mean_h(kappa, mean, h);
  return 2.0 * mandel_sym_product(mean, p.psi) - kappa * mandel_sym_product(p.psi, p.psi);
}

MgfFn mgf_gamma_fn(const NcMvGamma& p) {
  p.validate();
  long double kappa = p.kappa;
  Mat3L psi = p.psi.matrix().cast<long double>();
  Mat3L theta = p.theta.matrix().cast<long double>();
  return [kappa, psi, theta](const Mat3L& z) {
    return std::exp(log_mgf_gamma_t<long double>(kappa, psi, theta, z));
  };
}

MgfFn mgf_gaussian_fn(const MvGaussian& g) {
  g.validate();
  Mat3L mean = g.mean.matrix().cast<long double>();
  Mat3L sigma = g.sigma.matrix().cast<long double>();
  Mat3L psi = g.psi.matrix().cast<long double>();
  return [mean, sigma, psi](const Mat3L& z) {
    return std::exp(log_mgf_gaussian_t<long double>(mean, sigma, psi, z));
  };
}

SymTensor3 fd_mean(const MgfFn& f, double h, bool richardson) {
  if (!(h > 0.0)) {
    throw RangeError("finite-difference step must be positive");
  }
  SymTensor3 coarse = fd_mean_at(f, h);
  if (!richardson) return coarse;
  SymTensor3 fine = fd_mean_at(f, 0.5L * static_cast<long double>(h));
  return fine * (4.0 / 3.0) - coarse * (1.0 / 3.0);
}

Tensor6 fd_cov(const MgfFn& f, double h, bool richardson) {
  if (!(h > 0.0)) {
    throw RangeError("finite-difference step must be positive");
  }
  Tensor6 coarse = fd_cov_at(f, h);
  if (!richardson) return coarse;
  Tensor6 fine = fd_cov_at(f, 0.5L * static_cast<long double>(h));
  return (4.0 * fine - coarse) / 3.0;
}

GammaSampler::GammaSampler(const NcMvGamma& p, std::uint64_t seed) : seed_(seed) {
  p.validate();
  double two_kappa = 2.0 * p.kappa;
  long long n = std::llround(two_kappa);
  if (std::abs(two_kappa - static_cast<double>(n)) > 1e-9 || n < 3) {
    throw UnsupportedShape("sampling requires kappa = n/2 with integer n >= 3");
  }
  n_ = static_cast<int>(n);

  Eigen::LLT<Mat3> llt(0.5 * p.psi.matrix());
  chol_half_psi_ = llt.matrixL();

  SymTensor3 pt = sym_product(p.psi, p.theta);
  Vec3 evals;
  Mat3 evecs;
  pt.eigen(evals, evecs);
  double scale = std::max(1.0, std::abs(evals[2]));
  if (evals[0] < -1e-10 * scale) {
    throw UnsupportedNoncentrality("sampling requires a positive semidefinite psi theta product");
  }
  for (int c = 0; c < 3; ++c) {
    mu_[c] = std::sqrt(std::max(evals[c], 0.0)) * evecs.col(c);
  }
}

SymTensor3 GammaSampler::sample(std::uint64_t index) const {
  SplitMix rng(seed_, index);
  SymTensor3 d;
  for (int i = 0; i < n_; ++i) {
    Vec3 g(rng.normal(), rng.normal(), rng.normal());
    Vec3 x = chol_half_psi_ * g;
    if (i < 3) x += mu_[i];
    d.xx += x[0] * x[0];
    d.yy += x[1] * x[1];
    d.zz += x[2] * x[2];
    d.yz += x[1] * x[2];
    d.xz += x[0] * x[2];
    d.xy += x[0] * x[1];
  }
  return d;
}

SampleStats sample_moments(const NcMvGamma& p, std::uint64_t n, std::uint64_t seed) {
  if (n < 2) {
    throw RangeError("need at least two samples");
  }
  GammaSampler sampler(p, seed);
  Vec6 sum = Vec6::Zero();
  for (std::uint64_t i = 0; i < n; ++i) {
    sum += sampler.sample(i).mandel();
  }
  Vec6 mean = sum / static_cast<double>(n);

  Tensor6 s2 = Tensor6::Zero();
  Tensor6 s4 = Tensor6::Zero();
  for (std::uint64_t i = 0; i < n; ++i) {
    Vec6 w = sampler.sample(i).mandel() - mean;
    Tensor6 o = w * w.transpose();
    s2 += o;
    s4 += o.cwiseProduct(o);
  }

  SampleStats st;
  st.n = n;
  st.mean = SymTensor3::from_mandel(mean);
  double dn = static_cast<double>(n);
  st.cov = s2 / (dn - 1.0);
  Tensor6 m2 = s2 / dn;
  Tensor6 var_of_cov = (s4 / dn - m2.cwiseProduct(m2)).cwiseMax(0.0) / dn;
  st.cov_se = var_of_cov.cwiseSqrt();
  for (int a = 0; a < 6; ++a) {
    st.mean_se[a] = std::sqrt(st.cov(a, a) / dn);
  }
  return st;
}

}  // namespace dtd
