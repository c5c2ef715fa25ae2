#include "dtd/descriptors.hpp"

#include <cmath>

namespace dtd {

Descriptors descriptors_from_moments(const MomentPair& m) {
  Descriptors d;
  d.e_iso = m.mean.trace() / 3.0;
  d.v_iso = contract6(m.cov, e_bulk6());
  d.e_aniso2 = 0.5 * contract6(m.cov + mandel_outer(m.mean, m.mean), e_shear6());
  if (d.e_iso == 0.0) {
    throw DegenerateError("mean isotropic diffusivity is zero, cannot normalize");
  }
  d.e_aniso2_norm = d.e_aniso2 / (d.e_iso * d.e_iso);

  Vec3 evals;
  Mat3 evecs;
  m.mean.eigen(evals, evecs);
  double sum_sq = evals.squaredNorm();
  if (sum_sq > 0.0) {
    double mean_ev = evals.mean();
    double dev = (evals.array() - mean_ev).matrix().squaredNorm();
    d.fa = std::sqrt(1.5 * dev / sum_sq);
  }
  d.dec_rgb = evecs.col(2).cwiseAbs();
  return d;
}

void DiscreteDtd::validate(double tol) const {
  if (components.empty()) {
    throw RangeError("distribution has no components");
  }
  double sum = 0.0;
  for (const auto& c : components) {
    if (c.f < 0.0) {
      throw RangeError("component fractions must be nonnegative");
    }
    if (!c.d.is_psd(1e-10)) {
      throw RangeError("component tensors must be positive semidefinite");
    }
    sum += c.f;
  }
  if (std::abs(sum - 1.0) > tol * static_cast<double>(components.size())) {
    throw RangeError("component fractions must sum to 1");
  }
}

MomentPair moments_from_components(const DiscreteDtd& dtd) {
  dtd.validate();
  SymTensor3 mean;
  Tensor6 second = Tensor6::Zero();
  for (const auto& c : dtd.components) {
    mean = mean + c.d * c.f;
    Vec6 m = c.d.mandel();
    second += c.f * (m * m.transpose());
  }
  return {mean, second - mandel_outer(mean, mean)};
}

namespace {

// Axis of an axially symmetric tensor: the eigenvector whose eigenvalue is
// farther from the other two. Returns false for (near-)isotropic tensors.
bool symmetry_axis(const SymTensor3& t, Vec3& axis) {
  Vec3 evals;
  Mat3 evecs;
  t.eigen(evals, evecs);
  double span = evals[2] - evals[0];
  if (span <= 1e-9 * std::max(1.0, std::abs(evals[2]))) {
    return false;
  }
  if (evals[2] - evals[1] >= evals[1] - evals[0]) {
    axis = evecs.col(2);
  } else {
    axis = evecs.col(0);
  }
  return true;
}

}  // namespace

double order_parameter(const DiscreteDtd& dtd, Vec3* director) {
  dtd.validate();
  std::vector<std::pair<double, Vec3>> axes;
  double weight = 0.0;
  for (const auto& c : dtd.components) {
    Vec3 u;
    if (c.f > 0.0 && symmetry_axis(c.d, u)) {
      axes.emplace_back(c.f, u);
      weight += c.f;
    }
  }
  if (axes.empty()) {
    throw IsotropicError("order parameter needs at least one anisotropic component");
  }

  Mat3 saupe = Mat3::Zero();
  for (const auto& [f, u] : axes) {
    saupe += (f / weight) * (1.5 * (u * u.transpose()) - 0.5 * Mat3::Identity());
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(saupe);
  int idx = std::abs(es.eigenvalues()[0]) > std::abs(es.eigenvalues()[2]) ? 0 : 2;
  Vec3 n = es.eigenvectors().col(idx);
  if (director != nullptr) {
    *director = n;
  }

  double op = 0.0;
  for (const auto& [f, u] : axes) {
    double c = u.dot(n);
    op += (f / weight) * 0.5 * (3.0 * c * c - 1.0);
  }
  return op;
}

}  // namespace dtd
