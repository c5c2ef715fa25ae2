#include "dtd/tensor.hpp"

#include <cmath>

namespace dtd {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;

// Mandel slot -> index pair
constexpr int kRow[6] = {0, 1, 2, 1, 0, 0};
constexpr int kCol[6] = {0, 1, 2, 2, 2, 1};
}  // namespace

SymTensor3 SymTensor3::from_matrix(const Mat3& m, double sym_tol) {
  double scale = std::max(1.0, m.norm());
  double asym = (m - m.transpose()).norm();
  if (asym > sym_tol * scale) {
    throw DomainError("matrix is not symmetric");
  }
  return {m(0, 0), m(1, 1), m(2, 2),
          0.5 * (m(1, 2) + m(2, 1)), 0.5 * (m(0, 2) + m(2, 0)), 0.5 * (m(0, 1) + m(1, 0))};
}

SymTensor3 SymTensor3::symmetrize(const Mat3& m) {
  return {m(0, 0), m(1, 1), m(2, 2),
          0.5 * (m(1, 2) + m(2, 1)), 0.5 * (m(0, 2) + m(2, 0)), 0.5 * (m(0, 1) + m(1, 0))};
}

SymTensor3 SymTensor3::from_mandel(const Vec6& v) {
  return {v[0], v[1], v[2], v[3] / kSqrt2, v[4] / kSqrt2, v[5] / kSqrt2};
}

Mat3 SymTensor3::matrix() const {
  Mat3 m;
  m << xx, xy, xz,
       xy, yy, yz,
       xz, yz, zz;
  return m;
}

Vec6 SymTensor3::mandel() const {
  Vec6 v;
  v << xx, yy, zz, kSqrt2 * yz, kSqrt2 * xz, kSqrt2 * xy;
  return v;
}

double SymTensor3::operator()(int i, int j) const {
  if (i == j) return i == 0 ? xx : (i == 1 ? yy : zz);
  int s = i + j;  // 0+1=1 -> xy, 0+2=2 -> xz, 1+2=3 -> yz
  return s == 1 ? xy : (s == 2 ? xz : yz);
}

Vec3 SymTensor3::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Mat3> es(matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

void SymTensor3::eigen(Vec3& evals, Mat3& evecs) const {
  Eigen::SelfAdjointEigenSolver<Mat3> es(matrix());
  evals = es.eigenvalues();
  evecs = es.eigenvectors();
}

bool SymTensor3::is_psd(double tol) const {
  Vec3 ev = eigenvalues();
  double scale = std::max(1.0, std::abs(ev[2]));
  return ev[0] >= -tol * scale;
}

bool SymTensor3::is_pd(double tol) const {
  Vec3 ev = eigenvalues();
  double scale = std::max(1.0, std::abs(ev[2]));
  return ev[0] > tol * scale;
}

SymTensor3 SymTensor3::operator+(const SymTensor3& o) const {
  return {xx + o.xx, yy + o.yy, zz + o.zz, yz + o.yz, xz + o.xz, xy + o.xy};
}

SymTensor3 SymTensor3::operator-(const SymTensor3& o) const {
  return {xx - o.xx, yy - o.yy, zz - o.zz, yz - o.yz, xz - o.xz, xy - o.xy};
}

SymTensor3 SymTensor3::operator*(double s) const {
  return {xx * s, yy * s, zz * s, yz * s, xz * s, xy * s};
}

double frobenius(const SymTensor3& a, const SymTensor3& b) {
  return a.xx * b.xx + a.yy * b.yy + a.zz * b.zz +
         2.0 * (a.yz * b.yz + a.xz * b.xz + a.xy * b.xy);
}

double frobenius_norm(const SymTensor3& a) { return std::sqrt(frobenius(a, a)); }

Tensor6 mandel_outer(const SymTensor3& a, const SymTensor3& b) {
  return a.mandel() * b.mandel().transpose();
}

double contract6(const Tensor6& c, const Tensor6& e) {
  return (c.array() * e.array()).sum();
}

Tensor6 e_iso6() { return Tensor6::Identity() / 3.0; }

Tensor6 e_bulk6() {
  SymTensor3 third = SymTensor3::isotropic(1.0 / 3.0);
  return mandel_outer(third, third);
}

Tensor6 e_shear6() { return e_iso6() - e_bulk6(); }

Tensor6 mandel_sym_product(const SymTensor3& a, const SymTensor3& b) {
  Tensor6 k;
  for (int p = 0; p < 6; ++p) {
    int i = kRow[p], j = kCol[p];
    double sp = p < 3 ? 1.0 : kSqrt2;
    for (int q = 0; q < 6; ++q) {
      int kk = kRow[q], l = kCol[q];
      double sq = q < 3 ? 1.0 : kSqrt2;
      double v = a(i, kk) * b(j, l) + a(i, l) * b(j, kk) +
                 a(j, kk) * b(i, l) + a(j, l) * b(i, kk);
      k(p, q) = 0.25 * sp * sq * v;
    }
  }
  return k;
}

Tensor6 mandel_rotation(const Mat3& r) {
  Tensor6 q;
  for (int p = 0; p < 6; ++p) {
    int i = kRow[p], j = kCol[p];
    // basis tensor with unit Mandel coordinate p
    SymTensor3 e = SymTensor3::zero();
    double v = p < 3 ? 1.0 : 1.0 / kSqrt2;
    Mat3 m = Mat3::Zero();
    m(i, j) = v;
    m(j, i) = v;
    e = SymTensor3::from_matrix(m);
    Mat3 rot = r * e.matrix() * r.transpose();
    q.col(p) = SymTensor3::symmetrize(rot).mandel();
  }
  return q;
}

Tensor6 nearest_psd(const Tensor6& c) {
  Tensor6 sym = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Tensor6> es(sym);
  Vec6 ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

SymTensor3 nearest_psd(const SymTensor3& t) {
  Vec3 evals;
  Mat3 evecs;
  t.eigen(evals, evecs);
  Vec3 ev = evals.cwiseMax(0.0);
  Mat3 m = evecs * ev.asDiagonal() * evecs.transpose();
  return SymTensor3::symmetrize(m);
}

double AxisymSpec::d_delta() const {
  double iso = d_iso();
  if (iso == 0.0) return 0.0;
  return (d_par - d_perp) / (3.0 * iso);
}

Vec3 unit_vector(double theta, double phi) {
  double st = std::sin(theta);
  return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

SymTensor3 axisym_tensor(const AxisymSpec& spec) {
  if (spec.d_par < 0.0 || spec.d_perp < 0.0) {
    throw RangeError("axisymmetric tensor requires nonnegative eigenvalues");
  }
  Vec3 u = unit_vector(spec.theta, spec.phi);
  Mat3 m = spec.d_perp * Mat3::Identity() + (spec.d_par - spec.d_perp) * (u * u.transpose());
  return SymTensor3::symmetrize(m);
}

Mat3 euler_zyz(double alpha, double beta, double gamma) {
  Mat3 rz1 = Eigen::AngleAxisd(alpha, Vec3::UnitZ()).toRotationMatrix();
  Mat3 ry = Eigen::AngleAxisd(beta, Vec3::UnitY()).toRotationMatrix();
  Mat3 rz2 = Eigen::AngleAxisd(gamma, Vec3::UnitZ()).toRotationMatrix();
  return rz1 * ry * rz2;
}

std::array<double, 3> euler_from_rotation(const Mat3& r) {
  double beta = std::atan2(std::hypot(r(0, 2), r(1, 2)), r(2, 2));
  double alpha, gamma;
  if (std::hypot(r(0, 2), r(1, 2)) > 1e-12) {
    alpha = std::atan2(r(1, 2), r(0, 2));
    gamma = std::atan2(r(2, 1), -r(2, 0));
  } else {
    // beta = 0 or pi: only alpha + gamma (or alpha - gamma) is determined
    alpha = std::atan2(r(1, 0), r(0, 0));
    if (r(2, 2) < 0.0) alpha = -alpha;
    gamma = 0.0;
  }
  return {alpha, beta, gamma};
}

}  // namespace dtd
