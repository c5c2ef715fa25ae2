#pragma once

#include <Eigen/Dense>
#include <array>

#include "dtd/common.hpp"

namespace dtd {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Tensor6 = Eigen::Matrix<double, 6, 6>;

// Symmetric 3x3 tensor; only the six independent entries are stored, so
// symmetry cannot be violated by construction. Mandel vector order is
// (xx, yy, zz, sqrt(2) yz, sqrt(2) xz, sqrt(2) xy).
struct SymTensor3 {
  double xx = 0.0, yy = 0.0, zz = 0.0, yz = 0.0, xz = 0.0, xy = 0.0;

  static SymTensor3 zero() { return {}; }
  static SymTensor3 identity() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }
  static SymTensor3 isotropic(double d_iso) { return {d_iso, d_iso, d_iso, 0.0, 0.0, 0.0}; }
  static SymTensor3 diag(double a, double b, double c) { return {a, b, c, 0.0, 0.0, 0.0}; }

  // Throws DomainError if m deviates from symmetry by more than sym_tol
  // relative to its norm; small asymmetries are averaged away.
  static SymTensor3 from_matrix(const Mat3& m, double sym_tol = 1e-9);
  // Averages m and m^T without any symmetry check.
  static SymTensor3 symmetrize(const Mat3& m);
  static SymTensor3 from_mandel(const Vec6& v);

  Mat3 matrix() const;
  Vec6 mandel() const;

  double trace() const { return xx + yy + zz; }
  double operator()(int i, int j) const;

  // ascending
  Vec3 eigenvalues() const;
  void eigen(Vec3& evals, Mat3& evecs) const;
  bool is_psd(double tol = 1e-12) const;
  bool is_pd(double tol = 1e-12) const;

  SymTensor3 operator+(const SymTensor3& o) const;
  SymTensor3 operator-(const SymTensor3& o) const;
  SymTensor3 operator*(double s) const;
};

inline SymTensor3 operator*(double s, const SymTensor3& t) { return t * s; }

// Full 3x3 Frobenius inner product A:B (off-diagonals counted twice).
double frobenius(const SymTensor3& a, const SymTensor3& b);
double frobenius_norm(const SymTensor3& a);

// Mandel outer product m(a) m(b)^T; represents the fourth-order tensor a (x) b.
Tensor6 mandel_outer(const SymTensor3& a, const SymTensor3& b);

// Full elementwise contraction of two Mandel 6x6 tensors.
double contract6(const Tensor6& c, const Tensor6& e);

// Fourth-order isotropic operators in Mandel form.
Tensor6 e_iso6();    // I6 / 3
Tensor6 e_bulk6();   // m(I/3) m(I/3)^T
Tensor6 e_shear6();  // e_iso6 - e_bulk6

// Symmetrized product: the Mandel form of the covariance-style tensor
// K(a,b)[ij,kl] = (a_ik b_jl + a_il b_jk + a_jk b_il + a_jl b_ik) / 4.
// mandel_sym_product(I, I) is the Mandel identity.
Tensor6 mandel_sym_product(const SymTensor3& a, const SymTensor3& b);

// Rotation of Mandel vectors: mandel_rotation(r) * m(d) == m(r d r^T).
Tensor6 mandel_rotation(const Mat3& r);

// Eigenvalue clipping to the positive semidefinite cone (nearest in
// Frobenius norm); idempotent.
Tensor6 nearest_psd(const Tensor6& c);
SymTensor3 nearest_psd(const SymTensor3& t);

// Axially symmetric tensor with radial eigenvalue d_perp (twice) and axial
// eigenvalue d_par along the unit axis given by polar angle theta and
// azimuth phi.
struct AxisymSpec {
  double d_par = 0.0;
  double d_perp = 0.0;
  double theta = 0.0;
  double phi = 0.0;

  double d_iso() const { return (d_par + 2.0 * d_perp) / 3.0; }
  double d_aniso() const { return (d_par - d_perp) / 3.0; }
  // normalized anisotropy in [-0.5, 1]; 0 for the null tensor
  double d_delta() const;
};

Vec3 unit_vector(double theta, double phi);
SymTensor3 axisym_tensor(const AxisymSpec& spec);  // RangeError on negative eigenvalues

// Active ZYZ rotation R = Rz(alpha) Ry(beta) Rz(gamma).
Mat3 euler_zyz(double alpha, double beta, double gamma);
// Inverse of euler_zyz for proper rotations; beta in [0, pi].
std::array<double, 3> euler_from_rotation(const Mat3& r);

}  // namespace dtd
