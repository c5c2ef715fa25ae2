#pragma once

#include <iosfwd>
#include <vector>

#include "dtd/descriptors.hpp"
#include "dtd/distributions.hpp"
#include "dtd/tensor.hpp"

namespace dtd {

// Axially symmetric diffusion encoding tensor. b is the total encoding
// strength (trace, ms/um^2) and b_delta in [-0.5, 1] the shape: 1 linear,
// 0 spherical, -0.5 planar. Eigenvalues are b(1 - b_delta)/3 radially and
// b(1 + 2 b_delta)/3 along the symmetry axis.
struct BTensor {
  double b = 0.0;
  double b_delta = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  SymTensor3 tensor;
};

BTensor make_btensor(double b, double b_delta, double theta = 0.0, double phi = 0.0);

struct AcqScheme {
  std::vector<BTensor> points;

  std::size_t size() const { return points.size(); }
  // nonempty, valid shapes, and at least one point with b <= 0.15
  void validate() const;
};

// Four shells b = {0.1, 0.7, 1.4, 2.0} ms/um^2, shapes {-0.5, 0, 1}, with
// 6/6/10/16 electrostatic-repulsion directions by ascending b for the
// anisotropic shapes and 6 repeats per spherical shell; 100 points ordered
// by (b_delta, b, direction index).
AcqScheme default_scheme();

void write_scheme_csv(const AcqScheme& scheme, std::ostream& out);
AcqScheme read_scheme_csv(std::istream& in);

void write_signal_csv(const std::vector<double>& signals, std::ostream& out);
std::vector<double> read_signal_csv(std::istream& in);

// Multi-exponential signal of a discrete distribution: s0 sum_i f_i exp(-b:D_i).
std::vector<double> signal_dtd(const DiscreteDtd& dtd, const AcqScheme& scheme, double s0 = 1.0);

// Closed-form signal of the noncentral matrix-variate Gamma:
// s0 det(I + psi b)^(-kappa) exp(-b : [(I + psi b)^{-1} psi theta]).
double signal_gamma_one(const NcMvGamma& p, const BTensor& bt, double s0 = 1.0);
std::vector<double> signal_gamma(const NcMvGamma& p, const AcqScheme& scheme, double s0 = 1.0);

// Second-order cumulant signal: log s = log s0 - b:<D> + m(b)^T C m(b) / 2.
std::vector<double> signal_cumulant(const MomentPair& m, const AcqScheme& scheme, double s0 = 1.0);

}  // namespace dtd
