#pragma once

#include <vector>

#include "dtd/distributions.hpp"
#include "dtd/tensor.hpp"

namespace dtd {

// Voxel-scale statistical descriptors of a diffusion tensor distribution.
// Units: e_iso um^2/ms, v_iso um^4/ms^2, e_aniso2 um^4/ms^2;
// e_aniso2_norm and fa are dimensionless.
struct Descriptors {
  double e_iso = 0.0;
  double v_iso = 0.0;
  double e_aniso2 = 0.0;
  double e_aniso2_norm = 0.0;
  double fa = 0.0;
  Vec3 dec_rgb = Vec3::Zero();  // |principal eigenvector| components
};

// e_iso   = <D> : I/3
// v_iso   = C : E_bulk
// e_aniso2 = (C + <D>(x)<D>) : E_shear / 2
// e_aniso2_norm = e_aniso2 / e_iso^2  (DegenerateError when e_iso == 0)
Descriptors descriptors_from_moments(const MomentPair& m);

struct DtdComponent {
  double f = 0.0;
  SymTensor3 d;
};

struct DiscreteDtd {
  std::vector<DtdComponent> components;

  // fractions nonnegative and summing to 1 within tol; tensors PSD
  void validate(double tol = 1e-12) const;
};

MomentPair moments_from_components(const DiscreteDtd& dtd);

// Orientational order parameter: the Saupe tensor of the f-weighted component
// symmetry axes is built, its largest-magnitude eigenvector taken as the
// director n, and OP = sum_i f_i P2(u_i . n) in [-0.5, 1] returned. Isotropic
// components carry no axis and are excluded (weights renormalized); throws
// IsotropicError when no anisotropic component exists.
double order_parameter(const DiscreteDtd& dtd, Vec3* director = nullptr);

}  // namespace dtd
