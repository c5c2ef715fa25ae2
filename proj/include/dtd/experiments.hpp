#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dtd/descriptors.hpp"
#include "dtd/encoding.hpp"
#include "dtd/fitters.hpp"

namespace dtd {

enum class ShapeSign { Prolate, Oblate };

struct Phantom {
  std::string label;
  DiscreteDtd dtd;
  MomentPair moments;      // exact ensemble moments
  Descriptors descriptors; // exact ground truth descriptors
};

// Two isotropic modes, each a discretized Gaussian of D_iso values with
// sigma 0.05, centered on e_iso_target and separated so the ensemble
// variance V[D_iso] equals v_iso_target. n_components quadrature points
// total, split evenly between the modes.
Phantom phantom_bimodal_iso(double e_iso_target, double v_iso_target,
                            int n_components = 64);

// Axially symmetric components with a common D_iso of 0.8. The shape
// distribution is a Gaussian of D_delta with std/mean 0.1, truncated to the
// physical range and renormalized; its mean is solved so the normalized
// anisotropy second moment hits e_aniso2_norm_target. Orientations follow a
// Watson distribution tuned to the requested order parameter (within 1e-3;
// targets at or above 0.99 use a single coherent direction).
Phantom phantom_aniso(double e_aniso2_norm_target, double op_target, ShapeSign shape);

// Mixture of a free-water-like isotropic mode around D_iso 3.0 and a
// dispersed stick-like population (D_par about 1.77, D_perp about 0.31,
// order parameter 0.4), weighted f_iso to 1 - f_iso.
Phantom phantom_mixed(double f_iso);

// Evenly spread unit directions, used as an orientation quadrature.
std::vector<Vec3> fibonacci_sphere(int n);

// Magnitude signal under Rician noise at the given SNR (relative to a unit
// noise-free baseline). Noise draws are keyed by point index so a value does
// not depend on how many points precede it. SNR of infinity returns the
// input unchanged.
std::vector<double> add_rician(const std::vector<double>& clean, double snr,
                               std::uint64_t seed);

enum class FitterKind { Covariance, MvGamma };

std::string fitter_name(FitterKind kind);
FitterKind fitter_from_name(const std::string& name);

struct McOptions {
  int n_realizations = 100;
  double snr = 30.0;
  std::uint64_t seed = 0;
  int jobs = 1;
  FitterKind fitter = FitterKind::MvGamma;
  MvGammaFitOptions gamma_options; // per-realization seed is derived internally
};

struct McRecord {
  int realization = 0;
  bool ok = false;        // fit completed with finite descriptors
  bool converged = false; // always true for the covariance fitter when ok
  std::string error;
  Descriptors descriptors;
};

struct McStat {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double iqr = 0.0;  // q75 - q25
  double bias = 0.0; // median minus ground truth
};

struct McSummary {
  std::string phantom_label;
  std::string fitter;
  double snr = 0.0;
  int n_realizations = 0;
  int n_ok = 0;
  int n_converged = 0;
  Descriptors truth;
  std::map<std::string, McStat> stats; // keyed by descriptor name
  std::vector<McRecord> records;       // indexed by realization
};

// Repeated noisy acquisitions of one phantom, each fitted independently.
// Records are stored by realization index and all random streams are keyed
// by (seed, realization), so the result does not depend on the job count.
McSummary run_monte_carlo(const Phantom& phantom, const AcqScheme& scheme,
                          const McOptions& options);

} // namespace dtd
