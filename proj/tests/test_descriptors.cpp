#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dtd/descriptors.hpp"
#include "dtd/experiments.hpp"
#include "dtd/rng.hpp"

using namespace dtd;

namespace {

DiscreteDtd two_iso(double d1, double d2) {
  return {{{0.5, SymTensor3::isotropic(d1)}, {0.5, SymTensor3::isotropic(d2)}}};
}

DiscreteDtd random_dtd(SplitMix& rng, int n) {
  DiscreteDtd dtd;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    DtdComponent c;
    c.f = rng.next_double_open();
    sum += c.f;
    AxisymSpec spec{rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0), rng.uniform(0.0, M_PI),
                    rng.uniform(-M_PI, M_PI)};
    c.d = axisym_tensor(spec);
    dtd.components.push_back(c);
  }
  for (auto& c : dtd.components) {
    c.f /= sum;
  }
  return dtd;
}

}  // namespace

TEST_CASE("point mass stick descriptors") {
  MomentPair m{SymTensor3::diag(0.0, 0.0, 2.0), Tensor6::Zero()};
  Descriptors d = descriptors_from_moments(m);
  CHECK(d.e_iso == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(d.v_iso == doctest::Approx(0.0));
  CHECK(d.e_aniso2 == doctest::Approx(4.0 / 9.0).epsilon(1e-13));
  CHECK(d.e_aniso2_norm == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(d.fa == doctest::Approx(1.0).epsilon(1e-13));
  CHECK((d.dec_rgb - Vec3(0.0, 0.0, 1.0)).norm() <= 1e-13);
}

TEST_CASE("two isotropic modes") {
  MomentPair m = moments_from_components(two_iso(3.0, 0.8));
  Descriptors d = descriptors_from_moments(m);
  CHECK(d.e_iso == doctest::Approx(1.9).epsilon(1e-14));
  CHECK(d.v_iso == doctest::Approx(1.21).epsilon(1e-13));
  CHECK(d.e_aniso2 == doctest::Approx(0.0));
  CHECK(std::abs(d.e_aniso2_norm) <= 1e-13);
  CHECK(d.fa == doctest::Approx(0.0));
}

TEST_CASE("zero mean cannot be normalized") {
  CHECK_THROWS_AS(descriptors_from_moments({SymTensor3::zero(), Tensor6::Zero()}),
                  DegenerateError);
}

TEST_CASE("isotropic gamma read out through the block covariance") {
  NcMvGamma p{2.0, SymTensor3::isotropic(0.5), SymTensor3::zero()};
  Descriptors d = descriptors_from_moments(moments_gamma_block(p));
  CHECK(d.e_iso == doctest::Approx(1.0).epsilon(1e-14));
  // kappa psi^2
  CHECK(d.v_iso == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(std::abs(d.e_aniso2) <= 1e-13);
}

TEST_CASE("component moments basics") {
  DiscreteDtd single{{{1.0, SymTensor3::diag(1.0, 2.0, 3.0)}}};
  MomentPair m = moments_from_components(single);
  CHECK(frobenius_norm(m.mean - SymTensor3::diag(1.0, 2.0, 3.0)) <= 1e-14);
  CHECK(m.cov.norm() <= 1e-13);

  DiscreteDtd bad_f{{{-0.1, SymTensor3::identity()}, {1.1, SymTensor3::identity()}}};
  CHECK_THROWS_AS(moments_from_components(bad_f), RangeError);
  DiscreteDtd bad_sum{{{0.4, SymTensor3::identity()}, {0.4, SymTensor3::identity()}}};
  CHECK_THROWS_AS(moments_from_components(bad_sum), RangeError);
}

TEST_CASE("component moments are proper variances") {
  SplitMix rng(31);
  for (int i = 0; i < 1000; ++i) {
    DiscreteDtd dtd = random_dtd(rng, 2 + static_cast<int>(rng.next_u64() % 6));
    MomentPair m = moments_from_components(dtd);
    CHECK(contract6(m.cov, e_bulk6()) >= -1e-12);
    CHECK(contract6(m.cov + mandel_outer(m.mean, m.mean), e_shear6()) >= -1e-12);
  }
}

TEST_CASE("descriptors match direct component statistics") {
  SplitMix rng(32);
  for (int i = 0; i < 200; ++i) {
    DiscreteDtd dtd = random_dtd(rng, 4);
    MomentPair m = moments_from_components(dtd);
    Descriptors d = descriptors_from_moments(m);

    double e_iso = 0.0;
    for (const auto& c : dtd.components) {
      e_iso += c.f * c.d.trace() / 3.0;
    }
    double v_iso = 0.0, e_aniso2 = 0.0;
    for (const auto& c : dtd.components) {
      double di = c.d.trace() / 3.0;
      v_iso += c.f * (di - e_iso) * (di - e_iso);
      // shear content of an axially symmetric tensor is its squared
      // anisotropic diffusivity, independent of orientation
      Vec3 ev = c.d.eigenvalues();
      double mean_ev = ev.mean();
      e_aniso2 += c.f * (ev.array() - mean_ev).matrix().squaredNorm() / 6.0;
    }
    CHECK(d.e_iso == doctest::Approx(e_iso).epsilon(1e-11));
    CHECK(d.v_iso == doctest::Approx(v_iso).epsilon(1e-9).scale(1.0));
    CHECK(d.e_aniso2 == doctest::Approx(e_aniso2).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("descriptors are rotation invariant") {
  SplitMix rng(33);
  DiscreteDtd dtd = random_dtd(rng, 5);
  MomentPair m = moments_from_components(dtd);
  Descriptors base = descriptors_from_moments(m);
  for (int i = 0; i < 20; ++i) {
    Mat3 r = euler_zyz(rng.uniform(0.0, 2.0 * M_PI), rng.uniform(0.0, M_PI),
                       rng.uniform(0.0, 2.0 * M_PI));
    Tensor6 rot = mandel_rotation(r);
    MomentPair mr{SymTensor3::from_matrix(r * m.mean.matrix() * r.transpose()),
                  rot * m.cov * rot.transpose()};
    Descriptors d = descriptors_from_moments(mr);
    CHECK(d.e_iso == doctest::Approx(base.e_iso).epsilon(1e-12));
    CHECK(d.v_iso == doctest::Approx(base.v_iso).epsilon(1e-10));
    CHECK(d.e_aniso2 == doctest::Approx(base.e_aniso2).epsilon(1e-10));
    CHECK(d.fa == doctest::Approx(base.fa).epsilon(1e-10));
  }
}

TEST_CASE("descriptors scale equivariance") {
  SplitMix rng(34);
  DiscreteDtd dtd = random_dtd(rng, 4);
  MomentPair m = moments_from_components(dtd);
  Descriptors base = descriptors_from_moments(m);
  double s = 1.7;
  DiscreteDtd scaled = dtd;
  for (auto& c : scaled.components) {
    c.d = c.d * s;
  }
  Descriptors d = descriptors_from_moments(moments_from_components(scaled));
  CHECK(d.e_iso == doctest::Approx(s * base.e_iso).epsilon(1e-12));
  CHECK(d.v_iso == doctest::Approx(s * s * base.v_iso).epsilon(1e-10));
  CHECK(d.e_aniso2 == doctest::Approx(s * s * base.e_aniso2).epsilon(1e-10));
  CHECK(d.e_aniso2_norm == doctest::Approx(base.e_aniso2_norm).epsilon(1e-10));
  CHECK(d.fa == doctest::Approx(base.fa).epsilon(1e-12));
}

TEST_CASE("order parameter of coherent sticks") {
  DiscreteDtd dtd;
  for (int i = 0; i < 5; ++i) {
    dtd.components.push_back({0.2, axisym_tensor({2.0, 0.2, 0.3, 0.9})});
  }
  Vec3 n;
  CHECK(order_parameter(dtd, &n) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(n.dot(unit_vector(0.3, 0.9))) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("order parameter of dispersed and planar axes") {
  std::vector<Vec3> dirs = fibonacci_sphere(1000);
  DiscreteDtd iso_spread;
  for (const Vec3& u : dirs) {
    double theta = std::acos(std::clamp(u.z(), -1.0, 1.0));
    double phi = std::atan2(u.y(), u.x());
    iso_spread.components.push_back({1.0 / dirs.size(), axisym_tensor({2.0, 0.2, theta, phi})});
  }
  CHECK(std::abs(order_parameter(iso_spread)) <= 0.02);

  DiscreteDtd planar;
  int n = 100;
  for (int i = 0; i < n; ++i) {
    double phi = 2.0 * M_PI * i / n;
    planar.components.push_back({1.0 / n, axisym_tensor({2.0, 0.2, M_PI / 2.0, phi})});
  }
  CHECK(order_parameter(planar) == doctest::Approx(-0.5).epsilon(1e-6));
}

TEST_CASE("order parameter ignores isotropic components") {
  DiscreteDtd dtd;
  dtd.components.push_back({0.5, SymTensor3::isotropic(3.0)});
  dtd.components.push_back({0.5, axisym_tensor({2.0, 0.2, 0.0, 0.0})});
  CHECK(order_parameter(dtd) == doctest::Approx(1.0).epsilon(1e-12));

  DiscreteDtd all_iso{{{1.0, SymTensor3::isotropic(1.0)}}};
  CHECK_THROWS_AS(order_parameter(all_iso), IsotropicError);
}
