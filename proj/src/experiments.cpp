#include "dtd/experiments.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "dtd/numerics.hpp"
#include "dtd/rng.hpp"

namespace dtd {

namespace {

struct Grid {
  std::vector<double> t; // standardized offsets
  std::vector<double> w; // normalized weights
};

// Midpoint discretization of a standard normal over +-4 sigma.
Grid gaussian_grid(int n) {
  Grid g;
  g.t.resize(n);
  g.w.resize(n);
  const double span = 4.0;
  const double step = 2.0 * span / n;
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    g.t[k] = -span + (k + 0.5) * step;
    g.w[k] = std::exp(-0.5 * g.t[k] * g.t[k]);
    total += g.w[k];
  }
  for (double& w : g.w) {
    w /= total;
  }
  return g;
}

double grid_second_moment(const Grid& g) {
  double q = 0.0;
  for (std::size_t k = 0; k < g.t.size(); ++k) {
    q += g.w[k] * g.t[k] * g.t[k];
  }
  return q;
}

std::vector<double> watson_weights(const std::vector<Vec3>& dirs, double kappa) {
  std::vector<double> w(dirs.size());
  const double shift = std::max(kappa, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    double z2 = dirs[i][2] * dirs[i][2];
    w[i] = std::exp(kappa * z2 - shift);
    total += w[i];
  }
  for (double& v : w) {
    v /= total;
  }
  return w;
}

double watson_op(const std::vector<Vec3>& dirs, double kappa) {
  std::vector<double> w = watson_weights(dirs, kappa);
  double op = 0.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    double z2 = dirs[i][2] * dirs[i][2];
    op += w[i] * 0.5 * (3.0 * z2 - 1.0);
  }
  return op;
}

double solve_watson_kappa(const std::vector<Vec3>& dirs, double op_target) {
  auto f = [&](double kappa) { return watson_op(dirs, kappa) - op_target; };
  double lo = -60.0;
  double hi = 8.0;
  while (f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e6) {
      throw RangeError("order parameter target is not reachable");
    }
  }
  return find_root(f, lo, hi, 1e-9);
}

struct Orientations {
  std::vector<Vec3> dirs;
  std::vector<double> w;
};

Orientations make_orientations(double op_target) {
  Orientations o;
  if (op_target >= 0.99) {
    o.dirs = {Vec3(0.0, 0.0, 1.0)};
    o.w = {1.0};
    return o;
  }
  o.dirs = fibonacci_sphere(250);
  double kappa = solve_watson_kappa(o.dirs, op_target);
  o.w = watson_weights(o.dirs, kappa);
  return o;
}

void append_axisym(DiscreteDtd& dtd, double f_shape, double d_par, double d_perp,
                   const Orientations& o) {
  for (std::size_t i = 0; i < o.dirs.size(); ++i) {
    AxisymSpec spec;
    spec.d_par = d_par;
    spec.d_perp = d_perp;
    spec.theta = std::acos(std::clamp(o.dirs[i][2], -1.0, 1.0));
    spec.phi = std::atan2(o.dirs[i][1], o.dirs[i][0]);
    dtd.components.push_back({f_shape * o.w[i], axisym_tensor(spec)});
  }
}

void finalize(Phantom& phantom) {
  phantom.dtd.validate(1e-9);
  phantom.moments = moments_from_components(phantom.dtd);
  phantom.descriptors = descriptors_from_moments(phantom.moments);
}

} // namespace

std::vector<Vec3> fibonacci_sphere(int n) {
  if (n < 1) {
    throw RangeError("need at least one direction");
  }
  std::vector<Vec3> dirs(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - (2.0 * i + 1.0) / n;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden * i;
    dirs[i] = Vec3(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

Phantom phantom_bimodal_iso(double e_iso_target, double v_iso_target, int n_components) {
  if (!(e_iso_target > 0.0)) {
    throw InfeasibleError("mean isotropic diffusivity target must be positive");
  }
  if (n_components < 2 || n_components % 2 != 0) {
    throw RangeError("component count must be an even number of at least 2");
  }
  const double sigma = 0.05;
  Grid g = gaussian_grid(n_components / 2);

  double v_within = sigma * sigma * grid_second_moment(g);
  if (v_iso_target < v_within - 1e-15) {
    throw InfeasibleError("variance target below the within-mode sigma floor");
  }
  double delta = 2.0 * std::sqrt(std::max(v_iso_target - v_within, 0.0));
  double low = e_iso_target - 0.5 * delta + sigma * g.t.front();
  if (low <= 0.0) {
    throw InfeasibleError("variance target pushes a mode below zero diffusivity");
  }

  Phantom phantom;
  phantom.label = "bimodal-iso";
  for (double center : {e_iso_target - 0.5 * delta, e_iso_target + 0.5 * delta}) {
    for (std::size_t k = 0; k < g.t.size(); ++k) {
      phantom.dtd.components.push_back(
          {0.5 * g.w[k], SymTensor3::isotropic(center + sigma * g.t[k])});
    }
  }
  finalize(phantom);
  return phantom;
}

namespace {

struct ShapeGrid {
  std::vector<double> d_delta;
  std::vector<double> w;
};

// Gaussian over D_delta (std/mean 0.1) cut at +-4 sigma and at the physical
// bound for the given sign, midpoint-discretized and renormalized.
ShapeGrid shape_grid(double mu, ShapeSign shape, int n) {
  const double sigma = 0.1 * std::abs(mu);
  double lo = mu - 4.0 * sigma;
  double hi = mu + 4.0 * sigma;
  if (shape == ShapeSign::Prolate) {
    hi = std::min(hi, 1.0);
  } else {
    lo = std::max(lo, -0.5);
  }
  if (!(hi > lo)) {
    throw RangeError("anisotropy target exceeds the physical shape range");
  }
  ShapeGrid g;
  g.d_delta.resize(n);
  g.w.resize(n);
  const double step = (hi - lo) / n;
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    double x = lo + (k + 0.5) * step;
    double t = (x - mu) / sigma;
    g.d_delta[k] = x;
    g.w[k] = std::exp(-0.5 * t * t);
    total += g.w[k];
  }
  for (double& w : g.w) {
    w /= total;
  }
  return g;
}

double shape_second_moment(const ShapeGrid& g) {
  double q = 0.0;
  for (std::size_t k = 0; k < g.d_delta.size(); ++k) {
    q += g.w[k] * g.d_delta[k] * g.d_delta[k];
  }
  return q;
}

} // namespace

Phantom phantom_aniso(double e_aniso2_norm_target, double op_target, ShapeSign shape) {
  if (op_target < 0.0 || op_target > 1.0) {
    throw RangeError("order parameter target must lie in [0, 1]");
  }
  if (e_aniso2_norm_target <= 0.0) {
    throw RangeError("normalized anisotropy target must be positive");
  }
  const double d_iso = 0.8;
  const int n_shape = 16;
  const double sign = (shape == ShapeSign::Prolate) ? 1.0 : -1.0;

  // Beyond 5/3 (prolate) or 5/6 (oblate) in |mu| the whole +-4 sigma window
  // leaves the physical D_delta range, so the reachable second moment tops
  // out just below the bound itself.
  const double mu_cap = (shape == ShapeSign::Prolate) ? 5.0 / 3.0 : 5.0 / 6.0;
  auto second_moment = [&](double mu_mag) {
    return shape_second_moment(shape_grid(sign * mu_mag, shape, n_shape));
  };
  const double mu_hi = mu_cap * (1.0 - 1e-9);
  if (e_aniso2_norm_target >= second_moment(mu_hi)) {
    throw RangeError("anisotropy target exceeds the physical shape range");
  }
  double mu_mag = find_root(
      [&](double m) { return second_moment(m) - e_aniso2_norm_target; }, 1e-9, mu_hi, 1e-13);
  ShapeGrid g = shape_grid(sign * mu_mag, shape, n_shape);

  Orientations o = make_orientations(op_target);

  Phantom phantom;
  phantom.label = (shape == ShapeSign::Prolate) ? "aniso-prolate" : "aniso-oblate";
  for (int k = 0; k < n_shape; ++k) {
    double d_delta = g.d_delta[k];
    double d_par = d_iso * (1.0 + 2.0 * d_delta);
    double d_perp = d_iso * (1.0 - d_delta);
    append_axisym(phantom.dtd, g.w[k], d_par, d_perp, o);
  }
  finalize(phantom);
  return phantom;
}

Phantom phantom_mixed(double f_iso) {
  if (f_iso < 0.0 || f_iso > 1.0) {
    throw RangeError("isotropic fraction must lie in [0, 1]");
  }
  Phantom phantom;
  phantom.label = "mixed";

  if (f_iso > 0.0) {
    const double mean = 3.0;
    const double sigma = 0.1;
    Grid g = gaussian_grid(16);
    for (std::size_t k = 0; k < g.t.size(); ++k) {
      phantom.dtd.components.push_back(
          {f_iso * g.w[k], SymTensor3::isotropic(mean + sigma * g.t[k])});
    }
  }

  if (f_iso < 1.0) {
    const double par_mean = 1.77;
    const double perp_mean = 0.31;
    Grid gp = gaussian_grid(8);
    Grid gq = gaussian_grid(8);
    Orientations o = make_orientations(0.4);
    for (std::size_t a = 0; a < gp.t.size(); ++a) {
      double d_par = par_mean * (1.0 + 0.1 * gp.t[a]);
      for (std::size_t b = 0; b < gq.t.size(); ++b) {
        double d_perp = perp_mean * (1.0 + 0.1 * gq.t[b]);
        append_axisym(phantom.dtd, (1.0 - f_iso) * gp.w[a] * gq.w[b], d_par, d_perp, o);
      }
    }
  }
  finalize(phantom);
  return phantom;
}

std::vector<double> add_rician(const std::vector<double>& clean, double snr,
                               std::uint64_t seed) {
  if (std::isinf(snr)) {
    return clean;
  }
  if (!(snr > 0.0)) {
    throw RangeError("SNR must be positive");
  }
  const double sigma = 1.0 / snr;
  std::vector<double> noisy(clean.size());
  for (std::size_t j = 0; j < clean.size(); ++j) {
    SplitMix rng(seed, j);
    auto [n1, n2] = rng.normal_pair();
    noisy[j] = std::hypot(clean[j] + sigma * n1, sigma * n2);
  }
  return noisy;
}

std::string fitter_name(FitterKind kind) {
  return kind == FitterKind::Covariance ? "cov" : "mvgamma";
}

FitterKind fitter_from_name(const std::string& name) {
  if (name == "cov") {
    return FitterKind::Covariance;
  }
  if (name == "mvgamma") {
    return FitterKind::MvGamma;
  }
  throw RangeError("unknown fitter '" + name + "'");
}

namespace {

bool finite_descriptors(const Descriptors& d) {
  return std::isfinite(d.e_iso) && std::isfinite(d.v_iso) && std::isfinite(d.e_aniso2) &&
         std::isfinite(d.e_aniso2_norm) && std::isfinite(d.fa);
}

McRecord run_one(const Phantom& phantom, const AcqScheme& scheme, const McOptions& options,
                 const std::vector<double>& clean, int r) {
  McRecord rec;
  rec.realization = r;
  try {
    std::vector<double> noisy =
        add_rician(clean, options.snr, derive_seed(options.seed, static_cast<std::uint64_t>(r)));
    if (options.fitter == FitterKind::Covariance) {
      CovarianceFit fit = fit_covariance(noisy, scheme);
      rec.descriptors = fit.descriptors;
      rec.converged = true;
    } else {
      MvGammaFitOptions go = options.gamma_options;
      go.seed = derive_seed(options.seed, 1000000ull + static_cast<std::uint64_t>(r));
      MvGammaFit fit = fit_mv_gamma(noisy, scheme, go);
      rec.descriptors = fit.descriptors;
      rec.converged = fit.converged;
    }
    rec.ok = finite_descriptors(rec.descriptors);
    if (!rec.ok) {
      rec.error = "non-finite descriptors";
    }
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.converged = false;
    rec.error = e.what();
  }
  return rec;
}

} // namespace

McSummary run_monte_carlo(const Phantom& phantom, const AcqScheme& scheme,
                          const McOptions& options) {
  if (options.n_realizations < 1) {
    throw RangeError("need at least one realization");
  }
  if (options.jobs < 1) {
    throw RangeError("job count must be positive");
  }
  scheme.validate();
  std::vector<double> clean = signal_dtd(phantom.dtd, scheme);

  std::vector<McRecord> records(options.n_realizations);
  if (options.jobs == 1) {
    for (int r = 0; r < options.n_realizations; ++r) {
      records[r] = run_one(phantom, scheme, options, clean, r);
    }
  } else {
    std::atomic<int> next{0};
    auto work = [&]() {
      while (true) {
        int r = next.fetch_add(1);
        if (r >= options.n_realizations) {
          return;
        }
        records[r] = run_one(phantom, scheme, options, clean, r);
      }
    };
    int n_threads = std::min(options.jobs, options.n_realizations);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) {
      pool.emplace_back(work);
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }

  McSummary summary;
  summary.phantom_label = phantom.label;
  summary.fitter = fitter_name(options.fitter);
  summary.snr = options.snr;
  summary.n_realizations = options.n_realizations;
  summary.truth = phantom.descriptors;
  for (const McRecord& rec : records) {
    summary.n_ok += rec.ok ? 1 : 0;
    summary.n_converged += (rec.ok && rec.converged) ? 1 : 0;
  }

  auto add_stat = [&](const std::string& key, double Descriptors::* field, double truth) {
    std::vector<double> vals;
    vals.reserve(records.size());
    for (const McRecord& rec : records) {
      if (rec.ok) {
        vals.push_back(rec.descriptors.*field);
      }
    }
    McStat st;
    if (!vals.empty()) {
      st.median = quantile(vals, 0.5);
      st.q25 = quantile(vals, 0.25);
      st.q75 = quantile(vals, 0.75);
      st.iqr = st.q75 - st.q25;
      st.bias = st.median - truth;
    }
    summary.stats[key] = st;
  };
  add_stat("e_iso", &Descriptors::e_iso, summary.truth.e_iso);
  add_stat("v_iso", &Descriptors::v_iso, summary.truth.v_iso);
  add_stat("e_aniso2", &Descriptors::e_aniso2, summary.truth.e_aniso2);
  add_stat("e_aniso2_norm", &Descriptors::e_aniso2_norm, summary.truth.e_aniso2_norm);
  add_stat("fa", &Descriptors::fa, summary.truth.fa);

  summary.records = std::move(records);
  return summary;
}

} // namespace dtd
