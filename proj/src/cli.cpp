#include "dtd/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string_view>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "dtd/distributions.hpp"
#include "dtd/encoding.hpp"
#include "dtd/experiments.hpp"
#include "dtd/fitters.hpp"
#include "dtd/rng.hpp"
#include "dtd/version.hpp"

namespace dtd {

namespace {

using json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_snr(const std::string& s) {
  if (s == "inf" || s == "infinity") {
    return std::numeric_limits<double>::infinity();
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw IoError("bad SNR value '" + s + "'");
  }
  return v;
}

json snr_json(double snr) {
  if (std::isinf(snr)) {
    return json("inf");
  }
  return json(snr);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write '" + path + "'");
  }
  out << content;
}

struct Manifest {
  std::vector<std::string> args;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const std::string& path) const {
    std::uint64_t h = fnv1a("dtdmom");
    for (const std::string& a : args) {
      h = fnv1a(a, fnv1a(std::string_view("\0", 1), h));
    }
    for (const std::string& p : inputs) {
      h = fnv1a(read_file(p), fnv1a(p, h));
    }
    double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json j;
    j["tool"] = kProjectName;
    j["version"] = kVersion;
    std::string cmd;
    for (const std::string& a : args) {
      cmd += (cmd.empty() ? "" : " ") + a;
    }
    j["command"] = cmd;
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    j["config_hash"] = std::string(hex);
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_time_s"] = wall;
    write_file(path, j.dump(2) + "\n");
  }
};

AcqScheme load_scheme(const std::string& path) {
  if (path.empty()) {
    return default_scheme();
  }
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open scheme '" + path + "'");
  }
  return read_scheme_csv(in);
}

struct PhantomParams {
  double e_iso = 1.9;
  double v_iso = 1.21;
  double op = 1.0;
  double e2n = 0.5;
  double f_iso = 0.5;
  int n_components = 64;
};

Phantom make_phantom(const std::string& name, const PhantomParams& p) {
  if (name == "bimodal-iso") {
    return phantom_bimodal_iso(p.e_iso, p.v_iso, p.n_components);
  }
  if (name == "aniso-prolate") {
    return phantom_aniso(p.e2n, p.op, ShapeSign::Prolate);
  }
  if (name == "aniso-oblate") {
    return phantom_aniso(p.e2n, p.op, ShapeSign::Oblate);
  }
  if (name == "mixed") {
    return phantom_mixed(p.f_iso);
  }
  throw RangeError("unknown phantom '" + name + "'");
}

// Default manifest location is next to the primary output file.
void finish_manifest(Manifest& manifest, const std::string& anchor,
                     const std::string& override_path) {
  if (!override_path.empty()) {
    manifest.write(override_path);
    return;
  }
  if (!anchor.empty() && anchor != "-") {
    manifest.write(anchor + ".manifest.json");
  }
}

json descriptors_json(const Descriptors& d) {
  json j;
  j["e_iso"] = d.e_iso;
  j["v_iso"] = d.v_iso;
  j["e_aniso2"] = d.e_aniso2;
  j["e_aniso2_norm"] = d.e_aniso2_norm;
  j["fa"] = d.fa;
  j["dec_rgb"] = {d.dec_rgb[0], d.dec_rgb[1], d.dec_rgb[2]};
  return j;
}

json moments_json(const MomentPair& m) {
  json j;
  Vec6 mm = m.mean.mandel();
  j["mean_mandel"] = std::vector<double>(mm.data(), mm.data() + 6);
  json rows = json::array();
  for (int r = 0; r < 6; ++r) {
    json row = json::array();
    for (int c = 0; c < 6; ++c) {
      row.push_back(m.cov(r, c));
    }
    rows.push_back(row);
  }
  j["cov_mandel"] = rows;
  return j;
}

// -------- scheme --------

struct SchemeGenArgs {
  std::string out;
  bool use_default = false;
};

int cmd_scheme_gen(const SchemeGenArgs& a, const std::vector<std::string>& argv,
                   std::ostream& out) {
  Manifest manifest;
  manifest.args = argv;
  AcqScheme scheme = default_scheme();
  std::ostringstream ss;
  write_scheme_csv(scheme, ss);
  if (a.out.empty() || a.out == "-") {
    out << ss.str();
  } else {
    write_file(a.out, ss.str());
    manifest.outputs.push_back(a.out);
    finish_manifest(manifest, a.out, "");
  }
  return 0;
}

struct SchemeShowArgs {
  std::string in;
};

int cmd_scheme_show(const SchemeShowArgs& a, std::ostream& out) {
  AcqScheme scheme = load_scheme(a.in);
  scheme.validate();
  std::map<std::pair<double, double>, int> shells;
  for (const BTensor& p : scheme.points) {
    ++shells[{p.b_delta, p.b}];
  }
  out << "points: " << scheme.size() << "\n";
  out << "shells (b_delta, b, count):\n";
  for (const auto& [key, count] : shells) {
    out << "  " << fmt_double(key.first) << "  " << fmt_double(key.second) << "  " << count
        << "\n";
  }
  return 0;
}

// -------- simulate --------

struct SimulateArgs {
  std::string scheme;
  std::string phantom = "bimodal-iso";
  PhantomParams params;
  double s0 = 1.0;
  std::string snr = "inf";
  std::uint64_t seed = 0;
  std::string out;
  std::string truth_out;
  std::string manifest_out;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv,
                 std::ostream& out) {
  Manifest manifest;
  manifest.args = argv;
  if (!a.scheme.empty()) {
    manifest.inputs.push_back(a.scheme);
  }
  AcqScheme scheme = load_scheme(a.scheme);
  Phantom phantom = make_phantom(a.phantom, a.params);
  double snr = parse_snr(a.snr);
  std::vector<double> signals = signal_dtd(phantom.dtd, scheme);
  signals = add_rician(signals, snr, a.seed);
  for (double& s : signals) {
    s *= a.s0;
  }

  std::ostringstream ss;
  write_signal_csv(signals, ss);
  if (a.out.empty() || a.out == "-") {
    out << ss.str();
  } else {
    write_file(a.out, ss.str());
    manifest.outputs.push_back(a.out);
  }
  if (!a.truth_out.empty()) {
    json j;
    j["phantom"] = phantom.label;
    j["s0"] = a.s0;
    j["snr"] = snr_json(snr);
    j["descriptors"] = descriptors_json(phantom.descriptors);
    j["moments"] = moments_json(phantom.moments);
    write_file(a.truth_out, j.dump(2) + "\n");
    manifest.outputs.push_back(a.truth_out);
  }
  finish_manifest(manifest, a.out, a.manifest_out);
  return 0;
}

// -------- fit --------

struct FitArgs {
  std::string scheme;
  std::string signals;
  std::string model = "mvgamma";
  std::uint64_t seed = 0;
  int starts = 5;
  std::string out;
  std::string manifest_out;
};

int cmd_fit(const FitArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest;
  manifest.args = argv;
  if (!a.scheme.empty()) {
    manifest.inputs.push_back(a.scheme);
  }
  manifest.inputs.push_back(a.signals);
  AcqScheme scheme = load_scheme(a.scheme);
  std::ifstream sig_in(a.signals);
  if (!sig_in) {
    throw IoError("cannot open signals '" + a.signals + "'");
  }
  std::vector<double> signals = read_signal_csv(sig_in);

  json j;
  j["model"] = a.model;
  bool converged = true;
  if (a.model == "dti") {
    DtiFit fit = fit_dti(signals, scheme);
    MomentPair m;
    m.mean = fit.mean;
    m.cov = Tensor6::Zero();
    j["converged"] = true;
    j["s0"] = fit.s0;
    j["moments"] = moments_json(m);
    j["descriptors"] = descriptors_json(descriptors_from_moments(m));
  } else if (a.model == "cov") {
    CovarianceFit fit = fit_covariance(signals, scheme);
    j["converged"] = true;
    j["s0"] = fit.s0;
    j["residual_norm"] = fit.residual_norm;
    j["moments"] = moments_json(fit.moments);
    j["descriptors"] = descriptors_json(fit.descriptors);
  } else if (a.model == "mvgamma") {
    MvGammaFitOptions opts;
    opts.seed = a.seed;
    opts.n_starts = a.starts;
    MvGammaFit fit = fit_mv_gamma(signals, scheme, opts);
    converged = fit.converged;
    j["converged"] = fit.converged;
    j["s0"] = fit.s0;
    j["start_index"] = fit.start_index;
    j["iterations"] = fit.iterations;
    j["residual_norm"] = fit.residual_norm;
    j["kappa"] = fit.kappa;
    j["psi_eigs"] = {fit.psi_eigs[0], fit.psi_eigs[1], fit.psi_eigs[2]};
    Vec3 theta_eigs = fit.h_eigs.cwiseInverse() - Vec3::Constant(fit.kappa);
    j["theta_eigs"] = {theta_eigs[0], theta_eigs[1], theta_eigs[2]};
    j["euler_zyz"] = {fit.euler[0], fit.euler[1], fit.euler[2]};
    j["moments"] = moments_json(fit.moments);
    j["descriptors"] = descriptors_json(fit.descriptors);
  } else {
    throw UsageError("unknown model '" + a.model + "' (expected mvgamma, cov, or dti)");
  }

  std::string text = j.dump(2) + "\n";
  if (a.out.empty() || a.out == "-") {
    out << text;
  } else {
    write_file(a.out, text);
    manifest.outputs.push_back(a.out);
  }
  finish_manifest(manifest, a.out, a.manifest_out);
  return converged ? 0 : 4;
}

// -------- validate-moments --------

struct ValidateArgs {
  std::string dist = "gamma";
  int trials = 100;
  int sampling_trials = 2;
  std::uint64_t samples = 200000;
  std::uint64_t seed = 0;
  double h = 1e-5;
  double tol_mean = 1e-6;
  double tol_cov = 1e-5;
  double z_max = 5.0;
};

Mat3 random_rotation(SplitMix& rng) {
  double alpha = rng.uniform(-std::numbers::pi, std::numbers::pi);
  double beta = std::acos(rng.uniform(-1.0, 1.0));
  double gamma = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return euler_zyz(alpha, beta, gamma);
}

SymTensor3 random_sym(SplitMix& rng, const Mat3& rot, double lo, double hi) {
  Vec3 eigs(rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi));
  return SymTensor3::symmetrize(rot * eigs.asDiagonal() * rot.transpose());
}

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
  double worst_mean = 0.0;
  double worst_cov = 0.0;
  for (int t = 0; t < a.trials; ++t) {
    SplitMix rng(a.seed, static_cast<std::uint64_t>(t));
    MomentPair analytic;
    MgfFn mgf;
    if (a.dist == "gamma") {
      NcMvGamma p;
      p.kappa = rng.uniform(1.1, 10.0);
      Mat3 rot = random_rotation(rng);
      p.psi = random_sym(rng, rot, 0.05, 1.5);
      p.theta = random_sym(rng, rot, -p.kappa + 0.05, 5.0);
      p.validate();
      analytic = moments_gamma(p);
      mgf = mgf_gamma_fn(p);
    } else if (a.dist == "gaussian") {
      MvGaussian p;
      SplitMix rng2(a.seed, static_cast<std::uint64_t>(t));
      p.mean = random_sym(rng2, random_rotation(rng2), -1.0, 2.0);
      Mat3 rot = random_rotation(rng2);
      p.sigma = random_sym(rng2, rot, 0.05, 1.5);
      p.psi = p.sigma;
      p.validate();
      analytic = moments_gaussian(p);
      mgf = mgf_gaussian_fn(p);
    } else {
      throw RangeError("unknown distribution '" + a.dist + "'");
    }
    SymTensor3 fd_m = fd_mean(mgf, a.h);
    Tensor6 fd_c = fd_cov(mgf, a.h);
    double mean_err = (fd_m.matrix() - analytic.mean.matrix()).norm() /
                      std::max(analytic.mean.matrix().norm(), 1e-30);
    double cov_err = (fd_c - analytic.cov).norm() / std::max(analytic.cov.norm(), 1e-30);
    worst_mean = std::max(worst_mean, mean_err);
    worst_cov = std::max(worst_cov, cov_err);
  }
  bool pass = worst_mean <= a.tol_mean && worst_cov <= a.tol_cov;
  out << "distribution: " << a.dist << "\n";
  out << "trials: " << a.trials << "\n";
  out << "max mean rel error: " << fmt_double(worst_mean) << " (tol " << fmt_double(a.tol_mean)
      << ")\n";
  out << "max cov rel error: " << fmt_double(worst_cov) << " (tol " << fmt_double(a.tol_cov)
      << ")\n";

  // Cross-check against the construction-based sampler for half-integer
  // shapes. Entries are compared in units of their standard error, with a
  // small floor for entries whose scale is negligible.
  if (a.dist == "gamma" && a.sampling_trials > 0) {
    double worst_z = 0.0;
    for (int t = 0; t < a.sampling_trials; ++t) {
      SplitMix rng(a.seed, 0x5a000000ull + static_cast<std::uint64_t>(t));
      NcMvGamma p;
      p.kappa = 0.5 * static_cast<double>(3 + static_cast<int>(rng.uniform(0.0, 12.0)));
      Mat3 rot = random_rotation(rng);
      p.psi = random_sym(rng, rot, 0.05, 1.5);
      p.theta = random_sym(rng, rot, 0.0, 4.0);
      p.validate();
      MomentPair analytic = moments_gamma(p);
      SampleStats st = sample_moments(p, a.samples, derive_seed(a.seed, 7000 + t));

      double mean_scale = analytic.mean.matrix().norm();
      double cov_scale = analytic.cov.cwiseAbs().maxCoeff();
      Vec6 am = analytic.mean.mandel();
      Vec6 em = st.mean.mandel();
      for (int i = 0; i < 6; ++i) {
        double denom = st.mean_se[i] + 1e-4 * mean_scale;
        worst_z = std::max(worst_z, std::abs(em[i] - am[i]) / denom);
      }
      for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) {
          double denom = st.cov_se(r, c) + 1e-3 * cov_scale;
          worst_z = std::max(worst_z, std::abs(st.cov(r, c) - analytic.cov(r, c)) / denom);
        }
      }
    }
    bool sampling_pass = worst_z <= a.z_max;
    pass = pass && sampling_pass;
    out << "sampling trials: " << a.sampling_trials << " x " << a.samples << " samples\n";
    out << "max sampling deviation: " << fmt_double(worst_z) << " standard errors (tol "
        << fmt_double(a.z_max) << ")\n";
  }

  out << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 5;
}

// -------- experiment --------

struct ExperimentArgs {
  std::string config;
  std::string out_dir;
  int jobs = 1;
};

struct ConfigMap {
  std::map<std::string, std::vector<std::string>> entries;

  bool has(const std::string& key) const { return entries.count(key) != 0; }

  const std::vector<std::string>& list(const std::string& key) const {
    auto it = entries.find(key);
    if (it == entries.end() || it->second.empty()) {
      throw IoError("config key '" + key + "' is missing");
    }
    return it->second;
  }

  std::string scalar(const std::string& key, const std::string& fallback) const {
    auto it = entries.find(key);
    if (it == entries.end()) {
      return fallback;
    }
    if (it->second.size() != 1) {
      throw IoError("config key '" + key + "' expects a single value");
    }
    return it->second[0];
  }
};

ConfigMap parse_config(std::istream& in) {
  static const std::vector<std::string> known = {
      "phantom",  "scheme",   "e_iso",          "v_iso_list", "op_list", "e_aniso2_norm_list",
      "f_iso_list", "snr_list", "fitters",      "seed",       "n_realizations"};
  ConfigMap cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto pos = line.find('#'); pos != std::string::npos) {
      line.erase(pos);
    }
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    auto trim = [&](std::string s) {
      while (!s.empty() && is_space(s.front())) s.erase(s.begin());
      while (!s.empty() && is_space(s.back())) s.pop_back();
      return s;
    };
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw IoError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (cfg.entries.count(key)) {
      throw IoError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    std::vector<std::string> values;
    std::istringstream vs(line.substr(eq + 1));
    std::string tok;
    while (vs >> tok) {
      values.push_back(tok);
    }
    cfg.entries[key] = values;
  }
  return cfg;
}

double to_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw IoError("bad numeric value '" + s + "'");
  }
  return v;
}

struct Combo {
  PhantomParams params;
  json params_json;
};

int cmd_experiment(const ExperimentArgs& a, const std::vector<std::string>& argv,
                   std::ostream& out) {
  Manifest manifest;
  manifest.args = argv;
  manifest.inputs.push_back(a.config);

  std::ifstream cfg_in(a.config);
  if (!cfg_in) {
    throw IoError("cannot open config '" + a.config + "'");
  }
  ConfigMap cfg = parse_config(cfg_in);

  std::string phantom_name = cfg.scalar("phantom", "");
  if (phantom_name.empty()) {
    throw UsageError("config '" + a.config + "': missing key 'phantom'");
  }
  std::string scheme_path = cfg.scalar("scheme", "");
  if (!scheme_path.empty()) {
    manifest.inputs.push_back(scheme_path);
  }
  AcqScheme scheme = load_scheme(scheme_path);

  std::vector<Combo> combos;
  if (phantom_name == "bimodal-iso") {
    double e_iso = to_double(cfg.scalar("e_iso", "2.0"));
    for (const std::string& v : cfg.list("v_iso_list")) {
      Combo c;
      c.params.e_iso = e_iso;
      c.params.v_iso = to_double(v);
      c.params_json["e_iso"] = c.params.e_iso;
      c.params_json["v_iso"] = c.params.v_iso;
      combos.push_back(c);
    }
  } else if (phantom_name == "aniso-prolate" || phantom_name == "aniso-oblate") {
    for (const std::string& op : cfg.list("op_list")) {
      for (const std::string& e : cfg.list("e_aniso2_norm_list")) {
        Combo c;
        c.params.op = to_double(op);
        c.params.e2n = to_double(e);
        c.params_json["op"] = c.params.op;
        c.params_json["e_aniso2_norm"] = c.params.e2n;
        combos.push_back(c);
      }
    }
  } else if (phantom_name == "mixed") {
    for (const std::string& f : cfg.list("f_iso_list")) {
      Combo c;
      c.params.f_iso = to_double(f);
      c.params_json["f_iso"] = c.params.f_iso;
      combos.push_back(c);
    }
  } else {
    throw UsageError("config '" + a.config + "': unknown phantom '" + phantom_name + "'");
  }

  std::vector<double> snrs;
  for (const std::string& s : cfg.list("snr_list")) {
    snrs.push_back(parse_snr(s));
  }
  std::vector<FitterKind> fitters;
  for (const std::string& f : cfg.list("fitters")) {
    fitters.push_back(fitter_from_name(f));
  }
  int n_realizations = static_cast<int>(to_double(cfg.scalar("n_realizations", "100")));
  std::uint64_t seed = static_cast<std::uint64_t>(to_double(cfg.scalar("seed", "0")));

  std::filesystem::create_directories(a.out_dir);

  json summary = json::array();
  std::ostringstream records;
  records << "realization,fitter,e_iso,v_iso,e_aniso2_norm,converged,"
             "cell,phantom,snr,sweep_value,ok,e_aniso2,fa,error\n";

  bool any_empty_cell = false;
  int cell = 0;
  std::uint64_t noise_stream = 0;
  for (const Combo& combo : combos) {
    Phantom phantom = make_phantom(phantom_name, combo.params);
    std::string sweep_value;
    for (const auto& [key, value] : combo.params_json.items()) {
      sweep_value += (sweep_value.empty() ? "" : ";") + key + "=" +
                     fmt_double(value.get<double>());
    }
    for (double snr : snrs) {
      std::uint64_t cell_seed = derive_seed(seed, noise_stream++);
      for (FitterKind fitter : fitters) {
        McOptions opts;
        opts.n_realizations = n_realizations;
        opts.snr = snr;
        opts.seed = cell_seed;
        opts.jobs = a.jobs;
        opts.fitter = fitter;
        McSummary mc = run_monte_carlo(phantom, scheme, opts);
        if (mc.n_ok == 0) {
          any_empty_cell = true;
        }

        json cell_json;
        cell_json["cell"] = cell;
        cell_json["phantom"] = phantom.label;
        cell_json["params"] = combo.params_json;
        cell_json["snr"] = snr_json(snr);
        cell_json["fitter"] = mc.fitter;
        cell_json["n_realizations"] = mc.n_realizations;
        cell_json["n_ok"] = mc.n_ok;
        cell_json["n_converged"] = mc.n_converged;
        cell_json["truth"] = descriptors_json(mc.truth);
        json stats;
        for (const auto& [key, st] : mc.stats) {
          json sj;
          sj["median"] = st.median;
          sj["q25"] = st.q25;
          sj["q75"] = st.q75;
          sj["iqr"] = st.iqr;
          sj["bias"] = st.bias;
          stats[key] = sj;
        }
        cell_json["stats"] = stats;
        summary.push_back(cell_json);

        std::string suffix = std::to_string(cell) + "," + phantom.label + "," +
                             (std::isinf(snr) ? "inf" : fmt_double(snr)) + "," + sweep_value +
                             ",";
        for (const McRecord& rec : mc.records) {
          records << rec.realization << "," << mc.fitter << ",";
          if (rec.ok) {
            records << fmt_double(rec.descriptors.e_iso) << ","
                    << fmt_double(rec.descriptors.v_iso) << ","
                    << fmt_double(rec.descriptors.e_aniso2_norm) << ",";
          } else {
            records << ",,,";
          }
          records << (rec.converged ? 1 : 0) << "," << suffix << (rec.ok ? 1 : 0) << ",";
          if (rec.ok) {
            records << fmt_double(rec.descriptors.e_aniso2) << ","
                    << fmt_double(rec.descriptors.fa) << ",";
          } else {
            records << ",,";
          }
          std::string err = rec.error;
          std::replace(err.begin(), err.end(), ',', ';');
          std::replace(err.begin(), err.end(), '\n', ' ');
          records << err << "\n";
        }
        ++cell;
      }
    }
  }

  std::string summary_path = a.out_dir + "/summary.json";
  std::string records_path = a.out_dir + "/records.csv";
  write_file(summary_path, summary.dump(2) + "\n");
  write_file(records_path, records.str());
  manifest.outputs.push_back(summary_path);
  manifest.outputs.push_back(records_path);
  manifest.write(a.out_dir + "/manifest.json");

  out << "cells: " << cell << "\n";
  out << "summary: " << summary_path << "\n";
  out << "records: " << records_path << "\n";
  if (any_empty_cell) {
    out << "warning: at least one cell produced no usable fits\n";
    return 4;
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Matrix moments of diffusion tensor distributions"};
  app.name("dtdmom");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  auto* scheme_cmd = app.add_subcommand("scheme", "Acquisition scheme utilities");
  scheme_cmd->require_subcommand(1);
  SchemeGenArgs sg;
  auto* gen = scheme_cmd->add_subcommand("gen", "Write an acquisition scheme as CSV");
  gen->add_flag("--default", sg.use_default, "Use the built-in 100-point scheme");
  gen->add_option("-o,--out", sg.out, "Output CSV path ('-' for stdout)");
  SchemeShowArgs ss;
  auto* show = scheme_cmd->add_subcommand("show", "Summarize a scheme CSV");
  show->add_option("file", ss.in, "Scheme CSV path (default: built-in scheme)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate phantom signals");
  simulate->add_option("--scheme", sim.scheme, "Scheme CSV (default: built-in scheme)");
  simulate->add_option("--phantom", sim.phantom,
                       "bimodal-iso | aniso-prolate | aniso-oblate | mixed");
  simulate->add_option("--e-iso", sim.params.e_iso, "Mean isotropic diffusivity (bimodal-iso)");
  simulate->add_option("--v-iso", sim.params.v_iso, "Isotropic variance target (bimodal-iso)");
  simulate->add_option("--n-components", sim.params.n_components,
                       "Quadrature points (bimodal-iso)");
  simulate->add_option("--op", sim.params.op, "Order parameter target (aniso)");
  simulate->add_option("--e-aniso2-norm", sim.params.e2n,
                       "Normalized anisotropy target (aniso)");
  simulate->add_option("--f-iso", sim.params.f_iso, "Isotropic fraction (mixed)");
  simulate->add_option("--s0", sim.s0, "Non-weighted signal amplitude");
  simulate->add_option("--snr", sim.snr, "Rician SNR relative to s0, or 'inf'");
  simulate->add_option("--seed", sim.seed, "Noise seed");
  simulate->add_option("-o,--out", sim.out, "Signal CSV path ('-' for stdout)");
  simulate->add_option("--truth", sim.truth_out, "Write ground-truth JSON here");
  simulate->add_option("--manifest", sim.manifest_out,
                       "Manifest path (default: <out>.manifest.json)");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one signal vector");
  fit_cmd->add_option("--scheme", fit.scheme, "Scheme CSV (default: built-in scheme)");
  fit_cmd->add_option("--signals", fit.signals, "Signal CSV")->required();
  fit_cmd->add_option("--model", fit.model, "mvgamma | cov | dti");
  fit_cmd->add_option("--seed", fit.seed, "Multi-start seed (mvgamma)");
  fit_cmd->add_option("--starts", fit.starts, "Number of starts (mvgamma)");
  fit_cmd->add_option("-o,--out", fit.out, "Fit JSON path ('-' for stdout)");
  fit_cmd->add_option("--manifest", fit.manifest_out,
                      "Manifest path (default: <out>.manifest.json)");

  ValidateArgs val;
  auto* validate = app.add_subcommand(
      "validate-moments", "Check analytic moments against independent numerical oracles");
  validate->add_option("--dist", val.dist, "gamma | gaussian");
  validate->add_option("--trials", val.trials, "Number of random parameter draws");
  validate->add_option("--sampling-trials", val.sampling_trials,
                       "Sampler cross-checks at half-integer shapes (gamma only, 0 disables)");
  validate->add_option("--samples", val.samples, "Samples per sampler cross-check");
  validate->add_option("--seed", val.seed, "Draw seed");
  validate->add_option("--step", val.h, "Finite-difference step");
  validate->add_option("--tol-mean", val.tol_mean, "Relative tolerance for the mean");
  validate->add_option("--tol-cov", val.tol_cov, "Relative tolerance for the covariance");
  validate->add_option("--z-max", val.z_max, "Sampler tolerance in standard errors");

  ExperimentArgs exp;
  auto* experiment = app.add_subcommand("experiment", "Run a Monte-Carlo sweep from a config");
  experiment->add_option("--config", exp.config, "Flat key=value config")->required();
  experiment->add_option("--out-dir", exp.out_dir, "Output directory")->required();
  experiment->add_option("--jobs", exp.jobs, "Worker threads");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_scheme_gen(sg, args, out);
    }
    if (show->parsed()) {
      return cmd_scheme_show(ss, out);
    }
    if (simulate->parsed()) {
      return cmd_simulate(sim, args, out);
    }
    if (fit_cmd->parsed()) {
      return cmd_fit(fit, args, out);
    }
    if (validate->parsed()) {
      if (val.trials < 1) {
        err << "validate-moments: --trials must be at least 1\n";
        return 2;
      }
      return cmd_validate(val, out);
    }
    if (experiment->parsed()) {
      if (exp.jobs < 1) {
        err << "experiment: --jobs must be at least 1\n";
        return 2;
      }
      return cmd_experiment(exp, args, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const RangeError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const DegenerateError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const CommutationError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const RankError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
  err << "no subcommand given\n";
  return 2;
}

}  // namespace dtd
