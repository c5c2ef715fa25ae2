#include "dtd/encoding.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace dtd {

namespace {

// Electrostatic-repulsion direction sets (antipodally symmetric energy),
// canonicalized to the upper hemisphere and sorted by polar angle.
constexpr double kDir6[6][3] = {
    {0.248322660956160, -0.083461316085999, 0.965075160167769},
    {-0.497076556009145, 0.583956861932791, 0.641801589954165},
    {-0.663792661088351, -0.453149182491873, 0.595008505394833},
    {0.510054294949465, 0.762472453328643, 0.398095935822768},
    {0.240301976539191, -0.915600387305867, 0.322383142916476},
    {0.965779289508924, -0.164304898404492, 0.200684489475215},
};

constexpr double kDir10[10][3] = {
    {0.026431467643737, -0.246122399800772, 0.968878290516671},
    {-0.318155190841941, 0.466540055607623, 0.825298522386878},
    {0.459775224447410, 0.407422530693506, 0.789058695198039},
    {-0.849389690268885, -0.057508990667543, 0.524623550803172},
    {-0.424019825363599, -0.740366392253047, 0.521598306094671},
    {0.353910578629686, -0.799483876451939, 0.485358458901647},
    {0.875821179517372, -0.188613431367856, 0.444254696110735},
    {0.084757822823697, 0.966278581444634, 0.243149777938483},
    {-0.724998059301146, 0.662570733660449, 0.188089970243567},
    {0.830862718019715, 0.544335748356795, 0.115610280104063},
};

constexpr double kDir16[16][3] = {
    {0.098695951643011, 0.206213041070706, 0.973516969971069},
    {0.107685751910741, -0.429921025821848, 0.896421603037158},
    {-0.486387303122904, -0.035182830634780, 0.873034684184628},
    {0.661327201069893, -0.004062819985337, 0.750086546085735},
    {-0.299903190218630, 0.634637011252025, 0.712245702300678},
    {-0.443538886613607, -0.629733367211507, 0.637737518327108},
    {0.409423406490289, 0.653870193051786, 0.636259573488924},
    {0.601561939441233, -0.601395665586721, 0.525781785942806},
    {-0.814686560159101, 0.339645763390773, 0.470028258838583},
    {0.065852834500939, -0.922086988350535, 0.381338419389958},
    {-0.895377620182310, -0.283387175675030, 0.343497636002919},
    {0.876322064944382, 0.385497026690817, 0.288880045873982},
    {0.001032397413110, 0.967092618804940, 0.254422484872277},
    {0.961663480904324, -0.233033935610142, 0.144563253799252},
    {-0.593640009652891, 0.800404099358668, 0.083335566651666},
    {-0.554074494159141, -0.831524080928566, 0.039612595953760},
};

constexpr double kShellB[4] = {0.1, 0.7, 1.4, 2.0};
constexpr int kShellDirs[4] = {6, 6, 10, 16};
constexpr int kSphericalRepeats = 6;

const double* direction(int shell, int index) {
  switch (kShellDirs[shell]) {
    case 6:
      return kDir6[index];
    case 10:
      return kDir10[index];
    default:
      return kDir16[index];
  }
}

std::string format_double(double v) {
  std::array<char, 32> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

double parse_double(const std::string& field, int line_no) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw IoError("malformed numeric field at line " + std::to_string(line_no));
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

BTensor make_btensor(double b, double b_delta, double theta, double phi) {
  if (b < 0.0) {
    throw RangeError("encoding strength must be nonnegative");
  }
  if (b_delta < -0.5 || b_delta > 1.0) {
    throw RangeError("encoding shape must lie in [-0.5, 1]");
  }
  BTensor bt;
  bt.b = b;
  bt.b_delta = b_delta;
  bt.theta = theta;
  bt.phi = phi;
  AxisymSpec spec;
  spec.d_par = b * (1.0 + 2.0 * b_delta) / 3.0;
  spec.d_perp = b * (1.0 - b_delta) / 3.0;
  spec.theta = theta;
  spec.phi = phi;
  bt.tensor = axisym_tensor(spec);
  return bt;
}

void AcqScheme::validate() const {
  if (points.empty()) {
    throw RangeError("acquisition scheme is empty");
  }
  double min_b = points.front().b;
  for (const auto& p : points) {
    if (p.b < 0.0 || p.b_delta < -0.5 || p.b_delta > 1.0) {
      throw RangeError("acquisition point outside the valid encoding range");
    }
    min_b = std::min(min_b, p.b);
  }
  if (min_b > 0.15) {
    throw RangeError("scheme needs at least one low-b point (b <= 0.15)");
  }
}

AcqScheme default_scheme() {
  AcqScheme scheme;
  for (double b_delta : {-0.5, 0.0, 1.0}) {
    for (int shell = 0; shell < 4; ++shell) {
      if (b_delta == 0.0) {
        for (int r = 0; r < kSphericalRepeats; ++r) {
          scheme.points.push_back(make_btensor(kShellB[shell], 0.0));
        }
      } else {
        for (int i = 0; i < kShellDirs[shell]; ++i) {
          const double* u = direction(shell, i);
          double theta = std::acos(std::clamp(u[2], -1.0, 1.0));
          double phi = std::atan2(u[1], u[0]);
          scheme.points.push_back(make_btensor(kShellB[shell], b_delta, theta, phi));
        }
      }
    }
  }
  scheme.validate();
  return scheme;
}

void write_scheme_csv(const AcqScheme& scheme, std::ostream& out) {
  out << "n_acq,b,b_delta,theta,phi,bxx,byy,bzz,byz,bxz,bxy\n";
  for (std::size_t i = 0; i < scheme.points.size(); ++i) {
    const BTensor& p = scheme.points[i];
    out << i << ',' << format_double(p.b) << ',' << format_double(p.b_delta) << ','
        << format_double(p.theta) << ',' << format_double(p.phi) << ','
        << format_double(p.tensor.xx) << ',' << format_double(p.tensor.yy) << ','
        << format_double(p.tensor.zz) << ',' << format_double(p.tensor.yz) << ','
        << format_double(p.tensor.xz) << ',' << format_double(p.tensor.xy) << '\n';
  }
}

AcqScheme read_scheme_csv(std::istream& in) {
  AcqScheme scheme;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (!header_seen) {
      if (fields.size() != 11 || fields[0] != "n_acq") {
        throw IoError("scheme CSV must start with the n_acq..bxy header");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 11) {
      throw IoError("scheme CSV row has wrong field count at line " + std::to_string(line_no));
    }
    BTensor p;
    p.b = parse_double(fields[1], line_no);
    p.b_delta = parse_double(fields[2], line_no);
    p.theta = parse_double(fields[3], line_no);
    p.phi = parse_double(fields[4], line_no);
    p.tensor.xx = parse_double(fields[5], line_no);
    p.tensor.yy = parse_double(fields[6], line_no);
    p.tensor.zz = parse_double(fields[7], line_no);
    p.tensor.yz = parse_double(fields[8], line_no);
    p.tensor.xz = parse_double(fields[9], line_no);
    p.tensor.xy = parse_double(fields[10], line_no);
    if (std::abs(p.tensor.trace() - p.b) > 1e-9 * std::max(1.0, p.b)) {
      throw IoError("tensor trace does not match b at line " + std::to_string(line_no));
    }
    scheme.points.push_back(p);
  }
  scheme.validate();
  return scheme;
}

void write_signal_csv(const std::vector<double>& signals, std::ostream& out) {
  out << "n_acq,signal\n";
  for (std::size_t i = 0; i < signals.size(); ++i) {
    out << i << ',' << format_double(signals[i]) << '\n';
  }
}

std::vector<double> read_signal_csv(std::istream& in) {
  std::vector<double> signals;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (!header_seen) {
      if (fields.size() != 2 || fields[0] != "n_acq") {
        throw IoError("signal CSV must start with the n_acq,signal header");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 2) {
      throw IoError("signal CSV row has wrong field count at line " + std::to_string(line_no));
    }
    signals.push_back(parse_double(fields[1], line_no));
  }
  if (signals.empty()) {
    throw IoError("signal CSV has no data rows");
  }
  return signals;
}

std::vector<double> signal_dtd(const DiscreteDtd& dtd, const AcqScheme& scheme, double s0) {
  dtd.validate();
  scheme.validate();
  std::vector<double> out;
  out.reserve(scheme.points.size());
  for (const auto& p : scheme.points) {
    double s = 0.0;
    for (const auto& c : dtd.components) {
      s += c.f * std::exp(-frobenius(p.tensor, c.d));
    }
    out.push_back(s0 * s);
  }
  return out;
}

double signal_gamma_one(const NcMvGamma& p, const BTensor& bt, double s0) {
  Mat3 b = bt.tensor.matrix();
  Mat3 a = Mat3::Identity() + p.psi.matrix() * b;
  Mat3 x = a.inverse() * (p.psi.matrix() * p.theta.matrix());
  double det = a.determinant();
  return s0 * std::exp(-p.kappa * std::log(det) - (b * x).trace());
}

std::vector<double> signal_gamma(const NcMvGamma& p, const AcqScheme& scheme, double s0) {
  p.validate();
  scheme.validate();
  std::vector<double> out;
  out.reserve(scheme.points.size());
  for (const auto& bt : scheme.points) {
    out.push_back(signal_gamma_one(p, bt, s0));
  }
  return out;
}

std::vector<double> signal_cumulant(const MomentPair& m, const AcqScheme& scheme, double s0) {
  scheme.validate();
  std::vector<double> out;
  out.reserve(scheme.points.size());
  for (const auto& p : scheme.points) {
    Vec6 bm = p.tensor.mandel();
    double log_s = -frobenius(p.tensor, m.mean) + 0.5 * bm.dot(m.cov * bm);
    out.push_back(s0 * std::exp(log_s));
  }
  return out;
}

}  // namespace dtd
