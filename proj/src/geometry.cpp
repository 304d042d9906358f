#include "gadoa/geometry.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "gadoa/error.hpp"

namespace gadoa {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace

ArrayGeometry::ArrayGeometry(std::vector<Point2> mics) : mics_(std::move(mics)) {
  if (mics_.size() < 2) {
    throw Error(ErrorKind::kInvalidGeometry,
                "array geometry needs at least two microphones, got " +
                    std::to_string(mics_.size()));
  }
  for (const auto& p : mics_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error(ErrorKind::kInvalidGeometry, "non-finite microphone coordinate");
    }
  }
  for (std::size_t i = 0; i < mics_.size(); ++i) {
    for (std::size_t j = i + 1; j < mics_.size(); ++j) {
      max_distance_ = std::max(max_distance_, distance(mics_[i], mics_[j]));
    }
  }
  if (!(max_distance_ > 0.0)) {
    throw Error(ErrorKind::kInvalidGeometry, "degenerate array: all microphones coincide");
  }
}

Point2 ArrayGeometry::centroid() const noexcept {
  Point2 c;
  for (const auto& p : mics_) {
    c.x += p.x;
    c.y += p.y;
  }
  const auto n = static_cast<double>(mics_.size());
  return {c.x / n, c.y / n};
}

ArrayGeometry ArrayGeometry::centered() const {
  const Point2 c = centroid();
  std::vector<Point2> out;
  out.reserve(mics_.size());
  for (const auto& p : mics_) out.push_back({p.x - c.x, p.y - c.y});
  return ArrayGeometry(std::move(out));
}

std::vector<MicPair> pair_indices(std::size_t num_mics) {
  if (num_mics < 2) {
    throw Error(ErrorKind::kInvalidGeometry, "pair enumeration needs M >= 2");
  }
  std::vector<MicPair> pairs;
  pairs.reserve(pair_count(num_mics));
  for (std::size_t k = 0; k + 1 < num_mics; ++k) {
    for (std::size_t l = k + 1; l < num_mics; ++l) pairs.push_back({k, l});
  }
  return pairs;
}

LagBound lag_bound(const ArrayGeometry& geom, double fs, double c, int eta) {
  if (!(fs > 0.0) || !(c > 0.0) || eta < 0) {
    throw Error(ErrorKind::kInvalidGeometry, "lag bound needs fs > 0, c > 0, eta >= 0");
  }
  // Exact multiples (0.343 m at 8 kHz) must not round up on representation error.
  const double samples = geom.max_distance() * fs / c;
  const int base = static_cast<int>(std::ceil(samples - 1e-9 * std::max(1.0, samples)));
  return LagBound{base + eta, eta, fs, c};
}

double steering_delay(const ArrayGeometry& geom, std::size_t k, std::size_t l,
                      double theta_deg, double c) {
  const double th = theta_deg * kDegToRad;
  const Point2& a = geom[k];
  const Point2& b = geom[l];
  return ((a.x - b.x) * std::cos(th) + (a.y - b.y) * std::sin(th)) / c;
}

double arrival_delay(const ArrayGeometry& geom, std::size_t m, double theta_deg,
                     double c) {
  const Point2 ctr = geom.centroid();
  const double th = theta_deg * kDegToRad;
  return -((geom[m].x - ctr.x) * std::cos(th) + (geom[m].y - ctr.y) * std::sin(th)) / c;
}

ArrayGeometry deviate_geometry(const ArrayGeometry& geom, double step, Rng& rng) {
  if (!(step >= 0.0) || !std::isfinite(step)) {
    throw Error(ErrorKind::kUsage, "deviation step must be a finite non-negative length");
  }
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<Point2> out;
  out.reserve(geom.size());
  for (const auto& p : geom.mics()) {
    const double phi = angle(rng);
    out.push_back({p.x + step * std::cos(phi), p.y + step * std::sin(phi)});
  }
  return ArrayGeometry(std::move(out));
}

ArrayGeometry random_geometry(std::size_t num_mics, double width, double depth,
                              Rng& rng) {
  if (num_mics < 2 || !(width > 0.0) || !(depth > 0.0)) {
    throw Error(ErrorKind::kInvalidGeometry,
                "random geometry needs M >= 2 and positive extent");
  }
  std::uniform_real_distribution<double> ux(-0.5 * width, 0.5 * width);
  std::uniform_real_distribution<double> uy(-0.5 * depth, 0.5 * depth);
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::vector<Point2> mics(num_mics);
    for (auto& p : mics) {
      p.x = ux(rng);
      p.y = uy(rng);
    }
    bool distinct = false;
    for (std::size_t i = 1; i < num_mics && !distinct; ++i) {
      distinct = mics[i] != mics[0];
    }
    if (distinct) return ArrayGeometry(std::move(mics));
  }
  throw Error(ErrorKind::kInvalidGeometry, "could not draw a non-degenerate array");
}

ArrayGeometry arc_array() {
  return ArrayGeometry({{-0.20, 0.071},
                        {-0.073, -0.038},
                        {0.0, -0.067},
                        {0.073, -0.038},
                        {0.20, 0.071}});
}

ArrayGeometry read_geometry(std::istream& in) {
  std::vector<Point2> mics;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() != 2) {
      throw Error(ErrorKind::kInvalidGeometry,
                  "geometry line " + std::to_string(line_no) + ": expected 2 fields, got " +
                      std::to_string(tokens.size()));
    }
    try {
      std::size_t used_x = 0;
      std::size_t used_y = 0;
      const double x = std::stod(tokens[0], &used_x);
      const double y = std::stod(tokens[1], &used_y);
      if (used_x != tokens[0].size() || used_y != tokens[1].size()) throw std::invalid_argument("");
      mics.push_back({x, y});
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kInvalidGeometry,
                  "geometry line " + std::to_string(line_no) + ": not a number");
    }
  }
  return ArrayGeometry(std::move(mics));
}

ArrayGeometry load_geometry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIngestion, "cannot open geometry file " + path.string());
  return read_geometry(in);
}

void write_geometry(std::ostream& out, const ArrayGeometry& geom) {
  out << "# x y [m]\n" << std::setprecision(17);
  for (const auto& p : geom.mics()) out << p.x << ' ' << p.y << '\n';
}

}  // namespace gadoa
