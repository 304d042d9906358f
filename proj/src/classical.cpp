#include "gadoa/classical.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "gadoa/eigh.hpp"
#include "gadoa/error.hpp"

namespace gadoa {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double bin_omega(std::size_t bin, std::size_t nfft, double fs) {
  return kTwoPi * static_cast<double>(bin) * fs / static_cast<double>(nfft);
}

}  // namespace

std::vector<double> doa_grid(std::size_t count) {
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = 360.0 * static_cast<double>(i) / static_cast<double>(count);
  }
  return grid;
}

const char* to_string(MapAlgorithm algorithm) noexcept {
  return algorithm == MapAlgorithm::kSrpPhat ? "srp-phat" : "music";
}

void write_power_map_csv(std::ostream& out, const PowerMap& map) {
  out << "theta_deg,value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    out << map.thetas[i] << ',' << map.values[i] << '\n';
  }
}

std::vector<std::size_t> band_bins(const FrequencyBand& band, std::size_t nfft, double fs) {
  std::vector<std::size_t> bins;
  for (std::size_t k = 1; k < nfft / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
    if (f >= band.low_hz && f <= band.high_hz) bins.push_back(k);
  }
  return bins;
}

PowerMap srp_phat_map(std::span<const FrameSpectra> frames, const ArrayGeometry& geometry,
                      std::span<const double> grid_deg, const FrequencyBand& band) {
  if (frames.empty()) throw Error(ErrorKind::kEmptyInput, "SRP-PHAT: no frames");
  const std::size_t nfft = frames.front().fft_length();
  const double fs = frames.front().fs;
  const std::size_t num_mics = geometry.size();
  if (frames.front().channels.size() != num_mics) {
    throw Error(ErrorKind::kFeatureShape, "SRP-PHAT: channel count differs from geometry");
  }
  const auto bins = band_bins(band, nfft, fs);
  const auto pairs = pair_indices(num_mics);

  // The map is linear in the PHAT cross-spectra, so average those first.
  std::vector<std::vector<dsp::Complex>> mean_cross(pairs.size(),
                                                    std::vector<dsp::Complex>(bins.size()));
  std::size_t used = 0;
  for (const auto& frame : frames) {
    if (frame.silent) continue;
    ++used;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto& yk = frame.channels[pairs[p].k];
      const auto& yl = frame.channels[pairs[p].l];
      for (std::size_t b = 0; b < bins.size(); ++b) {
        const dsp::Complex g = yk[bins[b]] * std::conj(yl[bins[b]]);
        const double mag = std::abs(g);
        if (mag >= 1e-12) mean_cross[p][b] += g / mag;
      }
    }
  }
  if (used == 0) throw Error(ErrorKind::kEstimationFailure, "SRP-PHAT: all frames are silent");
  const double inv = 1.0 / static_cast<double>(used);

  PowerMap map;
  map.algorithm = MapAlgorithm::kSrpPhat;
  map.thetas.assign(grid_deg.begin(), grid_deg.end());
  map.values.assign(grid_deg.size(), 0.0);
  // Auto terms (k == l) contribute one per bin and mic.
  const double diagonal = static_cast<double>(num_mics * bins.size());
  for (std::size_t t = 0; t < grid_deg.size(); ++t) {
    double acc = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const double tau = steering_delay(geometry, pairs[p].k, pairs[p].l, grid_deg[t]);
      for (std::size_t b = 0; b < bins.size(); ++b) {
        const double phase = -bin_omega(bins[b], nfft, fs) * tau;
        const dsp::Complex& g = mean_cross[p][b];
        acc += g.real() * std::cos(phase) - g.imag() * std::sin(phase);
      }
    }
    // (k, l) and (l, k) contribute complex conjugates: twice the real part.
    map.values[t] = 2.0 * acc * inv + diagonal;
  }
  return map;
}

CovarianceSet covariance(std::span<const FrameSpectra> frames, const FrequencyBand& band) {
  if (frames.empty()) throw Error(ErrorKind::kEmptyInput, "covariance: no frames");
  CovarianceSet cov;
  cov.fft_length = frames.front().fft_length();
  cov.fs = frames.front().fs;
  cov.bins = band_bins(band, cov.fft_length, cov.fs);
  const auto num_mics = static_cast<Eigen::Index>(frames.front().channels.size());
  cov.matrices.assign(cov.bins.size(), Eigen::MatrixXcd::Zero(num_mics, num_mics));

  Eigen::VectorXcd y(num_mics);
  for (const auto& frame : frames) {
    if (frame.silent) continue;
    ++cov.num_frames;
    for (std::size_t b = 0; b < cov.bins.size(); ++b) {
      for (Eigen::Index m = 0; m < num_mics; ++m) y(m) = frame.channels[static_cast<std::size_t>(m)][cov.bins[b]];
      cov.matrices[b] += y * y.adjoint();
    }
  }
  if (cov.num_frames == 0) throw Error(ErrorKind::kEstimationFailure, "covariance: all frames are silent");
  for (auto& r : cov.matrices) r /= static_cast<double>(cov.num_frames);
  return cov;
}

Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, double theta_deg, double omega) {
  Eigen::VectorXcd a(static_cast<Eigen::Index>(geometry.size()));
  for (std::size_t m = 0; m < geometry.size(); ++m) {
    a(static_cast<Eigen::Index>(m)) = std::polar(1.0, -omega * arrival_delay(geometry, m, theta_deg));
  }
  return a;
}

PowerMap music_map(const CovarianceSet& cov, const ArrayGeometry& geometry,
                   std::span<const double> grid_deg, std::size_t num_sources,
                   MusicFusion fusion) {
  const std::size_t num_mics = geometry.size();
  if (num_sources >= num_mics) {
    throw Error(ErrorKind::kUsage, "MUSIC needs more microphones than sources");
  }
  if (cov.matrices.empty()) throw Error(ErrorKind::kEstimationFailure, "MUSIC: empty band");
  if (static_cast<std::size_t>(cov.matrices.front().rows()) != num_mics) {
    throw Error(ErrorKind::kFeatureShape, "MUSIC: covariance size differs from geometry");
  }
  const auto noise_dim = static_cast<Eigen::Index>(num_mics - num_sources);

  PowerMap map;
  map.algorithm = MapAlgorithm::kMusic;
  map.thetas.assign(grid_deg.begin(), grid_deg.end());
  map.values.assign(grid_deg.size(), 0.0);
  std::vector<double> bin_values(grid_deg.size());
  for (std::size_t b = 0; b < cov.bins.size(); ++b) {
    const auto eig = eigh(cov.matrices[b]);
    const Eigen::MatrixXcd noise = eig.vectors.leftCols(noise_dim);
    const double omega = bin_omega(cov.bins[b], cov.fft_length, cov.fs);
    for (std::size_t t = 0; t < grid_deg.size(); ++t) {
      const Eigen::VectorXcd proj = noise.adjoint() * steering_vector(geometry, grid_deg[t], omega);
      bin_values[t] = 1.0 / std::max(proj.squaredNorm(), 1e-14);
    }
    double weight = 1.0;
    if (fusion == MusicFusion::kPeakNormalized) {
      weight = 1.0 / *std::max_element(bin_values.begin(), bin_values.end());
    }
    for (std::size_t t = 0; t < grid_deg.size(); ++t) map.values[t] += weight * bin_values[t];
  }
  for (double& v : map.values) v /= static_cast<double>(cov.bins.size());
  return map;
}

}  // namespace gadoa
