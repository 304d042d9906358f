#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gadoa/features.hpp"
#include "gadoa/geometry.hpp"

namespace gadoa {

/// Number of DoA classes and their spacing.
inline constexpr std::size_t kNumClasses = 72;
inline constexpr double kClassWidthDeg = 360.0 / kNumClasses;

/// Candidate azimuths i * 360 / count degrees.
std::vector<double> doa_grid(std::size_t count = kNumClasses);

enum class MapAlgorithm { kSrpPhat, kMusic };

const char* to_string(MapAlgorithm algorithm) noexcept;

/// Score per candidate azimuth.
struct PowerMap {
  MapAlgorithm algorithm = MapAlgorithm::kSrpPhat;
  std::vector<double> thetas;
  std::vector<double> values;
};

/// CSV with header theta_deg,value.
void write_power_map_csv(std::ostream& out, const PowerMap& map);

/// Analysis band shared by both baselines.
struct FrequencyBand {
  double low_hz = 300.0;
  double high_hz = 3400.0;
};

/// FFT bins whose centre frequency lies in [low, high] (never DC or Nyquist).
std::vector<std::size_t> band_bins(const FrequencyBand& band, std::size_t nfft, double fs);

/// Far-field SRP-PHAT: for every candidate, the real part of each pair's
/// PHAT-weighted cross-spectrum rotated by the pair's steering delay, summed
/// over all ordered pairs and band bins, averaged over non-silent frames.
/// Throws kEstimationFailure if every frame is silent.
PowerMap srp_phat_map(std::span<const FrameSpectra> frames, const ArrayGeometry& geometry,
                      std::span<const double> grid_deg, const FrequencyBand& band = {});

/// Per-bin sample covariance (1/F) sum Y Y^H over non-silent frames.
struct CovarianceSet {
  std::vector<std::size_t> bins;
  std::vector<Eigen::MatrixXcd> matrices;
  std::size_t fft_length = 0;
  double fs = 0.0;
  std::size_t num_frames = 0;
};

CovarianceSet covariance(std::span<const FrameSpectra> frames, const FrequencyBand& band = {});

/// Steering vector a_m = exp(-j omega tau_m(theta)), tau_m relative to the
/// array centroid.
Eigen::VectorXcd steering_vector(const ArrayGeometry& geometry, double theta_deg,
                                 double omega);

/// How per-bin pseudo-spectra are combined. kMean is the plain average;
/// kPeakNormalized scales each bin to a unit maximum first, so low bins with
/// needle-sharp peaks do not outvote the rest of the band.
enum class MusicFusion { kMean, kPeakNormalized };

/// Narrowband MUSIC pseudo-spectrum 1 / (a^H E_N E_N^H a) per bin,
/// combined across the covariance bins as `fusion` selects.
PowerMap music_map(const CovarianceSet& cov, const ArrayGeometry& geometry,
                   std::span<const double> grid_deg, std::size_t num_sources = 1,
                   MusicFusion fusion = MusicFusion::kMean);

}  // namespace gadoa
