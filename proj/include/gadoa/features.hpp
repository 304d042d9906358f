#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gadoa/dsp.hpp"
#include "gadoa/geometry.hpp"
#include "gadoa/signal.hpp"

namespace gadoa {

/// 32 ms at 8 kHz; also the FFT length.
inline constexpr std::size_t kFrameLength = 256;

/// Spectra of one Hann-windowed frame, one full-length FFT per channel.
struct FrameSpectra {
  std::vector<std::vector<dsp::Complex>> channels;
  double fs = kSampleRate;
  std::size_t frame_index = 0;
  bool silent = false;  // every sample of every channel was zero

  std::size_t fft_length() const noexcept {
    return channels.empty() ? 0 : channels.front().size();
  }
};

/// Non-overlapping frames; a trailing partial frame is dropped.
std::vector<FrameSpectra> frame_signal(const MultichannelSignal& sig);

/// GCC-PHAT of one pair over the constrained lags [-tau_max, tau_max - 1]
/// (element i holds lag i - tau_max). A positive lag means channel k leads
/// channel l, i.e. channel l is a delayed copy of channel k.
std::vector<double> gcc_phat(const FrameSpectra& frame, MicPair pair, const LagBound& bound);

/// GCC-PHAT vectors for every pair of one frame, in pair_indices order.
struct GccPhatMatrix {
  LagBound bound;
  std::size_t num_mics = 0;
  std::size_t frame_index = 0;
  bool silent = false;
  std::vector<std::vector<double>> pairs;

  double at(std::size_t pair, int lag) const {
    return pairs[pair][static_cast<std::size_t>(lag + bound.tau_max)];
  }
};

GccPhatMatrix gcc_phat_matrix(const FrameSpectra& frame, const LagBound& bound);

/// Vertex offset of the parabola through (-1, y_minus), (0, y_0),
/// (1, y_plus); 0 when the three points are collinear.
double parabolic_peak(double y_minus, double y_0, double y_plus);

/// Interpolated argmax lag per pair (ties go to the smallest lag; a peak on
/// the window edge is not interpolated). Throws kEmptyInput on silent frames.
std::vector<double> max_lag_features(const GccPhatMatrix& gcc);

enum class FeatureKind { kFull, kMax, kGeometryAware };

const char* to_string(FeatureKind kind) noexcept;
FeatureKind feature_kind_from_string(const std::string& name);

/// Input length for a feature kind: P*2*tau_max, P, or P + 2M with
/// P = M(M-1)/2.
std::size_t feature_size(FeatureKind kind, std::size_t num_mics, int tau_max);

struct FeatureVector {
  FeatureKind kind = FeatureKind::kMax;
  std::size_t frame_index = 0;
  std::vector<double> values;
};

/// Concatenates a frame's features. The geometry-aware kind appends the
/// centroid-relative coordinates x_1..x_M then y_1..y_M; `geometry` is
/// required for it and must match the frame's microphone count.
FeatureVector assemble_feature(FeatureKind kind, const GccPhatMatrix& gcc,
                               const ArrayGeometry* geometry = nullptr);

/// CSV record: frame_index,kind,v0,v1,...
void write_feature_csv(std::ostream& out, const FeatureVector& feature);

}  // namespace gadoa
