#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "gadoa/geometry.hpp"

namespace gadoa {

/// Equal-length channels at a common sampling rate. Amplitude scale is
/// arbitrary.
struct MultichannelSignal {
  std::vector<std::vector<double>> channels;
  double fs = kSampleRate;

  std::size_t num_channels() const noexcept { return channels.size(); }
  std::size_t length() const noexcept {
    return channels.empty() ? 0 : channels.front().size();
  }
  /// Throws kEmptyInput on mismatched channel lengths or no channels.
  void validate() const;
};

/// Reads a 16-bit PCM mono WAV file and resamples it to `target_fs`.
std::vector<double> read_wav_mono(const std::filesystem::path& path,
                                  double target_fs = kSampleRate);

/// Writes 16-bit PCM with one channel per signal channel. Samples are scaled
/// by a single gain so the peak maps to 0.9 full scale.
void write_wav(const std::filesystem::path& path, const MultichannelSignal& sig);

}  // namespace gadoa
