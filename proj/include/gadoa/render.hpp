#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gadoa/rng.hpp"
#include "gadoa/scene.hpp"
#include "gadoa/signal.hpp"

namespace gadoa {

/// Long-term spectral envelope shared by synthetic speech and babble:
/// flat below the corner, then falling at slope_db_per_octave.
struct SpeechEnvelope {
  double corner_hz = 500.0;
  double slope_db_per_octave = -12.0;

  /// Amplitude gain at frequency f.
  double gain(double f_hz) const noexcept;
};

struct BabbleOptions {
  std::size_t num_waves = 32;
  SpeechEnvelope envelope;
};

struct RenderOptions {
  RirOptions rir;
  BabbleOptions babble;
  SpeechEnvelope speech;
  /// Amplitude-modulation depth of synthetic speech (0 = stationary).
  double am_depth = 0.9;
};

/// Source samples of the requested kind. White noise is N(0, 1).
std::vector<double> white_noise(std::size_t n, Rng& rng);
std::vector<double> synthetic_speech(std::size_t n, double fs, const SpeechEnvelope& env,
                                     double am_depth, Rng& rng);

/// Stationary noise from num_waves plane waves with speech-shaped spectra,
/// evenly spaced in azimuth (random common rotation). Each wave reaches
/// microphone m with its exact fractional far-field delay. Accepts any
/// number of (possibly coincident) positions.
MultichannelSignal diffuse_babble(std::span<const Point2> mics, std::size_t num_samples,
                                  double fs, Rng& rng, const BabbleOptions& opts = {});

/// The two summands of a rendered scene, before and after mixing.
struct RenderedScene {
  MultichannelSignal reverberant;  // source * RIR per channel
  MultichannelSignal noise;        // scaled babble (zeros when snr is +inf)
  MultichannelSignal mix;
};

/// Renders `num_samples` of steady-state microphone signals: the source is
/// generated long enough that every output sample sees the full RIR.
RenderedScene render_scene_parts(const Scene& scene, std::size_t num_samples, Rng& rng,
                                 const RenderOptions& opts = {});

MultichannelSignal render_scene(const Scene& scene, std::size_t num_samples, Rng& rng,
                                const RenderOptions& opts = {});

/// Free-field plane wave from azimuth theta with exact fractional delays
/// (frequency-domain phase shifts, circular over the signal length).
MultichannelSignal render_plane_wave(const ArrayGeometry& geometry, double theta_deg,
                                     std::span<const double> source, double fs);

}  // namespace gadoa
