#include "gadoa/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gadoa/dsp.hpp"
#include "gadoa/error.hpp"

namespace gadoa {

namespace {

using dsp::Complex;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double bin_frequency(std::size_t k, std::size_t nfft, double fs) {
  return static_cast<double>(std::min(k, nfft - k)) * fs / static_cast<double>(nfft);
}

void normalize_rms(std::vector<double>& x) {
  const double p = dsp::mean_power(x);
  if (p > 0.0) {
    const double g = 1.0 / std::sqrt(p);
    for (double& v : x) v *= g;
  }
}

std::vector<double> source_signal(const Scene& scene, std::size_t n, Rng& rng,
                                  const RenderOptions& opts) {
  switch (scene.source_kind) {
    case SourceKind::kWhiteNoise:
      return white_noise(n, rng);
    case SourceKind::kSyntheticSpeech:
      return synthetic_speech(n, scene.room.fs, opts.speech, opts.am_depth, rng);
    case SourceKind::kSpeechWav: {
      if (scene.wav_path.empty()) throw Error(ErrorKind::kIngestion, "scene has no WAV path");
      const auto wav = read_wav_mono(scene.wav_path, scene.room.fs);
      if (wav.size() < n) {
        throw Error(ErrorKind::kIngestion, scene.wav_path + ": too short (" +
                                               std::to_string(wav.size()) + " < " +
                                               std::to_string(n) + " samples)");
      }
      const auto offset =
          std::uniform_int_distribution<std::size_t>(0, wav.size() - n)(rng);
      return {wav.begin() + static_cast<std::ptrdiff_t>(offset),
              wav.begin() + static_cast<std::ptrdiff_t>(offset + n)};
    }
  }
  throw Error(ErrorKind::kInvalidScene, "unknown source kind");
}

}  // namespace

double SpeechEnvelope::gain(double f_hz) const noexcept {
  if (f_hz <= corner_hz) return 1.0;
  const double octaves = std::log2(f_hz / corner_hz);
  return std::pow(10.0, slope_db_per_octave * octaves / 20.0);
}

std::vector<double> white_noise(std::size_t n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = normal(rng);
  return x;
}

std::vector<double> synthetic_speech(std::size_t n, double fs, const SpeechEnvelope& env,
                                     double am_depth, Rng& rng) {
  if (n == 0) return {};
  const std::size_t nfft = std::max<std::size_t>(2, dsp::next_pow2(n));
  auto spectrum = dsp::fft_real(white_noise(nfft, rng), nfft);
  for (std::size_t k = 0; k < nfft; ++k) spectrum[k] *= env.gain(bin_frequency(k, nfft, fs));
  auto shaped = dsp::ifft_real(spectrum);
  shaped.resize(n);

  const double rate = std::uniform_real_distribution<double>(4.0, 8.0)(rng);
  const double phase = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::sin(kTwoPi * rate * static_cast<double>(i) / fs + phase);
    shaped[i] *= 1.0 - am_depth * 0.5 * (1.0 + s);
  }
  normalize_rms(shaped);
  return shaped;
}

MultichannelSignal diffuse_babble(std::span<const Point2> mics, std::size_t num_samples,
                                  double fs, Rng& rng, const BabbleOptions& opts) {
  if (mics.empty() || opts.num_waves == 0) {
    throw Error(ErrorKind::kEmptyInput, "babble needs at least one channel and one wave");
  }
  const std::size_t nfft = std::max<std::size_t>(4, dsp::next_pow2(num_samples + num_samples / 4 + 2));
  const std::size_t half = nfft / 2;
  std::vector<std::vector<Complex>> spectra(mics.size(), std::vector<Complex>(nfft));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double rotation = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);

  std::vector<Complex> wave(half + 1);
  for (std::size_t p = 0; p < opts.num_waves; ++p) {
    const double az = rotation + kTwoPi * static_cast<double>(p) / static_cast<double>(opts.num_waves);
    const double ux = std::cos(az), uy = std::sin(az);
    for (std::size_t k = 1; k < half; ++k) {
      const double g = opts.envelope.gain(bin_frequency(k, nfft, fs));
      const double re = normal(rng);
      const double im = normal(rng);
      wave[k] = Complex(re, im) * g;
    }
    for (std::size_t m = 0; m < mics.size(); ++m) {
      const double delay = -(mics[m].x * ux + mics[m].y * uy) / kSpeedOfSound;
      for (std::size_t k = 1; k < half; ++k) {
        const double omega = kTwoPi * static_cast<double>(k) * fs / static_cast<double>(nfft);
        spectra[m][k] += wave[k] * std::polar(1.0, -omega * delay);
      }
    }
  }

  MultichannelSignal out;
  out.fs = fs;
  for (auto& spec : spectra) {
    for (std::size_t k = 1; k < half; ++k) spec[nfft - k] = std::conj(spec[k]);
    auto x = dsp::ifft_real(spec);
    x.resize(num_samples);
    out.channels.push_back(std::move(x));
  }
  return out;
}

RenderedScene render_scene_parts(const Scene& scene, std::size_t num_samples, Rng& rng,
                                 const RenderOptions& opts) {
  scene.validate();
  if (num_samples == 0) throw Error(ErrorKind::kEmptyInput, "render: zero-length request");
  const std::size_t num_mics = scene.geometry.size();

  RirOptions rir_opts = opts.rir;
  if (!rir_opts.reflection) rir_opts.reflection = wall_reflection(scene.room);
  std::vector<std::vector<double>> rirs;
  rirs.reserve(num_mics);
  std::size_t rir_len = 0;
  for (std::size_t m = 0; m < num_mics; ++m) {
    rirs.push_back(simulate_rir(scene.room, scene.source, scene.mic_position(m), rir_opts));
    rir_len = std::max(rir_len, rirs.back().size());
  }
  for (auto& h : rirs) h.resize(rir_len, 0.0);

  const auto src = source_signal(scene, num_samples + rir_len - 1, rng, opts);

  RenderedScene out;
  out.reverberant.fs = out.noise.fs = out.mix.fs = scene.room.fs;
  double source_power = 0.0;
  for (const auto& h : rirs) {
    out.reverberant.channels.push_back(dsp::convolve_valid(src, h));
    source_power += dsp::mean_power(out.reverberant.channels.back());
  }
  source_power /= static_cast<double>(num_mics);
  if (!(source_power > 0.0)) {
    throw Error(ErrorKind::kDegenerateScene, "source image has zero power");
  }

  if (std::isfinite(scene.snr_db)) {
    const auto centered = scene.geometry.centered();
    out.noise = diffuse_babble(centered.mics(), num_samples, scene.room.fs, rng, opts.babble);
    double noise_power = 0.0;
    for (const auto& ch : out.noise.channels) noise_power += dsp::mean_power(ch);
    noise_power /= static_cast<double>(num_mics);
    const double g = std::sqrt(source_power / (noise_power * std::pow(10.0, scene.snr_db / 10.0)));
    for (auto& ch : out.noise.channels) {
      for (double& v : ch) v *= g;
    }
  } else {
    out.noise.channels.assign(num_mics, std::vector<double>(num_samples, 0.0));
  }

  out.mix.channels = out.reverberant.channels;
  for (std::size_t m = 0; m < num_mics; ++m) {
    for (std::size_t i = 0; i < num_samples; ++i) out.mix.channels[m][i] += out.noise.channels[m][i];
  }
  return out;
}

MultichannelSignal render_scene(const Scene& scene, std::size_t num_samples, Rng& rng,
                                const RenderOptions& opts) {
  return render_scene_parts(scene, num_samples, rng, opts).mix;
}

MultichannelSignal render_plane_wave(const ArrayGeometry& geometry, double theta_deg,
                                     std::span<const double> source, double fs) {
  const std::size_t n = source.size() - source.size() % 2;
  if (n < 2) throw Error(ErrorKind::kEmptyInput, "plane wave: source too short");
  const auto spectrum = dsp::fft_real(source.first(n), n);
  MultichannelSignal out;
  out.fs = fs;
  for (std::size_t m = 0; m < geometry.size(); ++m) {
    const double delay = arrival_delay(geometry, m, theta_deg);
    std::vector<Complex> shifted(n);
    shifted[0] = spectrum[0];
    for (std::size_t k = 1; k < n / 2; ++k) {
      const double omega = kTwoPi * static_cast<double>(k) * fs / static_cast<double>(n);
      shifted[k] = spectrum[k] * std::polar(1.0, -omega * delay);
      shifted[n - k] = std::conj(shifted[k]);
    }
    out.channels.push_back(dsp::ifft_real(shifted));
  }
  return out;
}

}  // namespace gadoa
