#include "gadoa/features.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "gadoa/error.hpp"

namespace gadoa {

std::vector<FrameSpectra> frame_signal(const MultichannelSignal& sig) {
  sig.validate();
  const std::size_t num_frames = sig.length() / kFrameLength;
  if (num_frames == 0) {
    throw Error(ErrorKind::kEmptyInput, "signal shorter than one frame (" +
                                            std::to_string(sig.length()) + " samples)");
  }
  static const std::vector<double> window = dsp::hann_window(kFrameLength);
  std::vector<FrameSpectra> frames;
  frames.reserve(num_frames);
  std::vector<double> buf(kFrameLength);
  for (std::size_t f = 0; f < num_frames; ++f) {
    FrameSpectra frame;
    frame.fs = sig.fs;
    frame.frame_index = f;
    bool all_zero = true;
    for (const auto& ch : sig.channels) {
      const double* x = ch.data() + f * kFrameLength;
      for (std::size_t i = 0; i < kFrameLength; ++i) {
        buf[i] = x[i] * window[i];
        all_zero = all_zero && x[i] == 0.0;
      }
      frame.channels.push_back(dsp::fft_real(buf, kFrameLength));
    }
    frame.silent = all_zero;
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<double> gcc_phat(const FrameSpectra& frame, MicPair pair, const LagBound& bound) {
  const std::size_t n = frame.fft_length();
  if (pair.k >= frame.channels.size() || pair.l >= frame.channels.size()) {
    throw Error(ErrorKind::kFeatureShape, "gcc_phat: pair index out of range");
  }
  if (bound.width() > static_cast<int>(n)) {
    throw Error(ErrorKind::kFeatureShape, "gcc_phat: lag window wider than the FFT");
  }
  const auto& yk = frame.channels[pair.k];
  const auto& yl = frame.channels[pair.l];
  std::vector<dsp::Complex> cross(n);
  for (std::size_t i = 0; i < n; ++i) {
    const dsp::Complex g = yk[i] * std::conj(yl[i]);
    const double mag = std::abs(g);
    cross[i] = mag < 1e-12 ? dsp::Complex{} : g / mag;
  }
  const auto corr = dsp::ifft_real(cross);
  // The inverse transform of Y_k Y_l^* peaks at -d when channel l lags by d;
  // reading index -lag puts that peak at +d.
  std::vector<double> out(static_cast<std::size_t>(bound.width()));
  const auto ni = static_cast<long>(n);
  for (int lag = bound.min_lag(); lag <= bound.max_lag(); ++lag) {
    const long idx = ((-static_cast<long>(lag)) % ni + ni) % ni;
    out[static_cast<std::size_t>(lag + bound.tau_max)] = corr[static_cast<std::size_t>(idx)];
  }
  return out;
}

GccPhatMatrix gcc_phat_matrix(const FrameSpectra& frame, const LagBound& bound) {
  GccPhatMatrix gcc;
  gcc.bound = bound;
  gcc.num_mics = frame.channels.size();
  gcc.frame_index = frame.frame_index;
  gcc.silent = frame.silent;
  for (const auto& pair : pair_indices(gcc.num_mics)) {
    gcc.pairs.push_back(gcc_phat(frame, pair, bound));
  }
  return gcc;
}

double parabolic_peak(double y_minus, double y_0, double y_plus) {
  if (std::isnan(y_minus) || std::isnan(y_0) || std::isnan(y_plus)) {
    throw Error(ErrorKind::kNumeric, "parabolic_peak: NaN input");
  }
  const double denom = y_minus - 2.0 * y_0 + y_plus;
  if (std::abs(denom) < 1e-12) return 0.0;
  return 0.5 * (y_minus - y_plus) / denom;
}

std::vector<double> max_lag_features(const GccPhatMatrix& gcc) {
  if (gcc.silent) throw Error(ErrorKind::kEmptyInput, "silent frame has no GCC-PHAT peak");
  std::vector<double> lags;
  lags.reserve(gcc.pairs.size());
  for (const auto& g : gcc.pairs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < g.size(); ++i) {
      if (g[i] > g[best]) best = i;
    }
    double delta = 0.0;
    if (best > 0 && best + 1 < g.size()) delta = parabolic_peak(g[best - 1], g[best], g[best + 1]);
    lags.push_back(static_cast<double>(static_cast<int>(best) - gcc.bound.tau_max) + delta);
  }
  return lags;
}

const char* to_string(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::kFull: return "full";
    case FeatureKind::kMax: return "max";
    case FeatureKind::kGeometryAware: return "ga";
  }
  return "unknown";
}

FeatureKind feature_kind_from_string(const std::string& name) {
  if (name == "full") return FeatureKind::kFull;
  if (name == "max") return FeatureKind::kMax;
  if (name == "ga" || name == "geometry-aware") return FeatureKind::kGeometryAware;
  throw Error(ErrorKind::kUsage, "unknown feature kind '" + name + "' (full|max|ga)");
}

std::size_t feature_size(FeatureKind kind, std::size_t num_mics, int tau_max) {
  const std::size_t pairs = pair_count(num_mics);
  switch (kind) {
    case FeatureKind::kFull: return pairs * 2 * static_cast<std::size_t>(tau_max);
    case FeatureKind::kMax: return pairs;
    case FeatureKind::kGeometryAware: return pairs + 2 * num_mics;
  }
  return 0;
}

FeatureVector assemble_feature(FeatureKind kind, const GccPhatMatrix& gcc,
                               const ArrayGeometry* geometry) {
  FeatureVector fv;
  fv.kind = kind;
  fv.frame_index = gcc.frame_index;
  switch (kind) {
    case FeatureKind::kFull:
      for (const auto& g : gcc.pairs) fv.values.insert(fv.values.end(), g.begin(), g.end());
      break;
    case FeatureKind::kMax:
      fv.values = max_lag_features(gcc);
      break;
    case FeatureKind::kGeometryAware: {
      if (geometry == nullptr) {
        throw Error(ErrorKind::kFeatureShape, "geometry-aware feature needs the array geometry");
      }
      if (geometry->size() != gcc.num_mics) {
        throw Error(ErrorKind::kFeatureShape, "geometry size does not match the frame's channels");
      }
      fv.values = max_lag_features(gcc);
      const auto centered = geometry->centered();
      for (const auto& p : centered.mics()) fv.values.push_back(p.x);
      for (const auto& p : centered.mics()) fv.values.push_back(p.y);
      break;
    }
  }
  if (fv.values.size() != feature_size(kind, gcc.num_mics, gcc.bound.tau_max)) {
    throw Error(ErrorKind::kFeatureShape, "feature length does not match its kind");
  }
  return fv;
}

void write_feature_csv(std::ostream& out, const FeatureVector& feature) {
  out << feature.frame_index << ',' << to_string(feature.kind);
  out << std::setprecision(17);
  for (double v : feature.values) out << ',' << v;
  out << '\n';
}

}  // namespace gadoa
