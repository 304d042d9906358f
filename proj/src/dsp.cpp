#include "gadoa/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace gadoa::dsp {

namespace {

Eigen::FFT<double>& fft_engine() {
  // kissfft keeps per-size twiddle caches; one engine per thread.
  thread_local Eigen::FFT<double> engine;
  return engine;
}

}  // namespace

std::size_t next_pow2(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<Complex> fft_real(std::span<const double> x, std::size_t nfft) {
  if (nfft == 0 || nfft % 2 != 0) throw std::invalid_argument("fft_real: nfft must be even");
  std::vector<double> padded(nfft, 0.0);
  std::copy_n(x.begin(), std::min(x.size(), nfft), padded.begin());
  std::vector<Complex> out(nfft);
  fft_engine().fwd(out.data(), padded.data(), static_cast<Eigen::Index>(nfft));
  return out;
}

std::vector<double> ifft_real(std::span<const Complex> spectrum) {
  const std::size_t n = spectrum.size();
  if (n == 0 || n % 2 != 0) throw std::invalid_argument("ifft_real: size must be even");
  std::vector<double> out(n);
  fft_engine().inv(out.data(), spectrum.data(), static_cast<Eigen::Index>(n));
  return out;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom));
  }
  return w;
}

std::vector<double> convolve_valid(std::span<const double> signal,
                                   std::span<const double> kernel) {
  const std::size_t s = signal.size();
  const std::size_t k = kernel.size();
  if (k == 0 || s < k) return {};
  const std::size_t out_len = s - k + 1;

  if (out_len * k <= 1u << 16) {
    std::vector<double> out(out_len, 0.0);
    for (std::size_t i = 0; i < out_len; ++i) {
      double acc = 0.0;
      const double* x = signal.data() + i + k - 1;
      for (std::size_t j = 0; j < k; ++j) acc += kernel[j] * x[-static_cast<std::ptrdiff_t>(j)];
      out[i] = acc;
    }
    return out;
  }

  const std::size_t nfft = next_pow2(s + k - 1);
  auto a = fft_real(signal, nfft);
  const auto b = fft_real(kernel, nfft);
  for (std::size_t i = 0; i < nfft; ++i) a[i] *= b[i];
  const auto full = ifft_real(a);
  return {full.begin() + static_cast<std::ptrdiff_t>(k - 1),
          full.begin() + static_cast<std::ptrdiff_t>(s)};
}

std::vector<double> resample_linear(std::span<const double> x, double from_hz,
                                    double to_hz) {
  if (x.empty()) return {};
  if (from_hz == to_hz) return {x.begin(), x.end()};
  const double ratio = from_hz / to_hz;
  const auto n_out = static_cast<std::size_t>(
      std::floor(static_cast<double>(x.size() - 1) / ratio)) + 1;
  std::vector<double> out(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto i0 = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i0);
    const double a = x[i0];
    const double b = i0 + 1 < x.size() ? x[i0 + 1] : a;
    out[i] = a + frac * (b - a);
  }
  return out;
}

double mean_power(std::span<const double> x) noexcept {
  if (x.empty()) return 0.0;
  const double e = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
  return e / static_cast<double>(x.size());
}

}  // namespace gadoa::dsp
