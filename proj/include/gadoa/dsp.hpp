#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace gadoa::dsp {

using Complex = std::complex<double>;

std::size_t next_pow2(std::size_t n) noexcept;

/// Full (Hermitian) spectrum of a real sequence zero-padded to nfft.
/// nfft must be even.
std::vector<Complex> fft_real(std::span<const double> x, std::size_t nfft);

/// Inverse transform of a Hermitian spectrum, scaled by 1/N. Only bins
/// 0..N/2 are read.
std::vector<double> ifft_real(std::span<const Complex> spectrum);

/// Symmetric Hann window w[n] = 0.5 (1 - cos(2 pi n / (N - 1))).
std::vector<double> hann_window(std::size_t n);

/// "Valid" part of the linear convolution: output[i] = sum_j kernel[j] *
/// signal[i + K - 1 - j] for i in [0, S - K]. Empty if S < K.
std::vector<double> convolve_valid(std::span<const double> signal,
                                   std::span<const double> kernel);

/// Linear-interpolation resampler.
std::vector<double> resample_linear(std::span<const double> x, double from_hz,
                                    double to_hz);

double mean_power(std::span<const double> x) noexcept;

}  // namespace gadoa::dsp
