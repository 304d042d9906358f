#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "gadoa/dsp.hpp"
#include "gadoa/error.hpp"
#include "gadoa/signal.hpp"

namespace gadoa {

void MultichannelSignal::validate() const {
  if (channels.empty()) throw Error(ErrorKind::kEmptyInput, "signal has no channels");
  for (const auto& ch : channels) {
    if (ch.size() != channels.front().size()) {
      throw Error(ErrorKind::kEmptyInput, "signal channels differ in length");
    }
  }
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

std::vector<double> read_wav_mono(const std::filesystem::path& path, double target_fs) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIngestion, "cannot open WAV " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(data, "RIFF", 4) != 0 ||
      std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::kIngestion, path.string() + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = read_u32(data + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) break;
    if (std::memcmp(data + pos, "fmt ", 4) == 0 && size >= 16) {
      format = read_u16(data + body);
      channels = read_u16(data + body + 2);
      rate = read_u32(data + body + 4);
      bits = read_u16(data + body + 14);
      have_fmt = true;
    } else if (std::memcmp(data + pos, "data", 4) == 0) {
      if (!have_fmt) break;
      if (format != 1 || bits != 16 || channels != 1 || rate == 0) {
        throw Error(ErrorKind::kIngestion,
                    path.string() + ": only 16-bit PCM mono WAV is supported");
      }
      std::vector<double> samples(size / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(data + body + 2 * i));
        samples[i] = static_cast<double>(v) / 32768.0;
      }
      return dsp::resample_linear(samples, rate, target_fs);
    }
    pos = body + size + (size & 1);
  }
  throw Error(ErrorKind::kIngestion, path.string() + ": missing fmt or data chunk");
}

void write_wav(const std::filesystem::path& path, const MultichannelSignal& sig) {
  sig.validate();
  const auto nch = static_cast<std::uint16_t>(sig.num_channels());
  const auto n = static_cast<std::uint32_t>(sig.length());
  double peak = 0.0;
  for (const auto& ch : sig.channels) {
    for (double v : ch) peak = std::max(peak, std::abs(v));
  }
  const double gain = peak > 0.0 ? 0.9 * 32767.0 / peak : 0.0;

  std::string out;
  const std::uint32_t data_bytes = n * nch * 2;
  out.append("RIFF");
  put_u32(out, 36 + data_bytes);
  out.append("WAVEfmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, nch);
  const auto rate = static_cast<std::uint32_t>(std::lround(sig.fs));
  put_u32(out, rate);
  put_u32(out, rate * nch * 2);
  put_u16(out, static_cast<std::uint16_t>(nch * 2));
  put_u16(out, 16);
  out.append("data");
  put_u32(out, data_bytes);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (const auto& ch : sig.channels) {
      const long v = std::lround(ch[i] * gain);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L))));
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIngestion, "cannot write WAV " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace gadoa
