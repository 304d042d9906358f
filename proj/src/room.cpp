#include "gadoa/room.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gadoa/error.hpp"

namespace gadoa {

double distance(const Point3& a, const Point3& b) noexcept {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void RoomSpec::validate() const {
  if (!(dims.x > 0.0 && dims.y > 0.0 && dims.z > 0.0)) {
    throw Error(ErrorKind::kInvalidScene, "room dimensions must be positive");
  }
  if (!(t60 >= 0.05 && t60 <= 2.0)) {
    throw Error(ErrorKind::kInvalidScene, "T60 must lie in [0.05, 2.0] s");
  }
  if (!(fs > 0.0) || !(c > 0.0)) {
    throw Error(ErrorKind::kInvalidScene, "fs and c must be positive");
  }
}

bool RoomSpec::contains(const Point3& p) const noexcept {
  return p.x > 0.0 && p.x < dims.x && p.y > 0.0 && p.y < dims.y && p.z > 0.0 &&
         p.z < dims.z;
}

double sabine_absorption(const RoomSpec& room) {
  room.validate();
  const double alpha = 0.1611 * room.volume() / (room.surface() * room.t60);
  return std::clamp(alpha, 1e-6, 1.0 - 1e-6);
}

double sabine_reflection(const RoomSpec& room) {
  return std::sqrt(1.0 - sabine_absorption(room));
}

namespace {

int axis_reflections(int n, int q) { return std::abs(n - q) + std::abs(n); }

// Calls visit(distance, wall_hits) for every image of `src` within max_path
// of `mic`. Distances along one z column are computed in a batch so the
// square roots vectorize.
template <typename Visit>
void for_each_image(const RoomSpec& room, const Point3& src, const Point3& mic,
                    double max_path, Visit&& visit) {
  const double r2max = max_path * max_path;
  const int nx_max = static_cast<int>(std::ceil(max_path / (2.0 * room.dims.x))) + 1;
  const int ny_max = static_cast<int>(std::ceil(max_path / (2.0 * room.dims.y))) + 1;
  const double two_lz = 2.0 * room.dims.z;
  std::vector<double> column;
  std::vector<int> column_hits;

  for (int qx = 0; qx <= 1; ++qx) {
    for (int nx = -nx_max; nx <= nx_max; ++nx) {
      const double dx = (1 - 2 * qx) * src.x + 2.0 * nx * room.dims.x - mic.x;
      const double dx2 = dx * dx;
      if (dx2 > r2max) continue;
      const int rx = axis_reflections(nx, qx);
      for (int qy = 0; qy <= 1; ++qy) {
        for (int ny = -ny_max; ny <= ny_max; ++ny) {
          const double dy = (1 - 2 * qy) * src.y + 2.0 * ny * room.dims.y - mic.y;
          const double dxy2 = dx2 + dy * dy;
          if (dxy2 > r2max) continue;
          const int rxy = rx + axis_reflections(ny, qy);
          const double dz_reach = std::sqrt(r2max - dxy2);
          for (int qz = 0; qz <= 1; ++qz) {
            const double sz = (1 - 2 * qz) * src.z - mic.z;
            const int nz_lo = static_cast<int>(std::ceil((-dz_reach - sz) / two_lz));
            const int nz_hi = static_cast<int>(std::floor((dz_reach - sz) / two_lz));
            if (nz_hi < nz_lo) continue;
            const auto count = static_cast<std::size_t>(nz_hi - nz_lo + 1);
            column.resize(count);
            column_hits.resize(count);
            for (std::size_t k = 0; k < count; ++k) {
              const int nz = nz_lo + static_cast<int>(k);
              const double dz = sz + nz * two_lz;
              column[k] = dxy2 + dz * dz;
              column_hits[k] = rxy + axis_reflections(nz, qz);
            }
            for (std::size_t k = 0; k < count; ++k) column[k] = std::sqrt(column[k]);
            for (std::size_t k = 0; k < count; ++k) visit(column[k], column_hits[k]);
          }
        }
      }
    }
  }
}

// Amplitudes of a canonical response (linear taps) split by wall hits, so
// that for any beta sample s is sum_n taps(s, n) beta^n. All images share a
// sign and the late taps add coherently, so the decay has to be measured on
// the sampled response rather than on summed image energies.
double calibrate_reflection(const RoomSpec& room) {
  const Point3 src{0.37 * room.dims.x, 0.41 * room.dims.y, 0.45 * room.dims.z};
  const Point3 mic{0.63 * room.dims.x, 0.58 * room.dims.y, 0.52 * room.dims.z};
  constexpr double kSpan = 1.3;  // past T60 so the late slope can be fitted
  const auto length = static_cast<std::size_t>(kSpan * room.t60 * room.fs);
  const auto target = static_cast<std::size_t>(std::lround(room.t60 * room.fs));
  const double samples_per_meter = room.fs / room.c;

  // Two passes over the images: the hit-count range of every sample first,
  // then the amplitudes packed row by row.
  std::vector<int> lo(length, std::numeric_limits<int>::max()), hi(length, -1);
  auto visit_taps = [&](auto&& emit) {
    for_each_image(room, src, mic, kSpan * room.c * room.t60, [&](double dist, int hits) {
      const double t = dist * samples_per_meter;
      const auto i0 = static_cast<std::size_t>(t);
      const double frac = t - static_cast<double>(i0);
      if (i0 < length) emit(i0, hits, (1.0 - frac) / dist);
      if (i0 + 1 < length) emit(i0 + 1, hits, frac / dist);
    });
  };
  visit_taps([&](std::size_t i, int n, double) {
    lo[i] = std::min(lo[i], n);
    hi[i] = std::max(hi[i], n);
  });
  std::vector<std::size_t> start(length + 1, 0);
  for (std::size_t i = 0; i < length; ++i) {
    start[i + 1] = start[i] + static_cast<std::size_t>(hi[i] >= lo[i] ? hi[i] - lo[i] + 1 : 0);
  }
  std::vector<double> taps(start[length], 0.0);
  visit_taps([&](std::size_t i, int n, double a) { taps[start[i] + static_cast<std::size_t>(n - lo[i])] += a; });

  // Share of the energy arriving at or after T60. The part beyond the
  // enumerated span is continued geometrically from a log-linear fit of the
  // late energy in 5 ms blocks.
  const std::size_t block = std::max<std::size_t>(1, static_cast<std::size_t>(0.005 * room.fs));
  const std::size_t n_blocks = length / block;
  const std::size_t fit_from = std::min(target * 4 / 5 / block, n_blocks - 2);
  std::vector<double> energy(n_blocks);
  auto tail_fraction = [&](double beta) {
    double total = 0.0, tail = 0.0;
    std::fill(energy.begin(), energy.end(), 0.0);
    for (std::size_t i = 0; i < n_blocks * block; ++i) {
      if (start[i + 1] == start[i]) continue;
      double a = 0.0;  // Horner from the highest hit count down
      for (std::size_t j = start[i + 1]; j-- > start[i];) a = a * beta + taps[j];
      a *= std::pow(beta, lo[i]);
      const double e = a * a;
      energy[i / block] += e;
      total += e;
      if (i >= target) tail += e;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t k = fit_from; k < n_blocks; ++k) {
      if (!(energy[k] > 0.0)) continue;
      const double x = static_cast<double>(k), y = std::log(energy[k]);
      sx += x, sy += y, sxx += x * x, sxy += x * y, n += 1;
    }
    if (n >= 2) {
      const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      const double ratio = std::exp(slope);
      if (ratio >= 1.0) return 1.0;
      // Fitted energy of the first block past the span.
      const double next = std::exp((sy + slope * (static_cast<double>(n_blocks) * n - sx)) / n);
      const double extra = next / (1.0 - ratio);
      total += extra;
      tail += extra;
    }
    return tail / total;
  };

  // Root of log(tail) - log(1e-6): a few bisection steps to bracket it
  // tightly, then regula falsi with the Illinois modification.
  constexpr double kTarget = 1e-6;
  auto f = [&](double beta) { return std::log(tail_fraction(beta) / kTarget); };
  double a = 0.0, b = 1.0 - 1e-9;
  for (int it = 0; it < 8; ++it) {
    const double mid = 0.5 * (a + b);
    (f(mid) > 0.0 ? b : a) = mid;
  }
  double fa = f(a), fb = f(b);
  if (!std::isfinite(fa) || !std::isfinite(fb)) {
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (a + b);
      (f(mid) > 0.0 ? b : a) = mid;
    }
    return 0.5 * (a + b);
  }
  int side = 0;
  for (int it = 0; it < 40 && b - a > 1e-9; ++it) {
    const double c = (a * fb - b * fa) / (fb - fa);
    const double fc = f(c);
    if (fc == 0.0) return c;
    if ((fc > 0.0) == (fb > 0.0)) {
      b = c, fb = fc;
      if (side == 1) fa *= 0.5;
      side = 1;
    } else {
      a = c, fa = fc;
      if (side == -1) fb *= 0.5;
      side = -1;
    }
  }
  return (a * fb - b * fa) / (fb - fa);
}

}  // namespace

double wall_reflection(const RoomSpec& room) {
  room.validate();
  struct Cached {
    Point3 dims;
    double t60 = -1.0, fs = 0.0, c = 0.0, beta = 0.0;
  };
  thread_local Cached cache;
  if (cache.dims == room.dims && cache.t60 == room.t60 && cache.fs == room.fs &&
      cache.c == room.c) {
    return cache.beta;
  }
  const double beta = calibrate_reflection(room);
  cache = {room.dims, room.t60, room.fs, room.c, beta};
  return beta;
}

std::vector<double> simulate_rir(const RoomSpec& room, const Point3& src,
                                 const Point3& mic, const RirOptions& opts) {
  room.validate();
  if (!room.contains(src) || !room.contains(mic)) {
    throw Error(ErrorKind::kInvalidScene, "source and microphone must lie inside the room");
  }
  if (src == mic) throw Error(ErrorKind::kInvalidScene, "source coincides with microphone");

  const double beta = opts.reflection ? *opts.reflection : wall_reflection(room);
  const double max_path = opts.coverage * room.c * room.t60;
  const auto length = static_cast<std::size_t>(std::ceil(opts.coverage * room.t60 * room.fs)) + 2;
  std::vector<double> rir(length, 0.0);
  const double samples_per_meter = room.fs / room.c;

  // Wall hits are bounded by the path length; the table covers the worst case.
  int max_hits = 4;
  for (double l : {room.dims.x, room.dims.y, room.dims.z}) {
    max_hits += 2 * (static_cast<int>(std::ceil(max_path / (2.0 * l))) + 1);
  }
  std::vector<double> gain(static_cast<std::size_t>(max_hits) + 1);
  gain[0] = 1.0;
  for (std::size_t i = 1; i < gain.size(); ++i) gain[i] = gain[i - 1] * beta;
  const double inv4pi = 1.0 / (4.0 * std::numbers::pi);

  for_each_image(room, src, mic, max_path, [&](double dist, int hits) {
    if (opts.max_order >= 0 && hits > opts.max_order) return;
    const double amp = gain[static_cast<std::size_t>(hits)] * inv4pi / dist;
    const double t = dist * samples_per_meter;
    if (opts.placement == TapPlacement::kNearest) {
      // t >= 0, so truncating t + 0.5 rounds half away from zero.
      const auto idx = static_cast<std::size_t>(t + 0.5);
      if (idx < length) rir[idx] += amp;
    } else {
      const auto i0 = static_cast<std::size_t>(t);
      const double frac = t - static_cast<double>(i0);
      if (i0 < length) rir[i0] += amp * (1.0 - frac);
      if (i0 + 1 < length) rir[i0 + 1] += amp * frac;
    }
  });
  return rir;
}

}  // namespace gadoa
