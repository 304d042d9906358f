#pragma once

#include <optional>
#include <vector>

#include "gadoa/geometry.hpp"

namespace gadoa {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

double distance(const Point3& a, const Point3& b) noexcept;

/// Shoebox room with one broadband reverberation time.
struct RoomSpec {
  Point3 dims;  // Lx, Ly, Lz [m]
  double t60 = 0.5;
  double fs = kSampleRate;
  double c = kSpeedOfSound;

  double volume() const noexcept { return dims.x * dims.y * dims.z; }
  double surface() const noexcept {
    return 2.0 * (dims.x * dims.y + dims.x * dims.z + dims.y * dims.z);
  }
  /// Throws kInvalidScene unless dims > 0, t60 in [0.05, 2] and fs, c > 0.
  void validate() const;
  bool contains(const Point3& p) const noexcept;
};

/// Sabine inversion alpha = 0.1611 V / (S T60), clipped to (0, 1).
double sabine_absorption(const RoomSpec& room);
/// Pressure reflection coefficient sqrt(1 - alpha) from the Sabine inversion.
double sabine_reflection(const RoomSpec& room);

/// Pressure reflection coefficient shared by all walls, chosen so that the
/// image-source energy decay curve of this room falls by 60 dB after T60.
/// Images of a fixed off-centre source/receiver pair are binned by arrival
/// time and reflection count once; the coefficient then follows by
/// bisection. Specular shoebox responses decay more slowly than Sabine
/// predicts (grazing paths rarely hit a wall), so this is usually smaller
/// than sabine_reflection(). The last result per thread is cached.
double wall_reflection(const RoomSpec& room);

enum class TapPlacement {
  kNearest,  // each image lands on the nearest sample
  kLinear,   // split between the two neighbouring samples
};

struct RirOptions {
  /// Overrides the T60-derived wall reflection coefficient (0 = anechoic).
  std::optional<double> reflection;
  /// Image paths are kept up to coverage * c * T60 meters.
  double coverage = 1.1;
  /// Negative = unlimited (the distance bound alone decides).
  int max_order = -1;
  TapPlacement placement = TapPlacement::kLinear;
};

/// Image-source impulse response from `src` to `mic`. Amplitudes follow
/// beta^reflections / (4 pi d); length is ceil(coverage * T60 * fs) + 2.
std::vector<double> simulate_rir(const RoomSpec& room, const Point3& src,
                                 const Point3& mic, const RirOptions& opts = {});

}  // namespace gadoa
