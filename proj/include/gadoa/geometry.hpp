#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "gadoa/rng.hpp"

namespace gadoa {

/// Speed of sound used throughout unless a caller overrides it [m/s].
inline constexpr double kSpeedOfSound = 343.0;
/// Sampling rate of all processing [Hz].
inline constexpr double kSampleRate = 8000.0;
/// Default lag-bound safety margin in samples.
inline constexpr int kDefaultLagMargin = 4;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Zero-based microphone pair, k < l.
struct MicPair {
  std::size_t k = 0;
  std::size_t l = 0;

  friend bool operator==(const MicPair&, const MicPair&) = default;
};

/// Ordered planar microphone coordinates in meters. Immutable once built;
/// the constructor rejects fewer than two microphones, non-finite
/// coordinates and fully coincident arrays.
class ArrayGeometry {
 public:
  explicit ArrayGeometry(std::vector<Point2> mics);

  std::size_t size() const noexcept { return mics_.size(); }
  const Point2& operator[](std::size_t i) const { return mics_[i]; }
  std::span<const Point2> mics() const noexcept { return mics_; }

  /// Largest pairwise distance.
  double max_distance() const noexcept { return max_distance_; }
  Point2 centroid() const noexcept;
  /// Copy translated so the centroid sits at the origin.
  ArrayGeometry centered() const;

  friend bool operator==(const ArrayGeometry&, const ArrayGeometry&) = default;

 private:
  std::vector<Point2> mics_;
  double max_distance_ = 0.0;
};

/// Constrained GCC lag window [-tau_max, tau_max - 1].
struct LagBound {
  int tau_max = 0;
  int eta = 0;
  double fs = kSampleRate;
  double c = kSpeedOfSound;

  int width() const noexcept { return 2 * tau_max; }
  int min_lag() const noexcept { return -tau_max; }
  int max_lag() const noexcept { return tau_max - 1; }
};

/// All unordered pairs in lexicographic order (0,1),(0,2),...,(M-2,M-1).
std::vector<MicPair> pair_indices(std::size_t num_mics);

inline std::size_t pair_count(std::size_t num_mics) noexcept {
  return num_mics * (num_mics - 1) / 2;
}

/// tau_max = ceil(r_max * fs / c) + eta.
LagBound lag_bound(const ArrayGeometry& geom, double fs = kSampleRate,
                   double c = kSpeedOfSound, int eta = kDefaultLagMargin);

/// Far-field delay ((r_k - r_l) . u(theta)) / c in seconds. Positive when
/// the wavefront reaches microphone k before microphone l.
double steering_delay(const ArrayGeometry& geom, std::size_t k, std::size_t l,
                      double theta_deg, double c = kSpeedOfSound);

/// Arrival time of a far-field wavefront at microphone m relative to the
/// array centroid, in seconds (negative means earlier than the centroid).
double arrival_delay(const ArrayGeometry& geom, std::size_t m, double theta_deg,
                     double c = kSpeedOfSound);

/// Moves every microphone by exactly `step` meters in an independently drawn
/// uniform direction.
ArrayGeometry deviate_geometry(const ArrayGeometry& geom, double step, Rng& rng);

/// Coordinates i.i.d. uniform over a width x depth rectangle centered at the
/// origin. Redraws (bounded) if the draw is fully coincident.
ArrayGeometry random_geometry(std::size_t num_mics, double width, double depth,
                              Rng& rng);

/// Fixed five-microphone arc, 0.4 m wide.
ArrayGeometry arc_array();

// Plain-text geometry files: one "x y" per line, '#' starts a comment.
ArrayGeometry read_geometry(std::istream& in);
ArrayGeometry load_geometry(const std::filesystem::path& path);
void write_geometry(std::ostream& out, const ArrayGeometry& geom);

}  // namespace gadoa
