#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gadoa/geometry.hpp"
#include "gadoa/room.hpp"
#include "gadoa/signal.hpp"

namespace gadoa {

enum class SourceKind { kSpeechWav, kWhiteNoise, kSyntheticSpeech };

const char* to_string(SourceKind kind) noexcept;
SourceKind source_kind_from_string(const std::string& name);

/// One simulated trial. The array's centroid sits at array_center, so
/// microphone m is at array_center + (r_m - centroid, 0).
struct Scene {
  RoomSpec room;
  Point3 array_center;
  ArrayGeometry geometry = arc_array();
  Point3 source;
  SourceKind source_kind = SourceKind::kSyntheticSpeech;
  std::string wav_path;  // only for kSpeechWav
  double snr_db = 20.0;  // +inf disables noise
  double ground_truth_doa = 0.0;
  std::uint64_t seed = 0;  // render seed

  Point3 mic_position(std::size_t m) const;
  /// Throws kInvalidScene if the source or any microphone is outside.
  void validate() const;
};

/// Azimuth of `target` seen from `origin`, in [0, 360).
double azimuth_deg(const Point3& origin, const Point3& target) noexcept;

/// Sampling ranges for random scenes; defaults reproduce the training table.
struct SceneRanges {
  Point3 room_mean{9.0, 5.0, 3.0};
  Point3 room_spread{1.0, 1.0, 0.5};
  Point3 array_mean{4.5, 2.5, 1.5};
  Point3 array_spread{0.5, 0.5, 0.5};
  double min_distance = 1.0;
  double max_distance = 3.0;
  double doa_step_deg = 5.0;
  double t60_min = 0.13;
  double t60_max = 1.0;
  double snr_min_db = 0.0;
  double snr_max_db = 30.0;
  /// Minimum clearance between the source and any wall.
  double wall_margin = 0.1;
  /// Probability of a speech source (otherwise white noise).
  double speech_fraction = 0.5;
  /// Optional WAV corpus; empty means synthetic speech.
  std::vector<std::filesystem::path> corpus;
  int max_retries = 100;

  void validate() const;
};

/// Draws room, array position, source direction on the DoA grid, distance
/// (clipped to the room), T60, SNR and source kind.
Scene sample_scene(const SceneRanges& ranges, const ArrayGeometry& geometry, Rng& rng);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);
void save_scene(const std::filesystem::path& path, const Scene& scene);
Scene load_scene(const std::filesystem::path& path);

/// Lists *.wav files under a directory, sorted by path.
std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir);

}  // namespace gadoa
