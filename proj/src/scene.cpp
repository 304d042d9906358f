#include "gadoa/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "gadoa/error.hpp"

namespace gadoa {

namespace {

constexpr const char* kSceneSchema = "gadoa.scene/1";

double uniform(Rng& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double around(Rng& rng, double mean, double spread) {
  return uniform(rng, mean - spread, mean + spread);
}

nlohmann::json point_json(const Point3& p) { return nlohmann::json::array({p.x, p.y, p.z}); }

Point3 point_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorKind::kFormat, "scene: expected [x, y, z]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Largest distance from `from` along unit direction (ux, uy) that keeps the
// point `margin` away from the walls of the x-y rectangle.
double reach_along(const Point3& from, double ux, double uy, const Point3& dims,
                   double margin) {
  double reach = std::numeric_limits<double>::infinity();
  auto limit = [&](double pos, double u, double extent) {
    if (u > 1e-12) {
      reach = std::min(reach, (extent - margin - pos) / u);
    } else if (u < -1e-12) {
      reach = std::min(reach, (margin - pos) / u);
    }
  };
  limit(from.x, ux, dims.x);
  limit(from.y, uy, dims.y);
  return reach;
}

}  // namespace

const char* to_string(SourceKind kind) noexcept {
  switch (kind) {
    case SourceKind::kSpeechWav: return "speech-wav";
    case SourceKind::kWhiteNoise: return "white-noise";
    case SourceKind::kSyntheticSpeech: return "synthetic-speech";
  }
  return "unknown";
}

SourceKind source_kind_from_string(const std::string& name) {
  if (name == "speech-wav") return SourceKind::kSpeechWav;
  if (name == "white-noise") return SourceKind::kWhiteNoise;
  if (name == "synthetic-speech") return SourceKind::kSyntheticSpeech;
  throw Error(ErrorKind::kFormat, "unknown source kind '" + name + "'");
}

Point3 Scene::mic_position(std::size_t m) const {
  const Point2& p = geometry[m];
  const Point2 c = geometry.centroid();
  return {array_center.x + p.x - c.x, array_center.y + p.y - c.y, array_center.z};
}

void Scene::validate() const {
  room.validate();
  if (!room.contains(source)) throw Error(ErrorKind::kInvalidScene, "source outside the room");
  for (std::size_t m = 0; m < geometry.size(); ++m) {
    if (!room.contains(mic_position(m))) {
      throw Error(ErrorKind::kInvalidScene, "microphone " + std::to_string(m) + " outside the room");
    }
  }
}

double azimuth_deg(const Point3& origin, const Point3& target) noexcept {
  double deg = std::atan2(target.y - origin.y, target.x - origin.x) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

void SceneRanges::validate() const {
  const bool ok = room_mean.x > room_spread.x && room_mean.y > room_spread.y &&
                  room_mean.z > room_spread.z && min_distance > 0.0 &&
                  max_distance >= min_distance && doa_step_deg > 0.0 &&
                  t60_min > 0.0 && t60_max >= t60_min && snr_max_db >= snr_min_db &&
                  wall_margin >= 0.0 && speech_fraction >= 0.0 && speech_fraction <= 1.0 &&
                  max_retries > 0;
  if (!ok) throw Error(ErrorKind::kUsage, "invalid scene sampling ranges");
}

Scene sample_scene(const SceneRanges& ranges, const ArrayGeometry& geometry, Rng& rng) {
  ranges.validate();
  const int grid = static_cast<int>(std::lround(360.0 / ranges.doa_step_deg));
  std::uniform_int_distribution<int> doa_class(0, grid - 1);

  for (int attempt = 0; attempt < ranges.max_retries; ++attempt) {
    Scene scene;
    scene.geometry = geometry;
    scene.room.dims = {around(rng, ranges.room_mean.x, ranges.room_spread.x),
                       around(rng, ranges.room_mean.y, ranges.room_spread.y),
                       around(rng, ranges.room_mean.z, ranges.room_spread.z)};
    scene.room.t60 = uniform(rng, ranges.t60_min, ranges.t60_max);
    scene.snr_db = uniform(rng, ranges.snr_min_db, ranges.snr_max_db);
    scene.array_center = {around(rng, ranges.array_mean.x, ranges.array_spread.x),
                          around(rng, ranges.array_mean.y, ranges.array_spread.y),
                          around(rng, ranges.array_mean.z, ranges.array_spread.z)};
    const double theta = doa_class(rng) * ranges.doa_step_deg;
    const double ux = std::cos(theta * std::numbers::pi / 180.0);
    const double uy = std::sin(theta * std::numbers::pi / 180.0);
    const double reach =
        std::min(ranges.max_distance,
                 reach_along(scene.array_center, ux, uy, scene.room.dims, ranges.wall_margin));
    const double dist = uniform(rng, ranges.min_distance, reach);
    const bool speech = std::bernoulli_distribution(ranges.speech_fraction)(rng);
    std::size_t wav_index = 0;
    if (speech && !ranges.corpus.empty()) {
      wav_index = std::uniform_int_distribution<std::size_t>(0, ranges.corpus.size() - 1)(rng);
    }
    scene.seed = rng();

    bool inside = reach >= ranges.min_distance;
    for (std::size_t m = 0; inside && m < geometry.size(); ++m) {
      inside = scene.room.contains(scene.mic_position(m));
    }
    if (!inside) continue;

    scene.source = {scene.array_center.x + dist * ux, scene.array_center.y + dist * uy,
                    scene.array_center.z};
    scene.ground_truth_doa = theta;
    if (!speech) {
      scene.source_kind = SourceKind::kWhiteNoise;
    } else if (ranges.corpus.empty()) {
      scene.source_kind = SourceKind::kSyntheticSpeech;
    } else {
      scene.source_kind = SourceKind::kSpeechWav;
      scene.wav_path = ranges.corpus[wav_index].string();
    }
    return scene;
  }
  throw Error(ErrorKind::kSceneSampling, "no feasible source placement after " +
                                             std::to_string(ranges.max_retries) + " retries");
}

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json mics = nlohmann::json::array();
  for (const auto& p : scene.geometry.mics()) mics.push_back({p.x, p.y});
  nlohmann::json snr = std::isfinite(scene.snr_db) ? nlohmann::json(scene.snr_db)
                                                   : nlohmann::json("inf");
  return {
      {"schema", kSceneSchema},
      {"room", {{"dims", point_json(scene.room.dims)},
                {"t60", scene.room.t60},
                {"fs", scene.room.fs},
                {"c", scene.room.c}}},
      {"array_center", point_json(scene.array_center)},
      {"geometry", mics},
      {"source_position", point_json(scene.source)},
      {"source_kind", to_string(scene.source_kind)},
      {"wav_path", scene.wav_path},
      {"snr_db", snr},
      {"ground_truth_doa", scene.ground_truth_doa},
      {"seed", scene.seed},
  };
}

Scene scene_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kSceneSchema) {
      throw Error(ErrorKind::kFormat, "scene: unsupported schema " + j.at("schema").dump());
    }
    Scene scene;
    const auto& room = j.at("room");
    scene.room.dims = point_from_json(room.at("dims"));
    scene.room.t60 = room.at("t60").get<double>();
    scene.room.fs = room.at("fs").get<double>();
    scene.room.c = room.at("c").get<double>();
    scene.array_center = point_from_json(j.at("array_center"));
    std::vector<Point2> mics;
    for (const auto& m : j.at("geometry")) mics.push_back({m.at(0).get<double>(), m.at(1).get<double>()});
    scene.geometry = ArrayGeometry(std::move(mics));
    scene.source = point_from_json(j.at("source_position"));
    scene.source_kind = source_kind_from_string(j.at("source_kind").get<std::string>());
    scene.wav_path = j.value("wav_path", std::string{});
    const auto& snr = j.at("snr_db");
    scene.snr_db = snr.is_string() ? std::numeric_limits<double>::infinity() : snr.get<double>();
    scene.ground_truth_doa = j.at("ground_truth_doa").get<double>();
    scene.seed = j.at("seed").get<std::uint64_t>();
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("scene: ") + e.what());
  }
}

void save_scene(const std::filesystem::path& path, const Scene& scene) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIngestion, "cannot write " + path.string());
  out << scene_to_json(scene).dump(2) << '\n';
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIngestion, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  return scene_from_json(j);
}

std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::kIngestion, "corpus directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> wavs;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") wavs.push_back(entry.path());
  }
  std::sort(wavs.begin(), wavs.end());
  if (wavs.empty()) throw Error(ErrorKind::kIngestion, "no .wav files under " + dir.string());
  return wavs;
}

}  // namespace gadoa
