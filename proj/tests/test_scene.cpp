#include "catch_amalgamated.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "gadoa/error.hpp"
#include "gadoa/scene.hpp"

using namespace gadoa;
using Catch::Matchers::WithinAbs;

namespace {

double azimuth_oracle(const Point3& from, const Point3& to) {
  double a = std::atan2(to.y - from.y, to.x - from.x) * 180.0 / std::numbers::pi;
  if (a < 0.0) a += 360.0;
  return a;
}

std::filesystem::path temp_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("azimuth", "[scene]") {
  CHECK(azimuth_deg({0, 0, 0}, {1, 0, 0}) == 0.0);
  CHECK_THAT(azimuth_deg({0, 0, 0}, {0, 1, 5}), WithinAbs(90.0, 1e-12));
  CHECK_THAT(azimuth_deg({1, 1, 0}, {1, 0, 0}), WithinAbs(270.0, 1e-12));
  const double a = azimuth_deg({0, 0, 0}, {1, -1e-300, 0});
  CHECK(a >= 0.0);
  CHECK(a < 360.0);
}

TEST_CASE("microphones are placed around the centroid", "[scene]") {
  Scene s;
  s.room.dims = {9, 5, 3};
  s.array_center = {4.0, 2.0, 1.5};
  const auto g = arc_array();
  double sx = 0, sy = 0;
  for (std::size_t m = 0; m < g.size(); ++m) {
    const auto p = s.mic_position(m);
    CHECK(p.z == 1.5);
    sx += p.x;
    sy += p.y;
    CHECK_THAT(p.x - s.mic_position(0).x, WithinAbs(g[m].x - g[0].x, 1e-12));
    CHECK_THAT(p.y - s.mic_position(0).y, WithinAbs(g[m].y - g[0].y, 1e-12));
  }
  CHECK_THAT(sx / 5.0, WithinAbs(4.0, 1e-12));
  CHECK_THAT(sy / 5.0, WithinAbs(2.0, 1e-12));
}

TEST_CASE("scene validation", "[scene]") {
  Scene s;
  s.room.dims = {5, 4, 3};
  s.array_center = {2, 2, 1.5};
  s.source = {4, 3, 1.5};
  CHECK_NOTHROW(s.validate());
  s.source = {5.5, 3, 1.5};
  CHECK_THROWS_AS(s.validate(), Error);
  s.source = {4, 3, 1.5};
  s.array_center = {0.05, 2, 1.5};
  try {
    s.validate();
    FAIL("microphone outside accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidScene);
  }
}

TEST_CASE("sampled scenes respect the ranges", "[scene]") {
  SceneRanges ranges;
  Rng rng(17);
  int white = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const auto s = sample_scene(ranges, arc_array(), rng);
    CHECK_NOTHROW(s.validate());
    CHECK(s.room.t60 >= 0.13);
    CHECK(s.room.t60 <= 1.0);
    CHECK(s.snr_db >= 0.0);
    CHECK(s.snr_db <= 30.0);
    CHECK(std::abs(s.room.dims.x - 9.0) <= 1.0);
    CHECK(std::abs(s.room.dims.y - 5.0) <= 1.0);
    CHECK(std::abs(s.room.dims.z - 3.0) <= 0.5);
    CHECK(std::abs(s.array_center.x - 4.5) <= 0.5);
    CHECK(std::abs(s.array_center.y - 2.5) <= 0.5);
    CHECK(std::abs(s.array_center.z - 1.5) <= 0.5);
    CHECK(std::fmod(s.ground_truth_doa, 5.0) == 0.0);
    CHECK(s.ground_truth_doa < 360.0);
    const double d = std::hypot(s.source.x - s.array_center.x, s.source.y - s.array_center.y);
    CHECK(d >= 1.0 - 1e-9);
    CHECK(d <= 3.0 + 1e-9);
    CHECK(s.source.z == s.array_center.z);
    double delta = std::abs(azimuth_oracle(s.array_center, s.source) - s.ground_truth_doa);
    delta = std::min(delta, 360.0 - delta);
    CHECK(delta <= 1e-9);
    white += s.source_kind == SourceKind::kWhiteNoise;
    if (s.source_kind != SourceKind::kWhiteNoise) CHECK(s.source_kind == SourceKind::kSyntheticSpeech);
  }
  // Fair coin: 2000 draws stay within 5 standard deviations of 1000.
  CHECK(std::abs(white - n / 2) < 5 * std::sqrt(n * 0.25));
}

TEST_CASE("infeasible placement is reported", "[scene]") {
  SceneRanges ranges;
  ranges.room_mean = {2.0, 2.0, 3.0};
  ranges.room_spread = {0.0, 0.0, 0.0};
  ranges.array_mean = {1.0, 1.0, 1.5};
  ranges.array_spread = {0.0, 0.0, 0.0};
  ranges.max_retries = 5;
  Rng rng(1);
  try {
    sample_scene(ranges, arc_array(), rng);
    FAIL("infeasible scene sampled");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSceneSampling);
  }
}

TEST_CASE("invalid ranges", "[scene]") {
  SceneRanges ranges;
  ranges.min_distance = 4.0;
  CHECK_THROWS_AS(ranges.validate(), Error);
  ranges = {};
  ranges.t60_min = 1.5;
  CHECK_THROWS_AS(ranges.validate(), Error);
}

TEST_CASE("corpus draws pick WAV sources", "[scene]") {
  SceneRanges ranges;
  ranges.corpus = {"a.wav", "b.wav"};
  ranges.speech_fraction = 1.0;
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto s = sample_scene(ranges, arc_array(), rng);
    CHECK(s.source_kind == SourceKind::kSpeechWav);
    CHECK((s.wav_path == "a.wav" || s.wav_path == "b.wav"));
  }
}

TEST_CASE("scene serialization round trip", "[scene]") {
  Rng rng(21);
  auto s = sample_scene(SceneRanges{}, random_geometry(4, 0.4, 0.4, rng), rng);
  s.snr_db = 12.345678901234567;
  const auto back = scene_from_json(scene_to_json(s));
  CHECK(back.room.dims == s.room.dims);
  CHECK(back.room.t60 == s.room.t60);
  CHECK(back.array_center == s.array_center);
  CHECK(back.geometry == s.geometry);
  CHECK(back.source == s.source);
  CHECK(back.source_kind == s.source_kind);
  CHECK(back.snr_db == s.snr_db);
  CHECK(back.ground_truth_doa == s.ground_truth_doa);
  CHECK(back.seed == s.seed);

  s.snr_db = std::numeric_limits<double>::infinity();
  CHECK(std::isinf(scene_from_json(scene_to_json(s)).snr_db));

  const auto dir = temp_dir("gadoa_scene_test");
  save_scene(dir / "scene.json", s);
  const auto loaded = load_scene(dir / "scene.json");
  CHECK(loaded.source == s.source);
  CHECK(loaded.geometry == s.geometry);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed scene files", "[scene]") {
  const auto dir = temp_dir("gadoa_scene_bad");
  std::ofstream(dir / "bad.json") << "{\"room\": 3}";
  CHECK_THROWS_AS(load_scene(dir / "bad.json"), Error);
  CHECK_THROWS_AS(load_scene(dir / "missing.json"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("source kind names", "[scene]") {
  for (auto k : {SourceKind::kSpeechWav, SourceKind::kWhiteNoise, SourceKind::kSyntheticSpeech}) {
    CHECK(source_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(source_kind_from_string("music"), Error);
}

TEST_CASE("corpus listing", "[scene]") {
  const auto dir = temp_dir("gadoa_corpus");
  std::filesystem::create_directories(dir / "sub");
  std::ofstream(dir / "b.wav") << "x";
  std::ofstream(dir / "sub" / "a.wav") << "x";
  std::ofstream(dir / "notes.txt") << "x";
  const auto files = list_corpus(dir);
  REQUIRE(files.size() == 2);
  CHECK(files[0] < files[1]);
  std::filesystem::remove_all(dir);
}
