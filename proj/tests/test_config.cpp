#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>

#include "gadoa/config.hpp"
#include "gadoa/error.hpp"

using namespace gadoa;
using nlohmann::json;

namespace {

ErrorKind kind_of(const json& doc) {
  RunConfig c;
  try {
    apply_config(doc, c);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("config accepted: " << doc.dump());
  return ErrorKind::kFormat;
}

}  // namespace

TEST_CASE("defaults", "[config]") {
  RunConfig c;
  apply_config(json::object(), c);
  CHECK(c.seed == 1);
  CHECK(c.threads == 1);
  CHECK(c.dataset.samples == 50000);
  CHECK(c.training.batch_size == 32);
  CHECK(c.training.adam.learning_rate == 1e-4);
  CHECK(c.training.patience == 10);
  CHECK(c.experiment.trials == 100);
  CHECK(c.experiment.t60 == 0.5);
  CHECK(c.experiment.snr_db == 20.0);
  CHECK(c.experiment.signal_seconds == 5.0);
  CHECK(c.scene.t60_min == 0.13);
  CHECK(c.scene.t60_max == 1.0);
}

TEST_CASE("overrides", "[config]") {
  const auto doc = json::parse(R"({
    "seed": 9, "threads": 2,
    "scene": {"room_mean": [8, 4, 3], "t60_range": [0.2, 0.6], "snr_range_db": [5, 25], "doa_step_deg": 10},
    "render": {"tap_placement": "nearest", "babble_waves": 48, "am_depth": 0.5},
    "dataset": {"samples": 1000, "random_mics": 6},
    "training": {"batch_size": 64, "learning_rate": 0.001, "max_epochs": 7, "standardize_inputs": false},
    "experiment": {"type": "randomized", "trials": 20, "deviation_steps": [0, 0.02],
                   "algorithms": ["srp-phat", "FC_GA"], "epsilon_deg": 10,
                   "models": {"fc_ga": "m/ga.bin"}}
  })");
  RunConfig c;
  apply_config(doc, c);
  c.propagate();
  CHECK(c.seed == 9);
  CHECK(c.scene.room_mean == Point3{8, 4, 3});
  CHECK(c.scene.t60_min == 0.2);
  CHECK(c.scene.snr_max_db == 25.0);
  CHECK(c.scene.doa_step_deg == 10.0);
  CHECK(c.render.rir.placement == TapPlacement::kNearest);
  CHECK(c.render.babble.num_waves == 48);
  CHECK(c.dataset.samples == 1000);
  CHECK(c.training.batch_size == 64);
  CHECK_FALSE(c.training.standardize_inputs);
  CHECK(c.experiment.experiment == ExperimentKind::kRandomized);
  CHECK(c.experiment.algorithms == std::vector<Algorithm>{Algorithm::kSrpPhat, Algorithm::kFcGa});
  CHECK(c.experiment.epsilon_deg == 10.0);
  CHECK(c.models.at(Algorithm::kFcGa) == "m/ga.bin");

  // propagate() shares the common fields.
  CHECK(c.dataset.seed == 9);
  CHECK(c.dataset.ranges.t60_min == 0.2);
  CHECK(c.dataset.render.rir.placement == TapPlacement::kNearest);
  CHECK(c.training.seed == 9);
  CHECK(c.experiment.seed == 9);
  CHECK(c.experiment.threads == 2);
  CHECK(c.experiment.random_mics == 6);
}

TEST_CASE("unknown keys are rejected", "[config]") {
  CHECK(kind_of(json::parse(R"({"sede": 1})")) == ErrorKind::kUsage);
  CHECK(kind_of(json::parse(R"({"scene": {"room_size": [1, 2, 3]}})")) == ErrorKind::kUsage);
  CHECK(kind_of(json::parse(R"({"training": {"lr": 0.1}})")) == ErrorKind::kUsage);
  CHECK(kind_of(json::parse(R"({"experiment": {"models": {"cnn": "x"}}})")) == ErrorKind::kUsage);
}

TEST_CASE("malformed values are rejected", "[config]") {
  CHECK(kind_of(json::parse(R"({"seed": "one"})")) == ErrorKind::kUsage);
  CHECK(kind_of(json::parse(R"({"scene": {"room_mean": [1, 2]}})")) == ErrorKind::kUsage);
  CHECK(kind_of(json::parse(R"({"scene": {"t60_range": [1.0, 0.5]}})")) == ErrorKind::kUsage);
  CHECK(kind_of(json::parse(R"({"render": {"tap_placement": "sinc"}})")) == ErrorKind::kUsage);
  CHECK(kind_of(json::parse(R"({"training": {"batch_size": 0}})")) == ErrorKind::kUsage);
  CHECK(kind_of(json::parse(R"({"experiment": {"type": "both"}})")) == ErrorKind::kUsage);
  CHECK(kind_of(json::parse(R"({"experiment": {"algorithms": ["cnn"]}})")) == ErrorKind::kUsage);
  CHECK(kind_of(json::parse("[1, 2]")) == ErrorKind::kUsage);
}

TEST_CASE("config files", "[config]") {
  const auto dir = std::filesystem::temp_directory_path() / "gadoa_config_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "ok.json") << R"({"seed": 5, "experiment": {"trials": 3}})";
  const auto c = load_run_config(dir / "ok.json");
  CHECK(c.seed == 5);
  CHECK(c.experiment.trials == 3);

  std::ofstream(dir / "bad.json") << "{ not json";
  auto expect_usage = [](const std::filesystem::path& p) {
    try {
      load_run_config(p);
      FAIL("bad config accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kUsage);
      CHECK(exit_code(e.kind()) == 1);
    }
  };
  expect_usage(dir / "bad.json");
  expect_usage(dir / "missing.json");
  std::filesystem::remove_all(dir);
}

TEST_CASE("exit codes", "[config]") {
  CHECK(exit_code(ErrorKind::kUsage) == 1);
  CHECK(exit_code(ErrorKind::kIngestion) == 2);
  CHECK(exit_code(ErrorKind::kFormat) == 2);
  CHECK(exit_code(ErrorKind::kModelLoad) == 2);
  CHECK(exit_code(ErrorKind::kNumeric) == 3);
  CHECK(exit_code(ErrorKind::kTrainingFailure) == 3);
  CHECK(exit_code(ErrorKind::kEstimationFailure) == 3);
}
