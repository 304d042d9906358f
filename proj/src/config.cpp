#include "gadoa/config.hpp"

#include <fstream>
#include <set>

#include "gadoa/error.hpp"

namespace gadoa {

namespace {

void check_keys(const nlohmann::json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw Error(ErrorKind::kUsage, where + " must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.count(key)) throw Error(ErrorKind::kUsage, "unknown config key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

Point3 point(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::kUsage, where + " must be [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void read_range(const nlohmann::json& obj, const char* key, double& lo, double& hi) {
  if (!obj.contains(key)) return;
  const auto& j = obj.at(key);
  if (!j.is_array() || j.size() != 2) {
    throw Error(ErrorKind::kUsage, std::string("scene.") + key + " must be [min, max]");
  }
  lo = j[0].get<double>();
  hi = j[1].get<double>();
}

void apply_scene(const nlohmann::json& j, SceneRanges& r) {
  check_keys(j, "scene", {"room_mean", "room_spread", "array_mean", "array_spread", "min_distance",
                          "max_distance", "doa_step_deg", "t60_range", "snr_range_db", "wall_margin",
                          "speech_fraction", "max_retries"});
  if (j.contains("room_mean")) r.room_mean = point(j["room_mean"], "scene.room_mean");
  if (j.contains("room_spread")) r.room_spread = point(j["room_spread"], "scene.room_spread");
  if (j.contains("array_mean")) r.array_mean = point(j["array_mean"], "scene.array_mean");
  if (j.contains("array_spread")) r.array_spread = point(j["array_spread"], "scene.array_spread");
  read(j, "min_distance", r.min_distance);
  read(j, "max_distance", r.max_distance);
  read(j, "doa_step_deg", r.doa_step_deg);
  read_range(j, "t60_range", r.t60_min, r.t60_max);
  read_range(j, "snr_range_db", r.snr_min_db, r.snr_max_db);
  read(j, "wall_margin", r.wall_margin);
  read(j, "speech_fraction", r.speech_fraction);
  read(j, "max_retries", r.max_retries);
}

void apply_render(const nlohmann::json& j, RenderOptions& r) {
  check_keys(j, "render", {"tap_placement", "rir_coverage", "babble_waves", "am_depth"});
  if (j.contains("tap_placement")) {
    const auto p = j["tap_placement"].get<std::string>();
    if (p == "linear") {
      r.rir.placement = TapPlacement::kLinear;
    } else if (p == "nearest") {
      r.rir.placement = TapPlacement::kNearest;
    } else {
      throw Error(ErrorKind::kUsage, "render.tap_placement must be 'linear' or 'nearest'");
    }
  }
  read(j, "rir_coverage", r.rir.coverage);
  read(j, "babble_waves", r.babble.num_waves);
  read(j, "am_depth", r.am_depth);
  if (!(r.rir.coverage >= 1.0)) throw Error(ErrorKind::kUsage, "render.rir_coverage must be >= 1");
  if (r.babble.num_waves == 0) throw Error(ErrorKind::kUsage, "render.babble_waves must be >= 1");
  if (!(r.am_depth >= 0.0 && r.am_depth <= 1.0)) {
    throw Error(ErrorKind::kUsage, "render.am_depth must lie in [0, 1]");
  }
}

void apply_dataset(const nlohmann::json& j, DatasetManifest& m) {
  check_keys(j, "dataset", {"samples", "random_width", "random_depth", "random_mics"});
  read(j, "samples", m.samples);
  read(j, "random_width", m.random_width);
  read(j, "random_depth", m.random_depth);
  read(j, "random_mics", m.random_mics);
}

void apply_training(const nlohmann::json& j, TrainConfig& t) {
  check_keys(j, "training", {"batch_size", "learning_rate", "beta1", "beta2", "epsilon", "patience",
                             "max_epochs", "standardize_inputs"});
  read(j, "batch_size", t.batch_size);
  read(j, "learning_rate", t.adam.learning_rate);
  read(j, "beta1", t.adam.beta1);
  read(j, "beta2", t.adam.beta2);
  read(j, "epsilon", t.adam.epsilon);
  read(j, "patience", t.patience);
  read(j, "max_epochs", t.max_epochs);
  read(j, "standardize_inputs", t.standardize_inputs);
  if (t.batch_size == 0 || t.patience == 0 || t.max_epochs == 0) {
    throw Error(ErrorKind::kUsage, "training.batch_size, patience and max_epochs must be >= 1");
  }
  if (!(t.adam.learning_rate > 0.0)) throw Error(ErrorKind::kUsage, "training.learning_rate must be > 0");
}

void apply_experiment(const nlohmann::json& j, RunConfig& c) {
  check_keys(j, "experiment", {"type", "trials", "deviation_steps", "t60", "snr_db", "signal_seconds",
                               "algorithms", "epsilon_deg", "models"});
  auto& e = c.experiment;
  if (j.contains("type")) {
    const auto t = j["type"].get<std::string>();
    if (t == "deviation") {
      e.experiment = ExperimentKind::kDeviation;
    } else if (t == "randomized") {
      e.experiment = ExperimentKind::kRandomized;
    } else {
      throw Error(ErrorKind::kUsage, "experiment.type must be 'deviation' or 'randomized'");
    }
  }
  read(j, "trials", e.trials);
  read(j, "deviation_steps", e.deviation_steps);
  read(j, "t60", e.t60);
  read(j, "snr_db", e.snr_db);
  read(j, "signal_seconds", e.signal_seconds);
  read(j, "epsilon_deg", e.epsilon_deg);
  if (j.contains("algorithms")) {
    e.algorithms.clear();
    for (const auto& a : j["algorithms"]) e.algorithms.push_back(algorithm_from_string(a.get<std::string>()));
  }
  if (j.contains("models")) {
    check_keys(j["models"], "experiment.models", {"fc_full", "fc_max", "fc_ga"});
    for (const auto& [key, value] : j["models"].items()) {
      c.models[algorithm_from_string(key)] = value.get<std::string>();
    }
  }
}

}  // namespace

void RunConfig::propagate() {
  if (corpus) {
    scene.corpus = list_corpus(*corpus);
    if (scene.corpus.empty()) {
      throw Error(ErrorKind::kIngestion, "no .wav files under " + corpus->string());
    }
  }
  dataset.seed = seed;
  dataset.ranges = scene;
  dataset.render = render;
  training.seed = seed;
  experiment.seed = seed;
  experiment.threads = threads;
  experiment.ranges = scene;
  experiment.render = render;
  experiment.random_width = dataset.random_width;
  experiment.random_depth = dataset.random_depth;
  experiment.random_mics = dataset.random_mics;
}

void apply_config(const nlohmann::json& doc, RunConfig& config) {
  try {
    check_keys(doc, "config", {"seed", "threads", "corpus", "scene", "render", "dataset", "training",
                               "experiment"});
    read(doc, "seed", config.seed);
    read(doc, "threads", config.threads);
    if (doc.contains("corpus")) config.corpus = doc["corpus"].get<std::string>();
    if (doc.contains("scene")) apply_scene(doc["scene"], config.scene);
    if (doc.contains("render")) apply_render(doc["render"], config.render);
    if (doc.contains("dataset")) apply_dataset(doc["dataset"], config.dataset);
    if (doc.contains("training")) apply_training(doc["training"], config.training);
    if (doc.contains("experiment")) apply_experiment(doc["experiment"], config);
    config.scene.validate();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kUsage, std::string("malformed config: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kUsage) throw;
    throw Error(ErrorKind::kUsage, std::string("invalid config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kUsage, "cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kUsage, path.string() + ": " + e.what());
  }
  RunConfig config;
  apply_config(doc, config);
  return config;
}

}  // namespace gadoa
