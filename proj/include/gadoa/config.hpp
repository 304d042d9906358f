#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>

#include <json.hpp>

#include "gadoa/dataset.hpp"
#include "gadoa/experiments.hpp"
#include "gadoa/mlp.hpp"

namespace gadoa {

/// Everything a CLI run can be configured with. Defaults reproduce the
/// desk-scale setup; a JSON config file overrides any subset.
struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::optional<std::filesystem::path> corpus;
  SceneRanges scene;
  RenderOptions render;
  DatasetManifest dataset;
  TrainConfig training;
  ExperimentConfig experiment;
  std::map<Algorithm, std::filesystem::path> models;

  /// Copies the shared fields (seed, threads, scene ranges, render options,
  /// corpus) into the dataset manifest and experiment config.
  void propagate();
};

/// Applies a config document on top of `config`. Unknown keys, wrong types
/// and out-of-range values throw kUsage.
void apply_config(const nlohmann::json& doc, RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace gadoa
