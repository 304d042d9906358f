#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "gadoa/features.hpp"
#include "gadoa/mlp.hpp"
#include "gadoa/render.hpp"
#include "gadoa/scene.hpp"

namespace gadoa {

enum class GeometryPolicy { kFixedArc, kRandomPerSample };

const char* to_string(GeometryPolicy policy) noexcept;

/// Recipe for a single-frame training set. Record i depends only on
/// (seed, i), so generation can stop and resume anywhere.
struct DatasetManifest {
  std::size_t samples = 50000;
  FeatureKind kind = FeatureKind::kMax;
  GeometryPolicy policy = GeometryPolicy::kFixedArc;
  std::uint64_t seed = 1;
  SceneRanges ranges;
  RenderOptions render;
  double random_width = 0.4;
  double random_depth = 0.4;
  std::size_t random_mics = 5;

  /// The geometry-aware feature requires a random array per sample and the
  /// other kinds require the fixed arc.
  void validate() const;
};

inline constexpr std::uint32_t kDatasetSchemaVersion = 1;

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j);

/// Row-per-record feature table.
struct Dataset {
  DatasetManifest manifest;
  std::size_t dim = 0;
  std::vector<int> labels;
  std::vector<double> values;  // labels.size() x dim, row-major

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
};

/// Class index of a grid-aligned azimuth.
int doa_class(double doa_deg);

/// Feature record for one sample index (a scene, rendered as one frame).
struct LabeledFeature {
  FeatureVector feature;
  int label = 0;
};

/// Renders sample `index` and returns one feature per requested kind (all
/// computed from the same frame).
std::vector<LabeledFeature> make_sample(const DatasetManifest& manifest, std::size_t index,
                                        std::span<const FeatureKind> kinds);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// In-memory generation; one dataset per kind, all sharing the same scenes.
/// Each kind must be compatible with manifest.policy.
std::vector<Dataset> generate_datasets(const DatasetManifest& manifest,
                                       std::span<const FeatureKind> kinds,
                                       const ProgressFn& progress = {});
Dataset generate_dataset(const DatasetManifest& manifest, const ProgressFn& progress = {});

/// Writes (or resumes) a dataset file. An existing file with the same
/// manifest is extended to manifest.samples records; a different manifest
/// is rejected with kFormat.
/// Records are rendered on up to `threads` workers and written in index
/// order, so the file does not depend on the thread count.
void generate_dataset_file(const DatasetManifest& manifest, const std::filesystem::path& path,
                           std::size_t threads = 1, const ProgressFn& progress = {});

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Records with index % 10 == 9 form the validation split.
struct SplitSets {
  LabeledSet train;
  LabeledSet validation;
};
SplitSets split_dataset(const Dataset& dataset);

/// Input size, class count and feature tag matching a dataset.
MlpArchitecture architecture_for(const Dataset& dataset);
FeatureTag feature_tag_for(const DatasetManifest& manifest);

}  // namespace gadoa
