#include "gadoa/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "gadoa/classical.hpp"
#include "gadoa/error.hpp"
#include "gadoa/parallel.hpp"

namespace gadoa {

namespace {

constexpr char kDatasetMagic[8] = {'G', 'A', 'D', 'O', 'A', 'D', 'A', 'T'};

nlohmann::json point_json(const Point3& p) { return {p.x, p.y, p.z}; }
Point3 json_point(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

ArrayGeometry sample_geometry(const DatasetManifest& m, Rng& rng) {
  if (m.policy == GeometryPolicy::kFixedArc) return arc_array();
  return random_geometry(m.random_mics, m.random_width, m.random_depth, rng);
}

std::string encode_header(const DatasetManifest& manifest, std::size_t dim) {
  const std::string text = manifest_to_json(manifest).dump();
  std::string out(kDatasetMagic, sizeof(kDatasetMagic));
  const std::uint32_t version = kDatasetSchemaVersion;
  const std::uint64_t len = text.size();
  const std::uint64_t d = dim;
  out.append(reinterpret_cast<const char*>(&version), 4);
  out.append(reinterpret_cast<const char*>(&len), 8);
  out.append(text);
  out.append(reinterpret_cast<const char*>(&d), 8);
  return out;
}

void append_record(std::string& out, int label, std::span<const double> values) {
  const std::int32_t l = label;
  out.append(reinterpret_cast<const char*>(&l), 4);
  out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
}

std::size_t expected_dim(const DatasetManifest& m) {
  if (m.policy == GeometryPolicy::kFixedArc) {
    return feature_size(m.kind, arc_array().size(), lag_bound(arc_array()).tau_max);
  }
  return feature_size(m.kind, m.random_mics, 0);
}

struct ParsedHeader {
  DatasetManifest manifest;
  std::size_t dim = 0;
  std::size_t body_offset = 0;
};

ParsedHeader parse_header(const std::string& bytes, const std::string& name) {
  if (bytes.size() < sizeof(kDatasetMagic) + 12 ||
      std::memcmp(bytes.data(), kDatasetMagic, sizeof(kDatasetMagic)) != 0) {
    throw Error(ErrorKind::kFormat, name + ": not a dataset file");
  }
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&len, bytes.data() + 12, 8);
  if (version != kDatasetSchemaVersion) {
    throw Error(ErrorKind::kFormat, name + ": dataset schema version " + std::to_string(version) +
                                        " is not supported");
  }
  if (len > bytes.size() - 20 || bytes.size() - 20 - len < 8) {
    throw Error(ErrorKind::kFormat, name + ": truncated dataset header");
  }
  ParsedHeader h;
  try {
    h.manifest = manifest_from_json(nlohmann::json::parse(bytes.substr(20, len)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, name + ": bad manifest: " + e.what());
  }
  std::uint64_t dim = 0;
  std::memcpy(&dim, bytes.data() + 20 + len, 8);
  h.dim = dim;
  h.body_offset = 28 + len;
  if (h.dim != expected_dim(h.manifest)) {
    throw Error(ErrorKind::kFormat, name + ": feature width disagrees with its manifest");
  }
  return h;
}

}  // namespace

const char* to_string(GeometryPolicy policy) noexcept {
  return policy == GeometryPolicy::kFixedArc ? "fixed-arc" : "random-per-sample";
}

void DatasetManifest::validate() const {
  if (samples == 0) throw Error(ErrorKind::kUsage, "dataset needs at least one sample");
  const bool random = policy == GeometryPolicy::kRandomPerSample;
  if (random != (kind == FeatureKind::kGeometryAware)) {
    throw Error(ErrorKind::kUsage,
                "geometry-aware features need a random array per sample; full/max need the fixed arc");
  }
  ranges.validate();
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  const auto& r = m.ranges;
  nlohmann::json corpus = nlohmann::json::array();
  for (const auto& p : r.corpus) corpus.push_back(p.string());
  return {
      {"schema_version", kDatasetSchemaVersion},
      {"samples", m.samples},
      {"kind", to_string(m.kind)},
      {"geometry_policy", to_string(m.policy)},
      {"seed", m.seed},
      {"random_width", m.random_width},
      {"random_depth", m.random_depth},
      {"random_mics", m.random_mics},
      {"ranges",
       {{"room_mean", point_json(r.room_mean)},
        {"room_spread", point_json(r.room_spread)},
        {"array_mean", point_json(r.array_mean)},
        {"array_spread", point_json(r.array_spread)},
        {"min_distance", r.min_distance},
        {"max_distance", r.max_distance},
        {"doa_step_deg", r.doa_step_deg},
        {"t60_min", r.t60_min},
        {"t60_max", r.t60_max},
        {"snr_min_db", r.snr_min_db},
        {"snr_max_db", r.snr_max_db},
        {"wall_margin", r.wall_margin},
        {"speech_fraction", r.speech_fraction},
        {"corpus", corpus}}},
      {"render",
       {{"placement", m.render.rir.placement == TapPlacement::kNearest ? "nearest" : "linear"},
        {"coverage", m.render.rir.coverage},
        {"babble_waves", m.render.babble.num_waves},
        {"am_depth", m.render.am_depth}}},
  };
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  if (j.at("schema_version").get<std::uint32_t>() != kDatasetSchemaVersion) {
    throw Error(ErrorKind::kFormat, "dataset manifest schema mismatch");
  }
  m.samples = j.at("samples").get<std::size_t>();
  m.kind = feature_kind_from_string(j.at("kind").get<std::string>());
  const auto policy = j.at("geometry_policy").get<std::string>();
  if (policy == "fixed-arc") {
    m.policy = GeometryPolicy::kFixedArc;
  } else if (policy == "random-per-sample") {
    m.policy = GeometryPolicy::kRandomPerSample;
  } else {
    throw Error(ErrorKind::kFormat, "unknown geometry policy " + policy);
  }
  m.seed = j.at("seed").get<std::uint64_t>();
  m.random_width = j.at("random_width").get<double>();
  m.random_depth = j.at("random_depth").get<double>();
  m.random_mics = j.at("random_mics").get<std::size_t>();
  const auto& r = j.at("ranges");
  m.ranges.room_mean = json_point(r.at("room_mean"));
  m.ranges.room_spread = json_point(r.at("room_spread"));
  m.ranges.array_mean = json_point(r.at("array_mean"));
  m.ranges.array_spread = json_point(r.at("array_spread"));
  m.ranges.min_distance = r.at("min_distance").get<double>();
  m.ranges.max_distance = r.at("max_distance").get<double>();
  m.ranges.doa_step_deg = r.at("doa_step_deg").get<double>();
  m.ranges.t60_min = r.at("t60_min").get<double>();
  m.ranges.t60_max = r.at("t60_max").get<double>();
  m.ranges.snr_min_db = r.at("snr_min_db").get<double>();
  m.ranges.snr_max_db = r.at("snr_max_db").get<double>();
  m.ranges.wall_margin = r.at("wall_margin").get<double>();
  m.ranges.speech_fraction = r.at("speech_fraction").get<double>();
  for (const auto& p : r.at("corpus")) m.ranges.corpus.emplace_back(p.get<std::string>());
  const auto& rd = j.at("render");
  m.render.rir.placement =
      rd.at("placement").get<std::string>() == "linear" ? TapPlacement::kLinear : TapPlacement::kNearest;
  m.render.rir.coverage = rd.at("coverage").get<double>();
  m.render.babble.num_waves = rd.at("babble_waves").get<std::size_t>();
  m.render.am_depth = rd.at("am_depth").get<double>();
  return m;
}

int doa_class(double doa_deg) {
  const auto c = static_cast<long>(std::lround(doa_deg / kClassWidthDeg));
  return static_cast<int>(((c % static_cast<long>(kNumClasses)) + static_cast<long>(kNumClasses)) %
                          static_cast<long>(kNumClasses));
}

std::vector<LabeledFeature> make_sample(const DatasetManifest& manifest, std::size_t index,
                                        std::span<const FeatureKind> kinds) {
  const std::uint64_t sample_seed = derive_seed(manifest.seed, index);
  for (std::uint64_t attempt = 0; attempt < 32; ++attempt) {
    Rng rng = make_rng(sample_seed, attempt);
    const ArrayGeometry geometry = sample_geometry(manifest, rng);
    const Scene scene = sample_scene(manifest.ranges, geometry, rng);
    Rng render_rng(scene.seed);
    const auto signal = render_scene(scene, kFrameLength, render_rng, manifest.render);
    const auto frames = frame_signal(signal);
    if (frames.front().silent) continue;
    const auto gcc = gcc_phat_matrix(frames.front(), lag_bound(geometry));
    std::vector<LabeledFeature> out;
    for (const auto kind : kinds) {
      out.push_back({assemble_feature(kind, gcc, &geometry), doa_class(scene.ground_truth_doa)});
    }
    return out;
  }
  throw Error(ErrorKind::kDegenerateScene,
              "sample " + std::to_string(index) + ": no usable frame after 32 attempts");
}

std::vector<Dataset> generate_datasets(const DatasetManifest& manifest,
                                       std::span<const FeatureKind> kinds,
                                       const ProgressFn& progress) {
  std::vector<Dataset> sets;
  for (const auto kind : kinds) {
    Dataset d;
    d.manifest = manifest;
    d.manifest.kind = kind;
    d.manifest.validate();
    d.dim = expected_dim(d.manifest);
    d.labels.reserve(manifest.samples);
    d.values.reserve(manifest.samples * d.dim);
    sets.push_back(std::move(d));
  }
  for (std::size_t i = 0; i < manifest.samples; ++i) {
    const auto sample = make_sample(manifest, i, kinds);
    for (std::size_t k = 0; k < sets.size(); ++k) {
      sets[k].labels.push_back(sample[k].label);
      const auto& v = sample[k].feature.values;
      sets[k].values.insert(sets[k].values.end(), v.begin(), v.end());
    }
    if (progress) progress(i + 1, manifest.samples);
  }
  return sets;
}

Dataset generate_dataset(const DatasetManifest& manifest, const ProgressFn& progress) {
  const FeatureKind kinds[] = {manifest.kind};
  return std::move(generate_datasets(manifest, kinds, progress).front());
}

void generate_dataset_file(const DatasetManifest& manifest, const std::filesystem::path& path,
                           std::size_t threads, const ProgressFn& progress) {
  manifest.validate();
  const std::size_t dim = expected_dim(manifest);
  const std::string header = encode_header(manifest, dim);
  const std::size_t record = 4 + dim * sizeof(double);

  std::size_t done = 0;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::string existing(header.size(), '\0');
    in.read(existing.data(), static_cast<std::streamsize>(existing.size()));
    if (!in || existing != header) {
      throw Error(ErrorKind::kFormat, path.string() + " holds a different dataset; refusing to resume");
    }
    const auto size = static_cast<std::size_t>(std::filesystem::file_size(path));
    done = std::min((size - header.size()) / record, manifest.samples);
    // Drop a partially written trailing record.
    std::filesystem::resize_file(path, header.size() + done * record);
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::kIngestion, "cannot write " + path.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
  }

  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorKind::kIngestion, "cannot append to " + path.string());
  const FeatureKind kinds[] = {manifest.kind};
  constexpr std::size_t kBlock = 256;
  std::vector<std::string> encoded(kBlock);
  for (std::size_t start = done; start < manifest.samples; start += kBlock) {
    const std::size_t len = std::min(kBlock, manifest.samples - start);
    parallel_for(len, threads, [&](std::size_t j) {
      const auto sample = make_sample(manifest, start + j, kinds);
      encoded[j].clear();
      append_record(encoded[j], sample.front().label, sample.front().feature.values);
    });
    for (std::size_t j = 0; j < len; ++j) {
      out.write(encoded[j].data(), static_cast<std::streamsize>(encoded[j].size()));
    }
    out.flush();
    if (!out) throw Error(ErrorKind::kIngestion, "write failed for " + path.string());
    if (progress) progress(start + len, manifest.samples);
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::string bytes = encode_header(dataset.manifest, dataset.dim);
  for (std::size_t i = 0; i < dataset.size(); ++i) append_record(bytes, dataset.labels[i], dataset.row(i));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIngestion, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIngestion, "cannot open dataset " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto header = parse_header(bytes, path.string());
  const std::size_t record = 4 + header.dim * sizeof(double);
  const std::size_t body = bytes.size() - header.body_offset;
  if (body % record != 0 || body / record != header.manifest.samples) {
    throw Error(ErrorKind::kFormat, path.string() + ": incomplete dataset (" +
                                        std::to_string(body / record) + " of " +
                                        std::to_string(header.manifest.samples) + " records)");
  }
  Dataset d;
  d.manifest = header.manifest;
  d.dim = header.dim;
  const std::size_t n = body / record;
  d.labels.resize(n);
  d.values.resize(n * d.dim);
  const char* p = bytes.data() + header.body_offset;
  for (std::size_t i = 0; i < n; ++i, p += record) {
    std::int32_t label = 0;
    std::memcpy(&label, p, 4);
    if (label < 0 || static_cast<std::size_t>(label) >= kNumClasses) {
      throw Error(ErrorKind::kFormat, path.string() + ": label out of range");
    }
    d.labels[i] = label;
    std::memcpy(d.values.data() + i * d.dim, p + 4, d.dim * sizeof(double));
  }
  return d;
}

SplitSets split_dataset(const Dataset& dataset) {
  std::size_t n_val = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) n_val += (i % 10 == 9);
  const std::size_t n_train = dataset.size() - n_val;
  if (n_train == 0 || n_val == 0) {
    throw Error(ErrorKind::kInvalidBatch, "dataset too small for a 10% validation split");
  }
  SplitSets s;
  const auto dim = static_cast<Eigen::Index>(dataset.dim);
  s.train.features.resize(dim, static_cast<Eigen::Index>(n_train));
  s.validation.features.resize(dim, static_cast<Eigen::Index>(n_val));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto& target = (i % 10 == 9) ? s.validation : s.train;
    const auto col = static_cast<Eigen::Index>(target.labels.size());
    const auto row = dataset.row(i);
    target.features.col(col) = Eigen::Map<const Eigen::VectorXd>(row.data(), dim);
    target.labels.push_back(dataset.labels[i]);
  }
  return s;
}

MlpArchitecture architecture_for(const Dataset& dataset) {
  MlpArchitecture arch;
  arch.input_size = dataset.dim;
  arch.output_size = kNumClasses;
  return arch;
}

FeatureTag feature_tag_for(const DatasetManifest& manifest) {
  FeatureTag tag;
  tag.kind = manifest.kind;
  if (manifest.policy == GeometryPolicy::kFixedArc) {
    tag.num_mics = arc_array().size();
    tag.tau_max = lag_bound(arc_array()).tau_max;
  } else {
    tag.num_mics = manifest.random_mics;
  }
  return tag;
}

}  // namespace gadoa
