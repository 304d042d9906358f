#include "gadoa/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>

#include "gadoa/error.hpp"
#include "gadoa/parallel.hpp"

namespace gadoa {

namespace {

constexpr Algorithm kAllAlgorithms[] = {Algorithm::kSrpPhat, Algorithm::kMusic, Algorithm::kFcFull,
                                        Algorithm::kFcMax, Algorithm::kFcGa};

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

bool supported(ExperimentKind kind, Algorithm a) {
  if (kind == ExperimentKind::kDeviation) return true;
  return a == Algorithm::kSrpPhat || a == Algorithm::kMusic || a == Algorithm::kFcGa;
}

LagBound model_bound(const MlpModel& model, const ArrayGeometry& geometry, FeatureKind kind) {
  const auto& tag = model.feature_tag();
  if (tag) {
    if (tag->kind != kind) {
      throw Error(ErrorKind::kUsage, std::string("model was trained on '") + to_string(tag->kind) +
                                         "' features, not '" + to_string(kind) + "'");
    }
    if (tag->num_mics != geometry.size()) {
      throw Error(ErrorKind::kFeatureShape, "model expects " + std::to_string(tag->num_mics) +
                                                " microphones, array has " +
                                                std::to_string(geometry.size()));
    }
  }
  LagBound bound = lag_bound(geometry);
  // Networks without geometry input keep the window they were trained with.
  if (tag && kind != FeatureKind::kGeometryAware) bound.tau_max = tag->tau_max;
  return bound;
}

DoaEstimate estimate_learned(Algorithm algorithm, std::span<const FrameSpectra> frames,
                             const ArrayGeometry& geometry, const MlpModel& model) {
  const FeatureKind kind = feature_kind(algorithm);
  const LagBound bound = model_bound(model, geometry, kind);
  const ArrayGeometry* geo = kind == FeatureKind::kGeometryAware ? &geometry : nullptr;

  std::vector<std::vector<double>> features;
  for (const auto& frame : frames) {
    if (frame.silent) continue;
    const auto gcc = gcc_phat_matrix(frame, bound);
    features.push_back(assemble_feature(kind, gcc, geo).values);
  }
  if (features.empty()) throw Error(ErrorKind::kEstimationFailure, "every frame is silent");

  const auto dim = static_cast<Eigen::Index>(features.front().size());
  Eigen::MatrixXd batch(dim, static_cast<Eigen::Index>(features.size()));
  for (std::size_t j = 0; j < features.size(); ++j) {
    batch.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::VectorXd>(features[j].data(), dim);
  }
  const Eigen::MatrixXd proba = predict_proba(model, batch);
  DoaEstimate est;
  std::vector<double> column(static_cast<std::size_t>(proba.rows()));
  for (Eigen::Index j = 0; j < proba.cols(); ++j) {
    Eigen::Map<Eigen::VectorXd>(column.data(), proba.rows()) = proba.col(j);
    est.per_frame.push_back(frame_estimate(column));
  }
  est.global = aggregate(est.per_frame);
  return est;
}

// Everything one trial needs that does not depend on the algorithm.
struct TrialInput {
  double truth_deg = 0.0;
  std::vector<FrameSpectra> frames;
  ArrayGeometry geometry = arc_array();
};

SceneRanges fixed_ranges(const ExperimentConfig& config) {
  SceneRanges r = config.ranges;
  r.t60_min = r.t60_max = config.t60;
  r.snr_min_db = r.snr_max_db = config.snr_db;
  return r;
}

std::size_t signal_samples(const ExperimentConfig& config) {
  return static_cast<std::size_t>(std::llround(config.signal_seconds * kSampleRate));
}

TrialInput render_trial(const ExperimentConfig& config, Scene scene, const ArrayGeometry& geometry) {
  scene.geometry = geometry;
  scene.validate();
  Rng render_rng(scene.seed);
  TrialInput input;
  input.truth_deg = scene.ground_truth_doa;
  input.frames = frame_signal(render_scene(scene, signal_samples(config), render_rng, config.render));
  input.geometry = geometry;
  return input;
}

TrialRecord run_algorithm(Algorithm algorithm, const TrialInput& input,
                          const ArrayGeometry& told, const ModelSet& models) {
  TrialRecord rec;
  rec.algorithm = algorithm;
  rec.truth_deg = input.truth_deg;
  try {
    const auto est = estimate_doa(algorithm, input.frames, told, models.find(algorithm));
    rec.estimate_deg = est.global;
    rec.delta_deg = circular_error(est.global, input.truth_deg);
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::kEstimationFailure:
      case ErrorKind::kEmptyInput:
      case ErrorKind::kNumeric:
        rec.failed = true;
        rec.failure = e.what();
        break;
      default:
        throw;
    }
  }
  return rec;
}

void check_models(const std::vector<Algorithm>& algorithms, const ModelSet& models) {
  for (const auto a : algorithms) {
    if (is_learned(a) && models.find(a) == nullptr) {
      throw Error(ErrorKind::kUsage, std::string("no trained model for ") + to_string(a));
    }
  }
}

ExperimentResult summarize(ExperimentKind kind, const std::vector<double>& steps,
                           const std::vector<Algorithm>& algorithms,
                           std::vector<TrialRecord> records, double epsilon) {
  ExperimentResult result;
  result.experiment = kind;
  std::stable_sort(records.begin(), records.end(), [&](const TrialRecord& a, const TrialRecord& b) {
    if (a.step_m != b.step_m) return a.step_m < b.step_m;
    const auto ia = std::find(algorithms.begin(), algorithms.end(), a.algorithm);
    const auto ib = std::find(algorithms.begin(), algorithms.end(), b.algorithm);
    if (ia != ib) return ia < ib;
    return a.trial_id < b.trial_id;
  });
  for (const double step : steps) {
    for (const auto a : algorithms) {
      std::vector<Trial> ok;
      std::size_t failed = 0;
      for (const auto& r : records) {
        if (r.step_m != step || r.algorithm != a) continue;
        if (r.failed) {
          ++failed;
        } else {
          ok.push_back({r.estimate_deg, r.truth_deg});
        }
      }
      ConditionSummary s;
      s.step_m = step;
      s.algorithm = a;
      s.failed = failed;
      if (ok.empty()) {
        s.result.epsilon = epsilon;
        s.result.mae = std::numeric_limits<double>::quiet_NaN();
        s.result.accuracy = std::numeric_limits<double>::quiet_NaN();
      } else {
        s.result = evaluate(ok, epsilon);
      }
      result.summary.push_back(std::move(s));
    }
  }
  result.trials = std::move(records);
  return result;
}

void split_csv(const std::string& line, std::vector<std::string>& fields) {
  fields.clear();
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) fields.push_back(cell);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
}

}  // namespace

const char* to_string(Algorithm algorithm) noexcept {
  switch (algorithm) {
    case Algorithm::kSrpPhat: return "SRP-PHAT";
    case Algorithm::kMusic: return "MUSIC";
    case Algorithm::kFcFull: return "FC_full";
    case Algorithm::kFcMax: return "FC_max";
    case Algorithm::kFcGa: return "FC_GA";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  const auto key = lower(name);
  for (const auto a : kAllAlgorithms) {
    if (lower(to_string(a)) == key) return a;
  }
  throw Error(ErrorKind::kUsage, "unknown algorithm '" + name +
                                     "' (expected srp-phat, music, fc-full, fc-max or fc-ga)");
}

bool is_learned(Algorithm algorithm) noexcept {
  return algorithm == Algorithm::kFcFull || algorithm == Algorithm::kFcMax ||
         algorithm == Algorithm::kFcGa;
}

FeatureKind feature_kind(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kFcFull: return FeatureKind::kFull;
    case Algorithm::kFcMax: return FeatureKind::kMax;
    case Algorithm::kFcGa: return FeatureKind::kGeometryAware;
    default: break;
  }
  throw Error(ErrorKind::kUsage, std::string(to_string(algorithm)) + " takes no features");
}

const MlpModel* ModelSet::find(Algorithm algorithm) const noexcept {
  const std::optional<MlpModel>* slot = nullptr;
  switch (algorithm) {
    case Algorithm::kFcFull: slot = &fc_full; break;
    case Algorithm::kFcMax: slot = &fc_max; break;
    case Algorithm::kFcGa: slot = &fc_ga; break;
    default: return nullptr;
  }
  return *slot ? &**slot : nullptr;
}

void ModelSet::set(Algorithm algorithm, MlpModel model) {
  switch (algorithm) {
    case Algorithm::kFcFull: fc_full = std::move(model); return;
    case Algorithm::kFcMax: fc_max = std::move(model); return;
    case Algorithm::kFcGa: fc_ga = std::move(model); return;
    default: break;
  }
  throw Error(ErrorKind::kUsage, std::string(to_string(algorithm)) + " has no model");
}

DoaEstimate estimate_doa(Algorithm algorithm, std::span<const FrameSpectra> frames,
                         const ArrayGeometry& geometry, const MlpModel* model,
                         const FrequencyBand& band) {
  if (frames.empty()) throw Error(ErrorKind::kEmptyInput, "no frames to estimate from");
  if (is_learned(algorithm)) {
    if (model == nullptr) {
      throw Error(ErrorKind::kUsage, std::string("no trained model for ") + to_string(algorithm));
    }
    return estimate_learned(algorithm, frames, geometry, *model);
  }
  const auto grid = doa_grid();
  const PowerMap map = algorithm == Algorithm::kSrpPhat
                           ? srp_phat_map(frames, geometry, grid, band)
                           : music_map(covariance(frames, band), geometry, grid);
  DoaEstimate est;
  est.global = frame_estimate(map.values);
  est.per_frame = {est.global};
  return est;
}

const char* to_string(ExperimentKind kind) noexcept {
  return kind == ExperimentKind::kDeviation ? "deviation" : "randomized";
}

void ExperimentConfig::validate() const {
  if (trials == 0) throw Error(ErrorKind::kUsage, "trials must be >= 1");
  if (!(signal_seconds * kSampleRate >= static_cast<double>(kFrameLength))) {
    throw Error(ErrorKind::kUsage, "signal must hold at least one frame");
  }
  if (!(epsilon_deg >= 0.0)) throw Error(ErrorKind::kUsage, "epsilon must be non-negative");
  if (experiment == ExperimentKind::kDeviation) {
    if (deviation_steps.empty()) throw Error(ErrorKind::kUsage, "no deviation steps");
    for (std::size_t i = 0; i < deviation_steps.size(); ++i) {
      if (!(deviation_steps[i] >= 0.0) || (i > 0 && !(deviation_steps[i] > deviation_steps[i - 1]))) {
        throw Error(ErrorKind::kUsage, "deviation steps must be non-negative and ascending");
      }
    }
  }
  for (const auto a : algorithms) {
    if (!supported(experiment, a)) {
      throw Error(ErrorKind::kUsage, std::string(to_string(a)) + " cannot run in the " +
                                         to_string(experiment) + " experiment");
    }
  }
  fixed_ranges(*this).validate();
}

std::vector<Algorithm> ExperimentConfig::resolved_algorithms() const {
  if (!algorithms.empty()) return algorithms;
  std::vector<Algorithm> all;
  for (const auto a : kAllAlgorithms) {
    if (supported(experiment, a)) all.push_back(a);
  }
  return all;
}

const ConditionSummary& ExperimentResult::find(double step_m, Algorithm algorithm) const {
  for (const auto& s : summary) {
    if (s.step_m == step_m && s.algorithm == algorithm) return s;
  }
  throw Error(ErrorKind::kUsage, std::string("no result for ") + to_string(algorithm) +
                                     " at step " + format_number(step_m));
}

ExperimentResult run_deviation_experiment(const ExperimentConfig& config, const ModelSet& models,
                                          const TrialProgressFn& progress) {
  ExperimentConfig cfg = config;
  cfg.experiment = ExperimentKind::kDeviation;
  cfg.validate();
  const auto algorithms = cfg.resolved_algorithms();
  check_models(algorithms, models);
  const SceneRanges ranges = fixed_ranges(cfg);
  const ArrayGeometry nominal = arc_array();

  std::vector<std::vector<TrialRecord>> per_trial(cfg.trials);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(cfg.trials, cfg.threads, [&](std::size_t trial) {
    const std::uint64_t trial_seed = derive_seed(cfg.seed, trial);
    Rng scene_rng = make_rng(trial_seed, 0);
    const Scene scene = sample_scene(ranges, nominal, scene_rng);
    auto& out = per_trial[trial];
    for (const double step : cfg.deviation_steps) {
      // Same directions at every step: only the step length changes.
      Rng deviation_rng = make_rng(trial_seed, 1);
      const ArrayGeometry deviated = deviate_geometry(nominal, step, deviation_rng);
      const TrialInput input = render_trial(cfg, scene, deviated);
      for (const auto a : algorithms) {
        const bool unaware = a == Algorithm::kFcFull || a == Algorithm::kFcMax;
        TrialRecord rec = run_algorithm(a, input, unaware ? nominal : deviated, models);
        rec.step_m = step;
        rec.trial_id = trial;
        out.push_back(std::move(rec));
      }
    }
    const std::size_t n = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(n, cfg.trials);
    }
  });

  std::vector<TrialRecord> records;
  for (auto& t : per_trial) {
    for (auto& r : t) records.push_back(std::move(r));
  }
  return summarize(ExperimentKind::kDeviation, cfg.deviation_steps, algorithms, std::move(records),
                   cfg.epsilon_deg);
}

ExperimentResult run_randomized_experiment(const ExperimentConfig& config,
                                           const ModelSet& models,
                                           const TrialProgressFn& progress) {
  ExperimentConfig cfg = config;
  cfg.experiment = ExperimentKind::kRandomized;
  cfg.validate();
  const auto algorithms = cfg.resolved_algorithms();
  check_models(algorithms, models);
  const SceneRanges ranges = fixed_ranges(cfg);

  std::vector<std::vector<TrialRecord>> per_trial(cfg.trials);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(cfg.trials, cfg.threads, [&](std::size_t trial) {
    const std::uint64_t trial_seed = derive_seed(cfg.seed, trial);
    Rng geometry_rng = make_rng(trial_seed, 2);
    const ArrayGeometry geometry =
        random_geometry(cfg.random_mics, cfg.random_width, cfg.random_depth, geometry_rng);
    Rng scene_rng = make_rng(trial_seed, 0);
    const Scene scene = sample_scene(ranges, geometry, scene_rng);
    const TrialInput input = render_trial(cfg, scene, geometry);
    for (const auto a : algorithms) {
      TrialRecord rec = run_algorithm(a, input, geometry, models);
      rec.trial_id = trial;
      per_trial[trial].push_back(std::move(rec));
    }
    const std::size_t n = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(n, cfg.trials);
    }
  });

  std::vector<TrialRecord> records;
  for (auto& t : per_trial) {
    for (auto& r : t) records.push_back(std::move(r));
  }
  return summarize(ExperimentKind::kRandomized, {0.0}, algorithms, std::move(records),
                   cfg.epsilon_deg);
}

void write_trials_csv(std::ostream& out, const ExperimentResult& result) {
  out << "# " << kResultsSchema << '\n'
      << "experiment,step_m,algorithm,trial_id,theta_true,theta_est,delta_deg,failed\n";
  for (const auto& r : result.trials) {
    out << to_string(result.experiment) << ',' << format_number(r.step_m) << ','
        << to_string(r.algorithm) << ',' << r.trial_id << ',' << format_number(r.truth_deg) << ','
        << (r.failed ? std::string() : format_number(r.estimate_deg)) << ','
        << (r.failed ? std::string() : format_number(r.delta_deg)) << ',' << (r.failed ? 1 : 0)
        << '\n';
  }
}

void write_summary_csv(std::ostream& out, const ExperimentResult& result) {
  out << "# " << kResultsSchema << '\n'
      << "experiment,step_m,algorithm,n_trials,n_failed,mae_deg,accuracy_pct,epsilon_deg\n";
  for (const auto& s : result.summary) {
    out << to_string(result.experiment) << ',' << format_number(s.step_m) << ','
        << to_string(s.algorithm) << ',' << s.result.n_trials << ',' << s.failed << ','
        << format_number(s.result.mae) << ',' << format_number(s.result.accuracy) << ','
        << format_number(s.result.epsilon) << '\n';
  }
}

std::vector<PlotRow> read_summary_csv(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line) || line != std::string("# ") + kResultsSchema) {
    throw Error(ErrorKind::kFormat, name + ": expected schema line '# " + kResultsSchema + "'");
  }
  std::vector<std::string> fields;
  if (!std::getline(in, line)) throw Error(ErrorKind::kFormat, name + ": missing header");
  split_csv(line, fields);
  auto column = [&](const char* key) {
    const auto it = std::find(fields.begin(), fields.end(), key);
    if (it == fields.end()) {
      throw Error(ErrorKind::kFormat, name + ": not a summary file (no '" + key + "' column)");
    }
    return static_cast<std::size_t>(it - fields.begin());
  };
  const std::size_t c_step = column("step_m"), c_alg = column("algorithm"),
                    c_mae = column("mae_deg"), c_acc = column("accuracy_pct");
  const std::size_t width = fields.size();
  std::vector<PlotRow> rows;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    split_csv(line, fields);
    if (fields.size() != width) {
      throw Error(ErrorKind::kFormat, name + ":" + std::to_string(line_no) + ": expected " +
                                          std::to_string(width) + " fields");
    }
    rows.push_back({fields[c_step], fields[c_alg], fields[c_mae], fields[c_acc]});
  }
  return rows;
}

void write_plotdata_csv(std::ostream& out, std::span<const PlotRow> rows) {
  out << "step_m,algorithm,mae_deg,accuracy_pct\n";
  for (const auto& r : rows) {
    out << r.step_m << ',' << r.algorithm << ',' << r.mae_deg << ',' << r.accuracy_pct << '\n';
  }
}

}  // namespace gadoa
