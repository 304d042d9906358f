#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gadoa/classical.hpp"
#include "gadoa/estimation.hpp"
#include "gadoa/features.hpp"
#include "gadoa/mlp.hpp"
#include "gadoa/render.hpp"
#include "gadoa/scene.hpp"

namespace gadoa {

enum class Algorithm { kSrpPhat, kMusic, kFcFull, kFcMax, kFcGa };

/// Display names: SRP-PHAT, MUSIC, FC_full, FC_max, FC_GA.
const char* to_string(Algorithm algorithm) noexcept;
/// Accepts the display names and the lowercase CLI spellings
/// (srp-phat, music, fc-full, fc-max, fc-ga).
Algorithm algorithm_from_string(const std::string& name);
bool is_learned(Algorithm algorithm) noexcept;
FeatureKind feature_kind(Algorithm algorithm);

/// Trained networks, keyed by algorithm.
struct ModelSet {
  std::optional<MlpModel> fc_full;
  std::optional<MlpModel> fc_max;
  std::optional<MlpModel> fc_ga;

  const MlpModel* find(Algorithm algorithm) const noexcept;
  void set(Algorithm algorithm, MlpModel model);
};

/// Global DoA estimate from a trial's frames. Classical maps are averaged
/// over frames before peak picking; networks vote per frame and the votes
/// are combined with the circular median. `geometry` is the array as the
/// estimator is told it (networks without geometry input only use its size).
DoaEstimate estimate_doa(Algorithm algorithm, std::span<const FrameSpectra> frames,
                         const ArrayGeometry& geometry, const MlpModel* model = nullptr,
                         const FrequencyBand& band = {});

enum class ExperimentKind { kDeviation, kRandomized };

const char* to_string(ExperimentKind kind) noexcept;

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::kDeviation;
  std::size_t trials = 100;
  std::vector<double> deviation_steps{0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
  double t60 = 0.5;
  double snr_db = 20.0;
  double signal_seconds = 5.0;
  std::uint64_t seed = 1;
  std::vector<Algorithm> algorithms;  // empty: every algorithm the experiment supports
  double epsilon_deg = 5.0;
  double random_width = 0.4;
  double random_depth = 0.4;
  std::size_t random_mics = 5;
  std::size_t threads = 1;
  SceneRanges ranges;  // T60 and SNR are overridden by the fixed values above
  RenderOptions render;

  /// Throws kUsage for zero trials, negative or unsorted steps, or an
  /// algorithm the experiment cannot run.
  void validate() const;
  std::vector<Algorithm> resolved_algorithms() const;
};

struct TrialRecord {
  double step_m = 0.0;
  Algorithm algorithm = Algorithm::kSrpPhat;
  std::size_t trial_id = 0;
  double truth_deg = 0.0;
  double estimate_deg = 0.0;
  double delta_deg = 0.0;
  bool failed = false;
  std::string failure;
};

struct ConditionSummary {
  double step_m = 0.0;
  Algorithm algorithm = Algorithm::kSrpPhat;
  std::size_t failed = 0;
  EvalResult result;
};

struct ExperimentResult {
  ExperimentKind experiment = ExperimentKind::kDeviation;
  std::vector<TrialRecord> trials;       // ordered by (step, algorithm, trial)
  std::vector<ConditionSummary> summary; // ordered by (step, algorithm)

  const ConditionSummary& find(double step_m, Algorithm algorithm) const;
};

using TrialProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Deviation sweep on the arc array. Geometry-unaware networks see only the
/// deviated signals; everything else is told the deviated coordinates.
/// Each trial keeps its scene and deviation directions across steps.
ExperimentResult run_deviation_experiment(const ExperimentConfig& config, const ModelSet& models,
                                          const TrialProgressFn& progress = {});

/// A fresh random array per trial, known to every algorithm. Summary rows
/// use step 0.
ExperimentResult run_randomized_experiment(const ExperimentConfig& config,
                                           const ModelSet& models,
                                           const TrialProgressFn& progress = {});

inline constexpr const char* kResultsSchema = "gadoa.results/1";

/// "# gadoa.results/1" then
/// experiment,step_m,algorithm,trial_id,theta_true,theta_est,delta_deg,failed
void write_trials_csv(std::ostream& out, const ExperimentResult& result);
/// "# gadoa.results/1" then
/// experiment,step_m,algorithm,n_trials,n_failed,mae_deg,accuracy_pct,epsilon_deg
void write_summary_csv(std::ostream& out, const ExperimentResult& result);

/// Figure-ready rows read back from summary files.
struct PlotRow {
  std::string step_m;
  std::string algorithm;
  std::string mae_deg;
  std::string accuracy_pct;
};
/// Parses a summary CSV; rejects a missing or different schema line (kFormat).
std::vector<PlotRow> read_summary_csv(std::istream& in, const std::string& name = "summary");
/// Header step_m,algorithm,mae_deg,accuracy_pct.
void write_plotdata_csv(std::ostream& out, std::span<const PlotRow> rows);

}  // namespace gadoa
