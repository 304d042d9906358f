// gadoa: scene simulation, dataset generation, training and the DoA
// experiments from the command line.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gadoa/config.hpp"
#include "gadoa/dataset.hpp"
#include "gadoa/error.hpp"
#include "gadoa/experiments.hpp"
#include "gadoa/mlp.hpp"
#include "gadoa/render.hpp"
#include "gadoa/scene.hpp"
#include "gadoa/signal.hpp"

namespace fs = std::filesystem;
using namespace gadoa;

namespace {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string config;
  std::string out = ".";
  std::string corpus;
  bool quiet = false;
};

RunConfig resolve(const GlobalOptions& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.threads) c.threads = std::max<std::size_t>(1, *g.threads);
  if (!g.corpus.empty()) c.corpus = fs::path(g.corpus);
  c.propagate();
  return c;
}

fs::path out_dir(const GlobalOptions& g) {
  fs::path dir(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIngestion, "cannot create output directory " + dir.string());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIngestion, "cannot write " + path.string());
  return out;
}

void log(const GlobalOptions& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

std::vector<FeatureKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<FeatureKind> kinds;
  for (const auto& n : names) kinds.push_back(feature_kind_from_string(n));
  return kinds;
}

ArrayGeometry pick_geometry(const std::string& spec, const RunConfig& c, Rng& rng) {
  if (spec == "arc") return arc_array();
  if (spec == "random") {
    return random_geometry(c.dataset.random_mics, c.dataset.random_width, c.dataset.random_depth, rng);
  }
  return load_geometry(spec);
}

ProgressFn progress_printer(const GlobalOptions& g, const std::string& what) {
  if (g.quiet) return {};
  return [what, last = std::size_t{0}](std::size_t done, std::size_t total) mutable {
    const std::size_t pct = done * 100 / total;
    if (pct / 10 != last / 10 || done == total) {
      std::cerr << what << ": " << done << "/" << total << '\n';
      last = pct;
    }
  };
}

DatasetManifest manifest_for(const RunConfig& c, FeatureKind kind, std::optional<std::size_t> samples) {
  DatasetManifest m = c.dataset;
  m.kind = kind;
  m.policy = kind == FeatureKind::kGeometryAware ? GeometryPolicy::kRandomPerSample
                                                 : GeometryPolicy::kFixedArc;
  if (samples) m.samples = *samples;
  m.validate();
  return m;
}

std::string format_loss(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// --- subcommands ---------------------------------------------------------

struct SimulateOptions {
  std::string geometry = "arc";
  double duration = 5.0;
  std::optional<double> t60;
  std::optional<double> snr;
};

void cmd_simulate(const GlobalOptions& g, const SimulateOptions& o) {
  RunConfig c = resolve(g);
  if (o.t60) c.scene.t60_min = c.scene.t60_max = *o.t60;
  if (o.snr) c.scene.snr_min_db = c.scene.snr_max_db = *o.snr;
  if (!(o.duration * kSampleRate >= 1.0)) throw Error(ErrorKind::kUsage, "--duration must be positive");
  Rng geometry_rng = make_rng(c.seed, 2);
  const ArrayGeometry geometry = pick_geometry(o.geometry, c, geometry_rng);
  Rng scene_rng = make_rng(c.seed, 0);
  const Scene scene = sample_scene(c.scene, geometry, scene_rng);
  Rng render_rng(scene.seed);
  const auto n = static_cast<std::size_t>(std::llround(o.duration * kSampleRate));
  const auto signal = render_scene(scene, n, render_rng, c.render);
  const fs::path dir = out_dir(g);
  save_scene(dir / "scene.json", scene);
  write_wav(dir / "scene.wav", signal);
  log(g, "wrote " + (dir / "scene.wav").string() + " and scene.json (DoA " +
             std::to_string(scene.ground_truth_doa) + " deg)");
}

struct DatasetOptions {
  std::vector<std::string> features{"max"};
  std::optional<std::size_t> samples;
};

fs::path dataset_path(const fs::path& dir, FeatureKind kind) {
  return dir / (std::string("dataset_") + to_string(kind) + ".bin");
}

void cmd_dataset(const GlobalOptions& g, const DatasetOptions& o) {
  const RunConfig c = resolve(g);
  const fs::path dir = out_dir(g);
  for (const auto kind : parse_kinds(o.features)) {
    const auto m = manifest_for(c, kind, o.samples);
    const auto path = dataset_path(dir, kind);
    generate_dataset_file(m, path, c.threads, progress_printer(g, path.filename().string()));
    log(g, "wrote " + path.string());
  }
}

struct TrainOptions {
  std::string feature = "max";
  std::string dataset;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> max_epochs;
  std::optional<std::size_t> patience;
};

void cmd_train(const GlobalOptions& g, const TrainOptions& o) {
  RunConfig c = resolve(g);
  if (o.max_epochs) c.training.max_epochs = *o.max_epochs;
  if (o.patience) c.training.patience = *o.patience;
  const fs::path dir = out_dir(g);
  const FeatureKind kind = feature_kind_from_string(o.feature);

  fs::path data_path;
  if (!o.dataset.empty()) {
    data_path = o.dataset;
  } else {
    data_path = dataset_path(dir, kind);
    generate_dataset_file(manifest_for(c, kind, o.samples), data_path, c.threads,
                          progress_printer(g, data_path.filename().string()));
  }
  const Dataset data = load_dataset(data_path);
  if (data.manifest.kind != kind) {
    throw Error(ErrorKind::kUsage, data_path.string() + " holds '" + to_string(data.manifest.kind) +
                                       "' features, not '" + to_string(kind) + "'");
  }
  const SplitSets split = split_dataset(data);
  TrainConfig tc = c.training;
  if (!g.quiet) {
    tc.on_epoch = [](const EpochReport& r) {
      std::cerr << "epoch " << r.epoch << " train " << r.train_loss << " val " << r.validation_loss
                << (r.improved ? " *" : "") << '\n';
    };
  }
  MlpModel model = train(split.train, split.validation, architecture_for(data), tc);
  model.feature_tag() = feature_tag_for(data.manifest);
  const auto model_path = dir / (std::string("model_") + to_string(kind) + ".bin");
  save_model(model, model_path);

  auto log_out = open_out(dir / (std::string("train_") + to_string(kind) + ".csv"));
  log_out << "epoch,train_loss,validation_loss\n";
  const auto& meta = model.metadata();
  for (std::size_t e = 0; e < meta.train_losses.size(); ++e) {
    log_out << e + 1 << ',' << format_loss(meta.train_losses[e]) << ','
            << format_loss(meta.validation_losses[e]) << '\n';
  }
  log(g, "wrote " + model_path.string() + " (best epoch " + std::to_string(meta.best_epoch) + " of " +
             std::to_string(meta.epochs) + ")");
}

struct ModelOptions {
  std::string models_dir;
  std::string fc_full, fc_max, fc_ga;
};

ModelSet load_models(const RunConfig& c, const ModelOptions& o, const std::vector<Algorithm>& wanted) {
  ModelSet set;
  for (const auto a : wanted) {
    if (!is_learned(a)) continue;
    fs::path path;
    const std::string& flag = a == Algorithm::kFcFull ? o.fc_full : a == Algorithm::kFcMax ? o.fc_max : o.fc_ga;
    if (!flag.empty()) {
      path = flag;
    } else if (const auto it = c.models.find(a); it != c.models.end()) {
      path = it->second;
    } else if (!o.models_dir.empty()) {
      path = fs::path(o.models_dir) / (std::string("model_") + to_string(feature_kind(a)) + ".bin");
    } else {
      throw Error(ErrorKind::kUsage, std::string("no model given for ") + to_string(a) +
                                         " (use --models-dir or a per-model flag)");
    }
    if (!fs::exists(path)) {
      throw Error(ErrorKind::kUsage, std::string("model file for ") + to_string(a) +
                                         " not found: " + path.string());
    }
    set.set(a, load_model(path));
  }
  return set;
}

struct EvalOptions {
  std::string algorithm = "srp-phat";
  std::string geometry = "arc";
  std::optional<std::size_t> trials;
  ModelOptions models;
};

void cmd_eval(const GlobalOptions& g, const EvalOptions& o) {
  RunConfig c = resolve(g);
  const Algorithm a = algorithm_from_string(o.algorithm);
  ExperimentConfig e = c.experiment;
  if (o.trials) e.trials = *o.trials;
  e.algorithms = {a};
  ExperimentResult result;
  const ModelSet models = load_models(c, o.models, e.algorithms);
  if (o.geometry == "arc") {
    e.deviation_steps = {0.0};
    result = run_deviation_experiment(e, models);
  } else if (o.geometry == "random") {
    result = run_randomized_experiment(e, models);
  } else {
    throw Error(ErrorKind::kUsage, "--geometry must be 'arc' or 'random'");
  }
  std::vector<Trial> trials;
  for (const auto& r : result.trials) {
    if (!r.failed) trials.push_back({r.estimate_deg, r.truth_deg});
  }
  const auto& summary = result.summary.front();
  if (summary.failed > 0) log(g, std::to_string(summary.failed) + " failed trial(s) excluded");
  const fs::path dir = out_dir(g);
  const auto path = dir / (std::string("eval_") + o.algorithm + ".csv");
  auto out = open_out(path);
  write_eval_csv(out, trials, summary.result);
  log(g, std::string(to_string(a)) + ": MAE " + std::to_string(summary.result.mae) + " deg, accuracy " +
             std::to_string(summary.result.accuracy) + " %");
}

struct ExperimentOptions {
  std::optional<std::size_t> trials;
  std::vector<double> steps;
  std::vector<std::string> algorithms;
  ModelOptions models;
};

void cmd_experiment(const GlobalOptions& g, const ExperimentOptions& o, ExperimentKind kind) {
  RunConfig c = resolve(g);
  ExperimentConfig e = c.experiment;
  e.experiment = kind;
  if (o.trials) e.trials = *o.trials;
  if (!o.steps.empty()) e.deviation_steps = o.steps;
  if (!o.algorithms.empty()) {
    e.algorithms.clear();
    for (const auto& name : o.algorithms) e.algorithms.push_back(algorithm_from_string(name));
  }
  e.validate();
  const ModelSet models = load_models(c, o.models, e.resolved_algorithms());
  const auto progress = [&g](std::size_t done, std::size_t total) {
    if (!g.quiet && (done % 10 == 0 || done == total)) std::cerr << "trial " << done << "/" << total << '\n';
  };
  const ExperimentResult result = kind == ExperimentKind::kDeviation
                                      ? run_deviation_experiment(e, models, progress)
                                      : run_randomized_experiment(e, models, progress);
  std::size_t failed = 0;
  for (const auto& s : result.summary) failed += s.failed;
  if (failed > 0) log(g, std::to_string(failed) + " failed trial(s) recorded and excluded from N");
  const fs::path dir = out_dir(g);
  const std::string stem = to_string(kind);
  {
    auto out = open_out(dir / (stem + "_trials.csv"));
    write_trials_csv(out, result);
  }
  auto out = open_out(dir / (stem + "_summary.csv"));
  write_summary_csv(out, result);
  if (!g.quiet) write_summary_csv(std::cout, result);
}

void cmd_plotdata(const GlobalOptions& g, const std::vector<std::string>& inputs) {
  std::vector<PlotRow> rows;
  for (const auto& name : inputs) {
    std::ifstream in(name);
    if (!in) throw Error(ErrorKind::kIngestion, "cannot open " + name);
    const auto part = read_summary_csv(in, name);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const fs::path dir = out_dir(g);
  auto out = open_out(dir / "plotdata.csv");
  write_plotdata_csv(out, rows);
  log(g, "wrote " + (dir / "plotdata.csv").string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-aware DoA estimation: simulation, training and experiments"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Global seed");
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads");
  app.add_option("--corpus", g.corpus, "Directory of mono WAV files for speech sources")
      ->check(CLI::ExistingDirectory);
  app.add_flag("-q,--quiet", g.quiet, "No progress output");

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Render one random scene to WAV + scene JSON");
  simulate->add_option("--geometry", sim.geometry, "arc, random, or a geometry file")->capture_default_str();
  simulate->add_option("--duration", sim.duration, "Seconds")->capture_default_str();
  simulate->add_option("--t60", sim.t60, "Fix T60 [s]");
  simulate->add_option("--snr", sim.snr, "Fix SNR [dB]");

  DatasetOptions ds;
  auto* dataset = app.add_subcommand("dataset", "Generate single-frame training records");
  dataset->add_option("--feature", ds.features, "full, max and/or ga")->delimiter(',')->capture_default_str();
  dataset->add_option("--samples", ds.samples, "Records per dataset");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train an MLP on a dataset");
  train_cmd->add_option("--feature", tr.feature, "full, max or ga")->capture_default_str();
  train_cmd->add_option("--dataset", tr.dataset, "Existing dataset file (generated otherwise)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--samples", tr.samples, "Records to generate when no dataset is given");
  train_cmd->add_option("--max-epochs", tr.max_epochs, "Epoch cap");
  train_cmd->add_option("--patience", tr.patience, "Early-stopping patience");

  auto add_model_flags = [](CLI::App* cmd, ModelOptions& m) {
    cmd->add_option("--models-dir", m.models_dir, "Directory holding model_<kind>.bin files");
    cmd->add_option("--fc-full", m.fc_full, "FC_full model file");
    cmd->add_option("--fc-max", m.fc_max, "FC_max model file");
    cmd->add_option("--fc-ga", m.fc_ga, "FC_GA model file");
  };

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Evaluate one algorithm on generated trials");
  eval->add_option("--algorithm", ev.algorithm, "srp-phat, music, fc-full, fc-max or fc-ga")
      ->capture_default_str();
  eval->add_option("--geometry", ev.geometry, "arc or random")->capture_default_str();
  eval->add_option("--trials", ev.trials, "Trials");
  add_model_flags(eval, ev.models);

  ExperimentOptions ex;
  auto* experiment = app.add_subcommand("experiment", "Run the deviation or randomized experiment");
  experiment->require_subcommand(1);
  auto* deviation = experiment->add_subcommand("deviation", "Arc array with deviating coordinates");
  auto* randomized = experiment->add_subcommand("randomized", "Fresh random array per trial");
  for (auto* cmd : {deviation, randomized}) {
    cmd->add_option("--trials", ex.trials, "Trials per condition");
    cmd->add_option("--algorithms", ex.algorithms, "Subset of algorithms")->delimiter(',');
    add_model_flags(cmd, ex.models);
  }
  deviation->add_option("--steps", ex.steps, "Deviation steps in meters")->delimiter(',');

  std::vector<std::string> plot_inputs;
  auto* plotdata = app.add_subcommand("plotdata", "Collect summary CSVs into figure-ready CSV");
  plotdata->add_option("inputs", plot_inputs, "Summary CSV files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate) {
      cmd_simulate(g, sim);
    } else if (*dataset) {
      cmd_dataset(g, ds);
    } else if (*train_cmd) {
      cmd_train(g, tr);
    } else if (*eval) {
      cmd_eval(g, ev);
    } else if (*deviation) {
      cmd_experiment(g, ex, ExperimentKind::kDeviation);
    } else if (*randomized) {
      cmd_experiment(g, ex, ExperimentKind::kRandomized);
    } else if (*plotdata) {
      cmd_plotdata(g, plot_inputs);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
