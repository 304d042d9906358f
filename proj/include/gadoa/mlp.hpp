#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gadoa/features.hpp"
#include "gadoa/rng.hpp"

namespace gadoa {

struct MlpArchitecture {
  std::size_t input_size = 0;
  std::vector<std::size_t> hidden{1024, 1024, 1024, 1024};
  std::size_t output_size = 72;
  double dropout = 0.2;

  friend bool operator==(const MlpArchitecture&, const MlpArchitecture&) = default;
};

/// Which feature pipeline a model was trained on; lets callers refuse to
/// feed it anything else.
struct FeatureTag {
  FeatureKind kind = FeatureKind::kMax;
  int tau_max = 0;
  std::size_t num_mics = 0;

  friend bool operator==(const FeatureTag&, const FeatureTag&) = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

struct TrainingMetadata {
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;  // 1-based; 0 = untrained
  double best_validation_loss = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> train_losses;
  std::vector<double> validation_losses;
};

/// Fully connected ReLU network. Inputs are standardized with a fixed
/// per-feature (x - mean) / scale before the first layer; hidden layers use
/// inverted dropout during training only.
class MlpModel {
 public:
  MlpModel() = default;
  /// He-uniform weights, zero biases, identity input scaling.
  MlpModel(MlpArchitecture arch, Rng& rng);
  static MlpModel zeros(MlpArchitecture arch);

  const MlpArchitecture& architecture() const noexcept { return arch_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  Eigen::VectorXd& input_mean() noexcept { return input_mean_; }
  const Eigen::VectorXd& input_mean() const noexcept { return input_mean_; }
  Eigen::VectorXd& input_scale() noexcept { return input_scale_; }
  const Eigen::VectorXd& input_scale() const noexcept { return input_scale_; }

  std::optional<FeatureTag>& feature_tag() noexcept { return tag_; }
  const std::optional<FeatureTag>& feature_tag() const noexcept { return tag_; }
  TrainingMetadata& metadata() noexcept { return meta_; }
  const TrainingMetadata& metadata() const noexcept { return meta_; }

  std::size_t parameter_count() const noexcept;
  /// Throws kNumeric if any parameter is non-finite.
  void check_finite() const;

 private:
  explicit MlpModel(MlpArchitecture arch);

  MlpArchitecture arch_;
  std::vector<DenseLayer> layers_;
  Eigen::VectorXd input_mean_;
  Eigen::VectorXd input_scale_;
  std::optional<FeatureTag> tag_;
  TrainingMetadata meta_;
};

struct ForwardResult {
  Eigen::VectorXd logits;
  Eigen::VectorXd probabilities;
};

/// Inference pass (no dropout). Throws kFeatureShape on a length mismatch
/// and kNumeric on non-finite activations.
ForwardResult forward(const MlpModel& model, std::span<const double> x);

/// Inference for a batch stored column-wise (input_size x B); returns the
/// C x B class posteriors.
Eigen::MatrixXd predict_proba(const MlpModel& model, const Eigen::MatrixXd& batch);

/// Column-wise softmax with max subtraction.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

struct Gradients {
  std::vector<DenseLayer> layers;  // same shapes as the model
};

struct LossAndGrad {
  double loss = 0.0;
  Gradients grad;
};

/// Mean cross-entropy over the batch and its gradient. Dropout masks are
/// drawn from `dropout_rng` when given; nullptr disables dropout.
LossAndGrad loss_and_grad(const MlpModel& model, const Eigen::MatrixXd& batch,
                          std::span<const int> labels, Rng* dropout_rng);
/// Same, reusing the buffers already held by `out`.
void loss_and_grad(const MlpModel& model, const Eigen::MatrixXd& batch,
                   std::span<const int> labels, Rng* dropout_rng, LossAndGrad& out);

/// Mean cross-entropy of inference-mode predictions.
double mean_loss(const MlpModel& model, const Eigen::MatrixXd& features,
                 std::span<const int> labels, std::size_t chunk = 1024);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const MlpModel& model);

  std::size_t step() const noexcept { return step_; }

 private:
  friend void adam_step(MlpModel&, AdamState&, const Gradients&, const AdamConfig&);
  std::vector<DenseLayer> first_;
  std::vector<DenseLayer> second_;
  std::size_t step_ = 0;
};

/// One bias-corrected Adam update.
void adam_step(MlpModel& model, AdamState& state, const Gradients& grad,
               const AdamConfig& config);

/// Stops once the validation loss has failed to improve on the best value
/// for more than `patience` consecutive epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records one epoch; returns true when it set a new best.
  bool update(double validation_loss);
  bool should_stop() const noexcept { return since_best_ > patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }
  std::size_t epochs() const noexcept { return epochs_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_loss_ = 0.0;
};

/// Column-wise features with class labels.
struct LabeledSet {
  Eigen::MatrixXd features;  // input_size x N
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct EpochReport {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  bool improved = false;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::size_t patience = 10;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
  bool standardize_inputs = true;
  std::function<void(const EpochReport&)> on_epoch;
};

/// Mini-batch Adam on cross-entropy with early stopping; returns the
/// parameters from the epoch with the lowest validation loss. Throws
/// kTrainingFailure when the loss stops being finite.
MlpModel train(const LabeledSet& train_set, const LabeledSet& validation_set,
               const MlpArchitecture& arch, const TrainConfig& config);

/// Versioned little-endian binary container.
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace gadoa
