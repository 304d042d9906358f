#include "gadoa/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "gadoa/error.hpp"

namespace gadoa {

static_assert(std::endian::native == std::endian::little,
              "model files are written with native little-endian layout");

namespace {

void validate_architecture(const MlpArchitecture& arch) {
  if (arch.input_size == 0 || arch.output_size < 2) {
    throw Error(ErrorKind::kFeatureShape, "MLP needs input_size >= 1 and >= 2 classes");
  }
  for (auto h : arch.hidden) {
    if (h == 0) throw Error(ErrorKind::kFeatureShape, "MLP hidden layer of width 0");
  }
  if (!(arch.dropout >= 0.0 && arch.dropout < 1.0)) {
    throw Error(ErrorKind::kFeatureShape, "dropout rate must lie in [0, 1)");
  }
}

std::vector<std::size_t> layer_widths(const MlpArchitecture& arch) {
  std::vector<std::size_t> w{arch.input_size};
  w.insert(w.end(), arch.hidden.begin(), arch.hidden.end());
  w.push_back(arch.output_size);
  return w;
}

Eigen::MatrixXd standardize(const MlpModel& model, const Eigen::MatrixXd& batch) {
  return (batch.colwise() - model.input_mean()).array().colwise() / model.input_scale().array();
}

void check_batch(const MlpModel& model, const Eigen::MatrixXd& batch) {
  if (static_cast<std::size_t>(batch.rows()) != model.architecture().input_size) {
    throw Error(ErrorKind::kFeatureShape,
                "feature length " + std::to_string(batch.rows()) + " does not match model input " +
                    std::to_string(model.architecture().input_size));
  }
}

}  // namespace

MlpModel::MlpModel(MlpArchitecture arch) : arch_(std::move(arch)) {
  validate_architecture(arch_);
  const auto widths = layer_widths(arch_);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(widths[i]);
    const auto out = static_cast<Eigen::Index>(widths[i + 1]);
    layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  input_mean_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arch_.input_size));
  input_scale_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(arch_.input_size));
}

MlpModel::MlpModel(MlpArchitecture arch, Rng& rng) : MlpModel(std::move(arch)) {
  for (auto& layer : layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    // Row-major fill so the draw order matches the on-disk order.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
    }
  }
}

MlpModel MlpModel::zeros(MlpArchitecture arch) { return MlpModel(std::move(arch)); }

std::size_t MlpModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void MlpModel::check_finite() const {
  for (const auto& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw Error(ErrorKind::kNumeric, "model has non-finite parameters");
    }
  }
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.rowwise() - logits.colwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().rowwise() /= p.colwise().sum().array();
  return p;
}

Eigen::MatrixXd predict_proba(const MlpModel& model, const Eigen::MatrixXd& batch) {
  check_batch(model, batch);
  Eigen::MatrixXd a = standardize(model, batch);
  const auto& layers = model.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Eigen::MatrixXd z = layers[i].weight * a;
    z.colwise() += layers[i].bias;
    if (i + 1 < layers.size()) {
      a = z.cwiseMax(0.0);
    } else {
      if (!z.allFinite()) throw Error(ErrorKind::kNumeric, "non-finite logits");
      return softmax_columns(z);
    }
  }
  return a;
}

ForwardResult forward(const MlpModel& model, std::span<const double> x) {
  const Eigen::Map<const Eigen::VectorXd> in(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::MatrixXd a = in;
  check_batch(model, a);
  a = standardize(model, a);
  const auto& layers = model.layers();
  ForwardResult out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Eigen::MatrixXd z = layers[i].weight * a;
    z.colwise() += layers[i].bias;
    if (i + 1 < layers.size()) {
      a = z.cwiseMax(0.0);
    } else {
      out.logits = z.col(0);
    }
  }
  if (!out.logits.allFinite()) throw Error(ErrorKind::kNumeric, "non-finite logits");
  out.probabilities = softmax_columns(out.logits).col(0);
  return out;
}

LossAndGrad loss_and_grad(const MlpModel& model, const Eigen::MatrixXd& batch,
                          std::span<const int> labels, Rng* dropout_rng) {
  LossAndGrad out;
  loss_and_grad(model, batch, labels, dropout_rng, out);
  return out;
}

void loss_and_grad(const MlpModel& model, const Eigen::MatrixXd& batch,
                   std::span<const int> labels, Rng* dropout_rng, LossAndGrad& out) {
  check_batch(model, batch);
  const auto b = batch.cols();
  if (b == 0 || static_cast<std::size_t>(b) != labels.size()) {
    throw Error(ErrorKind::kInvalidBatch, "batch must be non-empty with one label per column");
  }
  const auto& arch = model.architecture();
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= arch.output_size) {
      throw Error(ErrorKind::kInvalidBatch, "label out of range");
    }
  }
  const auto& layers = model.layers();
  const std::size_t depth = layers.size();
  const bool dropout = dropout_rng != nullptr && arch.dropout > 0.0;
  const double keep = 1.0 - arch.dropout;

  // activations[i] feeds layer i; masks[i] scales hidden layer i's output.
  std::vector<Eigen::MatrixXd> activations(depth);
  std::vector<Eigen::MatrixXd> masks(depth);
  activations[0] = standardize(model, batch);
  Eigen::MatrixXd logits;
  std::bernoulli_distribution keep_unit(keep);
  for (std::size_t i = 0; i < depth; ++i) {
    Eigen::MatrixXd z = layers[i].weight * activations[i];
    z.colwise() += layers[i].bias;
    if (i + 1 == depth) {
      logits = std::move(z);
      break;
    }
    Eigen::MatrixXd h = z.cwiseMax(0.0);
    if (dropout) {
      masks[i].resize(h.rows(), h.cols());
      const double scale = 1.0 / keep;
      for (Eigen::Index c = 0; c < h.cols(); ++c) {
        for (Eigen::Index r = 0; r < h.rows(); ++r) {
          masks[i](r, c) = keep_unit(*dropout_rng) ? scale : 0.0;
        }
      }
      h.array() *= masks[i].array();
    }
    activations[i + 1] = std::move(h);
  }

  // Log-sum-exp cross-entropy.
  const Eigen::RowVectorXd col_max = logits.colwise().maxCoeff();
  const Eigen::MatrixXd shifted = logits.rowwise() - col_max;
  const Eigen::RowVectorXd log_z = shifted.array().exp().colwise().sum().log();
  double loss = 0.0;
  for (Eigen::Index c = 0; c < b; ++c) loss += log_z(c) - shifted(labels[static_cast<std::size_t>(c)], c);
  out.loss = loss / static_cast<double>(b);
  if (!std::isfinite(out.loss)) throw Error(ErrorKind::kNumeric, "non-finite loss");

  Eigen::MatrixXd delta = (shifted.rowwise() - log_z).array().exp().matrix();
  for (Eigen::Index c = 0; c < b; ++c) delta(labels[static_cast<std::size_t>(c)], c) -= 1.0;
  delta /= static_cast<double>(b);

  out.grad.layers.resize(depth);
  for (std::size_t i = depth; i-- > 0;) {
    out.grad.layers[i].weight.noalias() = delta * activations[i].transpose();
    out.grad.layers[i].bias = delta.rowwise().sum();
    if (i == 0) break;
    Eigen::MatrixXd upstream = layers[i].weight.transpose() * delta;
    if (dropout) upstream.array() *= masks[i - 1].array();
    // ReLU derivative: the (masked) activation is positive exactly where the
    // pre-activation was, except for dropped units, already zeroed above.
    upstream.array() *= (activations[i].array() > 0.0).cast<double>();
    delta = std::move(upstream);
  }
}

double mean_loss(const MlpModel& model, const Eigen::MatrixXd& features,
                 std::span<const int> labels, std::size_t chunk) {
  const auto n = features.cols();
  if (n == 0) throw Error(ErrorKind::kInvalidBatch, "mean_loss on an empty set");
  double total = 0.0;
  for (Eigen::Index start = 0; start < n; start += static_cast<Eigen::Index>(chunk)) {
    const auto len = std::min<Eigen::Index>(static_cast<Eigen::Index>(chunk), n - start);
    const Eigen::MatrixXd p = predict_proba(model, features.middleCols(start, len));
    for (Eigen::Index c = 0; c < len; ++c) {
      const double q = p(labels[static_cast<std::size_t>(start + c)], c);
      total -= std::log(std::max(q, 1e-300));
    }
  }
  return total / static_cast<double>(n);
}

AdamState::AdamState(const MlpModel& model) {
  for (const auto& l : model.layers()) {
    first_.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                      Eigen::VectorXd::Zero(l.bias.size())});
    second_.push_back(first_.back());
  }
}

void adam_step(MlpModel& model, AdamState& state, const Gradients& grad,
               const AdamConfig& config) {
  auto& layers = model.layers();
  if (state.first_.size() != layers.size() || grad.layers.size() != layers.size()) {
    throw Error(ErrorKind::kInvalidBatch, "Adam state does not match the model");
  }
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  const double b1 = config.beta1, b2 = config.beta2;
  const double lr = config.learning_rate, eps = config.epsilon;

  // One pass per tensor; the update is memory-bound.
  const double step = lr / c1;
  const double inv_c2 = 1.0 / c2;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    double* p = param.data();
    double* mp = m.data();
    double* vp = v.data();
    const double* gp = g.data();
    const Eigen::Index n = param.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mi = b1 * mp[i] + (1.0 - b1) * gp[i];
      const double vi = b2 * vp[i] + (1.0 - b2) * gp[i] * gp[i];
      mp[i] = mi;
      vp[i] = vi;
      p[i] -= step * mi / (std::sqrt(vi * inv_c2) + eps);
    }
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weight, state.first_[i].weight, state.second_[i].weight, grad.layers[i].weight);
    update(layers[i].bias, state.first_[i].bias, state.second_[i].bias, grad.layers[i].bias);
  }
}

bool EarlyStopping::update(double validation_loss) {
  ++epochs_;
  if (epochs_ == 1 || validation_loss < best_loss_) {
    best_loss_ = validation_loss;
    best_epoch_ = epochs_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

MlpModel train(const LabeledSet& train_set, const LabeledSet& validation_set,
               const MlpArchitecture& arch, const TrainConfig& config) {
  if (train_set.size() == 0 || validation_set.size() == 0) {
    throw Error(ErrorKind::kInvalidBatch, "training needs non-empty training and validation sets");
  }
  if (config.batch_size == 0 || config.patience == 0) {
    throw Error(ErrorKind::kUsage, "batch_size and patience must be >= 1");
  }
  Rng init_rng = make_rng(config.seed, 1);
  Rng shuffle_rng = make_rng(config.seed, 2);
  Rng dropout_rng = make_rng(config.seed, 3);

  MlpModel model(arch, init_rng);
  if (config.standardize_inputs) {
    const Eigen::VectorXd mean = train_set.features.rowwise().mean();
    const Eigen::VectorXd var =
        (train_set.features.colwise() - mean).array().square().rowwise().mean();
    model.input_mean() = mean;
    model.input_scale() = var.array().sqrt().unaryExpr([](double s) { return s > 1e-12 ? s : 1.0; });
  }
  model.metadata().seed = config.seed;

  AdamState adam(model);
  EarlyStopping stopper(config.patience);
  MlpModel best = model;
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Eigen::MatrixXd batch;
  std::vector<int> labels;
  LossAndGrad lg;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      batch.resize(train_set.features.rows(), static_cast<Eigen::Index>(len));
      labels.resize(len);
      for (std::size_t j = 0; j < len; ++j) {
        batch.col(static_cast<Eigen::Index>(j)) =
            train_set.features.col(static_cast<Eigen::Index>(order[start + j]));
        labels[j] = train_set.labels[order[start + j]];
      }
      try {
        loss_and_grad(model, batch, labels, &dropout_rng, lg);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumeric) throw;
        throw Error(ErrorKind::kTrainingFailure,
                    "training diverged in epoch " + std::to_string(epoch) + " at sample " +
                        std::to_string(start) + ": " + e.what());
      }
      loss_sum += lg.loss * static_cast<double>(len);
      adam_step(model, adam, lg.grad, config.adam);
    }
    const double train_loss = loss_sum / static_cast<double>(n);
    const double val_loss = mean_loss(model, validation_set.features, validation_set.labels);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw Error(ErrorKind::kTrainingFailure,
                  "loss became non-finite in epoch " + std::to_string(epoch) +
                      " (train " + std::to_string(train_loss) + ", validation " +
                      std::to_string(val_loss) + ")");
    }
    const bool improved = stopper.update(val_loss);
    model.metadata().train_losses.push_back(train_loss);
    model.metadata().validation_losses.push_back(val_loss);
    if (improved) {
      auto meta = std::move(best.metadata());
      best = model;
      best.metadata() = std::move(meta);
    }
    if (config.on_epoch) config.on_epoch({epoch, train_loss, val_loss, improved});
    if (stopper.should_stop()) break;
  }

  best.metadata() = model.metadata();
  best.metadata().epochs = stopper.epochs();
  best.metadata().best_epoch = stopper.best_epoch();
  best.metadata().best_validation_loss = stopper.best_loss();
  return best;
}

// ---------------------------------------------------------------------------
// Model file layout (all little-endian):
//   "GADOAMLP" | u32 version | u64 input | u64 n_hidden | u64 hidden[n] |
//   u64 output | f64 dropout | u8 has_tag [u32 kind, i32 tau_max, u64 mics] |
//   f64 mean[input] | f64 scale[input] |
//   u64 epochs | u64 best_epoch | f64 best_val | u64 seed |
//   u64 n_curve | f64 train[n_curve] | f64 val[n_curve] |
//   per layer: f64 weight[out*in] (row-major), f64 bias[out]
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'G', 'A', 'D', 'O', 'A', 'M', 'L', 'P'};
constexpr std::uint32_t kModelVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_doubles(const double* data, std::size_t n) {
    buf_.append(reinterpret_cast<const char*>(data), n * sizeof(double));
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}

  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void get_doubles(double* out, std::size_t n) {
    need(n * sizeof(double));
    std::memcpy(out, buf_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  std::string_view raw(std::size_t n) {
    need(n);
    std::string_view v(buf_.data() + pos_, n);
    pos_ += n;
    return v;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > buf_.size() - pos_) throw Error(ErrorKind::kModelLoad, "model file is truncated");
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

constexpr std::size_t kMaxWidth = 1u << 20;

}  // namespace

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  const auto& arch = model.architecture();
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint64_t>(arch.input_size);
  w.put<std::uint64_t>(arch.hidden.size());
  for (auto h : arch.hidden) w.put<std::uint64_t>(h);
  w.put<std::uint64_t>(arch.output_size);
  w.put<double>(arch.dropout);
  const auto& tag = model.feature_tag();
  w.put<std::uint8_t>(tag ? 1 : 0);
  if (tag) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tag->kind));
    w.put<std::int32_t>(tag->tau_max);
    w.put<std::uint64_t>(tag->num_mics);
  }
  w.put_doubles(model.input_mean().data(), arch.input_size);
  w.put_doubles(model.input_scale().data(), arch.input_size);
  const auto& meta = model.metadata();
  w.put<std::uint64_t>(meta.epochs);
  w.put<std::uint64_t>(meta.best_epoch);
  w.put<double>(meta.best_validation_loss);
  w.put<std::uint64_t>(meta.seed);
  const std::size_t curve = std::min(meta.train_losses.size(), meta.validation_losses.size());
  w.put<std::uint64_t>(curve);
  w.put_doubles(meta.train_losses.data(), curve);
  w.put_doubles(meta.validation_losses.data(), curve);
  for (const auto& layer : model.layers()) {
    // Eigen is column-major; the file is row-major.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = layer.weight;
    w.put_doubles(rm.data(), static_cast<std::size_t>(rm.size()));
    w.put_doubles(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIngestion, "cannot write model " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw Error(ErrorKind::kIngestion, "short write to " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kModelLoad, "cannot open model " + path.string());
  Reader r(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));

  if (r.raw(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw Error(ErrorKind::kModelLoad, path.string() + ": not a model file");
  }
  if (const auto version = r.get<std::uint32_t>(); version != kModelVersion) {
    throw Error(ErrorKind::kModelLoad, path.string() + ": unsupported model version " +
                                           std::to_string(version));
  }
  MlpArchitecture arch;
  arch.input_size = r.get<std::uint64_t>();
  const auto n_hidden = r.get<std::uint64_t>();
  if (n_hidden > 64) throw Error(ErrorKind::kModelLoad, "implausible hidden layer count");
  arch.hidden.assign(n_hidden, 0);
  for (auto& h : arch.hidden) h = r.get<std::uint64_t>();
  arch.output_size = r.get<std::uint64_t>();
  arch.dropout = r.get<double>();
  if (arch.input_size > kMaxWidth || arch.output_size > kMaxWidth ||
      std::any_of(arch.hidden.begin(), arch.hidden.end(), [](auto h) { return h > kMaxWidth; })) {
    throw Error(ErrorKind::kModelLoad, "implausible layer width");
  }
  MlpModel model;
  try {
    model = MlpModel::zeros(arch);
  } catch (const Error& e) {
    throw Error(ErrorKind::kModelLoad, std::string("inconsistent architecture: ") + e.what());
  }
  if (r.get<std::uint8_t>() != 0) {
    FeatureTag tag;
    const auto kind = r.get<std::uint32_t>();
    if (kind > static_cast<std::uint32_t>(FeatureKind::kGeometryAware)) {
      throw Error(ErrorKind::kModelLoad, "unknown feature kind in model file");
    }
    tag.kind = static_cast<FeatureKind>(kind);
    tag.tau_max = r.get<std::int32_t>();
    tag.num_mics = r.get<std::uint64_t>();
    if (tag.num_mics < 2 || feature_size(tag.kind, tag.num_mics, tag.tau_max) != arch.input_size) {
      throw Error(ErrorKind::kModelLoad, "feature tag disagrees with the input layer size");
    }
    model.feature_tag() = tag;
  }
  r.get_doubles(model.input_mean().data(), arch.input_size);
  r.get_doubles(model.input_scale().data(), arch.input_size);
  auto& meta = model.metadata();
  meta.epochs = r.get<std::uint64_t>();
  meta.best_epoch = r.get<std::uint64_t>();
  meta.best_validation_loss = r.get<double>();
  meta.seed = r.get<std::uint64_t>();
  const auto curve = r.get<std::uint64_t>();
  if (curve > 1'000'000) throw Error(ErrorKind::kModelLoad, "implausible loss-curve length");
  meta.train_losses.resize(curve);
  meta.validation_losses.resize(curve);
  r.get_doubles(meta.train_losses.data(), curve);
  r.get_doubles(meta.validation_losses.data(), curve);
  for (auto& layer : model.layers()) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(layer.weight.rows(),
                                                                              layer.weight.cols());
    r.get_doubles(rm.data(), static_cast<std::size_t>(rm.size()));
    layer.weight = rm;
    r.get_doubles(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  if (!r.at_end()) throw Error(ErrorKind::kModelLoad, "trailing bytes after model parameters");
  try {
    model.check_finite();
  } catch (const Error&) {
    throw Error(ErrorKind::kModelLoad, path.string() + ": non-finite parameters");
  }
  return model;
}

}  // namespace gadoa
