#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctiaug/corpus.hpp"
#include "ctiaug/encoder.hpp"

namespace ctiaug {

struct TrainConfig {
  std::size_t epochs_per_stage = 50;
  std::size_t batch_size = 16;
  // Built-in classifiers on hashed features need larger steps than a
  // transformer; use 2e-5 for file-backed transformer embeddings.
  double base_lr = 2e-3;
  std::uint64_t warmup_steps = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::uint64_t seed = 2;
  bool shuffle = true;
  // Stage 2 normally continues the optimizer moments and the schedule.
  bool reset_stage2 = false;

  /// Throws ValidationError when a field is out of range.
  void validate() const;
};

/// Linear warmup to base_lr at warmup_steps, then inverse-square-root decay:
/// lr(step) = base_lr * min(step / warmup, sqrt(warmup / step)).
struct Schedule {
  double base_lr = 2e-5;
  std::uint64_t warmup_steps = 1000;
};

double lr_at(const Schedule& schedule, std::uint64_t step);

enum class Architecture { linear, mlp1 };

std::string_view to_string(Architecture arch);
Architecture parse_architecture(std::string_view name);

struct ModelSpec {
  Architecture arch = Architecture::linear;
  std::size_t hidden_dim = 256;  // mlp1 only
};

/// Nonzero entries of an encoded sentence.
struct SparseRow {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
};

SparseRow to_sparse(std::span<const double> dense);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;   // optimizer updates taken; drives the schedule
  std::uint64_t epoch = 0;  // epochs completed; keys the shuffle stream
};

/// Classifier over encoder features.
///
/// Parameters are one flat array. linear: W (C x D, row-major), b (C).
/// mlp1: W1 (H x D), b1 (H), W2 (C x H), b2 (C), ReLU on the hidden layer.
class Model {
 public:
  Model(ModelSpec spec, std::size_t input_dim, std::vector<std::string> classes);

  Architecture arch() const { return spec_.arch; }
  const ModelSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return spec_.arch == Architecture::mlp1 ? spec_.hidden_dim : 0; }
  std::size_t num_classes() const { return classes_.size(); }
  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t class_index(std::string_view label) const;

  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  /// False for bias entries; weight decay applies to weights only.
  bool is_weight(std::size_t i) const;

  AdamState& optimizer() { return opt_; }
  const AdamState& optimizer() const { return opt_; }
  std::uint64_t step_counter() const { return opt_.step; }

  std::vector<double> logits(const SparseRow& x) const;

 private:
  ModelSpec spec_;
  std::size_t input_dim_;
  std::vector<std::string> classes_;
  std::vector<double> params_;
  AdamState opt_;
};

/// Weights ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)); biases zero.
Model init_model(ModelSpec spec, std::size_t input_dim, std::vector<std::string> classes,
                 std::uint64_t seed);
Model init_model(Architecture arch, std::size_t input_dim, std::size_t num_classes,
                 std::uint64_t seed);

/// Mean cross-entropy over the batch; writes d(loss)/d(params) into `grad`
/// (resized and overwritten) when non-null.
double batch_loss_gradient(const Model& model, std::span<const SparseRow> rows,
                           std::span<const std::size_t> labels, std::vector<double>* grad);

inline double batch_loss(const Model& model, std::span<const SparseRow> rows,
                         std::span<const std::size_t> labels) {
  return batch_loss_gradient(model, rows, labels, nullptr);
}

/// One Adam update with bias correction followed by decoupled weight decay on
/// weights. Uses model.optimizer().step as the (already advanced) step index.
void adam_update(Model& model, std::span<const double> grad, double lr,
                 const TrainConfig& cfg);

/// Encoded training examples.
struct Featurized {
  std::vector<std::string> ids;
  std::vector<SparseRow> rows;
  std::vector<std::size_t> labels;
};

Featurized featurize(const Dataset& data, const Encoder& encoder, const Model& model);

/// epochs_per_stage epochs of shuffled minibatch Adam. The step and epoch
/// counters carry on from the model's previous training.
Model train_stage(Model model, const Featurized& data, const TrainConfig& cfg);
Model train_stage(Model model, const Dataset& data, const Encoder& encoder,
                  const TrainConfig& cfg);

struct StageRecord {
  std::string dataset_fingerprint;
  std::size_t examples = 0;
  std::size_t epochs = 0;
  std::uint64_t first_step = 0;
  std::uint64_t last_step = 0;
};

struct TrainResult {
  Model model;
  std::vector<StageRecord> stages;
};

/// Fresh model trained on stage1_data and then on stage2_data. The class
/// catalog is stage2's labels followed by any stage1-only labels unless
/// `classes` is given.
TrainResult two_stage_train(ModelSpec spec, const Dataset& stage1_data,
                            const Dataset& stage2_data, const Encoder& encoder,
                            const TrainConfig& cfg, std::vector<std::string> classes = {});

/// Log-sum-exp stabilized.
std::vector<double> softmax(std::span<const double> logits);

struct Prediction {
  std::string label;
  std::vector<double> scores;
};

/// Ties in the argmax go to the lowest class index.
Prediction predict(const Model& model, const Encoder& encoder, const Sentence& sentence);
Prediction predict(const Model& model, const SparseRow& features);

struct LoadedModel {
  Model model;
  std::string encoder_fingerprint;
  TrainConfig config;
};

/// Text header line, JSON header line, then the parameters as little-endian
/// IEEE-754 doubles.
void write_model(const Model& model, const std::filesystem::path& path,
                 const std::string& encoder_fingerprint, const TrainConfig& cfg);
LoadedModel read_model(const std::filesystem::path& path);

}  // namespace ctiaug
