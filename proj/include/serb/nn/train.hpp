#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "serb/nn/model.hpp"

namespace serb::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config);

class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  void step(const std::vector<Param*>& params);

 private:
  AdamConfig config_;
  std::vector<AdamState> states_;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  /// Early stopping on validation loss; 0 disables it.
  std::size_t patience = 10;
  /// Fraction of the training data held out for early stopping.
  double validation_fraction = 0.1;
  /// Stop once eval-mode training accuracy reaches this value; 0 disables.
  double stop_at_train_accuracy = 0.0;
};

/// Labeled inputs stored as f32, shape (n, frames, features).
struct Dataset {
  std::size_t frames = 0;
  std::size_t features = 0;
  std::vector<float> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  std::size_t sample_size() const { return frames * features; }

  /// Gathers the listed samples into an f64 (batch, frames, features) tensor.
  Tensor batch(std::span<const std::size_t> indices) const;
  Dataset subset(std::span<const std::size_t> indices) const;
  void append(std::span<const float> sample, int label);
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  /// NaN when no validation split is used.
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

/// Trains `model` in place with mini-batch Adam. Deterministic for a fixed
/// seed. Throws std::runtime_error when the loss becomes non-finite.
TrainResult train(Model& model, const Dataset& train, const Dataset* validation,
                  const TrainConfig& config);

struct TrainedModel {
  Model model;
  TrainResult result;
};

/// Builds a model from `spec`, carves a seeded validation split when
/// early stopping is enabled, and trains.
TrainedModel train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config);

/// Mean loss and accuracy in inference mode.
std::pair<double, double> evaluate(Model& model, const Dataset& data, std::size_t batch_size);

std::vector<std::size_t> predict_labels(Model& model, const Dataset& data,
                                        std::size_t batch_size);

}  // namespace serb::nn
