#include "serb/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace serb::nn {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void Adam::step(const std::vector<Param*>& params) {
  if (states_.size() != params.size()) states_.assign(params.size(), AdamState{});
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_step(params[i]->value, params[i]->grad, states_[i], config_);
  }
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  Tensor t({indices.size(), frames, features});
  const std::size_t n = sample_size();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const float* src = x.data() + indices[b] * n;
    double* dst = t.ptr() + b * n;
    for (std::size_t i = 0; i < n; ++i) dst[i] = src[i];
  }
  return t;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.frames = frames;
  out.features = features;
  const std::size_t n = sample_size();
  out.x.reserve(indices.size() * n);
  out.y.reserve(indices.size());
  for (std::size_t i : indices) {
    out.x.insert(out.x.end(), x.begin() + static_cast<std::ptrdiff_t>(i * n),
                 x.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    out.y.push_back(y[i]);
  }
  return out;
}

void Dataset::append(std::span<const float> sample, int label) {
  if (sample.size() != sample_size()) throw std::invalid_argument("dataset: sample size mismatch");
  x.insert(x.end(), sample.begin(), sample.end());
  y.push_back(label);
}

std::pair<double, double> evaluate(Model& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  Tensor grad;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = model.forward(data.batch(idx), Mode::kInfer);
    const std::span<const int> labels(data.y.data() + start, end - start);
    loss += softmax_xent_batch(logits, labels, grad) * static_cast<double>(end - start);
    const std::size_t classes = logits.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const double* row = logits.ptr() + b * classes;
      const auto pred = static_cast<int>(std::max_element(row, row + classes) - row);
      if (pred == labels[b]) ++correct;
    }
  }
  const double n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

std::vector<std::size_t> predict_labels(Model& model, const Dataset& data,
                                        std::size_t batch_size) {
  std::vector<std::size_t> out;
  out.reserve(data.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    for (const auto& p : model.predict(data.batch(idx))) out.push_back(p.label);
  }
  return out;
}

TrainResult train(Model& model, const Dataset& train_set, const Dataset* validation,
                  const TrainConfig& config) {
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
  if (config.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (!(config.adam.learning_rate >= 0.0)) throw std::invalid_argument("train: negative lr");
  for (int label : train_set.y) {
    if (label < 0 || static_cast<std::size_t>(label) >= model.spec().n_classes) {
      throw std::invalid_argument("train: label " + std::to_string(label) + " out of range");
    }
  }

  Rng shuffle_rng(mix_seed(config.seed, 2));
  Adam optimizer(config.adam);
  const bool use_val = validation != nullptr && validation->size() > 0;
  const bool early_stop = use_val && config.patience > 0;

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> best_params;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  Tensor grad;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<int> labels(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) labels[b] = train_set.y[idx[b]];

      model.zero_grad();
      const Tensor logits = model.forward(train_set.batch(idx), Mode::kTrain);
      const double loss = softmax_xent_batch(logits, labels, grad);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch starting at " + std::to_string(start) +
                                 " (check input scaling or learning rate)");
      }
      loss_sum += loss * static_cast<double>(idx.size());
      model.backward(grad);
      optimizer.step(model.params());
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.train_accuracy = evaluate(model, train_set, config.batch_size).second;
    stats.val_loss = std::numeric_limits<double>::quiet_NaN();
    stats.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    if (use_val) std::tie(stats.val_loss, stats.val_accuracy) =
        evaluate(model, *validation, config.batch_size);
    result.history.push_back(stats);

    if (early_stop) {
      if (stats.val_loss < best_val) {
        best_val = stats.val_loss;
        best_params = model.flat_params();
        result.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= config.patience) {
        result.stopped_early = true;
        break;
      }
    } else {
      result.best_epoch = epoch;
    }
    if (config.stop_at_train_accuracy > 0.0 &&
        stats.train_accuracy >= config.stop_at_train_accuracy) {
      break;
    }
  }
  if (early_stop && !best_params.empty()) model.set_flat_params(best_params);
  return result;
}

TrainedModel train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config) {
  Model model(spec, config.seed);
  const bool split = config.patience > 0 && config.validation_fraction > 0.0 && data.size() >= 10;
  if (!split) {
    auto result = train(model, data, nullptr, config);
    return {std::move(model), std::move(result)};
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(mix_seed(config.seed, 3));
  split_rng.shuffle(std::span<std::size_t>(order));
  auto n_val = static_cast<std::size_t>(
      std::lround(config.validation_fraction * static_cast<double>(data.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, data.size() - 1);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  const Dataset train_part = data.subset(train_idx);
  const Dataset val_part = data.subset(val_idx);
  auto result = train(model, train_part, &val_part, config);
  return {std::move(model), std::move(result)};
}

}  // namespace serb::nn
