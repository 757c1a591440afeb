#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "serb/nn/tensor.hpp"
#include "serb/rng.hpp"

namespace serb::nn {

enum class Mode { kTrain, kInfer };
enum class Activation { kLinear, kRelu };

/// Trainable parameter with its accumulated gradient.
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> s)
      : name(std::move(n)), shape(std::move(s)), value(shape_product(shape), 0.0),
        grad(value.size(), 0.0) {}
};

/// Uniform in +/- sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Param& p, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Layers map (batch, frames, features) tensors. forward() caches what
/// backward() needs; backward() accumulates parameter gradients and returns
/// the gradient with respect to the forward input.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x, Mode mode, Rng& rng) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Param*> params() { return {}; }
  virtual void initialize(Rng&) {}
  virtual std::string name() const = 0;
};

/// act(x W + b), applied independently to every frame.
class Dense : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, Activation act);

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  void initialize(Rng& rng) override;
  std::string name() const override { return "dense"; }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  std::size_t in_;
  std::size_t out_;
  Activation act_;
  Param weight_;
  Param bias_;
  Tensor input_;
  Tensor output_;
};

/// LSTM with gate order (input, forget, candidate, output). Parameters:
/// kernel (in x 4H), recurrent (H x 4H), bias (4H). Zero initial state.
class Lstm : public Layer {
 public:
  Lstm(std::size_t in, std::size_t hidden, bool return_sequences = true);

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&kernel_, &recurrent_, &bias_}; }
  void initialize(Rng& rng) override;
  std::string name() const override { return "lstm"; }

  Param& kernel() { return kernel_; }
  Param& recurrent() { return recurrent_; }
  Param& bias() { return bias_; }

 private:
  std::size_t in_;
  std::size_t hidden_;
  bool return_sequences_;
  Param kernel_;
  Param recurrent_;
  Param bias_;
  Tensor input_;
  std::size_t batch_ = 0;
  std::size_t steps_ = 0;
  // Per step (t, b, ...) caches.
  std::vector<double> gates_;
  std::vector<double> cells_;
  std::vector<double> hiddens_;
};

/// GRU with gate order (update z, reset r, candidate n):
///   n = tanh(x Wn + (r * h_prev) Un + bn),  h = (1 - z) * h_prev + z * n.
class Gru : public Layer {
 public:
  Gru(std::size_t in, std::size_t hidden, bool return_sequences = true);

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&kernel_, &recurrent_, &bias_}; }
  void initialize(Rng& rng) override;
  std::string name() const override { return "gru"; }

  Param& kernel() { return kernel_; }
  Param& recurrent() { return recurrent_; }
  Param& bias() { return bias_; }

 private:
  std::size_t in_;
  std::size_t hidden_;
  bool return_sequences_;
  Param kernel_;
  Param recurrent_;
  Param bias_;
  Tensor input_;
  std::size_t batch_ = 0;
  std::size_t steps_ = 0;
  std::vector<double> gates_;     // z, r, n per (t, b)
  std::vector<double> reset_h_;   // r * h_prev per (t, b)
  std::vector<double> hiddens_;   // h per (t, b)
};

/// Valid cross-correlation along the frame axis with `out` channels.
/// Kernel layout (kernel_len * in) x out.
class Conv1d : public Layer {
 public:
  Conv1d(std::size_t in, std::size_t out, std::size_t kernel_len, std::size_t stride,
         Activation act);

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&kernel_, &bias_}; }
  void initialize(Rng& rng) override;
  std::string name() const override { return "conv1d"; }

  Param& kernel() { return kernel_; }
  Param& bias() { return bias_; }

  static std::size_t output_frames(std::size_t frames, std::size_t kernel_len, std::size_t stride);

 private:
  std::size_t in_;
  std::size_t out_;
  std::size_t kernel_len_;
  std::size_t stride_;
  Activation act_;
  Param kernel_;
  Param bias_;
  Tensor input_;
  Tensor output_;
};

/// (batch, frames, features) -> (batch, 1, frames * features).
class Flatten : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string name() const override { return "flatten"; }

 private:
  std::vector<std::size_t> in_shape_;
};

/// Inverted dropout: in training, keeps units with probability 1 - p and
/// scales them by 1 / (1 - p); inference is the identity.
class Dropout : public Layer {
 public:
  explicit Dropout(double p);

  Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string name() const override { return "dropout"; }

 private:
  double p_;
  std::vector<double> mask_;
  bool last_training_ = false;
};

// ---------------------------------------------------------------- loss

std::vector<double> softmax(std::span<const double> logits);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// -log softmax(logits)[label] and its gradient softmax - onehot.
LossAndGrad softmax_xent(std::span<const double> logits, std::size_t label);

/// Mean cross-entropy over a (batch, classes) logit tensor; the gradient is
/// scaled by 1/batch.
double softmax_xent_batch(const Tensor& logits, std::span<const int> labels, Tensor& grad);

}  // namespace serb::nn
