#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "serb/nn/layers.hpp"
#include "serb/rng.hpp"

namespace serb::nn {

enum class Architecture { kMlp, kLstm, kGru, kConv1d };

/// How the "filter lengths (strides) 4, 8, 12" of the convolutional stack
/// are read: as kernel lengths with stride 1, or as kernel = stride.
enum class ConvMode { kKernelLength, kStride };

std::string_view to_string(Architecture a);
std::optional<Architecture> parse_architecture(std::string_view text);
std::string_view to_string(ConvMode m);
std::optional<ConvMode> parse_conv_mode(std::string_view text);

struct ModelSpec {
  Architecture architecture = Architecture::kMlp;
  std::size_t hidden_units = 256;
  std::size_t n_layers = 3;
  double dropout_p = 0.4;
  std::size_t n_classes = 8;
  /// 1 for HSF vectors.
  std::size_t input_frames = 1;
  std::size_t input_features = 0;
  ConvMode conv_mode = ConvMode::kKernelLength;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  /// Kernel length of convolution layer i (4, 8, 12, then +4 per layer).
  static std::size_t conv_kernel(std::size_t layer) { return 4 * (layer + 1); }
};

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

/// Stacked classifier: n_layers of the chosen body, then
/// flatten -> dropout -> dense(n_classes). Convolutional models receive a
/// single-frame (HSF) input as a single-channel sequence over its features.
class Model {
 public:
  Model(ModelSpec spec, std::uint64_t seed);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }

  /// x: (batch, input_frames, input_features) -> logits (batch, n_classes).
  Tensor forward(const Tensor& x, Mode mode);
  /// Backpropagates d(loss)/d(logits), accumulating parameter gradients.
  Tensor backward(const Tensor& grad_logits);

  std::vector<Param*> params();
  void zero_grad();
  std::size_t parameter_count();
  std::vector<double> flat_params();
  void set_flat_params(std::span<const double> values);

  std::vector<Prediction> predict(const Tensor& x);

  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }

 private:
  Tensor adapt_input(const Tensor& x) const;

  ModelSpec spec_;
  std::uint64_t seed_;
  std::vector<std::unique_ptr<Layer>> layers_;
  Rng dropout_rng_;
  std::vector<std::size_t> input_shape_;
};

/// Checkpoint layout (little-endian): magic "SERBMDL1", u32 version,
/// u32 architecture, u32 conv_mode, u64 hidden_units, u64 n_layers,
/// f64 dropout_p, u64 n_classes, u64 input_frames, u64 input_features,
/// u64 seed, u64 n_params, then n_params f64 values in params() order.
void save_checkpoint(const std::filesystem::path& path, Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace serb::nn
