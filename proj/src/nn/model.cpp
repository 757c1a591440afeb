#include "serb/nn/model.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace serb::nn {

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::kMlp: return "MLP";
    case Architecture::kLstm: return "LSTM";
    case Architecture::kGru: return "GRU";
    case Architecture::kConv1d: return "Conv1D";
  }
  return "?";
}

std::optional<Architecture> parse_architecture(std::string_view text) {
  if (text == "mlp" || text == "MLP") return Architecture::kMlp;
  if (text == "lstm" || text == "LSTM") return Architecture::kLstm;
  if (text == "gru" || text == "GRU") return Architecture::kGru;
  if (text == "conv1d" || text == "Conv1D" || text == "conv") return Architecture::kConv1d;
  return std::nullopt;
}

std::string_view to_string(ConvMode m) {
  return m == ConvMode::kKernelLength ? "kernel_length" : "stride";
}

std::optional<ConvMode> parse_conv_mode(std::string_view text) {
  if (text == "kernel_length") return ConvMode::kKernelLength;
  if (text == "stride") return ConvMode::kStride;
  return std::nullopt;
}

void ModelSpec::validate() const {
  if (hidden_units == 0) throw std::invalid_argument("model: hidden_units must be positive");
  if (n_layers == 0) throw std::invalid_argument("model: n_layers must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw std::invalid_argument("model: dropout_p must be in [0, 1)");
  }
  if (n_classes < 2) throw std::invalid_argument("model: need at least 2 classes");
  if (input_frames == 0 || input_features == 0) {
    throw std::invalid_argument("model: input shape must be nonzero");
  }
}

Model::Model(ModelSpec spec, std::uint64_t seed)
    : spec_(spec), seed_(seed), dropout_rng_(mix_seed(seed, 1)) {
  spec_.validate();
  const std::size_t H = spec_.hidden_units;
  std::size_t frames = spec_.input_frames;
  std::size_t features = spec_.input_features;
  if (spec_.architecture == Architecture::kConv1d && frames == 1) {
    frames = features;
    features = 1;
  }
  input_shape_ = {frames, features};

  for (std::size_t l = 0; l < spec_.n_layers; ++l) {
    const std::size_t in = l == 0 ? features : H;
    switch (spec_.architecture) {
      case Architecture::kMlp:
        layers_.push_back(std::make_unique<Dense>(in, H, Activation::kRelu));
        break;
      case Architecture::kLstm:
        layers_.push_back(std::make_unique<Lstm>(in, H, true));
        break;
      case Architecture::kGru:
        layers_.push_back(std::make_unique<Gru>(in, H, true));
        break;
      case Architecture::kConv1d: {
        const std::size_t k = ModelSpec::conv_kernel(l);
        const std::size_t stride = spec_.conv_mode == ConvMode::kStride ? k : 1;
        const std::size_t next = Conv1d::output_frames(frames, k, stride);
        if (next == 0) {
          throw std::invalid_argument("model: " + std::to_string(frames) +
                                      " frames is too short for conv kernel " + std::to_string(k));
        }
        frames = next;
        layers_.push_back(std::make_unique<Conv1d>(in, H, k, stride, Activation::kRelu));
        break;
      }
    }
  }
  layers_.push_back(std::make_unique<Flatten>());
  layers_.push_back(std::make_unique<Dropout>(spec_.dropout_p));
  layers_.push_back(std::make_unique<Dense>(frames * H, spec_.n_classes, Activation::kLinear));

  Rng init_rng(mix_seed(seed, 0));
  for (auto& layer : layers_) layer->initialize(init_rng);
}

Tensor Model::adapt_input(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(1) != spec_.input_frames || x.dim(2) != spec_.input_features) {
    throw std::invalid_argument("model: expected input (batch, " +
                                std::to_string(spec_.input_frames) + ", " +
                                std::to_string(spec_.input_features) + "), got " +
                                x.shape_string());
  }
  if (x.dim(1) == input_shape_[0]) return x;
  Tensor y = x;
  y.shape = {x.dim(0), input_shape_[0], input_shape_[1]};
  return y;
}

Tensor Model::forward(const Tensor& x, Mode mode) {
  Tensor h = adapt_input(x);
  for (auto& layer : layers_) h = layer->forward(h, mode, dropout_rng_);
  h.shape = {h.dim(0), spec_.n_classes};
  return h;
}

Tensor Model::backward(const Tensor& grad_logits) {
  Tensor g = grad_logits;
  g.shape = {grad_logits.dim(0), 1, spec_.n_classes};
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Param*> Model::params() {
  std::vector<Param*> out;
  for (auto& layer : layers_) {
    for (Param* p : layer->params()) out.push_back(p);
  }
  return out;
}

void Model::zero_grad() {
  for (Param* p : params()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

std::size_t Model::parameter_count() {
  std::size_t n = 0;
  for (Param* p : params()) n += p->value.size();
  return n;
}

std::vector<double> Model::flat_params() {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (Param* p : params()) out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

void Model::set_flat_params(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw std::invalid_argument("model: parameter blob has " + std::to_string(values.size()) +
                                " values, expected " + std::to_string(parameter_count()));
  }
  std::size_t offset = 0;
  for (Param* p : params()) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), p->value.size(),
                p->value.begin());
    offset += p->value.size();
  }
}

std::vector<Prediction> Model::predict(const Tensor& x) {
  const Tensor logits = forward(x, Mode::kInfer);
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  std::vector<Prediction> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::span<const double> row(logits.ptr() + b * classes, classes);
    out[b].probabilities = softmax(row);
    out[b].label = static_cast<std::size_t>(
        std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[8] = {'S', 'E', 'R', 'B', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw std::runtime_error(path + ": truncated checkpoint");
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  const ModelSpec& s = model.spec();
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.architecture));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.conv_mode));
  put<std::uint64_t>(out, s.hidden_units);
  put<std::uint64_t>(out, s.n_layers);
  put<double>(out, s.dropout_p);
  put<std::uint64_t>(out, s.n_classes);
  put<std::uint64_t>(out, s.input_frames);
  put<std::uint64_t>(out, s.input_features);
  put<std::uint64_t>(out, model.seed());
  const auto blob = model.flat_params();
  put<std::uint64_t>(out, blob.size());
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(double)));
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Model load_checkpoint(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(name + ": cannot open checkpoint");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error(name + ": not a model checkpoint");
  }
  if (get<std::uint32_t>(in, name) != kVersion) {
    throw std::runtime_error(name + ": unsupported checkpoint version");
  }
  ModelSpec s;
  const auto arch = get<std::uint32_t>(in, name);
  const auto conv = get<std::uint32_t>(in, name);
  if (arch > 3 || conv > 1) throw std::runtime_error(name + ": corrupt checkpoint header");
  s.architecture = static_cast<Architecture>(arch);
  s.conv_mode = static_cast<ConvMode>(conv);
  s.hidden_units = get<std::uint64_t>(in, name);
  s.n_layers = get<std::uint64_t>(in, name);
  s.dropout_p = get<double>(in, name);
  s.n_classes = get<std::uint64_t>(in, name);
  s.input_frames = get<std::uint64_t>(in, name);
  s.input_features = get<std::uint64_t>(in, name);
  const auto seed = get<std::uint64_t>(in, name);
  const auto count = get<std::uint64_t>(in, name);

  Model model(s, seed);
  if (count != model.parameter_count()) {
    throw std::runtime_error(name + ": parameter count does not match the stored spec");
  }
  std::vector<double> blob(count);
  if (!in.read(reinterpret_cast<char*>(blob.data()),
               static_cast<std::streamsize>(count * sizeof(double)))) {
    throw std::runtime_error(name + ": truncated parameter blob");
  }
  model.set_flat_params(blob);
  return model;
}

}  // namespace serb::nn
