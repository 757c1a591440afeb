#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "serb/corpus.hpp"
#include "serb/features_spectral.hpp"
#include "serb/features_voice.hpp"
#include "serb/hsf.hpp"
#include "serb/nn/model.hpp"
#include "serb/nn/train.hpp"

namespace serb {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FoldMode { kStratified, kActor };

struct FeatureChoice {
  FeatureSet set = FeatureSet::kL193;
  FeatureKind kind = FeatureKind::kHsf;

  std::string label() const;  // e.g. "L193-HSF"
  bool operator==(const FeatureChoice&) const = default;
};

/// All six feature choices in table order: G23, P34, L193, each LLD then HSF.
std::vector<FeatureChoice> all_feature_choices();
std::vector<nn::Architecture> all_classifiers();

struct ExperimentConfig {
  std::filesystem::path corpus_root;
  Task task = Task::kSpeech;
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path output_dir = "results";
  /// "all" or a comma list such as "G23-HSF,L193-LLD".
  std::string feature = "all";
  /// "all" or a comma list of mlp, lstm, gru, conv1d.
  std::string classifier = "lstm";

  std::size_t folds = 10;
  std::uint64_t fold_seed = 20200;
  FoldMode fold_mode = FoldMode::kStratified;
  /// Per-fold z-scoring of inputs, fit on the training part only.
  bool standardize = true;
  /// HSF statistics over zero-padded LLD frames instead of real frames only.
  /// Padded HSF is derived from the LLD cache at load time.
  bool hsf_on_padded = false;
  /// Worker threads for extraction and fold training; 0 = hardware.
  std::size_t threads = 0;

  std::uint64_t seed = 1;
  nn::ModelSpec model;
  nn::TrainConfig train;
  features::SpectralConfig spectral;
  features::VoiceConfig voice;

  std::vector<FeatureChoice> feature_choices() const;
  std::vector<nn::Architecture> classifiers() const;
  std::size_t worker_count() const;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys and bad
/// values throw ConfigError with the source name and line number.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "config");
/// Range checks across keys; throws ConfigError.
void validate_config(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets one key; throws ConfigError for an unknown key or a bad value.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);
std::vector<std::string> config_keys();
/// Every key with its current value, one `key = value` per line.
std::string to_config_text(const ExperimentConfig& config);

}  // namespace serb
