#include "serb/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace serb {

std::string FeatureChoice::label() const {
  return std::string(to_string(set)) + "-" + std::string(to_string(kind));
}

std::vector<FeatureChoice> all_feature_choices() {
  std::vector<FeatureChoice> out;
  for (auto set : {FeatureSet::kG23, FeatureSet::kP34, FeatureSet::kL193}) {
    for (auto kind : {FeatureKind::kLld, FeatureKind::kHsf}) out.push_back({set, kind});
  }
  return out;
}

std::vector<nn::Architecture> all_classifiers() {
  return {nn::Architecture::kMlp, nn::Architecture::kLstm, nn::Architecture::kGru,
          nn::Architecture::kConv1d};
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto item = trim(s.substr(pos, comma == std::string_view::npos ? s.npos : comma - pos));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::optional<FeatureChoice> parse_feature_choice(std::string_view text) {
  const auto dash = text.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  auto set = parse_feature_set(text.substr(0, dash));
  auto kind = parse_feature_kind(text.substr(dash + 1));
  if (!set || !kind) return std::nullopt;
  return FeatureChoice{*set, *kind};
}

std::vector<FeatureChoice> parse_feature_list(std::string_view text) {
  if (trim(text) == "all") return all_feature_choices();
  std::vector<FeatureChoice> out;
  for (const auto& item : split_list(text)) {
    auto c = parse_feature_choice(item);
    if (!c) throw ConfigError("unknown feature '" + item + "' (expected e.g. G23-LLD, L193-HSF)");
    out.push_back(*c);
  }
  if (out.empty()) throw ConfigError("empty feature list");
  return out;
}

std::vector<nn::Architecture> parse_classifier_list(std::string_view text) {
  if (trim(text) == "all") return all_classifiers();
  std::vector<nn::Architecture> out;
  for (const auto& item : split_list(text)) {
    auto a = nn::parse_architecture(item);
    if (!a) throw ConfigError("unknown classifier '" + item + "' (mlp, lstm, gru, conv1d)");
    out.push_back(*a);
  }
  if (out.empty()) throw ConfigError("empty classifier list");
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("bad value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  return parse_number<double>(key, value);
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("bad boolean '" + std::string(value) + "' for " + std::string(key));
}

std::string fmt_real(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct KeyDef {
  std::string name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define SERB_SIZE_KEY(name, field)                                                     \
  KeyDef {                                                                             \
    name, [](ExperimentConfig& c, std::string_view v) {                                \
      c.field = parse_number<std::size_t>(name, v); },                                 \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }              \
  }
#define SERB_REAL_KEY(name, field)                                                     \
  KeyDef {                                                                             \
    name, [](ExperimentConfig& c, std::string_view v) { c.field = parse_real(name, v); }, \
        [](const ExperimentConfig& c) { return fmt_real(c.field); }                    \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> keys = {
      {"corpus_root", [](ExperimentConfig& c, std::string_view v) { c.corpus_root = std::string(v); },
       [](const ExperimentConfig& c) { return c.corpus_root.string(); }},
      {"task",
       [](ExperimentConfig& c, std::string_view v) {
         auto t = parse_task(v);
         if (!t) throw ConfigError("bad task '" + std::string(v) + "' (speech or song)");
         c.task = *t;
       },
       [](const ExperimentConfig& c) { return std::string(to_string(c.task)); }},
      {"cache_dir", [](ExperimentConfig& c, std::string_view v) { c.cache_dir = std::string(v); },
       [](const ExperimentConfig& c) { return c.cache_dir.string(); }},
      {"output_dir", [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); },
       [](const ExperimentConfig& c) { return c.output_dir.string(); }},
      {"feature",
       [](ExperimentConfig& c, std::string_view v) {
         parse_feature_list(v);
         c.feature = std::string(v);
       },
       [](const ExperimentConfig& c) { return c.feature; }},
      {"classifier",
       [](ExperimentConfig& c, std::string_view v) {
         parse_classifier_list(v);
         c.classifier = std::string(v);
       },
       [](const ExperimentConfig& c) { return c.classifier; }},
      SERB_SIZE_KEY("folds", folds),
      {"fold_seed",
       [](ExperimentConfig& c, std::string_view v) {
         c.fold_seed = parse_number<std::uint64_t>("fold_seed", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.fold_seed); }},
      {"fold_mode",
       [](ExperimentConfig& c, std::string_view v) {
         if (v == "stratified") c.fold_mode = FoldMode::kStratified;
         else if (v == "actor") c.fold_mode = FoldMode::kActor;
         else throw ConfigError("bad fold_mode '" + std::string(v) + "' (stratified or actor)");
       },
       [](const ExperimentConfig& c) {
         return std::string(c.fold_mode == FoldMode::kStratified ? "stratified" : "actor");
       }},
      {"standardize",
       [](ExperimentConfig& c, std::string_view v) { c.standardize = parse_bool("standardize", v); },
       [](const ExperimentConfig& c) { return std::string(c.standardize ? "true" : "false"); }},
      {"hsf_on_padded",
       [](ExperimentConfig& c, std::string_view v) { c.hsf_on_padded = parse_bool("hsf_on_padded", v); },
       [](const ExperimentConfig& c) { return std::string(c.hsf_on_padded ? "true" : "false"); }},
      SERB_SIZE_KEY("threads", threads),
      {"seed",
       [](ExperimentConfig& c, std::string_view v) {
         c.seed = parse_number<std::uint64_t>("seed", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      SERB_SIZE_KEY("hidden_units", model.hidden_units),
      SERB_SIZE_KEY("n_layers", model.n_layers),
      SERB_REAL_KEY("dropout", model.dropout_p),
      {"conv_mode",
       [](ExperimentConfig& c, std::string_view v) {
         auto m = nn::parse_conv_mode(v);
         if (!m) throw ConfigError("bad conv_mode '" + std::string(v) + "' (kernel_length or stride)");
         c.model.conv_mode = *m;
       },
       [](const ExperimentConfig& c) { return std::string(nn::to_string(c.model.conv_mode)); }},
      SERB_REAL_KEY("learning_rate", train.adam.learning_rate),
      SERB_REAL_KEY("beta1", train.adam.beta1),
      SERB_REAL_KEY("beta2", train.adam.beta2),
      SERB_REAL_KEY("epsilon", train.adam.epsilon),
      SERB_SIZE_KEY("epochs", train.epochs),
      SERB_SIZE_KEY("batch_size", train.batch_size),
      SERB_SIZE_KEY("patience", train.patience),
      SERB_REAL_KEY("validation_fraction", train.validation_fraction),
      SERB_REAL_KEY("frame_length_s", spectral.frame_len_s),
      SERB_REAL_KEY("frame_hop_s", spectral.hop_s),
      SERB_REAL_KEY("f0_min_hz", voice.f0_min_hz),
      SERB_REAL_KEY("f0_max_hz", voice.f0_max_hz),
      SERB_REAL_KEY("voicing_threshold", voice.voicing_threshold),
      SERB_SIZE_KEY("lpc_order", voice.lpc_order),
  };
  return keys;
}

#undef SERB_SIZE_KEY
#undef SERB_REAL_KEY

}  // namespace

void validate_config(const ExperimentConfig& c) {
  if (c.folds < 2) throw ConfigError("folds must be at least 2");
  if (!(c.train.adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (c.train.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(c.model.dropout_p >= 0.0 && c.model.dropout_p < 1.0)) {
    throw ConfigError("dropout must be in [0, 1)");
  }
  if (!(c.train.validation_fraction >= 0.0 && c.train.validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must be in [0, 1)");
  }
  if (!(c.spectral.frame_len_s > 0.0 && c.spectral.hop_s > 0.0)) {
    throw ConfigError("frame_length_s and frame_hop_s must be positive");
  }
  if (!(c.voice.f0_min_hz > 0.0 && c.voice.f0_min_hz < c.voice.f0_max_hz)) {
    throw ConfigError("need 0 < f0_min_hz < f0_max_hz");
  }
  c.feature_choices();
  c.classifiers();
}

std::vector<FeatureChoice> ExperimentConfig::feature_choices() const {
  return parse_feature_list(feature);
}

std::vector<nn::Architecture> ExperimentConfig::classifiers() const {
  return parse_classifier_list(classifier);
}

std::size_t ExperimentConfig::worker_count() const {
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  for (const auto& def : key_table()) {
    if (def.name == key) {
      def.set(config, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& def : key_table()) out.push_back(def.name);
  return out;
}

std::string to_config_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& def : key_table()) out += def.name + " = " + def.get(config) + "\n";
  return out;
}

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
  ExperimentConfig config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate_config(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace serb
