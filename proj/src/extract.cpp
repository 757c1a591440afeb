#include "serb/extract.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include <json.hpp>

#include "serb/feature_cache.hpp"

namespace serb {

FrameMatrix extract_lld(const AudioClip& clip, FeatureSet set,
                        const features::SpectralConfig& spectral,
                        const features::VoiceConfig& voice) {
  switch (set) {
    case FeatureSet::kG23:
      return features::VoiceExtractor(clip.sample_rate_hz, voice, spectral).extract(clip);
    case FeatureSet::kP34:
      return features::SpectralExtractor(clip.sample_rate_hz, spectral).extract_paa(clip);
    case FeatureSet::kL193:
      return features::SpectralExtractor(clip.sample_rate_hz, spectral).extract_l193(clip);
  }
  throw std::invalid_argument("unknown feature set");
}

std::vector<std::string> lld_column_names(FeatureSet set) {
  switch (set) {
    case FeatureSet::kG23: return features::gemaps_column_names();
    case FeatureSet::kP34: return features::paa_column_names();
    case FeatureSet::kL193: return features::l193_column_names();
  }
  return {};
}

namespace {

CacheEntry to_entry(const std::string& id, std::uint64_t hash, std::size_t rows, std::size_t cols,
                    const std::vector<double>& values) {
  CacheEntry e{id, hash, rows, cols, {}};
  e.data.assign(values.begin(), values.end());
  return e;
}

void write_manifest(const std::filesystem::path& path, const ExperimentConfig& config,
                    const FeatureChoice& choice, const FeatureCache& cache) {
  auto lld_names = lld_column_names(choice.set);
  nlohmann::json j;
  j["task"] = std::string(to_string(config.task));
  j["feature_set"] = std::string(to_string(choice.set));
  j["feature_type"] = std::string(to_string(choice.kind));
  j["columns"] = choice.kind == FeatureKind::kHsf ? hsf_column_names(lld_names) : lld_names;
  j["n_utterances"] = cache.entries.size();
  j["target_frames"] = cache.target_frames;
  j["frame_length_s"] = config.spectral.frame_len_s;
  j["frame_hop_s"] = config.spectral.hop_s;
  j["f0_min_hz"] = config.voice.f0_min_hz;
  j["f0_max_hz"] = config.voice.f0_max_hz;
  j["voicing_threshold"] = config.voice.voicing_threshold;
  j["lpc_order"] = config.voice.lpc_order;
  std::ofstream out(path);
  if (!out) throw CacheError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

ExtractReport extract_corpus(const ExperimentConfig& config) {
  ExtractReport report;
  auto scan = scan_corpus(config.corpus_root, config.task);
  report.warnings = std::move(scan.warnings);
  const auto& records = scan.records;
  report.n_records = records.size();

  const auto choices = config.feature_choices();
  std::vector<FeatureSet> sets;
  for (const auto& c : choices) {
    if (std::find(sets.begin(), sets.end(), c.set) == sets.end()) sets.push_back(c.set);
  }

  std::filesystem::create_directories(config.cache_dir);
  std::map<std::string, FeatureCache> existing;
  for (const auto& c : choices) {
    const auto path = cache_path(config.cache_dir, config.task, c.set, c.kind);
    FeatureCache cache{c.set, c.kind, 0, {}};
    if (std::filesystem::exists(path)) {
      try {
        cache = read_cache(path);
      } catch (const CacheError& e) {
        report.warnings.push_back(std::string("rebuilding unreadable cache: ") + e.what());
      }
    }
    existing[c.label()] = std::move(cache);
  }

  // A record needs a set recomputed when any requested kind of that set lacks
  // an entry with a matching content hash.
  std::vector<std::uint64_t> hashes(records.size());
  std::vector<std::vector<FeatureSet>> todo(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    hashes[i] = hash_file(records[i].path);
    for (auto set : sets) {
      for (const auto& c : choices) {
        if (c.set != set) continue;
        const auto* e = existing[c.label()].find(records[i].id());
        if (e == nullptr || e->content_hash != hashes[i]) {
          todo[i].push_back(set);
          break;
        }
      }
    }
  }

  // results[i][set] holds the freshly computed LLD matrix.
  std::vector<std::map<FeatureSet, FrameMatrix>> results(records.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::optional<std::string> first_error;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      if (todo[i].empty()) continue;
      try {
        const AudioClip clip = load_wav(records[i].path);
        for (auto set : todo[i]) {
          results[i][set] = extract_lld(clip, set, config.spectral, config.voice);
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = records[i].path.string() + ": " + e.what();
      }
    }
  };
  const std::size_t n_workers = std::min(config.worker_count(), std::max<std::size_t>(1, records.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) throw std::runtime_error("extraction failed: " + *first_error);

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (todo[i].empty()) ++report.n_cached;
    else ++report.n_extracted;
  }

  for (const auto& c : choices) {
    const auto& old = existing[c.label()];
    FeatureCache cache{c.set, c.kind, 0, {}};
    for (std::size_t i = 0; i < records.size(); ++i) {
      const std::string id = records[i].id();
      auto it = results[i].find(c.set);
      if (it == results[i].end()) {
        cache.entries.push_back(*old.find(id));
      } else if (c.kind == FeatureKind::kLld) {
        const auto& m = it->second;
        cache.entries.push_back(to_entry(id, hashes[i], m.n_frames, m.n_columns, m.values));
      } else {
        const auto v = mean_std(it->second, c.set);
        cache.entries.push_back(to_entry(id, hashes[i], 1, v.values.size(), v.values));
      }
      cache.target_frames = std::max(cache.target_frames, cache.entries.back().rows);
    }
    const auto path = cache_path(config.cache_dir, config.task, c.set, c.kind);
    if (report.n_extracted > 0 || old.entries.size() != cache.entries.size() ||
        !std::filesystem::exists(path)) {
      write_cache(path, cache);
      write_manifest(manifest_path(config.cache_dir, config.task, c.set, c.kind), config, c, cache);
    }
    report.cache_files.push_back(path);
  }
  return report;
}

}  // namespace serb
