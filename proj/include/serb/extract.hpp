#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "serb/audio_io.hpp"
#include "serb/config.hpp"
#include "serb/frame_matrix.hpp"

namespace serb {

/// Per-frame descriptors of one feature set for one clip.
FrameMatrix extract_lld(const AudioClip& clip, FeatureSet set,
                        const features::SpectralConfig& spectral,
                        const features::VoiceConfig& voice);

std::vector<std::string> lld_column_names(FeatureSet set);

struct ExtractReport {
  std::size_t n_records = 0;
  /// Utterances whose features were computed in this run.
  std::size_t n_extracted = 0;
  std::size_t n_cached = 0;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> cache_files;

  bool all_cached() const { return n_extracted == 0; }
};

/// Scans the corpus and brings every requested (set, kind) cache up to date.
/// Files whose content hash matches an existing entry are skipped. Work is
/// spread over config.worker_count() threads; the caches are written by the
/// calling thread once all workers finish.
ExtractReport extract_corpus(const ExperimentConfig& config);

}  // namespace serb
