#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "serb/corpus.hpp"
#include "serb/hsf.hpp"

namespace serb {

std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t state = 0xcbf29ce484222325ULL);
/// FNV-1a of the file's bytes.
std::uint64_t hash_file(const std::filesystem::path& path);

class CacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CacheEntry {
  std::string id;
  /// Hash of the source audio file; unchanged hash means re-extraction is skipped.
  std::uint64_t content_hash = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;
};

/// One feature set and kind for one task. LLD entries keep their own frame
/// count; target_frames records the longest utterance for padding at load.
struct FeatureCache {
  FeatureSet set = FeatureSet::kG23;
  FeatureKind kind = FeatureKind::kLld;
  std::size_t target_frames = 0;
  std::vector<CacheEntry> entries;

  const CacheEntry* find(const std::string& id) const;
};

/// Layout (little-endian): "SERB", u32 version, u32 set, u32 kind,
/// u64 target_frames, u64 n_utts; per entry: u32 id_len, id bytes,
/// u64 content_hash, u64 rows, u64 cols, rows*cols f32, u64 entry checksum;
/// then u64 checksum of everything before it.
void write_cache(const std::filesystem::path& path, const FeatureCache& cache);
/// Throws CacheError naming the entry whose checksum fails, or reporting a
/// truncated or partially written file.
FeatureCache read_cache(const std::filesystem::path& path);

std::filesystem::path cache_path(const std::filesystem::path& dir, Task task, FeatureSet set,
                                 FeatureKind kind);
std::filesystem::path manifest_path(const std::filesystem::path& dir, Task task, FeatureSet set,
                                    FeatureKind kind);

}  // namespace serb
