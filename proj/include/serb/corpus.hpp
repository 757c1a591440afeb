#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace serb {

enum class Task { kSpeech, kSong };

std::string_view to_string(Task task);
std::optional<Task> parse_task(std::string_view text);

/// 8 speech classes or 6 song classes.
std::size_t n_classes(Task task);
const std::vector<std::string>& class_names(Task task);
/// Number of files in the full corpus for each task.
std::size_t expected_count(Task task);

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decoded `MM-VV-EE-II-SS-RR-AA` filename stem.
struct UtteranceRecord {
  std::filesystem::path path;
  Task task = Task::kSpeech;
  int modality = 0;
  int emotion_code = 0;
  /// 0-based class index into class_names(task).
  int label = 0;
  int intensity = 0;
  int statement = 0;
  int repetition = 0;
  int actor = 0;

  std::string id() const { return path.stem().string(); }
};

/// Throws CorpusError on a malformed stem or an emotion code outside the
/// task's class inventory.
UtteranceRecord parse_ravdess_name(const std::filesystem::path& path);

struct ScanResult {
  std::vector<UtteranceRecord> records;
  std::vector<std::string> warnings;
};

/// Recursively lists .wav files for `task`, sorted by path. Files of the
/// other vocal channel are skipped; unparseable names produce a warning.
/// Throws CorpusError when the root is missing or nothing matches.
ScanResult scan_corpus(const std::filesystem::path& root, Task task);

}  // namespace serb
