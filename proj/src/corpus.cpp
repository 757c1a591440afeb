#include "serb/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <system_error>

namespace serb {

std::string_view to_string(Task task) { return task == Task::kSpeech ? "speech" : "song"; }

std::optional<Task> parse_task(std::string_view text) {
  if (text == "speech") return Task::kSpeech;
  if (text == "song") return Task::kSong;
  return std::nullopt;
}

const std::vector<std::string>& class_names(Task task) {
  static const std::vector<std::string> speech = {"neutral", "calm",    "happy",   "sad",
                                                  "angry",   "fearful", "disgust", "surprised"};
  static const std::vector<std::string> song = {"neutral", "calm",  "happy",
                                                "sad",     "angry", "fearful"};
  return task == Task::kSpeech ? speech : song;
}

std::size_t n_classes(Task task) { return class_names(task).size(); }

std::size_t expected_count(Task task) { return task == Task::kSpeech ? 1440 : 1012; }

UtteranceRecord parse_ravdess_name(const std::filesystem::path& path) {
  const std::string stem = path.stem().string();
  std::vector<int> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dash = stem.find('-', pos);
    const std::string part = stem.substr(pos, dash == std::string::npos ? dash : dash - pos);
    if (part.size() != 2 || !std::isdigit(static_cast<unsigned char>(part[0])) ||
        !std::isdigit(static_cast<unsigned char>(part[1]))) {
      throw CorpusError("malformed name '" + stem + "': expected 7 two-digit fields");
    }
    fields.push_back(std::stoi(part));
    if (dash == std::string::npos) break;
    pos = dash + 1;
  }
  if (fields.size() != 7) {
    throw CorpusError("malformed name '" + stem + "': " + std::to_string(fields.size()) +
                      " fields, expected 7");
  }

  UtteranceRecord r;
  r.path = path;
  r.modality = fields[0];
  if (fields[1] == 1) {
    r.task = Task::kSpeech;
  } else if (fields[1] == 2) {
    r.task = Task::kSong;
  } else {
    throw CorpusError("'" + stem + "': vocal channel " + std::to_string(fields[1]) +
                      " is neither speech (01) nor song (02)");
  }
  r.emotion_code = fields[2];
  if (r.emotion_code < 1 || static_cast<std::size_t>(r.emotion_code) > n_classes(r.task)) {
    throw CorpusError("'" + stem + "': emotion code " + std::to_string(r.emotion_code) +
                      " is outside the " + std::string(to_string(r.task)) + " inventory");
  }
  r.label = r.emotion_code - 1;
  r.intensity = fields[3];
  r.statement = fields[4];
  r.repetition = fields[5];
  r.actor = fields[6];
  return r;
}

ScanResult scan_corpus(const std::filesystem::path& root, Task task) {
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec)) {
    throw CorpusError("corpus root is not a directory: " + root.string());
  }
  ScanResult result;
  std::vector<std::filesystem::path> paths;
  for (auto it = std::filesystem::recursive_directory_iterator(root, ec);
       !ec && it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    std::string ext = it->path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".wav") paths.push_back(it->path());
  }
  if (ec) throw CorpusError("cannot scan " + root.string() + ": " + ec.message());
  std::sort(paths.begin(), paths.end());

  for (const auto& p : paths) {
    UtteranceRecord r;
    try {
      r = parse_ravdess_name(p);
    } catch (const CorpusError& e) {
      result.warnings.push_back(std::string("skipping ") + p.string() + ": " + e.what());
      continue;
    }
    if (r.task != task) continue;
    result.records.push_back(std::move(r));
  }
  if (result.records.empty()) {
    throw CorpusError("no " + std::string(to_string(task)) + " utterances under " + root.string());
  }
  if (result.records.size() != expected_count(task)) {
    result.warnings.push_back("found " + std::to_string(result.records.size()) + " " +
                              std::string(to_string(task)) + " utterances, expected " +
                              std::to_string(expected_count(task)));
  }
  return result;
}

}  // namespace serb
