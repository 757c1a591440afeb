#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "serb/config.hpp"
#include "serb/eval.hpp"
#include "serb/nn/train.hpp"

namespace serb {

/// Model inputs for one feature choice, aligned with the scanned records.
/// LLD inputs are zero-padded to the longest utterance in the cache.
struct LoadedFeatures {
  nn::Dataset data;
  std::vector<int> actors;
};

/// Throws CacheError naming the feature set when its cache file or an
/// utterance's entry is missing.
LoadedFeatures load_features(const ExperimentConfig& config,
                             const std::vector<UtteranceRecord>& records,
                             const FeatureChoice& choice);

/// Column z-scoring fit on `fit` (every frame row), applied to both sets.
/// Constant columns are only centered.
void standardize(nn::Dataset& fit, nn::Dataset& other);

struct FoldResult {
  double accuracy = 0.0;
  double uar = 0.0;
  nn::TrainResult training;
};

struct CellResult {
  Task task = Task::kSpeech;
  FeatureChoice feature;
  nn::Architecture classifier = nn::Architecture::kLstm;
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  double mean_uar = 0.0;
  /// Sum of the per-fold confusion matrices.
  eval::ConfusionMatrix confusion{std::vector<std::string>{"?"}};

  std::string name() const;  // e.g. "song_L193-HSF_LSTM"
};

using LogFn = std::function<void(const std::string&)>;

eval::FoldPlan make_fold_plan(const ExperimentConfig& config, const LoadedFeatures& features,
                              const LogFn& log = {});

/// Trains and evaluates one cell over all folds; folds run on a bounded
/// pool of config.worker_count() threads.
CellResult run_cell(const ExperimentConfig& config, const LoadedFeatures& features,
                    const FeatureChoice& feature, nn::Architecture classifier,
                    const LogFn& log = {});

/// Every configured (feature, classifier) cell, in table order: features
/// G23, P34, L193 with LLD before HSF; classifiers MLP, LSTM, GRU, Conv1D.
std::vector<CellResult> run_grid(const ExperimentConfig& config, const LogFn& log = {});

/// results.csv, confusion_<cell>.csv, heatmap_<cell>.ppm, history_<cell>.csv
/// and the resolved run_config.txt.
void write_grid_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                        const std::vector<CellResult>& cells);

/// Re-renders heatmaps from the confusion CSVs in `dir` and returns a
/// fixed-width table of the mean rows in results.csv.
std::string render_report(const std::filesystem::path& dir);

}  // namespace serb
