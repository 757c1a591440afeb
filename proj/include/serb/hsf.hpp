#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "serb/frame_matrix.hpp"

namespace serb {

enum class FeatureSet { kG23, kP34, kL193 };
enum class FeatureKind { kLld, kHsf };

std::string_view to_string(FeatureSet set);
std::string_view to_string(FeatureKind kind);
std::optional<FeatureSet> parse_feature_set(std::string_view text);
std::optional<FeatureKind> parse_feature_kind(std::string_view text);

/// Per-frame width of a feature set: 23, 34 or 193.
std::size_t lld_width(FeatureSet set);

/// Per-utterance model input.
struct FeatureVector {
  std::vector<double> values;
  FeatureKind kind = FeatureKind::kHsf;
  FeatureSet set = FeatureSet::kG23;
};

/// Column means followed by column population standard deviations.
FeatureVector mean_std(const FrameMatrix& m, FeatureSet set);

/// Appends zero rows or drops tail rows to reach target_frames.
FrameMatrix pad_or_truncate(const FrameMatrix& m, std::size_t target_frames);

std::vector<std::string> hsf_column_names(const std::vector<std::string>& lld_names);

}  // namespace serb
