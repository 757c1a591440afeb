#include "serb/hsf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace serb {

std::string_view to_string(FeatureSet set) {
  switch (set) {
    case FeatureSet::kG23: return "G23";
    case FeatureSet::kP34: return "P34";
    case FeatureSet::kL193: return "L193";
  }
  return "?";
}

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::kLld ? "LLD" : "HSF";
}

std::optional<FeatureSet> parse_feature_set(std::string_view text) {
  if (text == "G23" || text == "gemaps") return FeatureSet::kG23;
  if (text == "P34" || text == "paa") return FeatureSet::kP34;
  if (text == "L193" || text == "librosa") return FeatureSet::kL193;
  return std::nullopt;
}

std::optional<FeatureKind> parse_feature_kind(std::string_view text) {
  if (text == "LLD" || text == "lld") return FeatureKind::kLld;
  if (text == "HSF" || text == "hsf") return FeatureKind::kHsf;
  return std::nullopt;
}

std::size_t lld_width(FeatureSet set) {
  switch (set) {
    case FeatureSet::kG23: return 23;
    case FeatureSet::kP34: return 34;
    case FeatureSet::kL193: return 193;
  }
  return 0;
}

FeatureVector mean_std(const FrameMatrix& m, FeatureSet set) {
  if (m.n_frames < 1) throw std::invalid_argument("mean_std: matrix has no frames");
  const std::size_t c = m.n_columns;
  FeatureVector out;
  out.kind = FeatureKind::kHsf;
  out.set = set;
  out.values.assign(2 * c, 0.0);

  const double n = static_cast<double>(m.n_frames);
  for (std::size_t f = 0; f < m.n_frames; ++f) {
    for (std::size_t j = 0; j < c; ++j) out.values[j] += m.at(f, j);
  }
  for (std::size_t j = 0; j < c; ++j) out.values[j] /= n;
  for (std::size_t f = 0; f < m.n_frames; ++f) {
    for (std::size_t j = 0; j < c; ++j) {
      const double d = m.at(f, j) - out.values[j];
      out.values[c + j] += d * d;
    }
  }
  for (std::size_t j = 0; j < c; ++j) out.values[c + j] = std::sqrt(out.values[c + j] / n);
  return out;
}

FrameMatrix pad_or_truncate(const FrameMatrix& m, std::size_t target_frames) {
  if (target_frames < 1) throw std::invalid_argument("pad_or_truncate: target_frames must be >= 1");
  FrameMatrix out(target_frames, m.n_columns, m.column_names);
  out.frame_hop_s = m.frame_hop_s;
  out.frame_len_s = m.frame_len_s;
  const std::size_t keep = std::min(target_frames, m.n_frames) * m.n_columns;
  std::copy_n(m.values.begin(), keep, out.values.begin());
  return out;
}

std::vector<std::string> hsf_column_names(const std::vector<std::string>& lld_names) {
  std::vector<std::string> names;
  names.reserve(2 * lld_names.size());
  for (const auto& n : lld_names) names.push_back(n + "_mean");
  for (const auto& n : lld_names) names.push_back(n + "_std");
  return names;
}

}  // namespace serb
