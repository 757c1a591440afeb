#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace serb {

/// Per-utterance LLD matrix, frames x features, row-major.
struct FrameMatrix {
  std::vector<double> values;
  std::size_t n_frames = 0;
  std::size_t n_columns = 0;
  double frame_hop_s = 0.0;
  double frame_len_s = 0.0;
  std::vector<std::string> column_names;

  FrameMatrix() = default;
  FrameMatrix(std::size_t frames, std::size_t columns, std::vector<std::string> names = {})
      : values(frames * columns, 0.0),
        n_frames(frames),
        n_columns(columns),
        column_names(std::move(names)) {}

  double& at(std::size_t frame, std::size_t col) { return values[frame * n_columns + col]; }
  double at(std::size_t frame, std::size_t col) const { return values[frame * n_columns + col]; }

  std::span<double> row(std::size_t frame) {
    return {values.data() + frame * n_columns, n_columns};
  }
  std::span<const double> row(std::size_t frame) const {
    return {values.data() + frame * n_columns, n_columns};
  }

  bool all_finite() const {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  /// Throws std::logic_error if the shape invariants are broken.
  void validate() const {
    if (n_frames < 1) throw std::logic_error("FrameMatrix: no frames");
    if (values.size() != n_frames * n_columns) throw std::logic_error("FrameMatrix: size mismatch");
    if (column_names.size() != n_columns) {
      throw std::logic_error("FrameMatrix: column_names length differs from column count");
    }
    if (!all_finite()) throw std::logic_error("FrameMatrix: non-finite value");
  }
};

}  // namespace serb
