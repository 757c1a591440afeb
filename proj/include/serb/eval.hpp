#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace serb::eval {

/// Rows are true classes, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::string> class_names);
  ConfusionMatrix(std::vector<std::string> class_names, std::vector<std::uint64_t> counts);

  std::size_t n_classes() const { return names_.size(); }
  const std::vector<std::string>& class_names() const { return names_; }

  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
  void merge(const ConfusionMatrix& other);

  std::uint64_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * names_.size() + predicted];
  }
  std::uint64_t total() const;
  std::uint64_t support(std::size_t truth) const;
  std::uint64_t trace() const;

 private:
  std::vector<std::string> names_;
  std::vector<std::uint64_t> counts_;
};

/// trace / total; 0 for an empty matrix.
double accuracy(const ConfusionMatrix& cm);
/// Mean per-class recall over classes with nonzero support.
double uar(const ConfusionMatrix& cm);
std::vector<std::size_t> zero_support_classes(const ConfusionMatrix& cm);

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& path);

/// Binary PPM heatmap: one square cell per count, shaded by row-normalized
/// recall (white = 0, dark blue = 1).
void write_heatmap_ppm(const std::filesystem::path& path, const ConfusionMatrix& cm,
                       std::size_t cell_px = 24);

struct FoldPlan {
  std::size_t k = 0;
  /// Fold index per item, in input order.
  std::vector<std::size_t> assignments;

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

/// Seeded shuffle within each class, then round-robin over folds with a
/// counter that carries across classes so both per-class and total fold
/// sizes differ by at most one. Throws naming the first class with fewer
/// than k members unless allow_small_classes is set.
FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed,
                          bool allow_small_classes = false);

/// Whole groups (e.g. actors) go to one fold; groups are shuffled and dealt
/// round-robin. Requires at least k distinct groups.
FoldPlan grouped_kfold(std::span<const int> groups, std::size_t k, std::uint64_t seed);

}  // namespace serb::eval
