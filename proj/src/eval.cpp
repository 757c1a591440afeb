#include "serb/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "serb/rng.hpp"

namespace serb::eval {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_names)
    : names_(std::move(class_names)), counts_(names_.size() * names_.size(), 0) {
  if (names_.empty()) throw std::invalid_argument("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> class_names,
                                 std::vector<std::uint64_t> counts)
    : names_(std::move(class_names)), counts_(std::move(counts)) {
  if (names_.empty()) throw std::invalid_argument("confusion matrix needs at least one class");
  if (counts_.size() != names_.size() * names_.size()) {
    throw std::invalid_argument("confusion matrix counts must be n_classes^2");
  }
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  if (truth >= n_classes() || predicted >= n_classes()) {
    throw std::out_of_range("confusion matrix: class index out of range");
  }
  counts_[truth * n_classes() + predicted] += count;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.names_ != names_) throw std::invalid_argument("confusion matrix: class mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::support(std::size_t truth) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < n_classes(); ++j) s += at(truth, j);
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < n_classes(); ++i) t += at(i, i);
  return t;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) return 0.0;
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

double uar(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < cm.n_classes(); ++i) {
    const auto s = cm.support(i);
    if (s == 0) continue;
    sum += static_cast<double>(cm.at(i, i)) / static_cast<double>(s);
    ++used;
  }
  return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

std::vector<std::size_t> zero_support_classes(const ConfusionMatrix& cm) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cm.n_classes(); ++i) {
    if (cm.support(i) == 0) out.push_back(i);
  }
  return out;
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "true\\predicted";
  for (const auto& n : cm.class_names()) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < cm.n_classes(); ++i) {
    out << cm.class_names()[i];
    for (std::size_t j = 0; j < cm.n_classes(); ++j) out << ',' << cm.at(i, j);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  auto header = split_csv(line);
  if (header.size() < 2) throw std::runtime_error(path.string() + ": bad header");
  std::vector<std::string> names(header.begin() + 1, header.end());
  std::vector<std::uint64_t> counts;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != names.size() + 1) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(rows + 1) +
                               " has wrong width");
    }
    for (std::size_t j = 1; j < cells.size(); ++j) counts.push_back(std::stoull(cells[j]));
    ++rows;
  }
  if (rows != names.size()) throw std::runtime_error(path.string() + ": not square");
  return ConfusionMatrix(std::move(names), std::move(counts));
}

void write_heatmap_ppm(const std::filesystem::path& path, const ConfusionMatrix& cm,
                       std::size_t cell_px) {
  const std::size_t n = cm.n_classes();
  const std::size_t side = n * cell_px;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P6\n" << side << ' ' << side << "\n255\n";
  std::vector<unsigned char> row(side * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(cm.support(i));
    for (std::size_t j = 0; j < n; ++j) {
      const double v = s > 0 ? static_cast<double>(cm.at(i, j)) / s : 0.0;
      // white -> (8, 48, 107)
      const auto r = static_cast<unsigned char>(255.0 - v * (255.0 - 8.0));
      const auto g = static_cast<unsigned char>(255.0 - v * (255.0 - 48.0));
      const auto b = static_cast<unsigned char>(255.0 - v * (255.0 - 107.0));
      for (std::size_t p = 0; p < cell_px; ++p) {
        const std::size_t x = (j * cell_px + p) * 3;
        const bool border = p == 0 || p + 1 == cell_px;
        row[x] = border ? 200 : r;
        row[x + 1] = border ? 200 : g;
        row[x + 2] = border ? 200 : b;
      }
    }
    for (std::size_t p = 0; p < cell_px; ++p) {
      out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(i);
  }
  return out;
}

FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed,
                          bool allow_small_classes) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be at least 2");
  if (labels.size() < k) {
    throw std::invalid_argument("stratified_kfold: " + std::to_string(labels.size()) +
                                " items cannot fill " + std::to_string(k) + " folds");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  if (!allow_small_classes) {
    for (const auto& [label, members] : by_class) {
      if (members.size() < k) {
        throw std::invalid_argument("stratified_kfold: class " + std::to_string(label) +
                                    " has " + std::to_string(members.size()) +
                                    " members, fewer than k = " + std::to_string(k));
      }
    }
  }

  Rng rng(mix_seed(seed, 0x5f01d));
  FoldPlan plan{k, std::vector<std::size_t>(labels.size(), 0)};
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) {
      plan.assignments[idx] = next;
      next = (next + 1) % k;
    }
  }
  return plan;
}

FoldPlan grouped_kfold(std::span<const int> groups, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("grouped_kfold: k must be at least 2");
  std::vector<int> unique(groups.begin(), groups.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (unique.size() < k) {
    throw std::invalid_argument("grouped_kfold: " + std::to_string(unique.size()) +
                                " groups cannot fill " + std::to_string(k) + " folds");
  }
  Rng rng(mix_seed(seed, 0x9f01d));
  rng.shuffle(std::span<int>(unique));
  std::map<int, std::size_t> fold_of;
  for (std::size_t i = 0; i < unique.size(); ++i) fold_of[unique[i]] = i % k;
  FoldPlan plan{k, std::vector<std::size_t>(groups.size(), 0)};
  for (std::size_t i = 0; i < groups.size(); ++i) plan.assignments[i] = fold_of[groups[i]];
  return plan;
}

}  // namespace serb::eval
