#include "serb/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "serb/feature_cache.hpp"

namespace serb {

std::string CellResult::name() const {
  return std::string(to_string(task)) + "_" + feature.label() + "_" +
         std::string(nn::to_string(classifier));
}

namespace {

LoadedFeatures hsf_from_padded(const ExperimentConfig& config,
                               const std::vector<UtteranceRecord>& records, FeatureSet set) {
  const LoadedFeatures lld = load_features(config, records, {set, FeatureKind::kLld});
  const std::size_t frames = lld.data.frames;
  const std::size_t width = lld.data.features;
  LoadedFeatures out;
  out.data.frames = 1;
  out.data.features = 2 * width;
  out.actors = lld.actors;
  out.data.y = lld.data.y;
  FrameMatrix m(frames, width);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const float* src = lld.data.x.data() + i * frames * width;
    std::copy(src, src + frames * width, m.values.begin());
    const auto v = mean_std(m, set);
    out.data.x.insert(out.data.x.end(), v.values.begin(), v.values.end());
  }
  return out;
}

}  // namespace

LoadedFeatures load_features(const ExperimentConfig& config,
                             const std::vector<UtteranceRecord>& records,
                             const FeatureChoice& choice) {
  if (choice.kind == FeatureKind::kHsf && config.hsf_on_padded) {
    return hsf_from_padded(config, records, choice.set);
  }
  const auto path = cache_path(config.cache_dir, config.task, choice.set, choice.kind);
  if (!std::filesystem::exists(path)) {
    throw CacheError("no cache for feature set " + choice.label() + " (" +
                     std::string(to_string(config.task)) + ") at " + path.string() +
                     "; run extract first");
  }
  const FeatureCache cache = read_cache(path);
  const std::size_t width =
      choice.kind == FeatureKind::kHsf ? 2 * lld_width(choice.set) : lld_width(choice.set);
  const std::size_t frames = choice.kind == FeatureKind::kHsf ? 1 : cache.target_frames;

  std::map<std::string, const CacheEntry*> by_id;
  for (const auto& e : cache.entries) by_id[e.id] = &e;

  LoadedFeatures out;
  out.data.frames = frames;
  out.data.features = width;
  out.data.x.assign(records.size() * frames * width, 0.0f);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string id = records[i].id();
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw CacheError("feature set " + choice.label() + ": missing cache entry for " + id +
                       "; run extract first");
    }
    const CacheEntry& e = *it->second;
    if (e.cols != width || e.rows > frames) {
      throw CacheError("feature set " + choice.label() + ": entry " + id + " has shape " +
                       std::to_string(e.rows) + "x" + std::to_string(e.cols));
    }
    std::copy(e.data.begin(), e.data.end(),
              out.data.x.begin() + static_cast<std::ptrdiff_t>(i * frames * width));
    out.data.y.push_back(records[i].label);
    out.actors.push_back(records[i].actor);
  }
  return out;
}

void standardize(nn::Dataset& fit, nn::Dataset& other) {
  const std::size_t f = fit.features;
  const std::size_t rows = fit.x.size() / f;
  std::vector<double> mean(f, 0.0), sq(f, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < f; ++c) mean[c] += fit.x[r * f + c];
  }
  for (auto& m : mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < f; ++c) {
      const double d = fit.x[r * f + c] - mean[c];
      sq[c] += d * d;
    }
  }
  std::vector<double> inv(f);
  for (std::size_t c = 0; c < f; ++c) {
    const double sd = std::sqrt(sq[c] / static_cast<double>(rows));
    inv[c] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  for (nn::Dataset* d : {&fit, &other}) {
    const std::size_t n = d->x.size() / f;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < f; ++c) {
        float& v = d->x[r * f + c];
        v = static_cast<float>((v - mean[c]) * inv[c]);
      }
    }
  }
}

eval::FoldPlan make_fold_plan(const ExperimentConfig& config, const LoadedFeatures& features,
                              const LogFn& log) {
  if (config.fold_mode == FoldMode::kActor) {
    return eval::grouped_kfold(features.actors, config.folds, config.fold_seed);
  }
  std::map<int, std::size_t> counts;
  for (int y : features.data.y) ++counts[y];
  bool small = false;
  for (const auto& [label, n] : counts) {
    if (n < config.folds) {
      small = true;
      if (log) {
        log("warning: class " + class_names(config.task)[static_cast<std::size_t>(label)] +
            " has " + std::to_string(n) + " utterances, fewer than " +
            std::to_string(config.folds) + " folds");
      }
    }
  }
  return eval::stratified_kfold(features.data.y, config.folds, config.fold_seed, small);
}

CellResult run_cell(const ExperimentConfig& config, const LoadedFeatures& features,
                    const FeatureChoice& feature, nn::Architecture classifier,
                    const LogFn& log) {
  const auto plan = make_fold_plan(config, features, log);
  const auto& names = class_names(config.task);

  nn::ModelSpec spec = config.model;
  spec.architecture = classifier;
  spec.n_classes = names.size();
  spec.input_frames = features.data.frames;
  spec.input_features = features.data.features;
  spec.validate();

  std::vector<std::optional<FoldResult>> results(plan.k);
  std::vector<std::optional<eval::ConfusionMatrix>> matrices(plan.k);
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::optional<std::string> first_error;

  auto worker = [&] {
    while (true) {
      const std::size_t fold = next.fetch_add(1);
      if (fold >= plan.k) return;
      try {
        const auto train_idx = plan.train_indices(fold);
        const auto test_idx = plan.test_indices(fold);
        nn::Dataset train_set = features.data.subset(train_idx);
        nn::Dataset test_set = features.data.subset(test_idx);
        if (config.standardize) standardize(train_set, test_set);

        nn::TrainConfig tc = config.train;
        tc.seed = mix_seed(config.seed, fold);
        auto trained = nn::train(spec, train_set, tc);
        const auto predicted = nn::predict_labels(trained.model, test_set, tc.batch_size);

        eval::ConfusionMatrix cm(names);
        for (std::size_t i = 0; i < predicted.size(); ++i) {
          cm.add(static_cast<std::size_t>(test_set.y[i]), predicted[i]);
        }
        FoldResult fr{eval::accuracy(cm), eval::uar(cm), std::move(trained.result)};
        std::lock_guard lock(mutex);
        if (log) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "%s_%s_%s fold %zu/%zu: accuracy %.4f uar %.4f",
                        std::string(to_string(config.task)).c_str(), feature.label().c_str(),
                        std::string(nn::to_string(classifier)).c_str(), fold + 1, plan.k,
                        fr.accuracy, fr.uar);
          log(buf);
          for (auto c : eval::zero_support_classes(cm)) {
            log("warning: fold " + std::to_string(fold + 1) + " has no test utterances of class " +
                names[c] + "; excluded from uar");
          }
        }
        results[fold] = std::move(fr);
        matrices[fold] = std::move(cm);
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        if (!first_error) first_error = "fold " + std::to_string(fold + 1) + ": " + e.what();
      }
    }
  };
  const std::size_t n_workers = std::min(config.worker_count(), plan.k);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) {
    throw std::runtime_error(feature.label() + " " + std::string(nn::to_string(classifier)) +
                             " " + *first_error);
  }

  CellResult cell;
  cell.task = config.task;
  cell.feature = feature;
  cell.classifier = classifier;
  cell.confusion = eval::ConfusionMatrix(names);
  for (std::size_t f = 0; f < plan.k; ++f) {
    cell.mean_accuracy += results[f]->accuracy;
    cell.mean_uar += results[f]->uar;
    cell.confusion.merge(*matrices[f]);
    cell.folds.push_back(std::move(*results[f]));
  }
  cell.mean_accuracy /= static_cast<double>(plan.k);
  cell.mean_uar /= static_cast<double>(plan.k);
  return cell;
}

std::vector<CellResult> run_grid(const ExperimentConfig& config, const LogFn& log) {
  auto scan = scan_corpus(config.corpus_root, config.task);
  if (log) {
    for (const auto& w : scan.warnings) log("warning: " + w);
  }

  const auto table_features = all_feature_choices();
  const auto table_classifiers = all_classifiers();
  auto features = config.feature_choices();
  auto classifiers = config.classifiers();
  auto rank = [](const auto& table, const auto& item) {
    return std::find(table.begin(), table.end(), item) - table.begin();
  };
  std::sort(features.begin(), features.end(), [&](const auto& a, const auto& b) {
    return rank(table_features, a) < rank(table_features, b);
  });
  features.erase(std::unique(features.begin(), features.end()), features.end());
  std::sort(classifiers.begin(), classifiers.end(), [&](auto a, auto b) {
    return rank(table_classifiers, a) < rank(table_classifiers, b);
  });
  classifiers.erase(std::unique(classifiers.begin(), classifiers.end()), classifiers.end());

  // Fail before any training if a cache is missing.
  std::vector<LoadedFeatures> loaded;
  for (const auto& f : features) loaded.push_back(load_features(config, scan.records, f));

  std::vector<CellResult> cells;
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (auto c : classifiers) cells.push_back(run_cell(config, loaded[i], features[i], c, log));
  }
  return cells;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void open_or_throw(std::ofstream& out, const std::filesystem::path& path) {
  out.open(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

void write_grid_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                        const std::vector<CellResult>& cells) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out;
    open_or_throw(out, dir / "run_config.txt");
    out << to_config_text(config);
  }
  std::ofstream csv;
  open_or_throw(csv, dir / "results.csv");
  csv << "feature_set,feature_type,classifier,task,fold,accuracy,uar\n";
  for (const auto& cell : cells) {
    const std::string prefix = std::string(to_string(cell.feature.set)) + "," +
                               std::string(to_string(cell.feature.kind)) + "," +
                               std::string(nn::to_string(cell.classifier)) + "," +
                               std::string(to_string(cell.task)) + ",";
    for (std::size_t f = 0; f < cell.folds.size(); ++f) {
      csv << prefix << f + 1 << ',' << fmt(cell.folds[f].accuracy) << ','
          << fmt(cell.folds[f].uar) << '\n';
    }
    csv << prefix << "mean," << fmt(cell.mean_accuracy) << ',' << fmt(cell.mean_uar) << '\n';

    eval::write_confusion_csv(dir / ("confusion_" + cell.name() + ".csv"), cell.confusion);
    eval::write_heatmap_ppm(dir / ("heatmap_" + cell.name() + ".ppm"), cell.confusion);

    std::ofstream hist;
    open_or_throw(hist, dir / ("history_" + cell.name() + ".csv"));
    hist << "fold,epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    for (std::size_t f = 0; f < cell.folds.size(); ++f) {
      for (const auto& e : cell.folds[f].training.history) {
        hist << f + 1 << ',' << e.epoch << ',' << fmt(e.train_loss) << ','
             << fmt(e.train_accuracy) << ',' << fmt(e.val_loss) << ',' << fmt(e.val_accuracy)
             << '\n';
      }
    }
  }
  if (!csv) throw std::runtime_error("write failed: " + (dir / "results.csv").string());
}

std::string render_report(const std::filesystem::path& dir) {
  const auto results = dir / "results.csv";
  std::ifstream in(results);
  if (!in) throw std::runtime_error("cannot read " + results.string());

  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("confusion_", 0) == 0 && entry.path().extension() == ".csv") {
      const std::string cell = entry.path().stem().string().substr(10);
      eval::write_heatmap_ppm(dir / ("heatmap_" + cell + ".ppm"),
                              eval::read_confusion_csv(entry.path()));
    }
  }

  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %-4s %-5s %-7s %-8s %-8s\n", "set", "type", "task",
                "model", "accuracy", "uar");
  os << line;
  std::string row;
  std::getline(in, row);
  std::size_t n_rows = 0;
  while (std::getline(in, row)) {
    std::vector<std::string> c;
    std::stringstream ss(row);
    std::string cell;
    while (std::getline(ss, cell, ',')) c.push_back(cell);
    if (c.size() != 7) throw std::runtime_error(results.string() + ": malformed row '" + row + "'");
    if (c[4] != "mean") continue;
    std::snprintf(line, sizeof line, "%-6s %-4s %-5s %-7s %-8s %-8s\n", c[0].c_str(),
                  c[1].c_str(), c[3].c_str(), c[2].c_str(), c[5].c_str(), c[6].c_str());
    os << line;
    ++n_rows;
  }
  if (n_rows == 0) throw std::runtime_error(results.string() + ": no mean rows");
  return os.str();
}

}  // namespace serb
