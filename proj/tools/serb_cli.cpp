#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "serb/config.hpp"
#include "serb/extract.hpp"
#include "serb/grid.hpp"

namespace {

struct Overrides {
  std::string config_file;
  std::vector<std::string> assignments;
  std::string corpus, task, cache_dir, output, feature, classifier, fold_mode;
  std::string folds, seed, fold_seed, epochs, threads;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_file, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--corpus", o.corpus, "RAVDESS root directory");
  cmd->add_option("--task", o.task, "speech or song");
  cmd->add_option("--cache-dir", o.cache_dir, "feature cache directory");
  cmd->add_option("--output", o.output, "output directory");
  cmd->add_option("--feature", o.feature, "all, or a list like G23-HSF,L193-LLD");
  cmd->add_option("--classifier", o.classifier, "all, or a list of mlp,lstm,gru,conv1d");
  cmd->add_option("--folds", o.folds, "number of folds");
  cmd->add_option("--fold-mode", o.fold_mode, "stratified or actor");
  cmd->add_option("--seed", o.seed, "training seed");
  cmd->add_option("--fold-seed", o.fold_seed, "fold assignment seed");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  cmd->add_option("--set", o.assignments, "override any config key: --set key=value");
}

serb::ExperimentConfig resolve(const Overrides& o) {
  serb::ExperimentConfig config =
      o.config_file.empty() ? serb::ExperimentConfig{} : serb::load_config(o.config_file);
  auto apply = [&](const char* key, const std::string& value) {
    if (!value.empty()) serb::set_config_value(config, key, value);
  };
  apply("corpus_root", o.corpus);
  apply("task", o.task);
  apply("cache_dir", o.cache_dir);
  apply("output_dir", o.output);
  apply("feature", o.feature);
  apply("classifier", o.classifier);
  apply("folds", o.folds);
  apply("fold_mode", o.fold_mode);
  apply("seed", o.seed);
  apply("fold_seed", o.fold_seed);
  apply("epochs", o.epochs);
  apply("threads", o.threads);
  for (const auto& a : o.assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw serb::ConfigError("--set expects key=value, got '" + a + "'");
    serb::set_config_value(config, a.substr(0, eq), a.substr(eq + 1));
  }
  serb::validate_config(config);
  if (config.corpus_root.empty()) throw serb::ConfigError("corpus_root is not set (--corpus)");
  return config;
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

int run_extract(const Overrides& o) {
  const auto config = resolve(o);
  const auto report = serb::extract_corpus(config);
  for (const auto& w : report.warnings) log_line("warning: " + w);
  if (report.all_cached()) {
    std::cout << "all cached: " << report.n_records << " utterances\n";
  } else {
    std::cout << "extracted " << report.n_extracted << " of " << report.n_records
              << " utterances (" << report.n_cached << " cached)\n";
  }
  for (const auto& p : report.cache_files) std::cout << p.string() << '\n';
  return 0;
}

int run_train(const Overrides& o) {
  const auto config = resolve(o);
  const auto features = config.feature_choices();
  const auto classifiers = config.classifiers();
  if (features.size() != 1 || classifiers.size() != 1) {
    throw serb::ConfigError("train runs one cell; pass a single --feature and --classifier");
  }
  auto scan = serb::scan_corpus(config.corpus_root, config.task);
  for (const auto& w : scan.warnings) log_line("warning: " + w);
  const auto loaded = serb::load_features(config, scan.records, features[0]);
  auto cell = serb::run_cell(config, loaded, features[0], classifiers[0], log_line);
  serb::write_grid_outputs(config.output_dir, config, {cell});
  std::printf("%s accuracy %.4f uar %.4f\n", cell.name().c_str(), cell.mean_accuracy,
              cell.mean_uar);
  return 0;
}

int run_grid(const Overrides& o) {
  const auto config = resolve(o);
  const auto cells = serb::run_grid(config, log_line);
  serb::write_grid_outputs(config.output_dir, config, cells);
  std::cout << serb::render_report(config.output_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Song and speech emotion recognition: feature extraction and classifier grid"};
  app.require_subcommand(1);
  Overrides o;
  std::string report_dir;

  auto* extract = app.add_subcommand("extract", "scan the corpus and fill the feature cache");
  add_common(extract, o);
  auto* train = app.add_subcommand("train", "cross-validate one feature/classifier cell");
  add_common(train, o);
  auto* grid = app.add_subcommand("grid", "cross-validate every configured cell");
  add_common(grid, o);
  auto* report = app.add_subcommand("report", "summarize results.csv and redraw heatmaps");
  report->add_option("dir", report_dir, "grid output directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*extract) return run_extract(o);
    if (*train) return run_train(o);
    if (*grid) return run_grid(o);
    if (*report) {
      std::cout << serb::render_report(report_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
