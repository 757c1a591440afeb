#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "serb/config.hpp"
#include "serb/corpus.hpp"
#include "serb/extract.hpp"
#include "serb/feature_cache.hpp"
#include "serb/grid.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using doctest::Approx;
using serb::FeatureKind;
using serb::FeatureSet;
using serb::Task;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

serb::ExperimentConfig small_config(const fs::path& root, const fs::path& work) {
  serb::ExperimentConfig c;
  c.corpus_root = root;
  c.task = Task::kSpeech;
  c.cache_dir = work / "cache";
  c.output_dir = work / "out";
  c.folds = 2;
  c.threads = 1;
  c.model.hidden_units = 6;
  c.model.n_layers = 1;
  c.train.epochs = 2;
  c.train.batch_size = 8;
  c.train.adam.learning_rate = 1e-3;
  return c;
}

struct RunResult {
  int status = -1;
  std::string output;
};

RunResult run_cli(const std::string& args, const fs::path& work) {
  const auto log = work / "cli.log";
  const std::string cmd = std::string("\"") + SERB_CLI_PATH + "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.output = slurp(log);
  return r;
}

}  // namespace

TEST_CASE("filename grammar") {
  const auto r = serb::parse_ravdess_name("/x/Actor_12/03-01-05-02-01-02-12.wav");
  CHECK(r.task == Task::kSpeech);
  CHECK(r.modality == 3);
  CHECK(r.emotion_code == 5);
  CHECK(r.label == 4);
  CHECK(serb::class_names(Task::kSpeech)[4] == "angry");
  CHECK(r.intensity == 2);
  CHECK(r.statement == 1);
  CHECK(r.repetition == 2);
  CHECK(r.actor == 12);
  CHECK(r.id() == "03-01-05-02-01-02-12");

  const auto s = serb::parse_ravdess_name("03-02-06-01-02-01-24.wav");
  CHECK(s.task == Task::kSong);
  CHECK(s.label == 5);

  for (const char* bad : {"03-01-05.wav", "03-01-05-02-01-02-1x.wav", "03-03-01-01-01-01-01.wav",
                          "03-02-07-01-01-01-01.wav", "03-01-09-01-01-01-01.wav",
                          "03-01-00-01-01-01-01.wav", "3-01-01-01-01-01-01.wav"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(serb::parse_ravdess_name(bad), serb::CorpusError);
  }
}

TEST_CASE("class inventories") {
  CHECK(serb::n_classes(Task::kSpeech) == 8);
  CHECK(serb::n_classes(Task::kSong) == 6);
  CHECK(serb::expected_count(Task::kSpeech) == 1440);
  CHECK(serb::expected_count(Task::kSong) == 1012);
  CHECK(serb::parse_task("song") == Task::kSong);
  CHECK_FALSE(serb::parse_task("opera").has_value());
}

TEST_CASE("corpus scan") {
  testing::TempDir dir;
  testing::write_synthetic_corpus(dir.path(), Task::kSpeech, 2);
  testing::write_synthetic_corpus(dir.path(), Task::kSong, 1);
  std::ofstream(dir.path() / "Actor_01" / "notes.wav") << "x";
  std::ofstream(dir.path() / "readme.txt") << "x";

  const auto speech = serb::scan_corpus(dir.path(), Task::kSpeech);
  CHECK(speech.records.size() == 16);
  for (std::size_t i = 1; i < speech.records.size(); ++i) {
    CHECK(speech.records[i - 1].path < speech.records[i].path);
  }
  bool named_junk = false, count_warning = false;
  for (const auto& w : speech.warnings) {
    named_junk |= w.find("notes.wav") != std::string::npos;
    count_warning |= w.find("expected 1440") != std::string::npos;
  }
  CHECK(named_junk);
  CHECK(count_warning);
  const auto song = serb::scan_corpus(dir.path(), Task::kSong);
  CHECK(song.records.size() == 6);

  // Same tree, same result.
  const auto again = serb::scan_corpus(dir.path(), Task::kSpeech);
  REQUIRE(again.records.size() == speech.records.size());
  for (std::size_t i = 0; i < again.records.size(); ++i) {
    CHECK(again.records[i].path == speech.records[i].path);
  }

  CHECK_THROWS_AS(serb::scan_corpus(dir.path() / "nope", Task::kSpeech), serb::CorpusError);
  testing::TempDir empty;
  CHECK_THROWS_AS(serb::scan_corpus(empty.path(), Task::kSpeech), serb::CorpusError);
}

TEST_CASE("cache round trip is bit exact") {
  testing::TempDir dir;
  serb::FeatureCache c;
  c.set = FeatureSet::kP34;
  c.kind = FeatureKind::kLld;
  c.target_frames = 7;
  serb::Rng rng(5);
  for (int i = 0; i < 5; ++i) {
    serb::CacheEntry e;
    e.id = "utt" + std::to_string(i);
    e.content_hash = rng.below(UINT64_MAX);
    e.rows = 3 + i;
    e.cols = 34;
    for (std::size_t k = 0; k < e.rows * e.cols; ++k) {
      e.data.push_back(static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform(-40, 30))));
    }
    c.entries.push_back(e);
  }
  c.entries[1].data[0] = 1e-45f;  // denormal
  c.entries[1].data[1] = -0.0f;
  const auto path = serb::cache_path(dir.path(), Task::kSong, c.set, c.kind);
  CHECK(path.filename() == "song_P34_LLD.serb");
  serb::write_cache(path, c);
  const auto back = serb::read_cache(path);
  CHECK(back.set == c.set);
  CHECK(back.kind == c.kind);
  CHECK(back.target_frames == 7);
  REQUIRE(back.entries.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back.entries[i].id == c.entries[i].id);
    CHECK(back.entries[i].content_hash == c.entries[i].content_hash);
    CHECK(back.entries[i].rows == c.entries[i].rows);
    REQUIRE(back.entries[i].data.size() == c.entries[i].data.size());
    CHECK(std::memcmp(back.entries[i].data.data(), c.entries[i].data.data(),
                      c.entries[i].data.size() * sizeof(float)) == 0);
  }
  CHECK(back.find("utt3") != nullptr);
  CHECK(back.find("nope") == nullptr);
  for (const auto& e : fs::directory_iterator(dir.path())) {
    CHECK(e.path().filename() == "song_P34_LLD.serb");
  }
  CHECK(slurp(path).substr(0, 4) == "SERB");
}

TEST_CASE("corrupt cache is refused") {
  testing::TempDir dir;
  serb::FeatureCache c;
  c.set = FeatureSet::kG23;
  c.kind = FeatureKind::kHsf;
  for (const char* id : {"first", "second", "third"}) {
    serb::CacheEntry e;
    e.id = id;
    e.rows = 1;
    e.cols = 46;
    e.data.assign(46, 0.5f);
    c.entries.push_back(e);
  }
  const auto path = dir.path() / "c.serb";
  serb::write_cache(path, c);
  const std::string good = slurp(path);

  SUBCASE("flipped payload byte names the entry") {
    std::string bad = good;
    const auto at = bad.find("second") + 6 + 3 * 8 + 40;
    bad[at] = static_cast<char>(bad[at] ^ 0x10);
    std::ofstream(path, std::ios::binary) << bad;
    try {
      serb::read_cache(path);
      FAIL("expected CacheError");
    } catch (const serb::CacheError& e) {
      CHECK(std::string(e.what()).find("'second'") != std::string::npos);
    }
  }
  SUBCASE("truncated file") {
    std::ofstream(path, std::ios::binary) << good.substr(0, good.size() - 20);
    CHECK_THROWS_AS(serb::read_cache(path), serb::CacheError);
  }
  SUBCASE("missing trailer") {
    std::ofstream(path, std::ios::binary) << good.substr(0, good.size() - 8);
    CHECK_THROWS_AS(serb::read_cache(path), serb::CacheError);
  }
  SUBCASE("wrong magic") {
    std::ofstream(path, std::ios::binary) << "NOPE" << good.substr(4);
    CHECK_THROWS_AS(serb::read_cache(path), serb::CacheError);
  }
}

TEST_CASE("config text") {
  const auto c = serb::parse_config(
      "# run\n"
      "task = song\n"
      "feature = G23-HSF, L193-LLD   # two cells\n"
      "classifier = mlp,gru\n"
      "folds = 5\n"
      "learning_rate = 0.001\n"
      "\n"
      "hidden_units=32\n",
      "cfg");
  CHECK(c.task == Task::kSong);
  CHECK(c.folds == 5);
  CHECK(c.train.adam.learning_rate == Approx(0.001));
  CHECK(c.model.hidden_units == 32);
  const auto feats = c.feature_choices();
  REQUIRE(feats.size() == 2);
  CHECK(feats[0].label() == "G23-HSF");
  CHECK(feats[1].label() == "L193-LLD");
  CHECK(c.classifiers() ==
        std::vector<serb::nn::Architecture>{serb::nn::Architecture::kMlp, serb::nn::Architecture::kGru});

  // Every key is printed and reads back to the same text.
  const auto text = serb::to_config_text(c);
  for (const auto& key : serb::config_keys()) CHECK(text.find(key + " = ") != std::string::npos);
  CHECK(serb::to_config_text(serb::parse_config(text)) == text);

  serb::ExperimentConfig d;
  CHECK(d.feature_choices().size() == 6);
  CHECK(serb::all_classifiers().size() == 4);
}

TEST_CASE("config errors") {
  try {
    serb::parse_config("folds = 3\n\nlearning_rat = 0.1\n", "my.cfg");
    FAIL("expected ConfigError");
  } catch (const serb::ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("my.cfg:3") != std::string::npos);
    CHECK(msg.find("learning_rat") != std::string::npos);
  }
  CHECK_THROWS_AS(serb::parse_config("folds = many\n"), serb::ConfigError);
  CHECK_THROWS_AS(serb::parse_config("just words\n"), serb::ConfigError);
  CHECK_THROWS_AS(serb::parse_config("task = opera\n"), serb::ConfigError);
  serb::ExperimentConfig c;
  CHECK_THROWS_AS(serb::set_config_value(c, "no_such_key", "1"), serb::ConfigError);
  serb::set_config_value(c, "dropout", "0.25");
  CHECK(c.model.dropout_p == 0.25);
  c.folds = 1;
  CHECK_THROWS_AS(serb::validate_config(c), serb::ConfigError);
  c.folds = 10;
  c.feature = "G23-XYZ";
  CHECK_THROWS_AS(serb::validate_config(c), serb::ConfigError);
  c.feature = "all";
  c.model.dropout_p = 1.5;
  CHECK_THROWS_AS(serb::validate_config(c), serb::ConfigError);
}

TEST_CASE("extraction fills the cache once") {
  testing::TempDir dir;
  const auto root = dir.path() / "corpus";
  testing::write_synthetic_corpus(root, Task::kSpeech, 2);
  auto cfg = small_config(root, dir.path());
  cfg.threads = 2;

  const auto first = serb::extract_corpus(cfg);
  CHECK(first.n_records == 16);
  CHECK(first.n_extracted == 16);
  CHECK(first.cache_files.size() == 6);
  std::vector<std::string> before;
  for (const auto& f : first.cache_files) before.push_back(slurp(f));

  const auto second = serb::extract_corpus(cfg);
  CHECK(second.all_cached());
  CHECK(second.n_cached == 16);
  for (std::size_t i = 0; i < first.cache_files.size(); ++i) {
    CHECK(slurp(first.cache_files[i]) == before[i]);
  }

  // Cached values equal direct extraction at f32.
  const auto scan = serb::scan_corpus(root, Task::kSpeech);
  const auto clip = serb::load_wav(scan.records[3].path);
  const auto lld = serb::extract_lld(clip, FeatureSet::kG23, cfg.spectral, cfg.voice);
  const auto cache = serb::read_cache(serb::cache_path(cfg.cache_dir, Task::kSpeech,
                                                       FeatureSet::kG23, FeatureKind::kLld));
  const auto* e = cache.find(scan.records[3].id());
  REQUIRE(e != nullptr);
  REQUIRE(e->rows == lld.n_frames);
  REQUIRE(e->cols == 23);
  for (std::size_t k = 0; k < lld.values.size(); ++k) CHECK(e->data[k] == static_cast<float>(lld.values[k]));
  const auto hsf = serb::read_cache(serb::cache_path(cfg.cache_dir, Task::kSpeech,
                                                     FeatureSet::kL193, FeatureKind::kHsf));
  CHECK(hsf.entries.front().rows == 1);
  CHECK(hsf.entries.front().cols == 386);
  CHECK(fs::exists(serb::manifest_path(cfg.cache_dir, Task::kSpeech, FeatureSet::kL193,
                                       FeatureKind::kHsf)));

  // Changing one file re-extracts only that file.
  serb::write_wav16(scan.records[0].path, {testing::white_noise(4800, 3, 0.1)}, 16000);
  const auto third = serb::extract_corpus(cfg);
  CHECK(third.n_extracted == 1);
  CHECK(third.n_cached == 15);
}

TEST_CASE("grid rows and outputs") {
  testing::TempDir dir;
  const auto root = dir.path() / "corpus";
  testing::write_synthetic_corpus(root, Task::kSpeech, 2);
  auto cfg = small_config(root, dir.path());
  serb::extract_corpus(cfg);

  SUBCASE("one classifier over every feature set") {
    cfg.classifier = "mlp";
    const auto cells = serb::run_grid(cfg);
    REQUIRE(cells.size() == 6);
    const char* expected[] = {"G23-LLD", "G23-HSF", "P34-LLD", "P34-HSF", "L193-LLD", "L193-HSF"};
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(cells[i].feature.label() == expected[i]);
      CHECK(cells[i].folds.size() == 2);
      CHECK(cells[i].confusion.total() == 16);
      CHECK(cells[i].mean_accuracy >= 0.0);
      CHECK(cells[i].mean_accuracy <= 1.0);
    }
    serb::write_grid_outputs(cfg.output_dir, cfg, cells);
    const auto rows = lines_of(cfg.output_dir / "results.csv");
    REQUIRE(rows.size() == 1 + 6 * 3);
    CHECK(rows[0] == "feature_set,feature_type,classifier,task,fold,accuracy,uar");
    CHECK(rows[3].rfind("G23,LLD,MLP,speech,mean,", 0) == 0);
    CHECK(fs::exists(cfg.output_dir / "confusion_speech_L193-HSF_MLP.csv"));
    CHECK(fs::exists(cfg.output_dir / "heatmap_speech_L193-HSF_MLP.ppm"));
    CHECK(fs::exists(cfg.output_dir / "history_speech_L193-HSF_MLP.csv"));
    CHECK(fs::exists(cfg.output_dir / "run_config.txt"));
    const auto table = serb::render_report(cfg.output_dir);
    CHECK(table.find("L193   HSF  speech MLP") != std::string::npos);
  }
  SUBCASE("one feature set over every classifier") {
    cfg.feature = "G23-HSF";
    cfg.classifier = "all";
    const auto cells = serb::run_grid(cfg);
    REQUIRE(cells.size() == 4);
    CHECK(cells[0].classifier == serb::nn::Architecture::kMlp);
    CHECK(cells[1].classifier == serb::nn::Architecture::kLstm);
    CHECK(cells[2].classifier == serb::nn::Architecture::kGru);
    CHECK(cells[3].classifier == serb::nn::Architecture::kConv1d);
  }
  SUBCASE("actor folds") {
    cfg.feature = "P34-HSF";
    cfg.classifier = "gru";
    cfg.fold_mode = serb::FoldMode::kActor;
    const auto cells = serb::run_grid(cfg);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].folds.size() == 2);
    CHECK(cells[0].confusion.total() == 16);
  }
}

TEST_CASE("missing cache names the feature set") {
  testing::TempDir dir;
  const auto root = dir.path() / "corpus";
  testing::write_synthetic_corpus(root, Task::kSpeech, 1);
  auto cfg = small_config(root, dir.path());
  cfg.feature = "G23-HSF";
  serb::extract_corpus(cfg);
  cfg.feature = "P34-LLD";
  try {
    serb::run_grid(cfg);
    FAIL("expected CacheError");
  } catch (const serb::CacheError& e) {
    CHECK(std::string(e.what()).find("P34-LLD") != std::string::npos);
  }
}

TEST_CASE("one utterance per class still runs two folds") {
  testing::TempDir dir;
  const auto root = dir.path() / "corpus";
  testing::write_synthetic_corpus(root, Task::kSpeech, 1);
  auto cfg = small_config(root, dir.path());
  cfg.feature = "G23-HSF";
  cfg.classifier = "lstm";
  serb::extract_corpus(cfg);
  std::vector<std::string> log;
  const auto cells = serb::run_grid(cfg, [&](const std::string& m) { log.push_back(m); });
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].folds.size() == 2);
  CHECK(cells[0].confusion.total() == 8);
  bool warned = false;
  for (const auto& m : log) warned |= m.find("warning: class") != std::string::npos;
  CHECK(warned);
}

TEST_CASE("hsf over padded frames") {
  testing::TempDir dir;
  const auto root = dir.path() / "corpus";
  testing::write_synthetic_corpus(root, Task::kSpeech, 1, 16000, 0.2);
  // One longer file so the others get padded.
  serb::write_wav16(root / "Actor_01" / testing::ravdess_name(Task::kSpeech, 1, 1, 2, 2, 1),
                    {testing::sine(200.0, 16000, 8000, 0.3)}, 16000);
  auto cfg = small_config(root, dir.path());
  cfg.feature = "G23-LLD,G23-HSF";
  serb::extract_corpus(cfg);
  const auto scan = serb::scan_corpus(root, Task::kSpeech);
  const serb::FeatureChoice hsf{FeatureSet::kG23, FeatureKind::kHsf};
  const auto plain = serb::load_features(cfg, scan.records, hsf);
  cfg.hsf_on_padded = true;
  const auto padded = serb::load_features(cfg, scan.records, hsf);
  CHECK(plain.data.features == 46);
  CHECK(padded.data.features == 46);
  CHECK(plain.data.x != padded.data.x);
  const auto lld = serb::load_features(cfg, scan.records, {FeatureSet::kG23, FeatureKind::kLld});
  CHECK(lld.data.frames > 1);
  CHECK(lld.data.features == 23);
  CHECK(lld.actors.size() == scan.records.size());
}

TEST_CASE("standardization is fit on the first set only") {
  serb::nn::Dataset a, b;
  a.frames = b.frames = 1;
  a.features = b.features = 2;
  for (float v : {1.f, 5.f, 3.f, 5.f, 5.f, 5.f}) a.x.push_back(v);
  a.y = {0, 1, 0};
  b.x = {3.f, 9.f};
  b.y = {0};
  serb::standardize(a, b);
  CHECK(a.x[0] == Approx(-2.0 / std::sqrt(8.0 / 3.0)).epsilon(1e-6));
  CHECK(a.x[1] == 0.0f);  // constant column is centered only
  CHECK(b.x[0] == Approx(0.0).epsilon(1e-6));
  CHECK(b.x[1] == Approx(4.0).epsilon(1e-6));
}

TEST_CASE("command line") {
  testing::TempDir dir;
  const auto root = dir.path() / "corpus";
  testing::write_synthetic_corpus(root, Task::kSpeech, 1);
  const std::string common = "--corpus \"" + root.string() + "\" --cache-dir \"" +
                             (dir.path() / "cache").string() + "\" --threads 1";

  CHECK(run_cli("--help", dir.path()).status == 0);
  auto r = run_cli("extract --bogus-flag", dir.path());
  CHECK(r.status != 0);
  CHECK(r.output.find("error") != std::string::npos);
  r = run_cli("extract --corpus \"" + (dir.path() / "missing").string() + "\"", dir.path());
  CHECK(r.status != 0);
  CHECK(r.output.find("missing") != std::string::npos);
  r = run_cli("extract " + common + " --set no_such_key=1", dir.path());
  CHECK(r.status != 0);
  CHECK(r.output.find("no_such_key") != std::string::npos);

  r = run_cli("extract " + common + " --feature G23-HSF", dir.path());
  CHECK(r.status == 0);
  CHECK(r.output.find("extracted 8 of 8") != std::string::npos);
  r = run_cli("extract " + common + " --feature G23-HSF", dir.path());
  CHECK(r.status == 0);
  CHECK(r.output.find("all cached") != std::string::npos);

  const auto out = dir.path() / "out";
  r = run_cli("train " + common + " --feature G23-HSF --classifier mlp --folds 2 --epochs 1 "
              "--set hidden_units=4 --output \"" + out.string() + "\"",
              dir.path());
  CHECK(r.status == 0);
  CHECK(lines_of(out / "results.csv").size() == 4);
  r = run_cli("train " + common + " --feature all --classifier mlp --folds 2", dir.path());
  CHECK(r.status != 0);

  r = run_cli("report \"" + out.string() + "\"", dir.path());
  CHECK(r.status == 0);
  CHECK(r.output.find("G23    HSF  speech MLP") != std::string::npos);

  std::ofstream(dir.path() / "bad.cfg") << "epochz = 3\n";
  r = run_cli("grid --config \"" + (dir.path() / "bad.cfg").string() + "\"", dir.path());
  CHECK(r.status != 0);
  CHECK(r.output.find("epochz") != std::string::npos);
}
