#pragma once

#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "serb/audio_io.hpp"
#include "serb/corpus.hpp"
#include "serb/rng.hpp"

namespace testing {

inline std::vector<double> sine(double freq, double fs, std::size_t n, double amp = 1.0,
                                double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / fs + phase);
  }
  return x;
}

inline std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double amp = 0.5) {
  serb::Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = amp * rng.uniform(-1.0, 1.0);
  return x;
}

inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x, std::size_t n) {
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "serb-test-XXXXXX").string();
    if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string ravdess_name(serb::Task task, int emotion, int intensity, int statement,
                                int repetition, int actor) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "03-%02d-%02d-%02d-%02d-%02d-%02d.wav",
                task == serb::Task::kSpeech ? 1 : 2, emotion, intensity, statement, repetition,
                actor);
  return buf;
}

/// Writes a small corpus of RAVDESS-named clips. Each class gets its own
/// pitch and amplitude envelope so the classes are separable.
inline void write_synthetic_corpus(const std::filesystem::path& root, serb::Task task,
                                   int per_class, int fs = 16000, double seconds = 0.3) {
  const int classes = static_cast<int>(serb::n_classes(task));
  serb::Rng rng(77);
  const auto n = static_cast<std::size_t>(fs * seconds);
  for (int c = 0; c < classes; ++c) {
    for (int k = 0; k < per_class; ++k) {
      const int actor = 1 + (k % 4);
      const auto dir = root / ("Actor_" + std::to_string(100 + actor).substr(1));
      std::filesystem::create_directories(dir);
      const double f0 = 110.0 + 45.0 * c + 3.0 * rng.uniform();
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        double v = 0.0;
        for (int h = 1; h <= 4; ++h) v += std::sin(2.0 * std::numbers::pi * f0 * h * t) / h;
        const double env = 0.2 + 0.15 * std::sin(2.0 * std::numbers::pi * (1.0 + c) * t);
        x[i] = 0.5 * env * v + 0.01 * rng.uniform(-1.0, 1.0);
      }
      const int intensity = 1 + (k / 4) % 2;
      const int statement = 1 + (k / 8) % 2;
      const int repetition = 1 + k / 16;
      serb::write_wav16(dir / ravdess_name(task, c + 1, intensity, statement, repetition, actor),
                        {x}, fs);
    }
  }
}

}  // namespace testing
