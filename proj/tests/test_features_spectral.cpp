#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "serb/dsp.hpp"
#include "serb/features_spectral.hpp"
#include "support.hpp"

namespace dsp = serb::dsp;
namespace ft = serb::features;
using doctest::Approx;

namespace {

constexpr double kFs = 48000.0;

dsp::Spectrum spectrum_of(const std::vector<double>& frame) {
  return dsp::SpectrumAnalyzer(frame.size(), dsp::next_power_of_two(frame.size()), kFs).analyze(frame);
}

dsp::Spectrum make_spectrum(std::size_t n, double bin_hz, double fill = 0.0) {
  dsp::Spectrum s;
  s.magnitudes.assign(n, fill);
  s.bin_hz = bin_hz;
  return s;
}

// Sign changes counted against the analytic waveform: a crossing happens
// wherever floor(2 f t + phase/pi) changes between consecutive samples.
std::size_t analytic_crossings(double f, double phase, std::size_t n) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double a = 2.0 * f * static_cast<double>(i) / kFs + phase / std::numbers::pi;
    const double b = 2.0 * f * static_cast<double>(i + 1) / kFs + phase / std::numbers::pi;
    count += static_cast<std::size_t>(std::floor(b) - std::floor(a));
  }
  return count;
}

}  // namespace

TEST_CASE("zero crossing rate") {
  CHECK(ft::zcr(std::vector<double>(100, 0.3)) == 0.0);
  std::vector<double> alt(100);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? -1.0 : 1.0;
  CHECK(ft::zcr(alt) == 1.0);

  for (double phase : {0.3, 2.0, 4.0}) {
    const auto x = testing::sine(100.0, kFs, 1200, 1.0, phase);
    const double expected = static_cast<double>(analytic_crossings(100.0, phase, 1200)) / 1199.0;
    CHECK(ft::zcr(x) == Approx(expected).epsilon(1e-12));
  }
  // 2.5 periods: 5 crossings when one lands near the frame start.
  const auto x = testing::sine(100.0, kFs, 1200, 1.0, -0.01);
  CHECK(ft::zcr(x) == Approx(5.0 / 1199.0));
}

TEST_CASE("energy entropy") {
  std::vector<double> one_block(1000, 0.0);
  for (std::size_t i = 0; i < 100; ++i) one_block[i] = 0.7;
  CHECK(ft::energy_entropy(one_block, 10) == Approx(0.0));
  CHECK(ft::energy_entropy(std::vector<double>(1000, 0.5), 10) == Approx(std::log2(10.0)));
  CHECK(ft::energy_entropy(std::vector<double>(1000, 0.0), 10) == 0.0);

  const auto x = testing::white_noise(1200, 12, 1.0);
  std::vector<double> e(10, 0.0);
  for (std::size_t b = 0; b < 10; ++b) {
    for (std::size_t i = b * 120; i < (b + 1) * 120; ++i) e[b] += x[i] * x[i];
  }
  const double total = std::accumulate(e.begin(), e.end(), 0.0);
  double h = 0.0;
  for (double v : e) h -= (v / total) * std::log2(v / total);
  CHECK(ft::energy_entropy(x, 10) == Approx(h).epsilon(1e-12));
}

TEST_CASE("spectral statistics") {
  auto point = make_spectrum(1025, 23.4375);
  point.magnitudes[40] = 2.0;
  const auto s = ft::stft_stats(point, nullptr, 0.85);
  CHECK(s.centroid_hz == Approx(40 * 23.4375));
  CHECK(s.spread_hz == Approx(0.0));
  CHECK(s.rolloff_hz == Approx(40 * 23.4375));
  CHECK(s.entropy == Approx(0.0));
  CHECK(s.flux == 0.0);

  auto pair = make_spectrum(1025, 10.0);
  pair.magnitudes[100] = 1.0;
  pair.magnitudes[300] = 1.0;
  const auto p = ft::stft_stats(pair, &pair, 0.85);
  CHECK(p.centroid_hz == Approx(2000.0));
  CHECK(p.spread_hz == Approx(1000.0));
  CHECK(p.entropy == Approx(1.0));
  CHECK(p.flux == 0.0);

  const auto zero = ft::stft_stats(make_spectrum(1025, 10.0), nullptr, 0.85);
  CHECK(zero.centroid_hz == 0.0);
  CHECK(zero.spread_hz == 0.0);
  CHECK(zero.rolloff_hz == 0.0);
  CHECK(zero.entropy == 0.0);

  const auto rnd = spectrum_of(testing::white_noise(1200, 4));
  double last = -1.0;
  for (double frac = 0.05; frac <= 1.0; frac += 0.05) {
    const double r = ft::stft_stats(rnd, nullptr, frac).rolloff_hz;
    CHECK(r >= last);
    last = r;
  }
}

TEST_CASE("mfcc gain invariance beyond c0") {
  // Frames span the full sample range. The 1e-10 log floor perturbs a band
  // by about 1e-10 / (gain^2 * band power), so quieter frames drift further
  // at gain 1e-3.
  const auto bank = dsp::mel_filterbank(2048, kFs, 40, 0.0, kFs / 2);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto x = testing::white_noise(1200, seed, 1.0);
    const auto base = ft::mfcc(spectrum_of(x), bank, 13);
    for (double gain : {1e-3, 0.1, 7.0, 1e3}) {
      auto y = x;
      for (auto& v : y) v *= gain;
      const auto scaled = ft::mfcc(spectrum_of(y), bank, 13);
      for (std::size_t k = 1; k < 13; ++k) {
        CHECK_MESSAGE(std::abs(scaled[k] - base[k]) <= 1e-6, "gain " << gain << " k " << k);
      }
      CHECK(scaled[0] != Approx(base[0]));
    }
  }
  const auto x = testing::white_noise(1200, 40, 0.5);
  const auto base = ft::mfcc(spectrum_of(x), bank, 13);
  for (double gain : {0.5, 2.0, 3.0}) {
    auto y = x;
    for (auto& v : y) v *= gain;
    const auto scaled = ft::mfcc(spectrum_of(y), bank, 13);
    for (std::size_t k = 1; k < 13; ++k) CHECK(std::abs(scaled[k] - base[k]) <= 1e-8);
  }
}

TEST_CASE("mfcc of silence is a pure c0") {
  const auto bank = dsp::mel_filterbank(2048, kFs, 40, 0.0, kFs / 2);
  const auto c = ft::mfcc(spectrum_of(std::vector<double>(1200, 0.0)), bank, 13);
  CHECK(c[0] == Approx(std::log(1e-10) * std::sqrt(40.0)));
  for (std::size_t k = 1; k < 13; ++k) CHECK(std::abs(c[k]) < 1e-9);
}

TEST_CASE("mfcc of a 440 Hz tone matches a literal reimplementation") {
  const auto x = testing::sine(440.0, kFs, 1200, 0.5);
  const std::size_t nfft = 2048, bins = 1025, n_mels = 40;

  // Window, naive DFT, power, triangles, log, DCT: each written out directly.
  std::vector<double> xw(1200);
  for (std::size_t i = 0; i < 1200; ++i) {
    xw[i] = x[i] * (0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / 1199.0));
  }
  const auto X = testing::naive_dft(xw, nfft);
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::vector<double> pts(n_mels + 2);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = hz(mel(kFs / 2) * i / (n_mels + 1.0));
  std::vector<double> logmel(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    double e = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = k * kFs / nfft;
      double w = 0.0;
      if (f > pts[m] && f <= pts[m + 1]) w = (f - pts[m]) / (pts[m + 1] - pts[m]);
      else if (f > pts[m + 1] && f < pts[m + 2]) w = (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
      e += w * std::norm(X[k]);
    }
    logmel[m] = std::log(e + 1e-10);
  }
  std::vector<double> expected(13);
  for (std::size_t k = 0; k < 13; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n_mels; ++i) {
      acc += logmel[i] * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * n_mels));
    }
    expected[k] = acc * (k == 0 ? std::sqrt(1.0 / n_mels) : std::sqrt(2.0 / n_mels));
  }

  const auto bank = dsp::mel_filterbank(nfft, kFs, n_mels, 0.0, kFs / 2);
  const auto got = ft::mfcc(spectrum_of(x), bank, 13);
  for (std::size_t k = 0; k < 13; ++k) CHECK(std::abs(got[k] - expected[k]) <= 1e-8);
}

TEST_CASE("chroma of tones") {
  const auto a = ft::chroma12(spectrum_of(testing::sine(440.0, kFs, 1200)));
  CHECK(a[9] == 1.0);
  const double mass = std::accumulate(a.begin(), a.end(), 0.0);
  CHECK(a[9] / mass >= 0.9);

  std::vector<double> octave = testing::sine(220.0, kFs, 1200, 0.5);
  const auto hi = testing::sine(440.0, kFs, 1200, 0.5);
  for (std::size_t i = 0; i < octave.size(); ++i) octave[i] += hi[i];
  const auto o = ft::chroma12(spectrum_of(octave));
  CHECK(std::max_element(o.begin(), o.end()) - o.begin() == 9);
  CHECK(o[9] / std::accumulate(o.begin(), o.end(), 0.0) >= 0.9);

  // Pitch-class mapping across the range, including C (0) and G (7).
  const std::array<std::pair<double, int>, 4> notes = {{{261.6256, 0}, {391.9954, 7}, {987.7666, 11}, {2093.005, 0}}};
  for (const auto& [f, cls] : notes) {
    const auto c = ft::chroma12(spectrum_of(testing::sine(f, kFs, 1200)));
    CHECK_MESSAGE(c[static_cast<std::size_t>(cls)] == 1.0, "f = " << f);
  }

  const auto silent = ft::chroma12(spectrum_of(std::vector<double>(1200, 0.0)));
  for (double v : silent) CHECK(v == 0.0);
}

TEST_CASE("chroma deviation") {
  CHECK(ft::chroma_deviation(std::vector<double>(12, 0.4)) == Approx(0.0));
  std::vector<double> one_hot(12, 0.0);
  one_hot[3] = 1.0;
  CHECK(ft::chroma_deviation(one_hot) == Approx(std::sqrt(11.0) / 12.0));
  const auto r = testing::white_noise(12, 99, 1.0);
  double mean = 0.0;
  for (double v : r) mean += v / 12.0;
  double var = 0.0;
  for (double v : r) var += (v - mean) * (v - mean) / 12.0;
  CHECK(ft::chroma_deviation(r) == Approx(std::sqrt(var)).epsilon(1e-12));
}

TEST_CASE("spectral contrast") {
  const auto flat = ft::spectral_contrast(make_spectrum(1025, 23.4375, 0.3));
  REQUIRE(flat.size() == 7);
  for (double v : flat) CHECK(v == Approx(0.0));

  // Band 3 covers [800, 1600) Hz.
  auto spiky = make_spectrum(1025, 23.4375, 0.01);
  spiky.magnitudes[50] = 10.0;  // 1171.9 Hz
  const auto c = ft::spectral_contrast(spiky);
  for (std::size_t b = 0; b < 7; ++b) {
    if (b == 3) CHECK(c[b] > 1.0);
    else CHECK(c[b] == Approx(0.0));
  }

  auto scaled = spiky;
  for (auto& m : scaled.magnitudes) m *= 250.0;
  const auto cs = ft::spectral_contrast(scaled);
  for (std::size_t b = 0; b < 7; ++b) CHECK(cs[b] == Approx(c[b]).epsilon(1e-12));

  // A band with no bins (fs too low to reach it) reports 0.
  const auto narrow = ft::spectral_contrast(make_spectrum(65, 62.5, 0.5));
  CHECK(narrow.back() == 0.0);
}

TEST_CASE("tonnetz") {
  for (double v : ft::tonnetz6(std::vector<double>(12, 0.0))) CHECK(v == 0.0);
  std::vector<double> c0(12, 0.0);
  c0[0] = 1.0;
  const auto t = ft::tonnetz6(c0);
  const std::array<double, 6> expect = {0, 1, 0, 1, 0, 0.5};
  for (std::size_t i = 0; i < 6; ++i) CHECK(t[i] == Approx(expect[i]));

  auto r = testing::white_noise(12, 5, 1.0);
  for (auto& v : r) v = std::abs(v);
  const double l1 = std::accumulate(r.begin(), r.end(), 0.0);
  const double pi = std::numbers::pi;
  const double rad[3] = {1.0, 1.0, 0.5};
  const double phi[3] = {7 * pi / 6, 3 * pi / 2, 2 * pi / 3};
  const auto got = ft::tonnetz6(r);
  for (std::size_t d = 0; d < 3; ++d) {
    double s = 0.0, co = 0.0;
    for (std::size_t p = 0; p < 12; ++p) {
      s += rad[d] * std::sin(p * phi[d]) * r[p] / l1;
      co += rad[d] * std::cos(p * phi[d]) * r[p] / l1;
    }
    CHECK(got[2 * d] == Approx(s).epsilon(1e-12));
    CHECK(got[2 * d + 1] == Approx(co).epsilon(1e-12));
  }
}

TEST_CASE("assembled frames equal their kernels") {
  const ft::SpectralExtractor ex(48000);
  const auto x = testing::white_noise(1200, 71);
  const auto prev_frame = testing::white_noise(1200, 72);
  const auto prev = spectrum_of(prev_frame);
  const auto row = ex.paa_frame(x, &prev);
  REQUIRE(row.size() == 34);
  CHECK(ft::paa_column_names().size() == 34);
  const auto spec = spectrum_of(x);
  const auto st = ft::stft_stats(spec, &prev, 0.85);
  CHECK(row[0] == ft::zcr(x));
  CHECK(row[1] == ft::frame_energy(x));
  CHECK(row[2] == ft::energy_entropy(x, 10));
  CHECK(row[3] == st.centroid_hz);
  CHECK(row[6] == st.flux);
  const auto m = ft::mfcc(spec, ex.mel40(), 13);
  for (std::size_t k = 0; k < 13; ++k) CHECK(row[8 + k] == m[k]);
  const auto ch = ft::chroma12(spec);
  for (std::size_t k = 0; k < 12; ++k) CHECK(row[21 + k] == ch[k]);
  CHECK(row[33] == ft::chroma_deviation(ch));

  const auto l = ex.l193_frame(x);
  REQUIRE(l.size() == 193);
  CHECK(ft::l193_column_names().size() == 193);
  std::vector<double> power(spec.size());
  for (std::size_t k = 0; k < power.size(); ++k) power[k] = spec.magnitudes[k] * spec.magnitudes[k];
  const auto mel = ex.mel128().apply(power);
  const auto c40 = ft::mfcc_from_mel(mel, 40);
  for (std::size_t k = 0; k < 40; ++k) CHECK(l[k] == c40[k]);
  for (std::size_t k = 0; k < 12; ++k) CHECK(l[40 + k] == ch[k]);
  for (std::size_t k = 0; k < 128; ++k) CHECK(l[52 + k] == mel[k]);
  const auto con = ft::spectral_contrast(spec);
  for (std::size_t k = 0; k < 7; ++k) CHECK(l[180 + k] == con[k]);
  const auto tn = ft::tonnetz6(ch);
  for (std::size_t k = 0; k < 6; ++k) CHECK(l[187 + k] == tn[k]);
}

TEST_CASE("frames stay finite on hostile input") {
  const ft::SpectralExtractor ex(48000);
  std::vector<std::vector<double>> frames;
  frames.emplace_back(1200, 0.0);
  frames.emplace_back(1200, 1.0);  // clipped DC
  std::vector<double> impulse(1200, 0.0);
  impulse[600] = 1.0;
  frames.push_back(impulse);
  auto square = testing::sine(300.0, kFs, 1200);
  for (auto& v : square) v = v >= 0 ? 1.0 : -1.0;
  frames.push_back(square);
  frames.emplace_back(1200, 1e-300);
  for (const auto& f : frames) {
    for (double v : ex.paa_frame(f, nullptr)) CHECK(std::isfinite(v));
    for (double v : ex.l193_frame(f)) CHECK(std::isfinite(v));
  }
  const auto silent = ex.paa_frame(frames[0], nullptr);
  CHECK(silent[1] == 0.0);
}

TEST_CASE("utterance extraction shapes") {
  serb::AudioClip clip{testing::white_noise(251760, 3, 0.3), 48000, ""};
  const ft::SpectralExtractor ex(48000);
  const auto paa = ex.extract_paa(clip);
  CHECK(paa.n_frames == 523);
  CHECK(paa.n_columns == 34);
  CHECK(paa.all_finite());
  CHECK(paa.at(0, 6) == 0.0);  // no flux on the first frame
  const auto l = ex.extract_l193(clip);
  CHECK(l.n_frames == 523);
  CHECK(l.n_columns == 193);
  CHECK(l.column_names.size() == 193);
}
