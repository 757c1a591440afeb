#include "serb/features_spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace serb::features {
namespace {

constexpr double kLogFloor = 1e-10;
constexpr double kContrastFloor = 1e-10;
constexpr double kMinChromaHz = 27.5;

double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

/// Index of the local maximum reached by climbing log-magnitude from bin k.
std::size_t climb_to_peak(std::span<const double> logmag, std::size_t k) {
  const std::size_t n = logmag.size();
  while (true) {
    const double here = logmag[k];
    const double left = k > 0 ? logmag[k - 1] : -INFINITY;
    const double right = k + 1 < n ? logmag[k + 1] : -INFINITY;
    if (left > here && left >= right) {
      --k;
    } else if (right > here) {
      ++k;
    } else {
      return k;
    }
  }
}

double interpolated_peak_bin(std::span<const double> logmag, std::size_t k) {
  if (k == 0 || k + 1 >= logmag.size()) return static_cast<double>(k);
  const double a = logmag[k - 1];
  const double b = logmag[k];
  const double c = logmag[k + 1];
  const double denom = a - 2.0 * b + c;
  if (!(denom < 0.0)) return static_cast<double>(k);
  return static_cast<double>(k) + 0.5 * (a - c) / denom;
}

}  // namespace

double zcr(std::span<const double> frame) {
  if (frame.size() < 2) return 0.0;
  std::size_t crossings = 0;
  for (std::size_t i = 1; i < frame.size(); ++i) {
    if ((frame[i] >= 0.0) != (frame[i - 1] >= 0.0)) ++crossings;
  }
  return static_cast<double>(crossings) / static_cast<double>(frame.size() - 1);
}

double frame_energy(std::span<const double> frame) {
  if (frame.empty()) return 0.0;
  double acc = 0.0;
  for (double v : frame) acc += v * v;
  return acc / static_cast<double>(frame.size());
}

double energy_entropy(std::span<const double> frame, std::size_t n_blocks) {
  if (n_blocks == 0) throw std::invalid_argument("energy_entropy: n_blocks must be >= 1");
  if (frame.empty()) return 0.0;
  const std::size_t block = (frame.size() + n_blocks - 1) / n_blocks;
  std::vector<double> energies(n_blocks, 0.0);
  for (std::size_t i = 0; i < frame.size(); ++i) energies[i / block] += frame[i] * frame[i];
  const double total = std::accumulate(energies.begin(), energies.end(), 0.0);
  if (!(total > 0.0)) return 0.0;
  for (auto& e : energies) e /= total;
  return entropy_bits(energies);
}

SpectralStats stft_stats(const dsp::Spectrum& spectrum, const dsp::Spectrum* prev,
                         double rolloff_fraction) {
  const auto& m = spectrum.magnitudes;
  if (prev != nullptr && prev->magnitudes.size() != m.size()) {
    throw std::invalid_argument("stft_stats: spectra differ in length");
  }
  SpectralStats s;
  const double total = std::accumulate(m.begin(), m.end(), 0.0);

  if (total > 0.0) {
    double weighted = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) weighted += spectrum.frequency(k) * m[k];
    s.centroid_hz = weighted / total;

    double var = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double d = spectrum.frequency(k) - s.centroid_hz;
      var += d * d * m[k];
    }
    s.spread_hz = std::sqrt(var / total);

    double h = 0.0;
    for (double v : m) {
      const double p = v / total;
      if (p > 0.0) h -= p * std::log2(p);
    }
    s.entropy = h;

    const double target = rolloff_fraction * total;
    double cumulative = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
      cumulative += m[k];
      if (cumulative >= target) {
        s.rolloff_hz = spectrum.frequency(k);
        break;
      }
    }
  }

  if (prev != nullptr) {
    const auto& pm = prev->magnitudes;
    const double prev_total = std::accumulate(pm.begin(), pm.end(), 0.0);
    double flux = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double a = total > 0.0 ? m[k] / total : 0.0;
      const double b = prev_total > 0.0 ? pm[k] / prev_total : 0.0;
      flux += (a - b) * (a - b);
    }
    s.flux = flux;
  }
  return s;
}

std::vector<double> mfcc_from_mel(std::span<const double> mel_power, std::size_t n_coeffs) {
  std::vector<double> logmel(mel_power.size());
  for (std::size_t i = 0; i < mel_power.size(); ++i) logmel[i] = std::log(mel_power[i] + kLogFloor);
  return dsp::dct_ii_ortho(logmel, n_coeffs);
}

std::vector<double> mfcc(const dsp::Spectrum& spectrum, const dsp::MelFilterbank& bank,
                         std::size_t n_coeffs) {
  std::vector<double> power(spectrum.size());
  for (std::size_t k = 0; k < power.size(); ++k) {
    power[k] = spectrum.magnitudes[k] * spectrum.magnitudes[k];
  }
  return mfcc_from_mel(bank.apply(power), n_coeffs);
}

std::array<double, 12> chroma12(const dsp::Spectrum& spectrum, double tuning_ref_hz) {
  std::array<double, 12> chroma{};
  const auto& m = spectrum.magnitudes;
  if (m.empty() || !(spectrum.bin_hz > 0.0)) return chroma;

  std::vector<double> logmag(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) logmag[k] = std::log(m[k] * m[k] + 1e-300);

  // Pitch class per peak, computed once per distinct peak.
  std::vector<int> peak_class(m.size(), -2);
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double energy = m[k] * m[k];
    if (energy <= 0.0 || spectrum.frequency(k) < kMinChromaHz) continue;
    const std::size_t peak = climb_to_peak(logmag, k);
    if (peak_class[peak] == -2) {
      const double f = interpolated_peak_bin(logmag, peak) * spectrum.bin_hz;
      if (f < kMinChromaHz) {
        peak_class[peak] = -1;
      } else {
        const long midi = std::lround(12.0 * std::log2(f / tuning_ref_hz)) + 69;
        peak_class[peak] = static_cast<int>(((midi % 12) + 12) % 12);
      }
    }
    if (peak_class[peak] >= 0) chroma[static_cast<std::size_t>(peak_class[peak])] += energy;
  }

  const double peak_value = *std::max_element(chroma.begin(), chroma.end());
  if (peak_value > 0.0) {
    for (auto& c : chroma) c /= peak_value;
  }
  return chroma;
}

double chroma_deviation(std::span<const double> chroma) {
  if (chroma.empty()) return 0.0;
  const double n = static_cast<double>(chroma.size());
  const double mean = std::accumulate(chroma.begin(), chroma.end(), 0.0) / n;
  double var = 0.0;
  for (double c : chroma) var += (c - mean) * (c - mean);
  return std::sqrt(var / n);
}

std::vector<double> spectral_contrast(const dsp::Spectrum& spectrum, std::size_t n_bands,
                                      double alpha, double fmin_hz) {
  if (n_bands == 0) throw std::invalid_argument("spectral_contrast: n_bands must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("spectral_contrast: bad alpha");

  std::vector<double> edges(n_bands + 2);
  edges[0] = 0.0;
  for (std::size_t b = 1; b <= n_bands; ++b) {
    edges[b] = fmin_hz * std::pow(2.0, static_cast<double>(b - 1));
  }
  edges[n_bands + 1] = INFINITY;

  std::vector<double> contrast(n_bands + 1, 0.0);
  std::vector<double> band;
  for (std::size_t b = 0; b <= n_bands; ++b) {
    band.clear();
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      const double f = spectrum.frequency(k);
      if (f >= edges[b] && f < edges[b + 1]) {
        band.push_back(std::log10(std::max(spectrum.magnitudes[k], kContrastFloor)));
      }
    }
    if (band.empty()) continue;
    std::sort(band.begin(), band.end());
    const auto q = static_cast<std::size_t>(
        std::max(1.0, std::ceil(alpha * static_cast<double>(band.size()))));
    const double valley = std::accumulate(band.begin(), band.begin() + q, 0.0) / q;
    const double peak = std::accumulate(band.end() - q, band.end(), 0.0) / q;
    contrast[b] = peak - valley;
  }
  return contrast;
}

std::array<double, 6> tonnetz6(std::span<const double> chroma) {
  std::array<double, 6> out{};
  if (chroma.size() != 12) throw std::invalid_argument("tonnetz6: chroma must have 12 values");
  double l1 = 0.0;
  for (double c : chroma) l1 += std::abs(c);
  if (!(l1 > 0.0)) return out;

  constexpr double pi = std::numbers::pi;
  constexpr std::array<double, 3> radius = {1.0, 1.0, 0.5};
  constexpr std::array<double, 3> angle = {7.0 * pi / 6.0, 3.0 * pi / 2.0, 2.0 * pi / 3.0};
  for (std::size_t p = 0; p < 12; ++p) {
    const double c = chroma[p] / l1;
    for (std::size_t d = 0; d < 3; ++d) {
      const double phase = static_cast<double>(p) * angle[d];
      out[2 * d] += radius[d] * std::sin(phase) * c;
      out[2 * d + 1] += radius[d] * std::cos(phase) * c;
    }
  }
  return out;
}

std::vector<std::string> paa_column_names() {
  std::vector<std::string> names = {"zcr",  "energy", "energy_entropy", "spectral_centroid",
                                    "spectral_spread", "spectral_entropy", "spectral_flux",
                                    "spectral_rolloff"};
  for (int i = 1; i <= 13; ++i) names.push_back("mfcc_" + std::to_string(i));
  for (int i = 1; i <= 12; ++i) names.push_back("chroma_" + std::to_string(i));
  names.push_back("chroma_deviation");
  return names;
}

std::vector<std::string> l193_column_names() {
  std::vector<std::string> names;
  for (int i = 1; i <= 40; ++i) names.push_back("mfcc_" + std::to_string(i));
  for (int i = 1; i <= 12; ++i) names.push_back("chroma_" + std::to_string(i));
  for (int i = 1; i <= 128; ++i) names.push_back("mel_" + std::to_string(i));
  for (int i = 1; i <= 7; ++i) names.push_back("contrast_" + std::to_string(i));
  for (int i = 1; i <= 6; ++i) names.push_back("tonnetz_" + std::to_string(i));
  return names;
}

// ---------------------------------------------------------------- extractor

namespace {

std::size_t samples_for(double seconds, int rate) {
  return static_cast<std::size_t>(std::lround(seconds * rate));
}

std::size_t resolve_nfft(std::size_t requested, std::size_t win) {
  return requested == 0 ? default_nfft(win) : requested;
}

}  // namespace

std::size_t default_nfft(std::size_t window) {
  return std::max<std::size_t>(2048, dsp::next_power_of_two(window));
}

SpectralExtractor::SpectralExtractor(int sample_rate_hz, SpectralConfig config)
    : config_(config),
      sample_rate_hz_(sample_rate_hz),
      win_(samples_for(config.frame_len_s, sample_rate_hz)),
      hop_(samples_for(config.hop_s, sample_rate_hz)),
      analyzer_(win_, resolve_nfft(config.nfft, win_), sample_rate_hz) {
  if (sample_rate_hz <= 0) throw std::invalid_argument("SpectralExtractor: bad sample rate");
  const double nyquist = sample_rate_hz / 2.0;
  mel40_ = dsp::mel_filterbank(analyzer_.nfft(), sample_rate_hz, 40, 0.0, nyquist, config.mel_norm);
  mel128_ =
      dsp::mel_filterbank(analyzer_.nfft(), sample_rate_hz, 128, 0.0, nyquist, config.mel_norm);
}

std::vector<double> SpectralExtractor::paa_frame(std::span<const double> frame,
                                                 const dsp::Spectrum* prev,
                                                 dsp::Spectrum* spectrum_out) const {
  std::vector<double> out;
  out.reserve(kPaaWidth);
  out.push_back(zcr(frame));
  out.push_back(frame_energy(frame));
  out.push_back(energy_entropy(frame, config_.energy_blocks));

  dsp::Spectrum spectrum = analyzer_.analyze(frame);
  const SpectralStats stats = stft_stats(spectrum, prev, config_.rolloff_fraction);
  out.push_back(stats.centroid_hz);
  out.push_back(stats.spread_hz);
  out.push_back(stats.entropy);
  out.push_back(stats.flux);
  out.push_back(stats.rolloff_hz);

  const auto cepstrum = mfcc(spectrum, mel40_, 13);
  out.insert(out.end(), cepstrum.begin(), cepstrum.end());
  const auto chroma = chroma12(spectrum, config_.tuning_ref_hz);
  out.insert(out.end(), chroma.begin(), chroma.end());
  out.push_back(chroma_deviation(chroma));

  if (spectrum_out != nullptr) *spectrum_out = std::move(spectrum);
  return out;
}

std::vector<double> SpectralExtractor::l193_frame(std::span<const double> frame) const {
  const dsp::Spectrum spectrum = analyzer_.analyze(frame);
  std::vector<double> power(spectrum.size());
  for (std::size_t k = 0; k < power.size(); ++k) {
    power[k] = spectrum.magnitudes[k] * spectrum.magnitudes[k];
  }
  const auto mel = mel128_.apply(power);

  std::vector<double> out;
  out.reserve(kL193Width);
  const auto cepstrum = mfcc_from_mel(mel, 40);
  out.insert(out.end(), cepstrum.begin(), cepstrum.end());
  const auto chroma = chroma12(spectrum, config_.tuning_ref_hz);
  out.insert(out.end(), chroma.begin(), chroma.end());
  out.insert(out.end(), mel.begin(), mel.end());
  const auto contrast = spectral_contrast(spectrum, config_.contrast_bands, config_.contrast_alpha,
                                          config_.contrast_fmin_hz);
  out.insert(out.end(), contrast.begin(), contrast.end());
  const auto tonal = tonnetz6(chroma);
  out.insert(out.end(), tonal.begin(), tonal.end());
  if (out.size() != kL193Width) {
    throw std::logic_error("l193_frame: contrast band count does not yield 193 features");
  }
  return out;
}

FrameMatrix SpectralExtractor::extract_paa(const AudioClip& clip) const {
  if (clip.sample_rate_hz != sample_rate_hz_) {
    throw std::invalid_argument("extract_paa: clip rate differs from extractor rate");
  }
  const std::size_t n = dsp::frame_count(clip.samples.size(), win_, hop_);
  FrameMatrix m(n, kPaaWidth, paa_column_names());
  m.frame_hop_s = config_.hop_s;
  m.frame_len_s = config_.frame_len_s;

  std::vector<double> frame;
  dsp::Spectrum prev;
  dsp::Spectrum current;
  for (std::size_t i = 0; i < n; ++i) {
    dsp::copy_frame(clip.samples, i, win_, hop_, frame);
    const auto row = paa_frame(frame, i == 0 ? nullptr : &prev, &current);
    std::copy(row.begin(), row.end(), m.row(i).begin());
    std::swap(prev, current);
  }
  return m;
}

FrameMatrix SpectralExtractor::extract_l193(const AudioClip& clip) const {
  if (clip.sample_rate_hz != sample_rate_hz_) {
    throw std::invalid_argument("extract_l193: clip rate differs from extractor rate");
  }
  const std::size_t n = dsp::frame_count(clip.samples.size(), win_, hop_);
  FrameMatrix m(n, kL193Width, l193_column_names());
  m.frame_hop_s = config_.hop_s;
  m.frame_len_s = config_.frame_len_s;

  std::vector<double> frame;
  for (std::size_t i = 0; i < n; ++i) {
    dsp::copy_frame(clip.samples, i, win_, hop_, frame);
    const auto row = l193_frame(frame);
    std::copy(row.begin(), row.end(), m.row(i).begin());
  }
  return m;
}

}  // namespace serb::features
