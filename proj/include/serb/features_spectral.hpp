#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "serb/audio_io.hpp"
#include "serb/dsp.hpp"
#include "serb/frame_matrix.hpp"

namespace serb::features {

inline constexpr std::size_t kPaaWidth = 34;
inline constexpr std::size_t kL193Width = 193;

/// Frame and kernel parameters shared by the spectral feature sets.
struct SpectralConfig {
  double frame_len_s = 0.025;
  double hop_s = 0.010;
  /// 0 selects default_nfft(window length).
  std::size_t nfft = 0;
  double rolloff_fraction = 0.85;
  std::size_t energy_blocks = 10;
  std::size_t contrast_bands = 6;
  double contrast_alpha = 0.02;
  double contrast_fmin_hz = 200.0;
  double tuning_ref_hz = 440.0;
  dsp::MelNorm mel_norm = dsp::MelNorm::kNone;
};

/// Next power of two >= the window, but at least 2048 so the 128-band mel
/// bank stays resolvable at low sample rates.
std::size_t default_nfft(std::size_t window);

struct SpectralStats {
  double centroid_hz = 0.0;
  double spread_hz = 0.0;
  double entropy = 0.0;
  double flux = 0.0;
  double rolloff_hz = 0.0;
};

/// Fraction of adjacent sample pairs whose sign (x >= 0) differs.
double zcr(std::span<const double> frame);

/// Mean-square energy.
double frame_energy(std::span<const double> frame);

/// Shannon entropy (bits) of normalized sub-block energies; the tail block is
/// zero-padded. An all-zero frame yields 0.
double energy_entropy(std::span<const double> frame, std::size_t n_blocks);

/// Centroid, spread, entropy, flux and roll-off of a magnitude spectrum.
/// `prev` is the previous frame's spectrum; without it flux is 0.
SpectralStats stft_stats(const dsp::Spectrum& spectrum, const dsp::Spectrum* prev,
                         double rolloff_fraction);

/// Orthonormal DCT of log(mel power + 1e-10), first n_coeffs values.
std::vector<double> mfcc(const dsp::Spectrum& spectrum, const dsp::MelFilterbank& bank,
                         std::size_t n_coeffs);
std::vector<double> mfcc_from_mel(std::span<const double> mel_power, std::size_t n_coeffs);

/// Pitch-class energy profile (index 0 = C, 9 = A), max-normalized.
/// Each bin's energy is credited to the pitch class of the spectral peak it
/// belongs to; peaks below 27.5 Hz are ignored.
std::array<double, 12> chroma12(const dsp::Spectrum& spectrum, double tuning_ref_hz = 440.0);

/// Population standard deviation of the chroma values.
double chroma_deviation(std::span<const double> chroma);

/// Octave-band peak/valley contrast in log10 magnitude. Bands are
/// [0, fmin), then octaves from fmin, with the last band open to Nyquist,
/// giving n_bands + 1 values.
std::vector<double> spectral_contrast(const dsp::Spectrum& spectrum, std::size_t n_bands = 6,
                                      double alpha = 0.02, double fmin_hz = 200.0);

/// Tonal centroid: projection of L1-normalized chroma onto the circles of
/// fifths, minor thirds and major thirds.
std::array<double, 6> tonnetz6(std::span<const double> chroma);

std::vector<std::string> paa_column_names();
std::vector<std::string> l193_column_names();

/// Frame-level extractor for the 34-wide and 193-wide spectral sets.
/// Holds precomputed FFT plan, window, and the 40/128-band mel filterbanks.
class SpectralExtractor {
 public:
  SpectralExtractor(int sample_rate_hz, SpectralConfig config = {});

  std::size_t window_samples() const { return win_; }
  std::size_t hop_samples() const { return hop_; }
  const SpectralConfig& config() const { return config_; }
  const dsp::SpectrumAnalyzer& analyzer() const { return analyzer_; }
  const dsp::MelFilterbank& mel40() const { return mel40_; }
  const dsp::MelFilterbank& mel128() const { return mel128_; }

  /// [zcr, energy, energy_entropy, centroid, spread, spectral_entropy, flux,
  ///  rolloff, mfcc1..13, chroma1..12, chroma_dev]
  std::vector<double> paa_frame(std::span<const double> frame, const dsp::Spectrum* prev,
                                dsp::Spectrum* spectrum_out = nullptr) const;

  /// [mfcc1..40, chroma1..12, mel1..128, contrast1..7, tonnetz1..6]
  std::vector<double> l193_frame(std::span<const double> frame) const;

  FrameMatrix extract_paa(const AudioClip& clip) const;
  FrameMatrix extract_l193(const AudioClip& clip) const;

 private:
  SpectralConfig config_;
  int sample_rate_hz_;
  std::size_t win_;
  std::size_t hop_;
  dsp::SpectrumAnalyzer analyzer_;
  dsp::MelFilterbank mel40_;
  dsp::MelFilterbank mel128_;
};

}  // namespace serb::features
