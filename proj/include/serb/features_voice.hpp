#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "serb/audio_io.hpp"
#include "serb/dsp.hpp"
#include "serb/features_spectral.hpp"
#include "serb/frame_matrix.hpp"

namespace serb::features {

inline constexpr std::size_t kGemapsWidth = 23;

struct VoiceConfig {
  double f0_min_hz = 60.0;
  double f0_max_hz = 600.0;
  double voicing_threshold = 0.45;
  /// Mean-square energy at or below which a frame is treated as silent.
  double silence_floor = 1e-10;
  /// Context around each voiced frame used for period tracking.
  double jitter_window_s = 0.060;
  /// Next period peak is searched within (1 +/- rel) * T0 of the previous one.
  double period_search_rel = 0.2;
  double hnr_limit_db = 60.0;
  double formant_rate_hz = 16000.0;
  double pre_emphasis = 0.97;
  std::size_t lpc_order = 12;
  std::size_t lpc_fallback_order = 10;
  double formant_min_hz = 90.0;
  double formant_max_hz = 5500.0;
  double formant_max_bw_hz = 600.0;
};

struct PitchEstimate {
  double f0_hz = 0.0;
  bool voiced = false;
  /// Normalized autocorrelation r(tau)/r(0) at the chosen lag.
  double peak_correlation = 0.0;
};

/// Autocorrelation pitch: f0 = fs / argmax r(tau)/r(0) over the lag range
/// [fs/f0_max, fs/f0_min] (capped by the frame), refined parabolically.
/// Voiced iff the peak reaches the threshold and the frame is not silent.
PitchEstimate f0_autocorrelation(std::span<const double> frame, double fs, double f0_min = 60.0,
                                 double f0_max = 600.0, double voicing_threshold = 0.45,
                                 double silence_floor = 1e-10);

struct PeriodMarks {
  std::vector<double> positions;
  std::vector<double> amplitudes;
};

/// Locates one waveform peak per pitch period. The first peak is the maximum
/// within the first period; each following peak is the maximum within
/// (1 +/- search_rel) * T0 after the previous one, where T0 comes from the
/// f0 track (one value per `track_hop` samples; values <= 0 stop tracking).
PeriodMarks find_period_marks(std::span<const double> region, double fs,
                              std::span<const double> f0_track, std::size_t track_hop,
                              double search_rel = 0.2);

struct JitterShimmer {
  double jitter = 0.0;
  double shimmer = 0.0;
  std::size_t n_periods = 0;
  /// False when fewer than 3 periods were found; both measures are then 0.
  bool sufficient = false;
};

/// Local jitter and shimmer from period marks.
JitterShimmer jitter_shimmer(const PeriodMarks& marks);

JitterShimmer jitter_shimmer(std::span<const double> region, double fs,
                             std::span<const double> f0_track, std::size_t track_hop,
                             double search_rel = 0.2);

inline JitterShimmer jitter_shimmer(std::span<const double> region, double fs, double f0_hz,
                                    double search_rel = 0.2) {
  const double track[1] = {f0_hz};
  return jitter_shimmer(region, fs, track, region.size() + 1, search_rel);
}

/// 10 log10(r / (1 - r)) with r clamped to [1e-6, 1 - 1e-6] and the result
/// clamped to +/- limit_db.
double hnr_from_correlation(double r, double limit_db = 60.0);

/// HNR of a voiced frame from the normalized cross-correlation at the pitch
/// period. Unvoiced (f0 <= 0) returns -limit_db.
double hnr(std::span<const double> frame, double fs, double f0_hz, double limit_db = 60.0);

struct BandMeasures {
  double intensity_db = 0.0;
  double alpha_ratio_db = 0.0;
  double hammarberg_db = 0.0;
  double slope_0_500 = 0.0;
  double slope_500_1500 = 0.0;
};

/// Band energies and slopes over half-open frequency bands [lo, hi).
BandMeasures band_measures(const dsp::Spectrum& spectrum);

struct HarmonicDiffs {
  double h1_h2_db = 0.0;
  double h1_a3_db = 0.0;
  bool voiced = false;
};

HarmonicDiffs harmonic_diffs(const dsp::Spectrum& spectrum, double f0_hz, double f3_hz);

struct Formant {
  double frequency_hz = 0.0;
  double bandwidth_hz = 0.0;
  double amplitude_db = 0.0;
};

struct FormantResult {
  std::array<Formant, 3> formants{};
  std::size_t n_found = 0;
  /// Set when fewer than three formants qualified (missing ones are zero).
  bool missing = true;
  /// Set when both LPC orders produced a root on or outside the unit circle.
  bool unstable = false;
};

/// LPC formant tracking on a frame of the decimated, pre-emphasized signal.
/// The frame is Hamming-windowed internally.
FormantResult formants(std::span<const double> frame, double fs, const VoiceConfig& config = {});

/// Decimates toward config.formant_rate_hz and applies pre-emphasis.
AudioClip prepare_formant_signal(const AudioClip& clip, const VoiceConfig& config = {});

/// [intensity, alpha, hammarberg, slope0-500, slope500-1500, flux, mfcc1..4,
///  f0, jitter, shimmer, hnr, h1h2, h1a3, f1, f1bw, f1amp, f2, f2amp, f3, f3amp]
std::vector<double> assemble_gemaps_frame(const BandMeasures& bands, double flux,
                                          std::span<const double> mfcc4,
                                          const PitchEstimate& pitch, const JitterShimmer& js,
                                          double hnr_db, const HarmonicDiffs& harmonics,
                                          const FormantResult& formant);

std::vector<std::string> gemaps_column_names();

/// Utterance-level extractor for the 23-wide voice set.
class VoiceExtractor {
 public:
  VoiceExtractor(int sample_rate_hz, VoiceConfig voice = {}, SpectralConfig spectral = {});

  FrameMatrix extract(const AudioClip& clip) const;

  const VoiceConfig& config() const { return voice_; }

 private:
  VoiceConfig voice_;
  SpectralConfig spectral_;
  int sample_rate_hz_;
  std::size_t win_;
  std::size_t hop_;
  dsp::SpectrumAnalyzer analyzer_;
  dsp::MelFilterbank mel40_;
};

}  // namespace serb::features
