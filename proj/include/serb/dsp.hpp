#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "serb/audio_io.hpp"

namespace serb::dsp {

/// One-sided magnitude spectrum |X[k]|, k = 0..nfft/2.
struct Spectrum {
  std::vector<double> magnitudes;
  double bin_hz = 0.0;

  std::size_t size() const { return magnitudes.size(); }
  double frequency(std::size_t k) const { return static_cast<double>(k) * bin_hz; }
};

// ---------------------------------------------------------------- framing

/// Number of frames produced by frame_signal for a signal of `length` samples.
/// The last frame is zero-padded so that every sample is covered.
std::size_t frame_count(std::size_t length, std::size_t win, std::size_t hop);

/// Splits a signal into frames of `win` samples every `hop` samples.
/// Frames that run past the end are zero-padded.
std::vector<std::vector<double>> frame_signal(std::span<const double> samples, std::size_t win,
                                              std::size_t hop);

/// Copies frame `index` into `out` (resized to win), zero-padding past the end.
void copy_frame(std::span<const double> samples, std::size_t index, std::size_t win,
                std::size_t hop, std::vector<double>& out);

/// w[k] = 0.54 - 0.46 cos(2 pi k / (n - 1)); n = 1 yields {0.08}.
std::vector<double> hamming_window(std::size_t n);

std::vector<double> pre_emphasis(std::span<const double> x, double coef);

// ---------------------------------------------------------------- FFT

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// Radix-2 iterative FFT plan with precomputed twiddles and bit-reversal table.
/// Immutable after construction; safe to share across threads.
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }

  /// In-place transform. The inverse is scaled by 1/n.
  void transform(std::span<std::complex<double>> data, bool inverse = false) const;

 private:
  std::size_t n_;
  std::vector<std::complex<double>> twiddles_;
  std::vector<std::size_t> bit_reverse_;
};

/// Full complex spectrum of `x` zero-padded to nfft.
std::vector<std::complex<double>> fft(std::span<const double> x, std::size_t nfft);

/// Magnitude spectrum of `frame` zero-padded to nfft (no window applied).
/// Throws std::invalid_argument if nfft is not a power of two or is shorter
/// than the frame.
Spectrum fft_power(std::span<const double> frame, std::size_t nfft, double sample_rate_hz = 0.0);

/// Windowed magnitude-spectrum analyzer for a fixed frame length.
class SpectrumAnalyzer {
 public:
  SpectrumAnalyzer(std::size_t frame_len, std::size_t nfft, double sample_rate_hz);

  Spectrum analyze(std::span<const double> frame) const;

  std::size_t nfft() const { return fft_.size(); }
  double sample_rate_hz() const { return sample_rate_hz_; }
  const std::vector<double>& window() const { return window_; }

 private:
  Fft fft_;
  std::vector<double> window_;
  double sample_rate_hz_;
};

// ---------------------------------------------------------------- mel

double hz_to_mel(double hz);
double mel_to_hz(double mel);

enum class MelNorm { kNone, kArea };

/// Triangular filters with centers uniform on the mel scale.
/// Row-major (n_mels x n_bins) weights; each row keeps its nonzero span.
class MelFilterbank {
 public:
  MelFilterbank() = default;
  MelFilterbank(std::size_t n_mels, std::size_t n_bins, std::vector<double> weights);

  std::size_t n_mels() const { return n_mels_; }
  std::size_t n_bins() const { return n_bins_; }
  double weight(std::size_t mel, std::size_t bin) const { return weights_[mel * n_bins_ + bin]; }

  /// Filter outputs for a per-bin input (typically power |X|^2).
  std::vector<double> apply(std::span<const double> per_bin) const;

 private:
  std::size_t n_mels_ = 0;
  std::size_t n_bins_ = 0;
  std::vector<double> weights_;
  std::vector<std::size_t> first_;
  std::vector<std::size_t> last_;
};

/// Throws std::invalid_argument when the frequency range is invalid or a
/// filter collapses to zero width at this nfft resolution.
MelFilterbank mel_filterbank(std::size_t nfft, double sample_rate_hz, std::size_t n_mels,
                             double f_lo, double f_hi, MelNorm norm = MelNorm::kNone);

// ---------------------------------------------------------------- DCT

/// Orthonormal DCT-II with a precomputed cosine table.
class Dct {
 public:
  Dct(std::size_t n_in, std::size_t n_out);

  std::vector<double> apply(std::span<const double> v) const;

 private:
  std::size_t n_in_;
  std::size_t n_out_;
  std::vector<double> table_;
};

/// First n_out orthonormal DCT-II coefficients of v.
std::vector<double> dct_ii_ortho(std::span<const double> v, std::size_t n_out);

// ---------------------------------------------------------------- autocorrelation / LPC

/// r[tau] = sum_n x[n] x[n + tau] for tau = 0..max_lag (computed via FFT).
std::vector<double> autocorr(std::span<const double> frame, std::size_t max_lag);

struct LpcResult {
  /// a[1..p] of A(z) = 1 + sum_k a[k] z^-k.
  std::vector<double> coefficients;
  /// Final prediction-error energy.
  double gain = 0.0;
  std::vector<double> reflection;
  /// Prediction-error energy after each order 0..p.
  std::vector<double> error_by_order;
};

/// Levinson-Durbin recursion on autocorrelation r[0..order].
/// Returns nullopt when r[0] <= 0 (silent frame).
std::optional<LpcResult> levinson_durbin(std::span<const double> r, std::size_t order);

/// Autocorrelation-method LPC. Returns nullopt on a silent frame.
/// Throws std::invalid_argument if order >= frame length.
std::optional<LpcResult> lpc(std::span<const double> frame, std::size_t order);

// ---------------------------------------------------------------- resampling

/// Hamming-windowed sinc low-pass; cutoff is a fraction of the sample rate.
std::vector<double> lowpass_fir(double cutoff_fraction, std::size_t taps);

/// Low-pass at 0.45 * (fs / factor), then keeps every factor-th sample.
AudioClip decimate(const AudioClip& clip, int factor);

}  // namespace serb::dsp
