#include "serb/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace serb::dsp {
namespace {

constexpr double kPi = std::numbers::pi;

const Fft& cached_fft(std::size_t n) {
  thread_local std::unordered_map<std::size_t, Fft> plans;
  auto it = plans.find(n);
  if (it == plans.end()) it = plans.emplace(n, Fft(n)).first;
  return it->second;
}

}  // namespace

// ---------------------------------------------------------------- framing

std::size_t frame_count(std::size_t length, std::size_t win, std::size_t hop) {
  if (win == 0 || hop == 0) throw std::invalid_argument("frame: window and hop must be positive");
  if (length <= win) return 1;
  return 1 + (length - win + hop - 1) / hop;
}

void copy_frame(std::span<const double> samples, std::size_t index, std::size_t win,
                std::size_t hop, std::vector<double>& out) {
  out.assign(win, 0.0);
  const std::size_t start = index * hop;
  if (start >= samples.size()) return;
  const std::size_t n = std::min(win, samples.size() - start);
  std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(start), n, out.begin());
}

std::vector<std::vector<double>> frame_signal(std::span<const double> samples, std::size_t win,
                                              std::size_t hop) {
  if (samples.empty()) throw std::invalid_argument("frame_signal: empty input");
  const std::size_t n = frame_count(samples.size(), win, hop);
  std::vector<std::vector<double>> frames(n);
  for (std::size_t i = 0; i < n; ++i) copy_frame(samples, i, win, hop, frames[i]);
  return frames;
}

std::vector<double> hamming_window(std::size_t n) {
  if (n == 0) throw std::invalid_argument("hamming_window: n must be >= 1");
  if (n == 1) return {0.08};
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) w[k] = 0.54 - 0.46 * std::cos(2.0 * kPi * k / denom);
  return w;
}

std::vector<double> pre_emphasis(std::span<const double> x, double coef) {
  std::vector<double> y(x.size());
  if (x.empty()) return y;
  y[0] = x[0];
  for (std::size_t i = 1; i < x.size(); ++i) y[i] = x[i] - coef * x[i - 1];
  return y;
}

// ---------------------------------------------------------------- FFT

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

Fft::Fft(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("Fft: size " + std::to_string(n) + " is not a power of two");
  }
  twiddles_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    twiddles_[k] = {std::cos(angle), std::sin(angle)};
  }
  bit_reverse_.resize(n);
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    }
    bit_reverse_[i] = r;
  }
}

void Fft::transform(std::span<std::complex<double>> data, bool inverse) const {
  if (data.size() != n_) throw std::invalid_argument("Fft::transform: size mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bit_reverse_[i]) std::swap(data[i], data[bit_reverse_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        std::complex<double> w = twiddles_[j * stride];
        if (inverse) w = std::conj(w);
        const std::complex<double> t = w * data[start + j + half];
        data[start + j + half] = data[start + j] - t;
        data[start + j] += t;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : data) v *= scale;
  }
}

std::vector<std::complex<double>> fft(std::span<const double> x, std::size_t nfft) {
  if (!is_power_of_two(nfft)) {
    throw std::invalid_argument("fft: nfft " + std::to_string(nfft) + " is not a power of two");
  }
  if (x.size() > nfft) throw std::invalid_argument("fft: frame longer than nfft");
  std::vector<std::complex<double>> buf(nfft);
  for (std::size_t i = 0; i < x.size(); ++i) buf[i] = x[i];
  cached_fft(nfft).transform(buf);
  return buf;
}

Spectrum fft_power(std::span<const double> frame, std::size_t nfft, double sample_rate_hz) {
  const auto full = fft(frame, nfft);
  Spectrum s;
  s.bin_hz = sample_rate_hz / static_cast<double>(nfft);
  s.magnitudes.resize(nfft / 2 + 1);
  for (std::size_t k = 0; k <= nfft / 2; ++k) s.magnitudes[k] = std::abs(full[k]);
  return s;
}

SpectrumAnalyzer::SpectrumAnalyzer(std::size_t frame_len, std::size_t nfft, double sample_rate_hz)
    : fft_(nfft), window_(hamming_window(frame_len)), sample_rate_hz_(sample_rate_hz) {
  if (frame_len > nfft) throw std::invalid_argument("SpectrumAnalyzer: frame longer than nfft");
}

Spectrum SpectrumAnalyzer::analyze(std::span<const double> frame) const {
  if (frame.size() != window_.size()) {
    throw std::invalid_argument("SpectrumAnalyzer: frame length mismatch");
  }
  std::vector<std::complex<double>> buf(fft_.size());
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i] * window_[i];
  fft_.transform(buf);
  Spectrum s;
  s.bin_hz = sample_rate_hz_ / static_cast<double>(fft_.size());
  s.magnitudes.resize(fft_.size() / 2 + 1);
  for (std::size_t k = 0; k < s.magnitudes.size(); ++k) s.magnitudes[k] = std::abs(buf[k]);
  return s;
}

// ---------------------------------------------------------------- mel

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(std::size_t n_mels, std::size_t n_bins, std::vector<double> weights)
    : n_mels_(n_mels), n_bins_(n_bins), weights_(std::move(weights)) {
  if (weights_.size() != n_mels_ * n_bins_) {
    throw std::invalid_argument("MelFilterbank: weight matrix has wrong size");
  }
  first_.assign(n_mels_, 0);
  last_.assign(n_mels_, 0);
  for (std::size_t m = 0; m < n_mels_; ++m) {
    const double* row = weights_.data() + m * n_bins_;
    std::size_t lo = n_bins_;
    std::size_t hi = 0;
    for (std::size_t k = 0; k < n_bins_; ++k) {
      if (row[k] != 0.0) {
        lo = std::min(lo, k);
        hi = k + 1;
      }
    }
    first_[m] = lo == n_bins_ ? 0 : lo;
    last_[m] = hi;
  }
}

std::vector<double> MelFilterbank::apply(std::span<const double> per_bin) const {
  if (per_bin.size() != n_bins_) throw std::invalid_argument("MelFilterbank: bin count mismatch");
  std::vector<double> out(n_mels_, 0.0);
  for (std::size_t m = 0; m < n_mels_; ++m) {
    const double* row = weights_.data() + m * n_bins_;
    double acc = 0.0;
    for (std::size_t k = first_[m]; k < last_[m]; ++k) acc += row[k] * per_bin[k];
    out[m] = acc;
  }
  return out;
}

MelFilterbank mel_filterbank(std::size_t nfft, double sample_rate_hz, std::size_t n_mels,
                             double f_lo, double f_hi, MelNorm norm) {
  if (!(f_lo >= 0.0 && f_lo < f_hi && f_hi <= sample_rate_hz / 2.0)) {
    throw std::invalid_argument("mel_filterbank: need 0 <= f_lo < f_hi <= fs/2");
  }
  if (n_mels == 0 || nfft < 2) throw std::invalid_argument("mel_filterbank: empty filterbank");

  const std::size_t n_bins = nfft / 2 + 1;
  const double mel_lo = hz_to_mel(f_lo);
  const double mel_hi = hz_to_mel(f_hi);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }

  std::vector<double> weights(n_mels * n_bins, 0.0);
  const double bin_hz = sample_rate_hz / static_cast<double>(nfft);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    const double scale = norm == MelNorm::kArea ? 2.0 / (right - left) : 1.0;
    bool any = false;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      const double w = std::max(0.0, std::min(rise, fall));
      if (w > 0.0) {
        weights[m * n_bins + k] = w * scale;
        any = true;
      }
    }
    if (!any) {
      throw std::invalid_argument("mel_filterbank: filter " + std::to_string(m) +
                                  " has zero width at nfft " + std::to_string(nfft) +
                                  "; too many mel bands for this resolution");
    }
  }
  return MelFilterbank(n_mels, n_bins, std::move(weights));
}

// ---------------------------------------------------------------- DCT

Dct::Dct(std::size_t n_in, std::size_t n_out) : n_in_(n_in), n_out_(n_out) {
  if (n_in == 0) throw std::invalid_argument("dct: empty input");
  if (n_out > n_in) throw std::invalid_argument("dct: n_out exceeds input length");
  table_.resize(n_out * n_in);
  const double s0 = std::sqrt(1.0 / static_cast<double>(n_in));
  const double sk = std::sqrt(2.0 / static_cast<double>(n_in));
  for (std::size_t k = 0; k < n_out; ++k) {
    const double s = k == 0 ? s0 : sk;
    for (std::size_t n = 0; n < n_in; ++n) {
      table_[k * n_in + n] =
          s * std::cos(kPi * static_cast<double>(k) * (2.0 * static_cast<double>(n) + 1.0) /
                       (2.0 * static_cast<double>(n_in)));
    }
  }
}

std::vector<double> Dct::apply(std::span<const double> v) const {
  if (v.size() != n_in_) throw std::invalid_argument("dct: input length mismatch");
  std::vector<double> out(n_out_, 0.0);
  for (std::size_t k = 0; k < n_out_; ++k) {
    const double* row = table_.data() + k * n_in_;
    double acc = 0.0;
    for (std::size_t n = 0; n < n_in_; ++n) acc += row[n] * v[n];
    out[k] = acc;
  }
  return out;
}

std::vector<double> dct_ii_ortho(std::span<const double> v, std::size_t n_out) {
  return Dct(v.size(), n_out).apply(v);
}

// ---------------------------------------------------------------- autocorrelation / LPC

std::vector<double> autocorr(std::span<const double> frame, std::size_t max_lag) {
  if (frame.empty()) throw std::invalid_argument("autocorr: empty frame");
  if (max_lag >= frame.size()) throw std::invalid_argument("autocorr: max_lag >= frame length");
  const std::size_t nfft = next_power_of_two(frame.size() + max_lag + 1);
  std::vector<std::complex<double>> buf(nfft);
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
  const Fft& plan = cached_fft(nfft);
  plan.transform(buf);
  for (auto& v : buf) v = std::norm(v);
  plan.transform(buf, true);
  std::vector<double> r(max_lag + 1);
  for (std::size_t t = 0; t <= max_lag; ++t) r[t] = buf[t].real();
  return r;
}

std::optional<LpcResult> levinson_durbin(std::span<const double> r, std::size_t order) {
  if (r.size() < order + 1) throw std::invalid_argument("levinson_durbin: need r[0..order]");
  if (!(r[0] > 0.0)) return std::nullopt;

  LpcResult out;
  out.error_by_order.push_back(r[0]);
  std::vector<double> a(order + 1, 0.0);
  std::vector<double> prev(order + 1, 0.0);
  a[0] = 1.0;
  double err = r[0];
  for (std::size_t i = 1; i <= order; ++i) {
    double acc = r[i];
    for (std::size_t j = 1; j < i; ++j) acc += a[j] * r[i - j];
    const double k = err > 0.0 ? -acc / err : 0.0;
    prev = a;
    for (std::size_t j = 1; j < i; ++j) a[j] = prev[j] + k * prev[i - j];
    a[i] = k;
    err *= (1.0 - k * k);
    err = std::max(err, 0.0);
    out.reflection.push_back(k);
    out.error_by_order.push_back(err);
  }
  out.coefficients.assign(a.begin() + 1, a.end());
  out.gain = err;
  return out;
}

std::optional<LpcResult> lpc(std::span<const double> frame, std::size_t order) {
  if (order >= frame.size()) throw std::invalid_argument("lpc: order must be < frame length");
  return levinson_durbin(autocorr(frame, order), order);
}

// ---------------------------------------------------------------- resampling

std::vector<double> lowpass_fir(double cutoff_fraction, std::size_t taps) {
  if (taps == 0 || !(cutoff_fraction > 0.0 && cutoff_fraction < 0.5)) {
    throw std::invalid_argument("lowpass_fir: need taps > 0 and 0 < cutoff < 0.5");
  }
  const auto window = hamming_window(taps);
  const double center = static_cast<double>(taps - 1) / 2.0;
  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t j = 0; j < taps; ++j) {
    const double t = static_cast<double>(j) - center;
    const double x = 2.0 * cutoff_fraction * t;
    const double sinc = t == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
    h[j] = 2.0 * cutoff_fraction * sinc * window[j];
    sum += h[j];
  }
  for (auto& v : h) v /= sum;
  return h;
}

AudioClip decimate(const AudioClip& clip, int factor) {
  if (factor < 1) throw std::invalid_argument("decimate: factor must be >= 1");
  if (factor == 1) return clip;
  const auto f = static_cast<std::size_t>(factor);
  const std::size_t taps = 20 * f + 1;
  const auto h = lowpass_fir(0.45 / static_cast<double>(factor), taps);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(taps / 2);
  const auto n_in = static_cast<std::ptrdiff_t>(clip.samples.size());

  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz / factor;
  out.source_path = clip.source_path;
  out.samples.resize((clip.samples.size() + f - 1) / f);
  for (std::size_t o = 0; o < out.samples.size(); ++o) {
    const auto n = static_cast<std::ptrdiff_t>(o * f);
    double acc = 0.0;
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(taps); ++j) {
      const std::ptrdiff_t idx = n + j - half;
      if (idx >= 0 && idx < n_in) acc += h[static_cast<std::size_t>(j)] * clip.samples[idx];
    }
    out.samples[o] = acc;
  }
  return out;
}

}  // namespace serb::dsp
