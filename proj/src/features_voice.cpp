#include "serb/features_voice.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace serb::features {
namespace {

constexpr double kEps = 1e-10;
constexpr double kPi = std::numbers::pi;

double band_energy(const dsp::Spectrum& s, double lo, double hi) {
  double e = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double f = s.frequency(k);
    if (f >= lo && f < hi) e += s.magnitudes[k] * s.magnitudes[k];
  }
  return e;
}

double band_max(const dsp::Spectrum& s, double lo, double hi, bool closed = false) {
  double m = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double f = s.frequency(k);
    const bool inside = closed ? (f >= lo && f <= hi) : (f >= lo && f < hi);
    if (inside) m = std::max(m, s.magnitudes[k]);
  }
  return m;
}

/// Least-squares slope of 20 log10(m + eps) against frequency, in dB/Hz.
double band_slope(const dsp::Spectrum& s, double lo, double hi) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double f = s.frequency(k);
    if (f < lo || f >= hi) continue;
    const double y = 20.0 * std::log10(s.magnitudes[k] + kEps);
    sx += f;
    sy += y;
    sxx += f * f;
    sxy += f * y;
    ++n;
  }
  if (n < 2) return 0.0;
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  if (denom <= 0.0) return 0.0;
  return (dn * sxy - sx * sy) / denom;
}

/// Normalized cross-correlation between x[0..N-lag) and x[lag..N).
double normalized_xcorr(std::span<const double> x, std::size_t lag) {
  if (lag == 0 || lag >= x.size()) return 0.0;
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t n = 0; n + lag < x.size(); ++n) {
    xy += x[n] * x[n + lag];
    xx += x[n] * x[n];
    yy += x[n + lag] * x[n + lag];
  }
  const double denom = std::sqrt(xx * yy);
  return denom > 0.0 ? xy / denom : 0.0;
}

std::size_t argmax_in(std::span<const double> x, std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t i = lo + 1; i <= hi; ++i) {
    if (x[i] > x[best]) best = i;
  }
  return best;
}

/// Parabolic refinement of a sample peak: (position, amplitude).
std::pair<double, double> refine_peak(std::span<const double> x, std::size_t i) {
  if (i == 0 || i + 1 >= x.size()) return {static_cast<double>(i), x[i]};
  const double a = x[i - 1], b = x[i], c = x[i + 1];
  const double denom = a - 2.0 * b + c;
  if (!(denom < 0.0)) return {static_cast<double>(i), b};
  const double offset = 0.5 * (a - c) / denom;
  return {static_cast<double>(i) + offset, b - 0.25 * (a - c) * offset};
}

std::optional<std::vector<std::complex<double>>> lpc_roots(std::span<const double> coefficients) {
  const auto p = static_cast<Eigen::Index>(coefficients.size());
  if (p == 0) return std::vector<std::complex<double>>{};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) companion(0, j) = -coefficients[static_cast<std::size_t>(j)];
  for (Eigen::Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  if (solver.info() != Eigen::Success) return std::nullopt;
  std::vector<std::complex<double>> roots(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) roots[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
  return roots;
}

double lpc_envelope_db(std::span<const double> coefficients, double gain, double freq_hz,
                       double fs) {
  const double w = 2.0 * kPi * freq_hz / fs;
  std::complex<double> a(1.0, 0.0);
  for (std::size_t k = 0; k < coefficients.size(); ++k) {
    a += coefficients[k] * std::polar(1.0, -w * static_cast<double>(k + 1));
  }
  const double h = std::sqrt(std::max(gain, 0.0)) / std::max(std::abs(a), kEps);
  return 20.0 * std::log10(h + kEps);
}

}  // namespace

// ---------------------------------------------------------------- pitch

PitchEstimate f0_autocorrelation(std::span<const double> frame, double fs, double f0_min,
                                 double f0_max, double voicing_threshold, double silence_floor) {
  PitchEstimate out;
  const std::size_t n = frame.size();
  if (n < 4 || !(f0_min > 0.0 && f0_max > f0_min)) return out;

  double r0 = 0.0;
  for (double v : frame) r0 += v * v;
  if (!(r0 / static_cast<double>(n) > silence_floor)) return out;

  const auto lag_min = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fs / f0_max)));
  const auto lag_max =
      std::min<std::size_t>(static_cast<std::size_t>(std::ceil(fs / f0_min)), n - 2);
  if (lag_min >= lag_max) return out;

  auto r = dsp::autocorr(frame, lag_max + 1);
  for (auto& v : r) v /= r0;

  // Highest interior local maximum; a curve still falling at lag_min is not a period.
  std::size_t best = 0;
  for (std::size_t l = std::max<std::size_t>(lag_min, 1); l <= lag_max; ++l) {
    if (r[l] > r[l - 1] && r[l] >= r[l + 1] && (best == 0 || r[l] > r[best])) best = l;
  }
  if (best == 0) return out;
  out.peak_correlation = r[best];
  if (!(r[best] >= voicing_threshold)) return out;

  const double lag = refine_peak(r, best).first;
  out.f0_hz = std::clamp(fs / lag, f0_min, f0_max);
  out.voiced = true;
  return out;
}

// ---------------------------------------------------------------- jitter / shimmer

PeriodMarks find_period_marks(std::span<const double> region, double fs,
                              std::span<const double> f0_track, std::size_t track_hop,
                              double search_rel) {
  PeriodMarks marks;
  if (region.size() < 3 || f0_track.empty() || track_hop == 0) return marks;

  auto period_at = [&](double pos) -> double {
    auto idx = static_cast<std::size_t>(std::max(0.0, pos) / static_cast<double>(track_hop));
    idx = std::min(idx, f0_track.size() - 1);
    const double f0 = f0_track[idx];
    return f0 > 0.0 ? fs / f0 : 0.0;
  };

  const std::size_t last = region.size() - 1;
  double period = period_at(0.0);
  if (period < 2.0) return marks;
  const auto first_hi = std::min(last, static_cast<std::size_t>(std::ceil(period)) - 1);
  std::size_t peak = argmax_in(region, 0, first_hi);
  auto [pos, amp] = refine_peak(region, peak);
  marks.positions.push_back(pos);
  marks.amplitudes.push_back(amp);

  while (true) {
    period = period_at(static_cast<double>(peak));
    if (period < 2.0) break;
    const auto lo = static_cast<std::size_t>(std::ceil(static_cast<double>(peak) +
                                                       (1.0 - search_rel) * period));
    const auto hi = static_cast<std::size_t>(std::floor(static_cast<double>(peak) +
                                                        (1.0 + search_rel) * period));
    if (hi > last || lo > hi) break;
    peak = argmax_in(region, lo, hi);
    std::tie(pos, amp) = refine_peak(region, peak);
    marks.positions.push_back(pos);
    marks.amplitudes.push_back(amp);
  }
  return marks;
}

JitterShimmer jitter_shimmer(const PeriodMarks& marks) {
  JitterShimmer out;
  if (marks.positions.size() < 2) return out;
  out.n_periods = marks.positions.size() - 1;
  if (out.n_periods < 3) return out;

  std::vector<double> periods(out.n_periods);
  for (std::size_t i = 0; i < out.n_periods; ++i) {
    periods[i] = marks.positions[i + 1] - marks.positions[i];
  }
  const double mean_period =
      std::accumulate(periods.begin(), periods.end(), 0.0) / static_cast<double>(periods.size());
  double dp = 0.0;
  for (std::size_t i = 1; i < periods.size(); ++i) dp += std::abs(periods[i] - periods[i - 1]);
  dp /= static_cast<double>(periods.size() - 1);

  const auto& amps = marks.amplitudes;
  double mean_amp = 0.0;
  for (double a : amps) mean_amp += std::abs(a);
  mean_amp /= static_cast<double>(amps.size());
  double da = 0.0;
  for (std::size_t i = 1; i < amps.size(); ++i) da += std::abs(std::abs(amps[i]) - std::abs(amps[i - 1]));
  da /= static_cast<double>(amps.size() - 1);

  out.jitter = mean_period > 0.0 ? dp / mean_period : 0.0;
  out.shimmer = mean_amp > 0.0 ? da / mean_amp : 0.0;
  out.sufficient = true;
  return out;
}

JitterShimmer jitter_shimmer(std::span<const double> region, double fs,
                             std::span<const double> f0_track, std::size_t track_hop,
                             double search_rel) {
  return jitter_shimmer(find_period_marks(region, fs, f0_track, track_hop, search_rel));
}

// ---------------------------------------------------------------- HNR

double hnr_from_correlation(double r, double limit_db) {
  const double c = std::clamp(r, 1e-6, 1.0 - 1e-6);
  return std::clamp(10.0 * std::log10(c / (1.0 - c)), -limit_db, limit_db);
}

double hnr(std::span<const double> frame, double fs, double f0_hz, double limit_db) {
  if (!(f0_hz > 0.0)) return -limit_db;
  const auto lag = static_cast<std::size_t>(std::lround(fs / f0_hz));
  if (lag < 2 || lag + 2 >= frame.size()) return -limit_db;
  double best = normalized_xcorr(frame, lag);
  best = std::max(best, normalized_xcorr(frame, lag - 1));
  best = std::max(best, normalized_xcorr(frame, lag + 1));
  return hnr_from_correlation(best, limit_db);
}

// ---------------------------------------------------------------- spectral measures

BandMeasures band_measures(const dsp::Spectrum& spectrum) {
  BandMeasures b;
  double total = 0.0;
  for (double m : spectrum.magnitudes) total += m * m;
  b.intensity_db = 10.0 * std::log10(total + kEps);
  b.alpha_ratio_db = 10.0 * std::log10((band_energy(spectrum, 50.0, 1000.0) + kEps) /
                                       (band_energy(spectrum, 1000.0, 5000.0) + kEps));
  b.hammarberg_db = 20.0 * std::log10((band_max(spectrum, 0.0, 2000.0) + kEps) /
                                      (band_max(spectrum, 2000.0, 5000.0) + kEps));
  b.slope_0_500 = band_slope(spectrum, 0.0, 500.0);
  b.slope_500_1500 = band_slope(spectrum, 500.0, 1500.0);
  return b;
}

HarmonicDiffs harmonic_diffs(const dsp::Spectrum& spectrum, double f0_hz, double f3_hz) {
  HarmonicDiffs out;
  if (!(f0_hz > 0.0)) return out;
  out.voiced = true;
  const double h1 = band_max(spectrum, f0_hz - f0_hz / 4.0, f0_hz + f0_hz / 4.0, true);
  const double h2 = band_max(spectrum, 2.0 * f0_hz - f0_hz / 4.0, 2.0 * f0_hz + f0_hz / 4.0, true);
  out.h1_h2_db = 20.0 * std::log10((h1 + kEps) / (h2 + kEps));
  if (f3_hz > 0.0) {
    const double a3 = band_max(spectrum, f3_hz - f0_hz / 2.0, f3_hz + f0_hz / 2.0, true);
    out.h1_a3_db = 20.0 * std::log10((h1 + kEps) / (a3 + kEps));
  }
  return out;
}

// ---------------------------------------------------------------- formants

FormantResult formants(std::span<const double> frame, double fs, const VoiceConfig& config) {
  FormantResult out;
  if (frame.size() < config.lpc_order + 2) return out;

  const auto window = dsp::hamming_window(frame.size());
  std::vector<double> x(frame.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = frame[i] * window[i];

  std::optional<dsp::LpcResult> model;
  std::vector<std::complex<double>> roots;
  bool stable = false;
  for (std::size_t order : {config.lpc_order, config.lpc_fallback_order}) {
    model = dsp::lpc(x, order);
    if (!model) return out;
    auto found = lpc_roots(model->coefficients);
    if (!found) continue;
    stable = std::all_of(found->begin(), found->end(),
                         [](const std::complex<double>& z) { return std::abs(z) < 1.0; });
    if (stable) {
      roots = std::move(*found);
      break;
    }
  }
  if (!stable) {
    out.unstable = true;
    return out;
  }

  std::vector<Formant> candidates;
  for (const auto& z : roots) {
    if (z.imag() <= 1e-12) continue;
    const double freq = std::arg(z) * fs / (2.0 * kPi);
    const double bw = -(fs / kPi) * std::log(std::abs(z));
    if (freq < config.formant_min_hz || freq > config.formant_max_hz) continue;
    if (!(bw < config.formant_max_bw_hz)) continue;
    candidates.push_back({freq, bw, 0.0});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Formant& a, const Formant& b) { return a.frequency_hz < b.frequency_hz; });

  out.n_found = std::min<std::size_t>(3, candidates.size());
  for (std::size_t i = 0; i < out.n_found; ++i) {
    out.formants[i] = candidates[i];
    out.formants[i].amplitude_db =
        lpc_envelope_db(model->coefficients, model->gain, candidates[i].frequency_hz, fs);
  }
  out.missing = out.n_found < 3;
  return out;
}

AudioClip prepare_formant_signal(const AudioClip& clip, const VoiceConfig& config) {
  const int factor = std::max(
      1, static_cast<int>(std::lround(clip.sample_rate_hz / config.formant_rate_hz)));
  AudioClip low = dsp::decimate(clip, factor);
  low.samples = dsp::pre_emphasis(low.samples, config.pre_emphasis);
  return low;
}

// ---------------------------------------------------------------- assembly

std::vector<double> assemble_gemaps_frame(const BandMeasures& bands, double flux,
                                          std::span<const double> mfcc4,
                                          const PitchEstimate& pitch, const JitterShimmer& js,
                                          double hnr_db, const HarmonicDiffs& harmonics,
                                          const FormantResult& formant) {
  if (mfcc4.size() != 4) throw std::invalid_argument("assemble_gemaps_frame: need 4 MFCCs");
  const auto& f = formant.formants;
  std::vector<double> out = {
      bands.intensity_db, bands.alpha_ratio_db, bands.hammarberg_db, bands.slope_0_500,
      bands.slope_500_1500, flux, mfcc4[0], mfcc4[1], mfcc4[2], mfcc4[3],
      pitch.voiced ? pitch.f0_hz : 0.0, js.jitter, js.shimmer, hnr_db, harmonics.h1_h2_db,
      harmonics.h1_a3_db, f[0].frequency_hz, f[0].bandwidth_hz, f[0].amplitude_db,
      f[1].frequency_hz, f[1].amplitude_db, f[2].frequency_hz, f[2].amplitude_db};
  return out;
}

std::vector<std::string> gemaps_column_names() {
  return {"intensity_db", "alpha_ratio_db", "hammarberg_db", "slope_0_500",  "slope_500_1500",
          "spectral_flux", "mfcc_1",        "mfcc_2",        "mfcc_3",       "mfcc_4",
          "f0_hz",        "jitter",         "shimmer",       "hnr_db",       "h1_h2_db",
          "h1_a3_db",     "f1_hz",          "f1_bw_hz",      "f1_amp_db",    "f2_hz",
          "f2_amp_db",    "f3_hz",          "f3_amp_db"};
}

VoiceExtractor::VoiceExtractor(int sample_rate_hz, VoiceConfig voice, SpectralConfig spectral)
    : voice_(voice),
      spectral_(spectral),
      sample_rate_hz_(sample_rate_hz),
      win_(static_cast<std::size_t>(std::lround(spectral.frame_len_s * sample_rate_hz))),
      hop_(static_cast<std::size_t>(std::lround(spectral.hop_s * sample_rate_hz))),
      analyzer_(win_, spectral.nfft == 0 ? default_nfft(win_) : spectral.nfft,
                sample_rate_hz) {
  mel40_ = dsp::mel_filterbank(analyzer_.nfft(), sample_rate_hz, 40, 0.0, sample_rate_hz / 2.0,
                               spectral.mel_norm);
}

FrameMatrix VoiceExtractor::extract(const AudioClip& clip) const {
  if (clip.sample_rate_hz != sample_rate_hz_) {
    throw std::invalid_argument("VoiceExtractor: clip rate differs from extractor rate");
  }
  const double fs = sample_rate_hz_;
  const std::size_t n = dsp::frame_count(clip.samples.size(), win_, hop_);

  const AudioClip low = prepare_formant_signal(clip, voice_);
  const double low_fs = low.sample_rate_hz;
  const auto low_win = static_cast<std::size_t>(std::lround(spectral_.frame_len_s * low_fs));
  const auto low_hop = static_cast<std::size_t>(std::lround(spectral_.hop_s * low_fs));

  std::vector<dsp::Spectrum> spectra(n);
  std::vector<PitchEstimate> pitch(n);
  std::vector<FormantResult> formant(n);
  std::vector<double> frame;
  std::vector<double> low_frame;
  for (std::size_t i = 0; i < n; ++i) {
    dsp::copy_frame(clip.samples, i, win_, hop_, frame);
    spectra[i] = analyzer_.analyze(frame);
    pitch[i] = f0_autocorrelation(frame, fs, voice_.f0_min_hz, voice_.f0_max_hz,
                                  voice_.voicing_threshold, voice_.silence_floor);
    dsp::copy_frame(low.samples, i, low_win, low_hop, low_frame);
    formant[i] = formants(low_frame, low_fs, voice_);
  }

  // Contiguous voiced runs give the sample span usable for period tracking.
  std::vector<std::size_t> run_start(n, 0);
  std::vector<std::size_t> run_end(n, 0);
  for (std::size_t i = 0; i < n;) {
    if (!pitch[i].voiced) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && pitch[j].voiced) ++j;
    for (std::size_t k = i; k < j; ++k) {
      run_start[k] = i;
      run_end[k] = j;
    }
    i = j;
  }

  const auto context = static_cast<std::size_t>(std::lround(voice_.jitter_window_s * fs / 2.0));
  FrameMatrix m(n, kGemapsWidth, gemaps_column_names());
  m.frame_hop_s = spectral_.hop_s;
  m.frame_len_s = spectral_.frame_len_s;

  for (std::size_t i = 0; i < n; ++i) {
    const auto bands = band_measures(spectra[i]);
    const double flux =
        i == 0 ? 0.0 : stft_stats(spectra[i], &spectra[i - 1], spectral_.rolloff_fraction).flux;
    const auto cepstrum = mfcc(spectra[i], mel40_, 4);

    JitterShimmer js;
    double hnr_db = -voice_.hnr_limit_db;
    if (pitch[i].voiced) {
      dsp::copy_frame(clip.samples, i, win_, hop_, frame);
      hnr_db = hnr(frame, fs, pitch[i].f0_hz, voice_.hnr_limit_db);

      const std::size_t seg_lo = run_start[i] * hop_;
      const std::size_t seg_hi = std::min(clip.samples.size(), (run_end[i] - 1) * hop_ + win_);
      const std::size_t center = i * hop_ + win_ / 2;
      const std::size_t lo = std::max(seg_lo, center > context ? center - context : 0);
      const std::size_t hi = std::min(seg_hi, center + context);
      if (hi > lo + 2) {
        std::vector<double> track;
        for (std::size_t pos = lo; pos < hi; pos += hop_) {
          std::size_t fi = pos >= win_ / 2 ? (pos - win_ / 2 + hop_ / 2) / hop_ : 0;
          fi = std::clamp(fi, run_start[i], run_end[i] - 1);
          track.push_back(pitch[fi].f0_hz);
        }
        const std::span<const double> region(clip.samples.data() + lo, hi - lo);
        js = jitter_shimmer(region, fs, track, hop_, voice_.period_search_rel);
      }
    }
    const auto harmonics =
        harmonic_diffs(spectra[i], pitch[i].voiced ? pitch[i].f0_hz : 0.0,
                       formant[i].formants[2].frequency_hz);
    const auto row =
        assemble_gemaps_frame(bands, flux, cepstrum, pitch[i], js, hnr_db, harmonics, formant[i]);
    std::copy(row.begin(), row.end(), m.row(i).begin());
  }
  return m;
}

}  // namespace serb::features
