#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace serb {

/// Decoded mono waveform. Samples are in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 0;
  std::string source_path;

  double duration_s() const {
    return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

class WavError : public std::runtime_error {
 public:
  WavError(const std::string& path, const std::string& cause)
      : std::runtime_error(path + ": " + cause), path_(path), cause_(cause) {}

  const std::string& path() const { return path_; }
  const std::string& cause() const { return cause_; }

 private:
  std::string path_;
  std::string cause_;
};

/// Per-channel samples before mono reduction, scaled by 2^(bits-1).
struct WavChannels {
  std::vector<std::vector<double>> channels;
  int sample_rate_hz = 0;
  int bits_per_sample = 0;
};

/// Reads a RIFF/WAVE PCM file (16- or 24-bit, mono or stereo).
WavChannels read_wav_channels(const std::filesystem::path& path);

/// Loads a PCM WAV file and reduces it to mono by averaging the channels.
/// Throws WavError naming the path and the cause on any decode failure.
AudioClip load_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM. Each channel is quantized with rounding and clipped
/// to the representable range; all channels must have equal length.
void write_wav16(const std::filesystem::path& path,
                 const std::vector<std::vector<double>>& channels, int sample_rate_hz);

inline void write_wav16(const std::filesystem::path& path, const AudioClip& clip) {
  write_wav16(path, {clip.samples}, clip.sample_rate_hz);
}

}  // namespace serb
