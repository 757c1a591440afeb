#include "serb/audio_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace serb {
namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

WavChannels read_wav_channels(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(name, "file not found or unreadable");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw WavError(name, "not a RIFF/WAVE container");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw WavError(name, "truncated fmt chunk");
      std::uint16_t format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible && size >= 26) {
        format = read_u16(bytes.data() + body + 24);
      }
      if (format != kFormatPcm) {
        throw WavError(name, "unsupported codec (format tag " + std::to_string(format) +
                                 "), only PCM is accepted");
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > bytes.size()) {
        throw WavError(name, "truncated data chunk (header declares " + std::to_string(size) +
                                 " bytes, " + std::to_string(bytes.size() - body) + " present)");
      }
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) throw WavError(name, "missing fmt chunk");
  if (data == nullptr) throw WavError(name, "missing data chunk");
  if (bits != 16 && bits != 24) {
    throw WavError(name, "unsupported bit depth " + std::to_string(bits));
  }
  if (channels != 1 && channels != 2) {
    throw WavError(name, "unsupported channel count " + std::to_string(channels));
  }
  if (rate == 0) throw WavError(name, "sample rate is zero");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  if (data_size % frame_bytes != 0) {
    throw WavError(name, "truncated data chunk (partial sample frame)");
  }
  const std::size_t n = data_size / frame_bytes;
  if (n == 0) throw WavError(name, "data chunk holds no samples");

  WavChannels out;
  out.sample_rate_hz = static_cast<int>(rate);
  out.bits_per_sample = bits;
  out.channels.assign(channels, std::vector<double>(n));
  const double scale = 1.0 / static_cast<double>(1u << (bits - 1));

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + i * frame_bytes + c * bytes_per_sample;
      std::int32_t v;
      if (bits == 16) {
        v = static_cast<std::int16_t>(read_u16(p));
      } else {
        v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (v & 0x800000) v -= 0x1000000;
      }
      out.channels[c][i] = v * scale;
    }
  }
  return out;
}

AudioClip load_wav(const std::filesystem::path& path) {
  WavChannels wav = read_wav_channels(path);
  AudioClip clip;
  clip.sample_rate_hz = wav.sample_rate_hz;
  clip.source_path = path.string();
  if (wav.channels.size() == 1) {
    clip.samples = std::move(wav.channels[0]);
  } else {
    const auto& left = wav.channels[0];
    const auto& right = wav.channels[1];
    clip.samples.resize(left.size());
    for (std::size_t i = 0; i < left.size(); ++i) clip.samples[i] = 0.5 * (left[i] + right[i]);
  }
  return clip;
}

void write_wav16(const std::filesystem::path& path,
                 const std::vector<std::vector<double>>& channels, int sample_rate_hz) {
  if (channels.empty() || channels.size() > 2) {
    throw WavError(path.string(), "can only write 1 or 2 channels");
  }
  const std::size_t n = channels[0].size();
  for (const auto& ch : channels) {
    if (ch.size() != n) throw WavError(path.string(), "channel lengths differ");
  }
  if (sample_rate_hz <= 0) throw WavError(path.string(), "sample rate must be positive");

  const auto n_ch = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(n * n_ch * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, n_ch);
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(sample_rate_hz) * n_ch * 2);
  put_u16(out, static_cast<std::uint16_t>(n_ch * 2));
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& ch : channels) {
      const double scaled = std::clamp(std::round(ch[i] * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw WavError(path.string(), "cannot open for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw WavError(path.string(), "write failed");
}

}  // namespace serb
