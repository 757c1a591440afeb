#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <fstream>

#include "serb/audio_io.hpp"
#include "support.hpp"

using serb::load_wav;
using serb::WavError;

namespace {

// Minimal RIFF writer independent of the library, so decoding is checked
// against bytes we lay out by hand.
struct RawWav {
  std::uint16_t format = 1;
  std::uint16_t channels = 1;
  std::uint32_t rate = 48000;
  std::uint16_t bits = 16;
  std::vector<std::uint8_t> data;
  bool truncate_data = false;
  bool skip_fmt = false;
};

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back(v >> 8);
}
void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

void write_raw(const std::filesystem::path& p, const RawWav& w) {
  std::vector<std::uint8_t> b = {'R', 'I', 'F', 'F', 0, 0, 0, 0, 'W', 'A', 'V', 'E'};
  if (!w.skip_fmt) {
    b.insert(b.end(), {'f', 'm', 't', ' '});
    put32(b, 16);
    put16(b, w.format);
    put16(b, w.channels);
    put32(b, w.rate);
    put32(b, w.rate * w.channels * w.bits / 8);
    put16(b, static_cast<std::uint16_t>(w.channels * w.bits / 8));
    put16(b, w.bits);
  }
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put32(b, static_cast<std::uint32_t>(w.data.size()));
  b.insert(b.end(), w.data.begin(), w.data.end());
  if (w.truncate_data) b.resize(b.size() - 3);
  const auto riff = static_cast<std::uint32_t>(b.size() - 8);
  for (int i = 0; i < 4; ++i) b[4 + i] = (riff >> (8 * i)) & 0xff;
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()),
                                           static_cast<std::streamsize>(b.size()));
}

std::vector<std::uint8_t> pcm16(std::initializer_list<int> v) {
  std::vector<std::uint8_t> b;
  for (int s : v) put16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
  return b;
}

}  // namespace

TEST_CASE("16-bit silence decodes to zeros") {
  testing::TempDir dir;
  RawWav w;
  w.data = pcm16({0, 0, 0, 0, 0, 0});
  write_raw(dir.path() / "z.wav", w);
  const auto clip = load_wav(dir.path() / "z.wav");
  CHECK(clip.sample_rate_hz == 48000);
  REQUIRE(clip.samples.size() == 6);
  for (double s : clip.samples) CHECK(s == 0.0);
}

TEST_CASE("stereo 16384 pair averages to exactly 0.5") {
  testing::TempDir dir;
  RawWav w;
  w.channels = 2;
  w.data = pcm16({16384, 16384, 16384, 16384});
  write_raw(dir.path() / "s.wav", w);
  const auto clip = load_wav(dir.path() / "s.wav");
  REQUIRE(clip.samples.size() == 2);
  CHECK(clip.samples[0] == 0.5);
  CHECK(clip.samples[1] == 0.5);
}

TEST_CASE("24-bit full scale sample") {
  testing::TempDir dir;
  RawWav w;
  w.bits = 24;
  // 8388607 and -8388608, little-endian 3-byte packing.
  w.data = {0xff, 0xff, 0x7f, 0x00, 0x00, 0x80};
  write_raw(dir.path() / "h.wav", w);
  const auto clip = load_wav(dir.path() / "h.wav");
  REQUIRE(clip.samples.size() == 2);
  CHECK(clip.samples[0] == doctest::Approx(8388607.0 / 8388608.0).epsilon(1e-15));
  CHECK(clip.samples[0] == doctest::Approx(0.99999988).epsilon(1e-8));
  CHECK(clip.samples[1] == -1.0);
}

TEST_CASE("decode errors name the path and cause") {
  testing::TempDir dir;
  SUBCASE("missing file") {
    try {
      load_wav(dir.path() / "nope.wav");
      FAIL("expected WavError");
    } catch (const WavError& e) {
      CHECK(e.path().find("nope.wav") != std::string::npos);
      CHECK(!e.cause().empty());
    }
  }
  SUBCASE("non-PCM codec") {
    RawWav w;
    w.format = 3;  // IEEE float
    w.bits = 32;
    w.data.assign(8, 0);
    write_raw(dir.path() / "f.wav", w);
    CHECK_THROWS_WITH_AS(load_wav(dir.path() / "f.wav"), doctest::Contains("codec"), WavError);
  }
  SUBCASE("unsupported depth") {
    RawWav w;
    w.bits = 8;
    w.data.assign(4, 128);
    write_raw(dir.path() / "e.wav", w);
    CHECK_THROWS_WITH_AS(load_wav(dir.path() / "e.wav"), doctest::Contains("bit depth"), WavError);
  }
  SUBCASE("truncated data chunk") {
    RawWav w;
    w.data = pcm16({1, 2, 3, 4});
    w.truncate_data = true;
    write_raw(dir.path() / "t.wav", w);
    CHECK_THROWS_WITH_AS(load_wav(dir.path() / "t.wav"), doctest::Contains("truncated"), WavError);
  }
  SUBCASE("missing fmt") {
    RawWav w;
    w.skip_fmt = true;
    w.data = pcm16({1, 2});
    write_raw(dir.path() / "m.wav", w);
    CHECK_THROWS_AS(load_wav(dir.path() / "m.wav"), WavError);
  }
}

TEST_CASE("16-bit round trip within one quantization step") {
  testing::TempDir dir;
  auto x = testing::white_noise(4000, 3, 0.9);
  serb::write_wav16(dir.path() / "r.wav", {x}, 22050);
  const auto clip = load_wav(dir.path() / "r.wav");
  REQUIRE(clip.samples.size() == x.size());
  CHECK(clip.sample_rate_hz == 22050);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(clip.samples[i] - x[i]));
  CHECK(worst <= 1.0 / 32768.0);
  for (double s : clip.samples) CHECK(std::abs(s) <= 1.0 + 1e-6);
}

TEST_CASE("stereo load equals the average of per-channel loads") {
  testing::TempDir dir;
  const auto l = testing::white_noise(1000, 5, 0.8);
  const auto r = testing::white_noise(1000, 6, 0.8);
  serb::write_wav16(dir.path() / "st.wav", {l, r}, 48000);
  serb::write_wav16(dir.path() / "l.wav", {l}, 48000);
  serb::write_wav16(dir.path() / "r.wav", {r}, 48000);
  const auto st = load_wav(dir.path() / "st.wav");
  const auto lc = load_wav(dir.path() / "l.wav");
  const auto rc = load_wav(dir.path() / "r.wav");
  for (std::size_t i = 0; i < st.samples.size(); ++i) {
    CHECK(st.samples[i] == doctest::Approx(0.5 * (lc.samples[i] + rc.samples[i])).epsilon(1e-9));
  }
}

TEST_CASE("writer clips out-of-range samples") {
  testing::TempDir dir;
  serb::write_wav16(dir.path() / "c.wav", {{2.0, -2.0}}, 8000);
  const auto clip = load_wav(dir.path() / "c.wav");
  CHECK(clip.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(clip.samples[1] == -1.0);
}
