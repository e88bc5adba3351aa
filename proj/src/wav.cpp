#include "asyncmic/wav.hpp"

#include "asyncmic/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace asyncmic::wav {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFF));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

signal::AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw SchemaError(where + "not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw SchemaError(where + "truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw SchemaError(where + "fmt chunk too short");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) throw SchemaError(where + "extensible fmt chunk too short");
        format = read_u16(bytes.data() + body + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1U);
  }

  if (channels == 0 || rate == 0) throw SchemaError(where + "missing or invalid fmt chunk");
  if (data == nullptr) throw SchemaError(where + "missing data chunk");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw SchemaError(where + "unsupported sample format " + std::to_string(format) + "/" +
                      std::to_string(bits) + " bits (need PCM16 or float32)");
  }

  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * channels);
  signal::AudioClip clip;
  clip.sample_rate = rate;
  clip.channels.assign(channels, std::vector<double>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + (f * channels + c) * width;
      if (pcm16) {
        clip.channels[c][f] = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        clip.channels[c][f] = std::bit_cast<float>(read_u32(p));
      }
    }
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const signal::AudioClip& clip,
               SampleFormat format) {
  clip.validate();
  const auto channels = static_cast<std::uint16_t>(clip.channel_count());
  const std::uint16_t bits = format == SampleFormat::pcm16 ? 16 : 32;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  const std::uint32_t block = channels * (bits / 8);
  const auto frames = clip.frame_count();
  const auto data_size = static_cast<std::uint32_t>(frames * block);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format == SampleFormat::pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * block);
  put_u16(out, static_cast<std::uint16_t>(block));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_size);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = std::clamp(clip.channels[c][f], -1.0, 1.0);
      if (format == SampleFormat::pcm16) {
        const auto q = static_cast<std::int16_t>(std::lround(std::min(v * 32768.0, 32767.0)));
        put_u16(out, static_cast<std::uint16_t>(q));
      } else {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write " + tmp);
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace asyncmic::wav
