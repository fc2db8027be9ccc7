#include "asc/wav.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "asc/error.hpp"

namespace asc {

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw DecodeError(DecodeError::Kind::kMalformedHeader, "malformed WAV: " + what);
}

struct Format {
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

Format parse_fmt(ByteReader chunk, std::uint32_t size) {
  std::uint16_t tag = 0, block_align = 0;
  std::uint32_t byte_rate = 0;
  Format fmt;
  if (size < 16 || !chunk.u16(tag) || !chunk.u16(fmt.channels) || !chunk.u32(fmt.sample_rate) ||
      !chunk.u32(byte_rate) || !chunk.u16(block_align) || !chunk.u16(fmt.bits)) {
    malformed("fmt chunk shorter than 16 bytes");
  }
  if (tag == 0xFFFE) {
    std::uint16_t cb = 0, valid = 0, sub = 0;
    std::uint32_t mask = 0;
    if (size < 40 || !chunk.u16(cb) || !chunk.u16(valid) || !chunk.u32(mask) || !chunk.u16(sub)) {
      malformed("truncated WAVE_FORMAT_EXTENSIBLE fmt chunk");
    }
    tag = sub;
  }
  if (tag != 1) {
    throw DecodeError(DecodeError::Kind::kUnsupportedCodec,
                      "unsupported WAV codec tag " + std::to_string(tag) + " (only integer PCM)");
  }
  if (fmt.bits != 16 && fmt.bits != 24) {
    throw DecodeError(DecodeError::Kind::kUnsupportedCodec,
                      "unsupported PCM bit depth " + std::to_string(fmt.bits) + " (16 or 24 only)");
  }
  if (fmt.channels == 0) malformed("zero channels");
  if (fmt.sample_rate == 0) malformed("zero sample rate");
  return fmt;
}

}  // namespace

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  std::string riff, wave;
  std::uint32_t riff_size = 0;
  if (!r.text(4, riff) || !r.u32(riff_size) || !r.text(4, wave)) malformed("shorter than RIFF header");
  if (riff != "RIFF" || wave != "WAVE") malformed("missing RIFF/WAVE signature");

  bool have_fmt = false;
  Format fmt;
  while (r.remaining() >= 8) {
    std::string id;
    std::uint32_t size = 0;
    r.text(4, id);
    r.u32(size);
    if (id == "fmt ") {
      if (r.remaining() < size) malformed("fmt chunk overruns file");
      fmt = parse_fmt(ByteReader(r.view(size)), size);
      have_fmt = true;
      r.skip(size);
    } else if (id == "data") {
      if (!have_fmt) malformed("data chunk before fmt chunk");
      const std::size_t width = fmt.bits / 8;
      const std::size_t frame = width * fmt.channels;
      if (r.remaining() < size) {
        throw DecodeError(DecodeError::Kind::kTruncatedData,
                          "WAV data chunk declares " + std::to_string(size) + " bytes but only " +
                              std::to_string(r.remaining()) + " remain");
      }
      if (size == 0 || size % frame != 0) {
        throw DecodeError(DecodeError::Kind::kTruncatedData,
                          "WAV data chunk size " + std::to_string(size) + " is not a positive whole number of frames");
      }
      const auto payload = r.view(size);
      const std::size_t frames = size / frame;
      const double scale = 1.0 / static_cast<double>(1u << (fmt.bits - 1));
      Waveform out;
      out.sample_rate_hz = fmt.sample_rate;
      out.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < fmt.channels; ++ch) {
          const std::uint8_t* p = payload.data() + i * frame + ch * width;
          std::int32_t v = 0;
          if (fmt.bits == 16) {
            v = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0] | (p[1] << 8)));
          } else {
            std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                              (static_cast<std::uint32_t>(p[2]) << 16);
            if (u & 0x800000u) u |= 0xFF000000u;
            v = static_cast<std::int32_t>(u);
          }
          acc += static_cast<double>(v) * scale;
        }
        out.samples[i] = fmt.channels == 1 ? acc : acc / fmt.channels;
      }
      return out;
    } else {
      if (!r.skip(size)) malformed("chunk '" + id + "' overruns file");
    }
    if (size % 2 == 1) r.skip(1);
  }
  malformed(have_fmt ? "no data chunk" : "no fmt chunk");
}

Bytes encode_wav(const Waveform& wave, int bits) {
  if (bits != 16 && bits != 24) throw ConfigError("WAV encoder supports 16 or 24 bits");
  const std::uint32_t width = static_cast<std::uint32_t>(bits) / 8;
  const auto data_size = static_cast<std::uint32_t>(wave.samples.size() * width);
  ByteWriter w;
  w.text("RIFF");
  w.u32(36 + data_size);
  w.text("WAVE");
  w.text("fmt ");
  w.u32(16);
  w.u16(1);
  w.u16(1);
  w.u32(wave.sample_rate_hz);
  w.u32(wave.sample_rate_hz * width);
  w.u16(static_cast<std::uint16_t>(width));
  w.u16(static_cast<std::uint16_t>(bits));
  w.text("data");
  w.u32(data_size);
  const double full = static_cast<double>(1u << (bits - 1));
  for (double s : wave.samples) {
    const double q = std::clamp(std::nearbyint(s * full), -full, full - 1.0);
    const auto v = static_cast<std::uint32_t>(static_cast<std::int32_t>(q));
    w.u8(static_cast<std::uint8_t>(v));
    w.u8(static_cast<std::uint8_t>(v >> 8));
    if (bits == 24) w.u8(static_cast<std::uint8_t>(v >> 16));
  }
  return w.take();
}

}  // namespace asc
