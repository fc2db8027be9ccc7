#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "asc/bytes.hpp"

namespace asc {

struct Waveform {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  std::uint32_t sample_rate_hz = 44100;

  friend bool operator==(const Waveform&, const Waveform&) = default;
};

/// Decodes a RIFF/WAVE container holding 16- or 24-bit integer PCM.
/// Samples are scaled by 2^-(bits-1); channels are averaged to mono.
/// Throws DecodeError (malformed header, unsupported codec, truncated data).
Waveform decode_wav(std::span<const std::uint8_t> bytes);

/// Mono PCM WAV, 16 or 24 bits, with the canonical 44-byte header.
/// Samples are clamped to the representable range and rounded to nearest.
Bytes encode_wav(const Waveform& wave, int bits = 24);

}  // namespace asc
