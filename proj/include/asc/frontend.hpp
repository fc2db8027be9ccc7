#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "asc/bytes.hpp"
#include "asc/dsp.hpp"
#include "asc/tensor.hpp"
#include "asc/wav.hpp"

namespace asc {

/// STFT / mel parameters. Defaults give a [256 x 33] feature for one second
/// of 44.1 kHz audio: 8192-point frames every 1364 samples.
struct FrontendConfig {
  std::uint32_t sample_rate_hz = 44100;
  std::size_t n_fft = 8192;
  std::size_t win_length = 8192;
  std::size_t hop_length = 1364;
  std::size_t n_mels = 256;
  double f_min_hz = 0.0;
  double f_max_hz = 22050.0;
  double log_floor = 1e-10;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  std::size_t n_bins() const { return n_fft / 2 + 1; }
  /// 1 + floor(samples / hop): frames produced by the centered STFT.
  std::size_t frames_for(std::size_t samples) const { return 1 + samples / hop_length; }

  friend bool operator==(const FrontendConfig&, const FrontendConfig&) = default;
};

/// Log-mel spectrogram, values [n_mels x n_frames].
struct FeatureMap {
  Tensor values;
  FrontendConfig config;

  std::size_t n_mels() const { return values.dim(0); }
  std::size_t n_frames() const { return values.dim(1); }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;
};

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Centered (reflect-padded) power spectrogram, [(n_fft/2+1) x n_frames].
Tensor stft_power(const Waveform& wave, const FrontendConfig& cfg);
/// Area-normalised triangular filters, [n_mels x (n_fft/2+1)].
Tensor mel_filterbank(const FrontendConfig& cfg);
/// ln(max(mel x power, floor)).
FeatureMap log_mel(const Waveform& wave, const FrontendConfig& cfg);
/// Elementwise mean of same-shaped features (per-scene averages).
FeatureMap class_average(std::span<const FeatureMap> features);

/// Precomputed window, FFT plan and filterbank for repeated extraction.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FrontendConfig cfg);

  const FrontendConfig& config() const noexcept { return cfg_; }
  const Tensor& filterbank() const noexcept { return melbank_; }
  Tensor power(const Waveform& wave) const;
  FeatureMap operator()(const Waveform& wave) const;

 private:
  FrontendConfig cfg_;
  Tensor melbank_;  // built first: validates cfg
  std::vector<double> window_;
  dsp::FftPlan plan_;
};

// MELF feature file: "MELF", version 0x01, u32 n_mels, u32 n_frames, then
// n_mels*n_frames little-endian f32 values, frequency-major.
Bytes encode_melf(const Tensor& values);
/// Throws FormatError on bad magic/version/extents or a size mismatch.
Tensor decode_melf(std::span<const std::uint8_t> bytes);

}  // namespace asc
