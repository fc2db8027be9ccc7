#include "asc/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "asc/error.hpp"
#include "asc/kernels.hpp"

namespace asc {

namespace {

constexpr double kMinLogHz = 1000.0;
constexpr double kLinearHzPerMel = 200.0 / 3.0;
constexpr double kMinLogMel = kMinLogHz / kLinearHzPerMel;
const double kLogStep = std::log(6.4) / 27.0;

}  // namespace

void FrontendConfig::validate() const {
  if (sample_rate_hz == 0) throw ConfigError("sample_rate_hz must be positive");
  if (n_fft == 0 || win_length == 0) throw ConfigError("n_fft and win_length must be positive");
  if (win_length > n_fft) throw ConfigError("win_length must not exceed n_fft");
  if (hop_length < 1) throw ConfigError("hop_length must be >= 1");
  if (n_mels < 2) throw ConfigError("n_mels must be >= 2");
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
  if (!(f_min_hz >= 0.0) || !(f_min_hz < f_max_hz) || f_max_hz > sample_rate_hz / 2.0) {
    throw ConfigError("need 0 <= f_min_hz < f_max_hz <= sample_rate_hz / 2");
  }
}

double hz_to_mel(double hz) {
  if (hz < kMinLogHz) return hz / kLinearHzPerMel;
  return kMinLogMel + std::log(hz / kMinLogHz) / kLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kMinLogMel) return mel * kLinearHzPerMel;
  return kMinLogHz * std::exp((mel - kMinLogMel) * kLogStep);
}

Tensor mel_filterbank(const FrontendConfig& cfg) {
  cfg.validate();
  const std::size_t bins = cfg.n_bins();
  const double lo = hz_to_mel(cfg.f_min_hz);
  const double hi = hz_to_mel(cfg.f_max_hz);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }
  Tensor fb({cfg.n_mels, bins});
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    const double norm = 2.0 / (right - left);
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate_hz / static_cast<double>(cfg.n_fft);
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      const double v = std::max(0.0, std::min(rise, fall));
      fb.at(m, k) = v * norm;
      any = any || v > 0.0;
    }
    if (!any) {
      throw ConfigError("mel filter " + std::to_string(m) + " covers no FFT bin; n_mels=" +
                        std::to_string(cfg.n_mels) + " is too large for n_fft=" + std::to_string(cfg.n_fft));
    }
  }
  return fb;
}

FeatureExtractor::FeatureExtractor(FrontendConfig cfg)
    : cfg_(cfg),
      melbank_(mel_filterbank(cfg)),
      window_(dsp::hann_window(cfg.win_length, cfg.n_fft)),
      plan_(cfg.n_fft) {}

namespace {

Tensor centered_power(const Waveform& wave, const FrontendConfig& cfg, std::span<const double> window,
                      const dsp::FftPlan& plan) {
  if (wave.sample_rate_hz != cfg.sample_rate_hz) {
    throw ConfigError("waveform sample rate " + std::to_string(wave.sample_rate_hz) +
                      " Hz does not match front-end rate " + std::to_string(cfg.sample_rate_hz) + " Hz");
  }
  if (wave.samples.empty()) throw InputError("waveform has no samples");
  for (std::size_t i = 0; i < wave.samples.size(); ++i) {
    if (!std::isfinite(wave.samples[i])) throw InputError("non-finite sample at index " + std::to_string(i));
  }
  const std::size_t n = wave.samples.size();
  const std::size_t pad = cfg.n_fft / 2;
  std::vector<double> padded(n + 2 * pad);
  for (std::size_t i = 0; i < padded.size(); ++i) {
    padded[i] = wave.samples[dsp::reflect_index(static_cast<long long>(i) - static_cast<long long>(pad), n)];
  }
  const kernels::StftDims dims{cfg.n_fft, cfg.hop_length, cfg.frames_for(n)};
  Tensor power({cfg.n_bins(), dims.frames});
  kernels::stft_power(padded, window, plan, power.data(), dims);
  return power;
}

}  // namespace

Tensor FeatureExtractor::power(const Waveform& wave) const { return centered_power(wave, cfg_, window_, plan_); }

FeatureMap FeatureExtractor::operator()(const Waveform& wave) const {
  const Tensor power = this->power(wave);
  Tensor mel = asc::matmul(melbank_, power);
  for (auto& v : mel.values()) v = std::log(std::max(v, cfg_.log_floor));
  return FeatureMap{std::move(mel), cfg_};
}

Tensor stft_power(const Waveform& wave, const FrontendConfig& cfg) {
  cfg.validate();
  const dsp::FftPlan plan(cfg.n_fft);
  return centered_power(wave, cfg, dsp::hann_window(cfg.win_length, cfg.n_fft), plan);
}

FeatureMap log_mel(const Waveform& wave, const FrontendConfig& cfg) { return FeatureExtractor(cfg)(wave); }

FeatureMap class_average(std::span<const FeatureMap> features) {
  if (features.empty()) throw InputError("class_average needs at least one feature map");
  const FeatureMap& first = features.front();
  Tensor sum(first.values.shape());
  for (const auto& f : features) {
    if (f.values.shape() != first.values.shape() || !(f.config == first.config)) {
      throw ShapeError("class_average inputs differ in shape or front-end config: " +
                       shape_to_string(f.values.shape()) + " vs " + shape_to_string(first.values.shape()));
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += f.values[i];
  }
  const double inv = 1.0 / static_cast<double>(features.size());
  for (auto& v : sum.values()) v *= inv;
  return FeatureMap{std::move(sum), first.config};
}

Bytes encode_melf(const Tensor& values) {
  if (values.rank() != 2) throw ShapeError("MELF stores rank-2 [n_mels x n_frames] tensors");
  ByteWriter w;
  w.text("MELF");
  w.u8(1);
  w.u32(static_cast<std::uint32_t>(values.dim(0)));
  w.u32(static_cast<std::uint32_t>(values.dim(1)));
  for (double v : values.values()) w.f32(static_cast<float>(v));
  return w.take();
}

Tensor decode_melf(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  std::string magic;
  std::uint8_t version = 0;
  std::uint32_t mels = 0, frames = 0;
  if (!r.text(4, magic)) throw FormatError(FormatError::Kind::kTruncated, "MELF shorter than its magic");
  if (magic != "MELF") throw FormatError(FormatError::Kind::kBadMagic, "not a MELF file");
  if (!r.u8(version)) throw FormatError(FormatError::Kind::kTruncated, "MELF header truncated");
  if (version != 1) throw FormatError(FormatError::Kind::kBadVersion, "unsupported MELF version " + std::to_string(version));
  if (!r.u32(mels) || !r.u32(frames)) throw FormatError(FormatError::Kind::kTruncated, "MELF header truncated");
  if (mels == 0 || frames == 0) throw FormatError(FormatError::Kind::kBadHeader, "MELF extents must be >= 1");
  const std::size_t count = static_cast<std::size_t>(mels) * frames;
  if (r.remaining() / 4 < count) throw FormatError(FormatError::Kind::kTruncated, "MELF payload truncated");
  if (r.remaining() != count * 4) throw FormatError(FormatError::Kind::kTrailingBytes, "MELF has trailing bytes");
  std::vector<double> data(count);
  for (auto& v : data) {
    float f = 0.0f;
    r.f32(f);
    v = f;
  }
  return Tensor({mels, frames}, std::move(data));
}

}  // namespace asc
