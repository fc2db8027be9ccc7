#include "asc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "asc/dsp.hpp"
#include "asc/error.hpp"

namespace asc {

namespace {

constexpr double kSigmaFloor = 1e-5;

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
}

double peak(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

void AugmentConfig::validate(std::size_t n_mels) const {
  check_probability(fm_prob, "fm_prob");
  check_probability(fms_prob, "fms_prob");
  check_probability(dir_prob, "dir_prob");
  if (!(fms_alpha > 0.0)) throw ConfigError("fms_alpha must be positive");
  if (n_mels != 0 && fm_max_width > n_mels) {
    throw ConfigError("fm_max_width " + std::to_string(fm_max_width) + " exceeds n_mels " + std::to_string(n_mels));
  }
}

FeatureMap apply_freq_mask(const FeatureMap& feat, RowRange rows, double fill) {
  if (rows.start + rows.width > feat.n_mels()) throw ShapeError("mask rows exceed the feature's mel extent");
  FeatureMap out = feat;
  const std::size_t frames = feat.n_frames();
  for (std::size_t f = rows.start; f < rows.start + rows.width; ++f) {
    for (std::size_t t = 0; t < frames; ++t) out.values.at(f, t) = fill;
  }
  return out;
}

FreqMaskResult freq_mask(const FeatureMap& feat, Rng& rng, const AugmentConfig& cfg) {
  cfg.validate(feat.n_mels());
  FreqMaskResult result{feat, {}};
  if (!rng.bernoulli(cfg.fm_prob)) return result;
  double mean = 0.0;
  for (double v : feat.values.values()) mean += v;
  mean /= static_cast<double>(feat.values.size());
  for (std::size_t i = 0; i < cfg.fm_num_masks; ++i) {
    const auto width = static_cast<std::size_t>(rng.uniform_int(0, cfg.fm_max_width));
    const auto start = static_cast<std::size_t>(rng.uniform_int(0, feat.n_mels() - width));
    result.masks.push_back({start, width});
    if (width > 0) result.feature = apply_freq_mask(result.feature, {start, width}, mean);
  }
  return result;
}

RowStats frequency_stats(const Tensor& values) {
  const std::size_t rows = values.dim(0), cols = values.dim(1);
  RowStats s{std::vector<double>(rows), std::vector<double>(rows)};
  for (std::size_t f = 0; f < rows; ++f) {
    double mean = 0.0;
    for (std::size_t t = 0; t < cols; ++t) mean += values.at(f, t);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t t = 0; t < cols; ++t) {
      const double d = values.at(f, t) - mean;
      var += d * d;
    }
    s.mean[f] = mean;
    s.stddev[f] = std::sqrt(var / static_cast<double>(cols));
  }
  return s;
}

std::vector<FeatureMap> mix_frequency_styles(std::span<const FeatureMap> batch, std::span<const double> lambda,
                                             std::span<const std::size_t> perm) {
  if (batch.empty()) throw InputError("freq_mixstyle needs a non-empty batch");
  if (lambda.size() != batch.size() || perm.size() != batch.size()) {
    throw ShapeError("lambda and permutation must have one entry per batch element");
  }
  const Shape& shape = batch.front().values.shape();
  std::vector<RowStats> stats;
  stats.reserve(batch.size());
  for (const auto& f : batch) {
    if (f.values.shape() != shape) throw ShapeError("freq_mixstyle batch has mixed shapes");
    stats.push_back(frequency_stats(f.values));
  }
  std::vector<FeatureMap> out(batch.begin(), batch.end());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (perm[i] >= batch.size()) throw InputError("permutation index out of range");
    const RowStats& own = stats[i];
    const RowStats& other = stats[perm[i]];
    const double l = lambda[i];
    Tensor& v = out[i].values;
    for (std::size_t f = 0; f < shape[0]; ++f) {
      const double mu = own.mean[f];
      const double sigma = std::max(own.stddev[f], kSigmaFloor);
      const double mu_mix = l * own.mean[f] + (1.0 - l) * other.mean[f];
      const double sigma_mix = l * own.stddev[f] + (1.0 - l) * other.stddev[f];
      for (std::size_t t = 0; t < shape[1]; ++t) {
        const double x = batch[i].values.at(f, t);
        // lambda == 1 must restore the input exactly, without the round trip.
        v.at(f, t) = l == 1.0 ? x : (x - mu) / sigma * sigma_mix + mu_mix;
      }
    }
  }
  return out;
}

std::vector<FeatureMap> freq_mixstyle(std::span<const FeatureMap> batch, Rng& rng, const AugmentConfig& cfg) {
  if (batch.empty()) throw InputError("freq_mixstyle needs a non-empty batch");
  cfg.validate();
  if (!rng.bernoulli(cfg.fms_prob)) return {batch.begin(), batch.end()};
  const auto perm = rng.permutation(batch.size());
  std::vector<double> lambda(batch.size());
  for (auto& l : lambda) l = rng.beta(cfg.fms_alpha, cfg.fms_alpha);
  return mix_frequency_styles(batch, lambda, perm);
}

Waveform convolve_impulse_response(const Waveform& wave, const Waveform& ir) {
  if (wave.sample_rate_hz != ir.sample_rate_hz) {
    throw ConfigError("impulse response rate " + std::to_string(ir.sample_rate_hz) +
                      " Hz differs from waveform rate " + std::to_string(wave.sample_rate_hz) + " Hz");
  }
  if (peak(ir.samples) == 0.0) throw InputError("impulse response is all zeros");
  auto full = dsp::convolve(wave.samples, ir.samples);
  full.resize(wave.samples.size());
  const double in_peak = peak(wave.samples);
  const double out_peak = peak(full);
  Waveform out{std::move(full), wave.sample_rate_hz};
  if (out_peak > 0.0 && in_peak != out_peak) {
    const double scale = in_peak / out_peak;
    for (auto& s : out.samples) s *= scale;
  }
  return out;
}

Waveform dir_convolve(const Waveform& wave, const Waveform& ir, Rng& rng, const AugmentConfig& cfg) {
  cfg.validate();
  if (wave.sample_rate_hz != ir.sample_rate_hz) {
    throw ConfigError("impulse response rate " + std::to_string(ir.sample_rate_hz) +
                      " Hz differs from waveform rate " + std::to_string(wave.sample_rate_hz) + " Hz");
  }
  if (peak(ir.samples) == 0.0) throw InputError("impulse response is all zeros");
  if (!rng.bernoulli(cfg.dir_prob)) return wave;
  return convolve_impulse_response(wave, ir);
}

std::vector<std::string> list_impulse_responses(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw InputError("impulse response directory not found: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end(), [](const std::string& a, const std::string& b) {
    return fs::path(a).filename() < fs::path(b).filename();
  });
  if (files.empty()) throw InputError("no .wav impulse responses in " + dir);
  return files;
}

std::size_t pick_impulse_response(std::size_t count, Rng& rng) {
  if (count == 0) throw InputError("no impulse responses to choose from");
  return static_cast<std::size_t>(rng.uniform_int(0, count - 1));
}

}  // namespace asc
