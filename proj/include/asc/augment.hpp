#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "asc/frontend.hpp"
#include "asc/rng.hpp"
#include "asc/wav.hpp"

namespace asc {

struct AugmentConfig {
  std::size_t fm_max_width = 64;  // mel bins
  std::size_t fm_num_masks = 1;
  double fm_prob = 1.0;
  double fms_alpha = 0.3;
  double fms_prob = 0.4;
  double dir_prob = 0.6;

  /// Throws ConfigError. `n_mels` bounds fm_max_width when non-zero.
  void validate(std::size_t n_mels = 0) const;
};

struct RowRange {
  std::size_t start;
  std::size_t width;
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

struct FreqMaskResult {
  FeatureMap feature;
  std::vector<RowRange> masks;  // every mask drawn, including zero-width ones
};

/// Overwrites rows [start, start+width) with `fill`.
FeatureMap apply_freq_mask(const FeatureMap& feat, RowRange rows, double fill);

/// SpecAugment-style frequency masking. With probability fm_prob, draws
/// fm_num_masks masks (width uniform in 0..fm_max_width, start uniform in
/// 0..n_mels-width) and fills them with the feature's global mean.
FreqMaskResult freq_mask(const FeatureMap& feat, Rng& rng, const AugmentConfig& cfg);

/// Per-row (frequency) mean and population standard deviation across time.
struct RowStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};
RowStats frequency_stats(const Tensor& values);

/// Deterministic core of Freq-MixStyle: sample i takes the statistics
/// lambda[i]*own + (1-lambda[i])*batch[perm[i]]. sigma is floored at 1e-5.
std::vector<FeatureMap> mix_frequency_styles(std::span<const FeatureMap> batch, std::span<const double> lambda,
                                             std::span<const std::size_t> perm);

/// Freq-MixStyle: one gate draw per batch (fms_prob), then a random
/// permutation and per-sample lambda ~ Beta(fms_alpha, fms_alpha).
std::vector<FeatureMap> freq_mixstyle(std::span<const FeatureMap> batch, Rng& rng, const AugmentConfig& cfg);

/// Linear convolution truncated to the input length, rescaled so the peak
/// magnitude matches the input's.
Waveform convolve_impulse_response(const Waveform& wave, const Waveform& ir);

/// Device impulse response augmentation, applied with probability dir_prob.
Waveform dir_convolve(const Waveform& wave, const Waveform& ir, Rng& rng, const AugmentConfig& cfg);

/// WAV files in `dir`, sorted by filename.
std::vector<std::string> list_impulse_responses(const std::string& dir);
/// Uniform choice of an index into a list of `count` impulse responses.
std::size_t pick_impulse_response(std::size_t count, Rng& rng);

}  // namespace asc
