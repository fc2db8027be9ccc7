#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "asc/frontend.hpp"
#include "asc/tensor.hpp"

namespace asc {

/// One ConvT block: pointwise expansion, channel shuffle, depthwise 1D conv
/// along time, then depthwise 1D conv along frequency (multiplier, stride).
struct ConvTSpec {
  std::size_t in_channels = 0;
  double expand_ratio = 1.0;
  std::size_t dw_multiplier = 1;
  std::size_t time_kernel = 3;
  std::size_t freq_kernel = 3;
  std::size_t freq_stride = 1;

  /// round(in_channels * expand_ratio)
  std::size_t expanded_channels() const;
  std::size_t out_channels() const { return expanded_channels() * dw_multiplier; }

  friend bool operator==(const ConvTSpec&, const ConvTSpec&) = default;
};

enum class HeadFusion { kAdd, kConcat };

struct ModelConfig {
  static constexpr int kSchemaVersion = 1;
  /// Leading ConvT blocks followed by an SE block (the stem pool always has one).
  static constexpr std::size_t kSeBlocks = 2;

  std::size_t stem_out_channels = 12;
  std::vector<ConvTSpec> blocks;
  std::size_t se_reduction = 4;
  std::size_t shuffle_groups = 4;
  std::size_t gru_hidden = 112;
  HeadFusion head_fusion = HeadFusion::kAdd;
  std::size_t n_classes = 10;
  std::size_t input_mels = 256;
  std::size_t input_frames = 33;
  FrontendConfig frontend;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;

  std::size_t final_channels() const;
  bool has_se_after_block(std::size_t i) const { return i < kSeBlocks; }
  std::size_t head_width() const { return head_fusion == HeadFusion::kConcat ? 2 * gru_hidden : gru_hidden; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// The shipped configuration: 58,363 parameters, about 10.2 M MACs.
ModelConfig default_model_config();

std::string model_config_to_json(const ModelConfig& cfg);
/// Strict parse: unknown fields and a wrong schema_version are ConfigErrors.
ModelConfig model_config_from_json(const std::string& text);
ModelConfig load_model_config(const std::string& path);

enum class LayerKind { kStem, kHybridPool, kSqueezeExcite, kPointwise, kShuffle, kDepthwiseTime, kDepthwiseFreq,
                       kTimeMean, kGru, kBranchConv, kFusion, kHead };

/// A stage of the network with its input/output activation shapes, derived
/// from the config alone. The complexity auditor counts from this list and
/// the forward pass records the same names, so the two can be compared.
struct LayerShape {
  std::string name;
  LayerKind kind;
  Shape in_shape;
  Shape out_shape;
  std::size_t kernel = 0;      // depthwise kernels
  std::size_t multiplier = 1;  // depthwise frequency
  std::size_t stride = 1;      // depthwise frequency
};

std::vector<LayerShape> plan_layers(const ModelConfig& cfg);

/// Name and shape of every parameter tensor the config implies, in a fixed order.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& cfg);

}  // namespace asc
