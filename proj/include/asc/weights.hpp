#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "asc/model_config.hpp"
#include "asc/tensor.hpp"

namespace asc {

/// Named parameter tensors, keyed by dotted path ("block0.pw.weight").
using WeightStore = std::map<std::string, Tensor>;

/// Glorot-uniform kernels, zero biases, orthogonal GRU recurrent matrices.
WeightStore init_weights(const ModelConfig& cfg, std::uint64_t seed);

/// Every tensor the config implies, filled with zeros.
WeightStore zero_weights(const ModelConfig& cfg);

/// Throws ConfigError naming the first missing, misshapen or unexpected tensor.
void validate_weights(const ModelConfig& cfg, const WeightStore& weights);

std::size_t total_elements(const WeightStore& weights);

}  // namespace asc
