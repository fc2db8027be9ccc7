#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "asc/bytes.hpp"
#include "asc/model_config.hpp"
#include "asc/weights.hpp"

namespace asc {

// Task limits: 128 KiB of parameter storage and 30 M multiply-accumulates per inference.
inline constexpr std::uint64_t kMemoryLimitBytes = 131072;
inline constexpr std::uint64_t kMacLimit = 30'000'000;

struct LayerCost {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  Shape output_shape;
};

struct CostBreakdown {
  std::uint64_t total = 0;
  std::vector<LayerCost> layers;
};

// MAC convention: one per kernel tap per output element, padding taps
// included. Pooling, activations, shuffles, SE gating and the GRU's
// elementwise gate products are free; matrix-vector products are not.
CostBreakdown count_params(const ModelConfig& cfg);
CostBreakdown count_macs(const ModelConfig& cfg);

/// param_count * bits / 8; bits must be 16 or 32.
std::uint64_t memory_bytes(std::uint64_t param_count, int precision_bits);

struct ComplexityReport {
  std::uint64_t param_count = 0;
  std::uint64_t mac_count = 0;
  int precision_bits = 16;
  std::uint64_t memory_bytes = 0;
  bool passes_memory = false;
  bool passes_macs = false;
  /// Largest single activation at 32-bit, reported but never gated.
  std::uint64_t peak_activation_bytes = 0;
  std::vector<LayerCost> layers;

  bool passes() const { return passes_memory && passes_macs; }
};

ComplexityReport audit(const ModelConfig& cfg, int precision_bits);
std::string report_to_json(const ComplexityReport& report);

// ---- 16-bit storage ----

struct HalfTensor {
  Shape shape;
  std::vector<std::uint16_t> bits;
  friend bool operator==(const HalfTensor&, const HalfTensor&) = default;
};

using QuantizedWeightStore = std::map<std::string, HalfTensor>;

/// Round-to-nearest-even per element. Throws QuantizationRangeError naming
/// the tensor when a value is non-finite or beyond +-65504.
QuantizedWeightStore quantize_f16(const WeightStore& weights);
WeightStore dequantize(const QuantizedWeightStore& q);

// ---- weights file ----
// Little-endian. Header (14 bytes): "SNTL" | version u8 = 1 | dtype u8 (0 f32,
// 1 f16) | reserved u16 = 0 | tensor_count u32 | 2 zero bytes. Per tensor:
// name_len u16 | name | ndim u8 | dims u32 x ndim | elements. Trailer: CRC32
// of everything before it.

enum class StorageType : std::uint8_t { kF32 = 0, kF16 = 1 };

Bytes save_weights(const WeightStore& weights, StorageType dtype);
Bytes save_weights(const QuantizedWeightStore& weights);

struct LoadedWeights {
  StorageType dtype = StorageType::kF32;
  WeightStore weights;            // f16 payloads widened exactly
  QuantizedWeightStore quantized;  // populated for f16 files only
};

/// Throws FormatError: bad magic, bad version, bad header, truncated,
/// duplicate name, trailing bytes, checksum mismatch.
LoadedWeights load_weights(std::span<const std::uint8_t> bytes);

std::uint32_t crc32(std::span<const std::uint8_t> data);

}  // namespace asc
