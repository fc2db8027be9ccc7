#include "asc/budget.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include <zlib.h>

#include "asc/error.hpp"
#include "asc/half.hpp"
#include "json.hpp"

namespace asc {

namespace {

std::vector<LayerCost> layer_costs(const ModelConfig& cfg) {
  std::vector<LayerCost> out;
  const std::uint64_t r = cfg.se_reduction;
  for (const LayerShape& l : plan_layers(cfg)) {
    LayerCost c{l.name, 0, 0, l.out_shape};
    const Shape& in = l.in_shape;
    const Shape& o = l.out_shape;
    switch (l.kind) {
      case LayerKind::kStem:
        c.params = in[0] * o[0] * 9 + o[0];
        c.macs = 9 * in[0] * o[0] * o[1] * o[2];
        break;
      case LayerKind::kSqueezeExcite: {
        const std::uint64_t ch = in[0], hidden = ch / r;
        c.params = ch * hidden * 2 + hidden + ch;
        c.macs = ch * hidden * 2;
        break;
      }
      case LayerKind::kPointwise:
        c.params = in[0] * o[0] + o[0];
        c.macs = in[0] * o[0] * o[1] * o[2];
        break;
      case LayerKind::kDepthwiseTime:
        c.params = in[0] * l.kernel;
        c.macs = in[0] * l.kernel * o[1] * o[2];
        break;
      case LayerKind::kDepthwiseFreq:
        c.params = in[0] * l.multiplier * l.kernel;
        c.macs = in[0] * l.multiplier * l.kernel * o[1] * o[2];
        break;
      case LayerKind::kGru: {
        const std::uint64_t steps = in[0], f = in[1], h = o[1];
        c.params = 3 * (f * h + h * h + h);
        c.macs = steps * 3 * (f * h + h * h);
        break;
      }
      case LayerKind::kBranchConv:
        c.params = in[1] * o[1];
        c.macs = in[0] * in[1] * o[1];
        break;
      case LayerKind::kHead:
        c.params = in[1] * o[0] + o[0];
        c.macs = in[1] * o[0];
        break;
      case LayerKind::kHybridPool:
      case LayerKind::kShuffle:
      case LayerKind::kTimeMean:
      case LayerKind::kFusion:
        break;
    }
    out.push_back(std::move(c));
  }
  return out;
}

CostBreakdown summed(std::vector<LayerCost> layers, bool params) {
  CostBreakdown b;
  for (const auto& l : layers) b.total += params ? l.params : l.macs;
  b.layers = std::move(layers);
  return b;
}

}  // namespace

CostBreakdown count_params(const ModelConfig& cfg) { return summed(layer_costs(cfg), true); }
CostBreakdown count_macs(const ModelConfig& cfg) { return summed(layer_costs(cfg), false); }

std::uint64_t memory_bytes(std::uint64_t param_count, int precision_bits) {
  if (precision_bits != 16 && precision_bits != 32) {
    throw ConfigError("precision must be 16 or 32 bits, got " + std::to_string(precision_bits));
  }
  return param_count * static_cast<std::uint64_t>(precision_bits) / 8;
}

ComplexityReport audit(const ModelConfig& cfg, int precision_bits) {
  ComplexityReport rep;
  rep.precision_bits = precision_bits;
  rep.layers = layer_costs(cfg);
  for (const auto& l : rep.layers) {
    rep.param_count += l.params;
    rep.mac_count += l.macs;
    rep.peak_activation_bytes = std::max<std::uint64_t>(rep.peak_activation_bytes, shape_numel(l.output_shape) * 4);
  }
  rep.memory_bytes = memory_bytes(rep.param_count, precision_bits);
  rep.passes_memory = rep.memory_bytes <= kMemoryLimitBytes;
  rep.passes_macs = rep.mac_count <= kMacLimit;
  return rep;
}

std::string report_to_json(const ComplexityReport& r) {
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"name", l.name}, {"params", l.params}, {"macs", l.macs}, {"output_shape", l.output_shape}});
  }
  nlohmann::ordered_json j = {{"param_count", r.param_count},
                              {"mac_count", r.mac_count},
                              {"precision_bits", r.precision_bits},
                              {"memory_bytes", r.memory_bytes},
                              {"memory_kib", static_cast<double>(r.memory_bytes) / 1024.0},
                              {"memory_limit_bytes", kMemoryLimitBytes},
                              {"mac_limit", kMacLimit},
                              {"passes_memory", r.passes_memory},
                              {"passes_macs", r.passes_macs},
                              {"peak_activation_bytes", r.peak_activation_bytes},
                              {"layers", layers}};
  return j.dump(2) + "\n";
}

QuantizedWeightStore quantize_f16(const WeightStore& weights) {
  QuantizedWeightStore q;
  for (const auto& [name, t] : weights) {
    HalfTensor h{t.shape(), std::vector<std::uint16_t>(t.size())};
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double v = t[i];
      if (!std::isfinite(v) || std::fabs(v) > kHalfMax) {
        throw QuantizationRangeError(name, "tensor '" + name + "' element " + std::to_string(i) + " = " +
                                               std::to_string(v) + " is outside the binary16 range (|x| <= 65504)");
      }
      h.bits[i] = double_to_half(v);
    }
    q.emplace(name, std::move(h));
  }
  return q;
}

WeightStore dequantize(const QuantizedWeightStore& q) {
  WeightStore w;
  for (const auto& [name, h] : q) {
    std::vector<double> data(h.bits.size());
    std::transform(h.bits.begin(), h.bits.end(), data.begin(), half_to_double);
    w.emplace(name, Tensor(h.shape, std::move(data)));
  }
  return w;
}

std::uint32_t crc32(std::span<const std::uint8_t> data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, data.data(), static_cast<uInt>(data.size()));
  return static_cast<std::uint32_t>(crc);
}

namespace {

constexpr std::size_t kHeaderBytes = 14;

void write_header(ByteWriter& w, StorageType dtype, std::size_t count) {
  w.text("SNTL");
  w.u8(1);
  w.u8(static_cast<std::uint8_t>(dtype));
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(count));
  w.u16(0);
}

void write_entry_header(ByteWriter& w, const std::string& name, const Shape& shape) {
  if (name.empty() || name.size() > 65535) throw InputError("tensor name must be 1..65535 bytes: '" + name + "'");
  if (shape.size() > 255) throw ShapeError("tensor '" + name + "' has more than 255 dimensions");
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.text(name);
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) {
    if (d > 0xFFFFFFFFull) throw ShapeError("tensor '" + name + "' extent exceeds 32 bits");
    w.u32(static_cast<std::uint32_t>(d));
  }
}

Bytes finish(ByteWriter& w) {
  const std::uint32_t crc = crc32(w.buffer());
  w.u32(crc);
  return w.take();
}

[[noreturn]] void fail(FormatError::Kind k, const std::string& what) { throw FormatError(k, "weights file: " + what); }

}  // namespace

Bytes save_weights(const WeightStore& weights, StorageType dtype) {
  if (dtype == StorageType::kF16) return save_weights(quantize_f16(weights));
  ByteWriter w;
  write_header(w, dtype, weights.size());
  for (const auto& [name, t] : weights) {
    write_entry_header(w, name, t.shape());
    for (double v : t.values()) w.f32(static_cast<float>(v));
  }
  return finish(w);
}

Bytes save_weights(const QuantizedWeightStore& weights) {
  ByteWriter w;
  write_header(w, StorageType::kF16, weights.size());
  for (const auto& [name, h] : weights) {
    write_entry_header(w, name, h.shape);
    for (auto b : h.bits) w.u16(b);
  }
  return finish(w);
}

LoadedWeights load_weights(std::span<const std::uint8_t> bytes) {
  using K = FormatError::Kind;
  ByteReader r(bytes);
  std::string magic;
  if (!r.text(4, magic)) fail(K::kTruncated, "shorter than the magic");
  if (magic != "SNTL") fail(K::kBadMagic, "bad magic (expected SNTL)");
  std::uint8_t version = 0, dtype = 0;
  std::uint16_t reserved = 0, pad = 0;
  std::uint32_t count = 0;
  if (!r.u8(version)) fail(K::kTruncated, "header truncated");
  if (version != 1) fail(K::kBadVersion, "unsupported version " + std::to_string(version));
  if (!r.u8(dtype) || !r.u16(reserved) || !r.u32(count) || !r.u16(pad)) fail(K::kTruncated, "header truncated");
  if (bytes.size() < kHeaderBytes + 4) fail(K::kTruncated, "missing checksum");
  // Checked before the table is parsed so that any corrupted byte, including
  // one in a name or dimension, is reported as a checksum failure.
  const std::size_t body_end = bytes.size() - 4;
  {
    ByteReader tail(bytes.subspan(body_end));
    std::uint32_t stored = 0;
    tail.u32(stored);
    if (crc32(bytes.first(body_end)) != stored) fail(K::kChecksum, "CRC32 mismatch");
  }
  if (dtype > 1) fail(K::kBadHeader, "unknown dtype " + std::to_string(dtype));
  if (reserved != 0 || pad != 0) fail(K::kBadHeader, "reserved header bytes are not zero");

  LoadedWeights out;
  out.dtype = static_cast<StorageType>(dtype);
  const std::size_t width = out.dtype == StorageType::kF32 ? 4 : 2;
  // The structure must end exactly 4 bytes (the CRC) before end of file.
  const auto need = [&](std::size_t n) {
    if (r.position() + n > body_end) fail(K::kTruncated, "tensor table runs past end of file");
  };
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t name_len = 0;
    need(2);
    r.u16(name_len);
    std::string name;
    need(name_len);
    r.text(name_len, name);
    if (!seen.insert(name).second) fail(K::kDuplicateName, "duplicate tensor name '" + name + "'");
    std::uint8_t ndim = 0;
    need(1);
    r.u8(ndim);
    if (ndim == 0) fail(K::kBadHeader, "tensor '" + name + "' has zero dimensions");
    Shape shape(ndim);
    std::size_t numel = 1;
    for (auto& d : shape) {
      std::uint32_t v = 0;
      need(4);
      r.u32(v);
      if (v == 0) fail(K::kBadHeader, "tensor '" + name + "' has a zero extent");
      d = v;
      if (numel > (body_end / width) / v + 1) fail(K::kTruncated, "tensor '" + name + "' larger than the file");
      numel *= v;
    }
    need(numel * width);
    std::vector<double> data(numel);
    if (out.dtype == StorageType::kF32) {
      for (auto& v : data) {
        float f = 0.0f;
        r.f32(f);
        v = f;
      }
    } else {
      HalfTensor h{shape, std::vector<std::uint16_t>(numel)};
      for (std::size_t k = 0; k < numel; ++k) {
        r.u16(h.bits[k]);
        data[k] = half_to_double(h.bits[k]);
      }
      out.quantized.emplace(name, std::move(h));
    }
    out.weights.emplace(name, Tensor(std::move(shape), std::move(data)));
  }
  if (r.position() != body_end) fail(K::kTrailingBytes, "unexpected bytes after the tensor table");
  return out;
}

}  // namespace asc
