#include <cmath>
#include <cstring>
#include <numeric>

#include "asc/budget.hpp"
#include "asc/error.hpp"
#include "asc/half.hpp"
#include "asc/model.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace asc;

namespace {

ModelConfig single_block(std::size_t cin, std::size_t cout_expand) {
  ModelConfig cfg = oracle::tiny_config();
  cfg.stem_out_channels = cin;
  cfg.blocks = {ConvTSpec{cin, static_cast<double>(cout_expand) / static_cast<double>(cin), 1, 3, 3, 1}};
  return cfg;
}

const LayerCost& layer(const CostBreakdown& b, const std::string& name) {
  for (const auto& l : b.layers)
    if (l.name == name) return l;
  FAIL("no layer " << name);
  throw 0;
}

}  // namespace

TEST_CASE("parameter formulas by hand") {
  ModelConfig cfg = oracle::tiny_config();
  cfg.input_mels = 16;
  cfg.frontend.n_mels = 16;
  cfg.input_frames = 4;
  cfg.gru_hidden = 2;
  cfg.stem_out_channels = 4;
  cfg.blocks = {ConvTSpec{4, 2.0, 1, 3, 3, 2}};
  // pool -> 8 x 2, stride 2 -> F' = 4
  const auto p = count_params(cfg);
  CHECK(layer(p, "gru").params == 42);
  CHECK(layer(p, "block0.pw").params == 40);
  CHECK(layer(p, "stem").params == 4 * 9 + 4);
  CHECK(layer(p, "se0").params == 4 * 2 * 2 + 2 + 4);
  CHECK(layer(p, "branch").params == 8);
  CHECK(layer(p, "head").params == 2 * 10 + 10);
  CHECK(layer(p, "block0.shuffle").params == 0);
  CHECK(layer(p, "pool").params == 0);
}

TEST_CASE("MAC formulas by hand") {
  ModelConfig cfg = oracle::tiny_config();
  cfg.input_mels = 32;
  cfg.frontend.n_mels = 32;
  cfg.input_frames = 16;
  cfg.stem_out_channels = 4;
  cfg.blocks = {ConvTSpec{4, 2.0, 1, 3, 3, 1}};
  // pool -> 16 x 8
  const auto m = count_macs(cfg);
  CHECK(layer(m, "block0.pw").macs == 4096);
  CHECK(layer(m, "block0.dw_time").macs == 8 * 3 * 16 * 8);
  CHECK(layer(m, "pool").macs == 0);
  CHECK(layer(m, "block0.shuffle").macs == 0);

  ModelConfig small = oracle::tiny_config();
  small.input_mels = 8;
  small.input_frames = 10;
  small.stem_out_channels = 2;
  small.shuffle_groups = 2;
  small.blocks = {ConvTSpec{2, 1.0, 1, 3, 3, 1}};
  // pool -> 4 x 5: depthwise time C=2, k=3, F=4, T=5
  CHECK(layer(count_macs(small), "block0.dw_time").macs == 120);
}

TEST_CASE("memory_bytes") {
  CHECK(memory_bytes(58470, 16) == 116940);
  CHECK(memory_bytes(0, 16) == 0);
  CHECK(memory_bytes(65536, 16) == kMemoryLimitBytes);
  CHECK(memory_bytes(10, 32) == 40);
  CHECK_THROWS_AS(memory_bytes(10, 8), ConfigError);
}

TEST_CASE("default config fits the budget") {
  const auto r = audit(default_model_config(), 16);
  CHECK(r.passes_memory);
  CHECK(r.passes_macs);
  CHECK(r.param_count <= 65536);
  CHECK(r.memory_bytes == r.param_count * 2);
  std::uint64_t p = 0, m = 0;
  for (const auto& l : r.layers) {
    p += l.params;
    m += l.macs;
  }
  CHECK(p == r.param_count);
  CHECK(m == r.mac_count);
}

TEST_CASE("oversized stem fails the memory gate") {
  ModelConfig cfg = default_model_config();
  cfg.stem_out_channels = 512;
  cfg.blocks[0].in_channels = 512;
  cfg.blocks[0].expand_ratio = 24.0 / 512.0;
  const auto r = audit(cfg, 16);
  CHECK_FALSE(r.passes_memory);
  CHECK_FALSE(r.passes());
}

TEST_CASE("count_params equals the elements the initializer allocates") {
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const ModelConfig cfg = oracle::random_small_config(rng);
    CHECK(count_params(cfg).total == total_elements(init_weights(cfg, i)));
  }
  CHECK(count_params(default_model_config()).total == total_elements(init_weights(default_model_config(), 0)));
}

TEST_CASE("count_macs equals an instrumented forward pass") {
  Rng rng(2024);
  for (int i = 0; i < 8; ++i) {
    const ModelConfig cfg = oracle::random_small_config(rng);
    const WeightStore w = oracle::random_weights(cfg, rng, 0.3);
    const Tensor x = oracle::random_tensor({cfg.input_mels, cfg.input_frames}, rng);
    const auto counted = oracle::counted_forward(cfg, w, x);
    CHECK(count_macs(cfg).total == counted.macs);
    const Tensor logits = forward(cfg, w, x);
    for (std::size_t k = 0; k < logits.size(); ++k) CHECK(logits[k] == doctest::Approx(counted.logits[k]).epsilon(1e-10));
  }
}

TEST_CASE("audited shapes match the shapes forward produces") {
  const ModelConfig cfg = default_model_config();
  const auto trace = run_network(cfg, zero_weights(cfg), Tensor({cfg.input_mels, cfg.input_frames}));
  const auto stages = trace.stage_shapes();
  const auto report = audit(cfg, 16);
  REQUIRE(stages.size() == report.layers.size());
  for (std::size_t i = 0; i < stages.size(); ++i) {
    CHECK(stages[i].first == report.layers[i].name);
    CHECK(stages[i].second == report.layers[i].output_shape);
  }
}

TEST_CASE("binary16 conversion") {
  CHECK(half_to_double(double_to_half(0.5)) == 0.5);
  CHECK(half_to_double(double_to_half(0.1)) == 0.0999755859375);
  CHECK(half_to_double(double_to_half(65504.0)) == 65504.0);
  CHECK(half_to_double(double_to_half(-0.0)) == 0.0);
  CHECK(std::signbit(half_to_double(double_to_half(-0.0))));
  CHECK(half_to_double(double_to_half(std::ldexp(1.0, -24))) == std::ldexp(1.0, -24));
  CHECK(half_to_double(double_to_half(std::ldexp(1.0, -26))) == 0.0);

  Rng rng(77);
  for (int i = 0; i < 300; ++i) {
    const double x = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.uniform_int(0, 40)) - 28);
    CHECK(half_to_double(double_to_half(x)) == oracle::nearest_half(x));
  }
  // ties: 1 + 2^-11 is halfway between 1 and 1 + 2^-10 and goes to the even 1
  CHECK(half_to_double(double_to_half(1.0 + std::ldexp(1.0, -11))) == 1.0);
  CHECK(half_to_double(double_to_half(1.0 + 3 * std::ldexp(1.0, -11))) == 1.0 + std::ldexp(1.0, -9));
}

TEST_CASE("quantize_f16 round trip") {
  const ModelConfig cfg = default_model_config();
  const WeightStore w = init_weights(cfg, 1);
  const QuantizedWeightStore q = quantize_f16(w);
  const WeightStore d = dequantize(q);
  for (const auto& [name, t] : w) {
    const Tensor& back = d.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (std::fabs(t[i]) >= std::ldexp(1.0, -14)) CHECK(std::fabs(back[i] - t[i]) <= std::ldexp(std::fabs(t[i]), -11));
    }
  }
  CHECK(quantize_f16(d) == q);
  CHECK(dequantize(quantize_f16(d)) == d);

  WeightStore bad{{"big", Tensor({2}, {1.0, 70000.0})}};
  try {
    quantize_f16(bad);
    FAIL("expected a range error");
  } catch (const QuantizationRangeError& e) {
    CHECK(e.tensor() == "big");
  }
  WeightStore nan{{"n", Tensor({1}, {std::nan("")})}};
  CHECK_THROWS_AS(quantize_f16(nan), QuantizationRangeError);
}

TEST_CASE("weights file layout") {
  const WeightStore one{{"head.b", Tensor({10})}};
  const Bytes f = save_weights(one, StorageType::kF32);
  // header + (name_len + name + ndim + one dim) + data + crc
  CHECK(f.size() == 14 + (2 + 6 + 1 + 4) + 40 + 4);
  CHECK(std::memcmp(f.data(), "SNTL", 4) == 0);
  CHECK(f[4] == 1);
  CHECK(f[5] == 0);
  CHECK(f[8] == 1);

  const Bytes empty = save_weights(WeightStore{}, StorageType::kF32);
  CHECK(empty.size() == 18);
  CHECK(load_weights(empty).weights.empty());
}

TEST_CASE("weights file round trips bit-exactly") {
  Rng rng(4);
  WeightStore w;
  w["a"] = Tensor({3, 4});
  for (double& v : w["a"].values()) v = static_cast<float>(rng.normal());
  w["b.c"] = Tensor({2}, {-0.0, static_cast<double>(1e-40f)});
  const LoadedWeights l = load_weights(save_weights(w, StorageType::kF32));
  CHECK(l.dtype == StorageType::kF32);
  REQUIRE(l.weights.size() == 2);
  for (const auto& [name, t] : w) {
    const Tensor& u = l.weights.at(name);
    REQUIRE(u.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::memcmp(&u.data()[i], &t.data()[i], sizeof(double)) == 0);
  }
  const QuantizedWeightStore q = quantize_f16(init_weights(oracle::tiny_config(), 3));
  const LoadedWeights lq = load_weights(save_weights(q));
  CHECK(lq.dtype == StorageType::kF16);
  CHECK(lq.quantized == q);
  CHECK(lq.weights == dequantize(q));
}

TEST_CASE("every single corrupted byte is detected") {
  const Bytes good = save_weights(quantize_f16(init_weights(oracle::tiny_config(), 5)));
  for (std::size_t i = 0; i < good.size(); ++i) {
    Bytes bad = good;
    bad[i] ^= 0x5a;
    CHECK_THROWS_AS(load_weights(bad), FormatError);
  }
  // Past the magic and version bytes every flip is caught by the CRC.
  for (std::size_t i = 5; i < good.size(); ++i) {
    Bytes bad = good;
    bad[i] ^= 0x01;
    try {
      load_weights(bad);
      FAIL("byte " << i << " not detected");
    } catch (const FormatError& e) {
      CHECK(e.kind() == FormatError::Kind::kChecksum);
    }
  }
}

TEST_CASE("weights loader error kinds") {
  const Bytes good = save_weights(WeightStore{{"x", Tensor({2})}}, StorageType::kF32);
  const auto kind_of = [](const Bytes& b) {
    try {
      load_weights(b);
    } catch (const FormatError& e) {
      return e.kind();
    }
    FAIL("no error");
    throw 0;
  };
  Bytes b = good;
  b[0] = 'X';
  CHECK(kind_of(b) == FormatError::Kind::kBadMagic);
  b = good;
  b[4] = 2;
  CHECK(kind_of(b) == FormatError::Kind::kBadVersion);
  CHECK(kind_of(Bytes(good.begin(), good.begin() + 12)) == FormatError::Kind::kTruncated);
  const auto resealed = [](Bytes body) {
    const std::uint32_t crc = crc32(body);
    for (int i = 0; i < 4; ++i) body.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    return body;
  };
  CHECK(kind_of(resealed(Bytes(good.begin(), good.begin() + 20))) == FormatError::Kind::kTruncated);
  CHECK(kind_of(Bytes(good.begin(), good.end() - 3)) == FormatError::Kind::kChecksum);
  Bytes extra(good.begin(), good.end() - 4);
  extra.push_back(0);
  CHECK(kind_of(resealed(extra)) == FormatError::Kind::kTrailingBytes);

  // Two entries with the same name under a valid checksum.
  ByteWriter w;
  w.text("SNTL");
  w.u8(1);
  w.u8(0);
  w.u16(0);
  w.u32(2);
  w.u16(0);
  for (int i = 0; i < 2; ++i) {
    w.u16(1);
    w.text("x");
    w.u8(1);
    w.u32(1);
    w.f32(1.0f);
  }
  CHECK(kind_of(resealed(w.take())) == FormatError::Kind::kDuplicateName);
}

TEST_CASE("report json carries the totals") {
  const auto r = audit(default_model_config(), 16);
  const std::string j = report_to_json(r);
  CHECK(j.find("\"mac_count\": " + std::to_string(r.mac_count)) != std::string::npos);
  CHECK(j.find("\"passes_memory\": true") != std::string::npos);
}
