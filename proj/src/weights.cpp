#include "asc/weights.hpp"

#include <cmath>

#include <Eigen/QR>

#include "asc/error.hpp"
#include "asc/rng.hpp"

namespace asc {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_bias(const std::string& name) { return ends_with(name, ".bias") || name.rfind("gru.b_", 0) == 0; }

// fan_in / fan_out of a kernel tensor, following the shapes in parameter_shapes().
std::pair<double, double> fans(const std::string& name, const Shape& s, const ModelConfig& cfg) {
  if (s.size() == 4) return {static_cast<double>(s[1] * 9), static_cast<double>(s[0] * 9)};
  if (ends_with(name, ".dw_time.weight")) return {double(s[1]), double(s[1])};
  if (ends_with(name, ".dw_freq.weight")) {
    // Input channel c feeds `multiplier` output rows.
    const std::size_t block = std::stoul(name.substr(5, name.find('.') - 5));
    const double m = static_cast<double>(cfg.blocks.at(block).dw_multiplier);
    return {double(s[1]), m * double(s[1])};
  }
  return {double(s[1]), double(s[0])};
}

Tensor orthogonal(std::size_t n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix makes Q unique (and Haar-distributed) for a given draw.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  Tensor t({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    const double sign = r(j, j) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) t.at(i, j) = q(i, j) * sign;
  }
  return t;
}

}  // namespace

WeightStore init_weights(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore w;
  for (const auto& [name, shape] : parameter_shapes(cfg)) {
    if (is_bias(name)) {
      w.emplace(name, Tensor(shape));
    } else if (name.rfind("gru.u_", 0) == 0) {
      w.emplace(name, orthogonal(shape[0], rng));
    } else {
      const auto [fan_in, fan_out] = fans(name, shape, cfg);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      Tensor t(shape);
      for (auto& v : t.values()) v = rng.uniform(-limit, limit);
      w.emplace(name, std::move(t));
    }
  }
  return w;
}

WeightStore zero_weights(const ModelConfig& cfg) {
  WeightStore w;
  for (const auto& [name, shape] : parameter_shapes(cfg)) w.emplace(name, Tensor(shape));
  return w;
}

void validate_weights(const ModelConfig& cfg, const WeightStore& weights) {
  const auto expected = parameter_shapes(cfg);
  for (const auto& [name, shape] : expected) {
    const auto it = weights.find(name);
    if (it == weights.end()) throw ConfigError("weights are missing tensor '" + name + "'");
    if (it->second.shape() != shape) {
      throw ConfigError("tensor '" + name + "' has shape " + shape_to_string(it->second.shape()) + ", config implies " +
                        shape_to_string(shape));
    }
  }
  if (weights.size() != expected.size()) {
    for (const auto& [name, _] : weights) {
      bool known = false;
      for (const auto& e : expected) known = known || e.first == name;
      if (!known) throw ConfigError("weights contain unexpected tensor '" + name + "'");
    }
  }
}

std::size_t total_elements(const WeightStore& weights) {
  std::size_t n = 0;
  for (const auto& [_, t] : weights) n += t.size();
  return n;
}

}  // namespace asc
