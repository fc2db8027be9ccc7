#pragma once

// Slow, independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "asc/backward.hpp"
#include "asc/frontend.hpp"
#include "asc/model.hpp"
#include "asc/training.hpp"
#include "asc/model_config.hpp"
#include "asc/rng.hpp"
#include "asc/tensor.hpp"
#include "asc/wav.hpp"
#include "asc/weights.hpp"

namespace oracle {

using asc::Tensor;
using asc::WeightStore;

// Power spectrum |X[k]|^2, k = 0..n/2, by the O(n^2) definition.
inline std::vector<double> dft_power(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    long double re = 0, im = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const long double a = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>((k * t) % n) /
                            static_cast<long double>(n);
      re += x[t] * std::cos(a);
      im += x[t] * std::sin(a);
    }
    out[k] = static_cast<double>(re * re + im * im);
  }
  return out;
}

// Nearest binary16 by scanning every finite half value; ties go to the even pattern.
inline double nearest_half(double x) {
  double best = 0.0;
  double best_err = std::numeric_limits<double>::infinity();
  std::uint16_t best_bits = 0;
  for (std::uint32_t b = 0; b < 0x10000; ++b) {
    const std::uint16_t h = static_cast<std::uint16_t>(b);
    const int e = (h >> 10) & 0x1f;
    if (e == 0x1f) continue;
    const int m = h & 0x3ff;
    double v = e == 0 ? std::ldexp(m, -24) : std::ldexp(1024 + m, e - 25);
    if (h & 0x8000) v = -v;
    const double err = std::fabs(v - x);
    if (err < best_err || (err == best_err && (h & 1) == 0 && (best_bits & 1) == 1)) {
      best = v;
      best_err = err;
      best_bits = h;
    }
  }
  return best;
}

// Forward pass written from the layer definitions with plain loops, counting
// one MAC for every kernel tap (including taps that land in zero padding) and
// every matrix-vector multiply-accumulate.
struct CountedForward {
  std::uint64_t macs = 0;
  std::vector<double> logits;
};

namespace detail {

using Map = std::vector<std::vector<std::vector<double>>>;  // [c][f][t]

inline Map make_map(std::size_t c, std::size_t f, std::size_t t) {
  return Map(c, std::vector<std::vector<double>>(f, std::vector<double>(t, 0.0)));
}

inline double relu(double v) { return v > 0 ? v : 0; }
inline double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace detail

inline CountedForward counted_forward(const asc::ModelConfig& cfg, const WeightStore& w, const Tensor& feat) {
  using detail::Map;
  using detail::make_map;
  using detail::relu;
  using detail::sig;
  CountedForward out;
  std::uint64_t& macs = out.macs;
  const auto W = [&](const std::string& n) -> const Tensor& { return w.at(n); };

  const std::size_t F = cfg.input_mels, T = cfg.input_frames;
  std::size_t C = cfg.stem_out_channels;
  Map x = make_map(C, F, T);
  {
    const Tensor& k = W("stem.weight");
    const Tensor& b = W("stem.bias");
    for (std::size_t o = 0; o < C; ++o)
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t t = 0; t < T; ++t) {
          double acc = b[o];
          for (int df = -1; df <= 1; ++df)
            for (int dt = -1; dt <= 1; ++dt) {
              ++macs;
              const long long ff = static_cast<long long>(f) + df, tt = static_cast<long long>(t) + dt;
              if (ff < 0 || tt < 0 || ff >= static_cast<long long>(F) || tt >= static_cast<long long>(T)) continue;
              acc += k[o * 9 + static_cast<std::size_t>((df + 1) * 3 + dt + 1)] * feat[ff * T + tt];
            }
          x[o][f][t] = relu(acc);
        }
  }
  auto pool = [&](const Map& in) {
    const std::size_t c = in.size(), f = in[0].size() / 2, t = in[0][0].size() / 2;
    Map y = make_map(c, f, t);
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t i = 0; i < f; ++i)
        for (std::size_t j = 0; j < t; ++j) {
          const double v[4] = {in[a][2 * i][2 * j], in[a][2 * i][2 * j + 1], in[a][2 * i + 1][2 * j],
                               in[a][2 * i + 1][2 * j + 1]};
          const double mx = std::max(std::max(v[0], v[1]), std::max(v[2], v[3]));
          y[a][i][j] = 0.5 * (mx + (v[0] + v[1] + v[2] + v[3]) / 4.0);
        }
    return y;
  };
  auto se = [&](Map& in, const std::string& n) {
    const std::size_t c = in.size(), hidden = c / cfg.se_reduction;
    const Tensor &w1 = W(n + ".fc1.weight"), &b1 = W(n + ".fc1.bias"), &w2 = W(n + ".fc2.weight"),
                 &b2 = W(n + ".fc2.bias");
    std::vector<double> z(c, 0.0), s(hidden), g(c);
    for (std::size_t a = 0; a < c; ++a) {
      for (const auto& row : in[a])
        for (double v : row) z[a] += v;
      z[a] /= static_cast<double>(in[a].size() * in[a][0].size());
    }
    for (std::size_t h = 0; h < hidden; ++h) {
      double acc = b1[h];
      for (std::size_t a = 0; a < c; ++a, ++macs) acc += w1[h * c + a] * z[a];
      s[h] = relu(acc);
    }
    for (std::size_t a = 0; a < c; ++a) {
      double acc = b2[a];
      for (std::size_t h = 0; h < hidden; ++h, ++macs) acc += w2[a * hidden + h] * s[h];
      g[a] = sig(acc);
    }
    for (std::size_t a = 0; a < c; ++a)
      for (auto& row : in[a])
        for (double& v : row) v *= g[a];
  };

  x = pool(x);
  se(x, "se0");

  for (std::size_t bi = 0; bi < cfg.blocks.size(); ++bi) {
    const auto& spec = cfg.blocks[bi];
    const std::string n = "block" + std::to_string(bi);
    const std::size_t f = x[0].size(), t = x[0][0].size();
    const std::size_t E = spec.expanded_channels();
    const Tensor &pw = W(n + ".pw.weight"), &pb = W(n + ".pw.bias");
    Map y = make_map(E, f, t);
    for (std::size_t o = 0; o < E; ++o)
      for (std::size_t i = 0; i < f; ++i)
        for (std::size_t j = 0; j < t; ++j) {
          double acc = pb[o];
          for (std::size_t a = 0; a < C; ++a, ++macs) acc += pw[o * C + a] * x[a][i][j];
          y[o][i][j] = relu(acc);
        }
    // shuffle: channel index a*g + gi <- gi*(E/g) + a
    const std::size_t g = cfg.shuffle_groups, per = E / g;
    Map s = make_map(E, f, t);
    for (std::size_t gi = 0; gi < g; ++gi)
      for (std::size_t a = 0; a < per; ++a) s[a * g + gi] = y[gi * per + a];
    // depthwise time
    const Tensor& kt = W(n + ".dw_time.weight");
    const long long kh = static_cast<long long>(spec.time_kernel / 2);
    Map d1 = make_map(E, f, t);
    for (std::size_t a = 0; a < E; ++a)
      for (std::size_t i = 0; i < f; ++i)
        for (std::size_t j = 0; j < t; ++j) {
          double acc = 0;
          for (long long q = -kh; q <= kh; ++q) {
            ++macs;
            const long long jj = static_cast<long long>(j) + q;
            if (jj < 0 || jj >= static_cast<long long>(t)) continue;
            acc += kt[a * spec.time_kernel + static_cast<std::size_t>(q + kh)] * s[a][i][jj];
          }
          d1[a][i][j] = relu(acc);
        }
    // depthwise frequency with multiplier and stride
    const Tensor& kf = W(n + ".dw_freq.weight");
    const std::size_t m = spec.dw_multiplier, st = spec.freq_stride;
    const std::size_t fo = (f + st - 1) / st;
    const long long fh = static_cast<long long>(spec.freq_kernel / 2);
    Map d2 = make_map(E * m, fo, t);
    for (std::size_t a = 0; a < E; ++a)
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t i = 0; i < fo; ++i)
          for (std::size_t j = 0; j < t; ++j) {
            double acc = 0;
            for (long long q = -fh; q <= fh; ++q) {
              ++macs;
              const long long ii = static_cast<long long>(i * st) + q;
              if (ii < 0 || ii >= static_cast<long long>(f)) continue;
              acc += kf[(a * m + r) * spec.freq_kernel + static_cast<std::size_t>(q + fh)] * d1[a][ii][j];
            }
            d2[a * m + r][i][j] = relu(acc);
          }
    x = std::move(d2);
    C = E * m;
    if (bi < asc::ModelConfig::kSeBlocks) se(x, "se" + std::to_string(bi + 1));
  }

  const std::size_t Fp = x[0].size(), Tp = x[0][0].size(), H = cfg.gru_hidden;
  std::vector<std::vector<double>> seq(C, std::vector<double>(Fp, 0.0));
  for (std::size_t a = 0; a < C; ++a)
    for (std::size_t i = 0; i < Fp; ++i) {
      for (std::size_t j = 0; j < Tp; ++j) seq[a][i] += x[a][i][j];
      seq[a][i] /= static_cast<double>(Tp);
    }

  const auto mv = [&](const Tensor& m, const std::vector<double>& v, std::size_t rows, std::size_t cols) {
    std::vector<double> r(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j, ++macs) r[i] += m[i * cols + j] * v[j];
    return r;
  };
  std::vector<double> h(H, 0.0);
  std::vector<std::vector<double>> fused(C);
  for (std::size_t step = 0; step < C; ++step) {
    const auto xz = mv(W("gru.w_z"), seq[step], H, Fp), hz = mv(W("gru.u_z"), h, H, H);
    const auto xr = mv(W("gru.w_r"), seq[step], H, Fp), hr = mv(W("gru.u_r"), h, H, H);
    std::vector<double> z(H), r(H), rh(H);
    for (std::size_t i = 0; i < H; ++i) {
      z[i] = sig(xz[i] + hz[i] + W("gru.b_z")[i]);
      r[i] = sig(xr[i] + hr[i] + W("gru.b_r")[i]);
      rh[i] = r[i] * h[i];
    }
    const auto xh = mv(W("gru.w_h"), seq[step], H, Fp), hh = mv(W("gru.u_h"), rh, H, H);
    for (std::size_t i = 0; i < H; ++i) {
      const double cand = std::tanh(xh[i] + hh[i] + W("gru.b_h")[i]);
      h[i] = (1.0 - z[i]) * h[i] + z[i] * cand;
    }
    const auto p = mv(W("branch.weight"), seq[step], H, Fp);
    if (cfg.head_fusion == asc::HeadFusion::kAdd) {
      fused[step].resize(H);
      for (std::size_t i = 0; i < H; ++i) fused[step][i] = h[i] + p[i];
    } else {
      fused[step] = h;
      fused[step].insert(fused[step].end(), p.begin(), p.end());
    }
  }
  const std::size_t width = fused[0].size();
  std::vector<double> pooled(width, 0.0);
  for (const auto& row : fused)
    for (std::size_t i = 0; i < width; ++i) pooled[i] += row[i] / static_cast<double>(C);
  out.logits = mv(W("head.weight"), pooled, cfg.n_classes, width);
  for (std::size_t k = 0; k < cfg.n_classes; ++k) out.logits[k] += W("head.bias")[k];
  return out;
}

// Random small but valid configuration.
inline asc::ModelConfig random_small_config(asc::Rng& rng) {
  asc::ModelConfig cfg;
  cfg.shuffle_groups = 2;
  cfg.se_reduction = 2;
  cfg.stem_out_channels = 2 * rng.uniform_int(1, 3);
  cfg.input_mels = 8 * rng.uniform_int(1, 3);
  cfg.input_frames = 4 + rng.uniform_int(0, 6);
  cfg.frontend.n_mels = cfg.input_mels;
  cfg.gru_hidden = rng.uniform_int(2, 6);
  cfg.head_fusion = rng.bernoulli(0.5) ? asc::HeadFusion::kAdd : asc::HeadFusion::kConcat;
  cfg.n_classes = 10;
  std::size_t c = cfg.stem_out_channels;
  const std::size_t nblocks = rng.uniform_int(1, 4);
  for (std::size_t i = 0; i < nblocks; ++i) {
    asc::ConvTSpec s;
    s.in_channels = c;
    s.expand_ratio = static_cast<double>(rng.uniform_int(1, 2));
    s.dw_multiplier = rng.uniform_int(1, 2);
    s.time_kernel = 1 + 2 * rng.uniform_int(0, 2);
    s.freq_kernel = 1 + 2 * rng.uniform_int(0, 2);
    s.freq_stride = rng.uniform_int(1, 2);
    cfg.blocks.push_back(s);
    c = s.out_channels();
  }
  return cfg;
}

// The 8-mel x 5-frame, two-block, H=3 model used for gradient checks.
inline asc::ModelConfig tiny_config() {
  asc::ModelConfig cfg;
  cfg.stem_out_channels = 4;
  cfg.se_reduction = 2;
  cfg.shuffle_groups = 2;
  cfg.gru_hidden = 3;
  cfg.input_mels = 8;
  cfg.input_frames = 5;
  cfg.frontend.n_mels = 8;
  cfg.blocks = {asc::ConvTSpec{4, 1.0, 2, 3, 3, 2}, asc::ConvTSpec{8, 1.0, 1, 3, 3, 1}};
  return cfg;
}

inline Tensor random_tensor(const asc::Shape& shape, asc::Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

// Random weights with non-zero biases so every gradient path is exercised.
inline WeightStore random_weights(const asc::ModelConfig& cfg, asc::Rng& rng, double scale = 0.5) {
  WeightStore w;
  for (const auto& [name, shape] : asc::parameter_shapes(cfg)) w[name] = random_tensor(shape, rng, scale);
  return w;
}

// Synthetic two-tone clips: class 0 at 500 Hz, class 1 at 4 kHz, both with noise.
inline asc::Waveform tone_clip(double freq_hz, std::size_t samples, asc::Rng& rng) {
  asc::Waveform w;
  w.samples.resize(samples);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double amp = rng.uniform(0.3, 0.6);
  for (std::size_t i = 0; i < samples; ++i) {
    w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / 44100.0 + phase) +
                   0.1 * rng.normal();
  }
  return w;
}

inline double rel_err(double a, double n) { return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-6}); }

// Largest relative error between backward() and central differences over every parameter.
inline double worst_gradient_error(const asc::ModelConfig& cfg, std::uint64_t seed, std::string* where = nullptr) {
  asc::Rng rng(seed);
  WeightStore w = random_weights(cfg, rng);
  const Tensor x = random_tensor({cfg.input_mels, cfg.input_frames}, rng);
  const std::size_t label = rng.uniform_int(0, cfg.n_classes - 1);
  const asc::Gradients g = asc::backward(cfg, w, x, label, 0.1);
  const double eps = 1e-5;
  double worst = 0.0;
  for (auto& [name, t] : w) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double keep = t[i];
      t[i] = keep + eps;
      const double up = asc::cross_entropy(asc::forward(cfg, w, x), label, 0.1);
      t[i] = keep - eps;
      const double down = asc::cross_entropy(asc::forward(cfg, w, x), label, 0.1);
      t[i] = keep;
      const double e = rel_err(g.grads.at(name)[i], (up - down) / (2 * eps));
      if (e > worst) {
        worst = e;
        if (where) *where = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return worst;
}

}  // namespace oracle
