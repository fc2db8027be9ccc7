#include "asc/model.hpp"

#include <algorithm>
#include <cmath>

#include "asc/error.hpp"
#include "asc/kernels.hpp"

namespace asc {

namespace {

void require_rank(const Tensor& x, std::size_t rank, const char* what) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(what) + " expects a rank-" + std::to_string(rank) + " tensor, got " +
                     shape_to_string(x.shape()));
  }
}

void relu_inplace(Tensor& x) {
  for (auto& v : x.values()) v = v > 0.0 ? v : 0.0;
}

void check_odd_kernel(std::size_t k, const char* what) {
  if (k % 2 == 0) throw ConfigError(std::string(what) + " kernel length must be odd, got " + std::to_string(k));
}

const Tensor& param(const WeightStore& w, const std::string& name) {
  const auto it = w.find(name);
  if (it == w.end()) throw ConfigError("weights are missing tensor '" + name + "'");
  return it->second;
}

}  // namespace

Tensor conv2d_stem(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 3, "conv2d_stem");
  if (w.rank() != 4 || w.dim(1) != x.dim(0) || w.dim(2) != 3 || w.dim(3) != 3) {
    throw ShapeError("conv2d_stem weight must be [Cout x " + std::to_string(x.dim(0)) + " x 3 x 3], got " +
                     shape_to_string(w.shape()));
  }
  if (b.rank() != 1 || b.dim(0) != w.dim(0)) throw ShapeError("conv2d_stem bias must be [Cout]");
  const kernels::Conv3x3Dims d{x.dim(0), w.dim(0), x.dim(1), x.dim(2)};
  Tensor y({d.out_channels, d.freq, d.time});
  kernels::conv3x3(x.data(), w.data(), b.data(), y.data(), d);
  relu_inplace(y);
  return y;
}

Tensor pointwise_conv(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 3, "pointwise_conv");
  if (w.rank() != 2 || w.dim(1) != x.dim(0)) {
    throw ShapeError("pointwise_conv weight " + shape_to_string(w.shape()) + " does not match " +
                     std::to_string(x.dim(0)) + " input channels");
  }
  if (!b.empty() && (b.rank() != 1 || b.dim(0) != w.dim(0))) throw ShapeError("pointwise_conv bias must be [Cout]");
  Tensor y({w.dim(0), x.dim(1), x.dim(2)});
  kernels::pointwise(x.data(), w.data(), b.data(), y.data(), w.dim(1), w.dim(0), x.dim(1) * x.dim(2));
  return y;
}

Tensor depthwise_conv1d_time(const Tensor& x, const Tensor& w) {
  require_rank(x, 3, "depthwise_conv1d_time");
  if (w.rank() != 2 || w.dim(0) != x.dim(0)) throw ShapeError("depthwise_conv1d_time weight must be [C x k]");
  check_odd_kernel(w.dim(1), "depthwise time");
  Tensor y(x.shape());
  kernels::depthwise_time(x.data(), w.data(), y.data(), {x.dim(0), x.dim(1), x.dim(2), w.dim(1), 1, 1});
  return y;
}

Tensor depthwise_conv1d_freq(const Tensor& x, const Tensor& w, std::size_t multiplier, std::size_t stride) {
  require_rank(x, 3, "depthwise_conv1d_freq");
  if (multiplier < 1) throw ConfigError("depthwise multiplier must be >= 1");
  if (stride < 1) throw ConfigError("depthwise stride must be >= 1");
  if (w.rank() != 2 || w.dim(0) != x.dim(0) * multiplier) {
    throw ShapeError("depthwise_conv1d_freq weight must be [(C*m) x k], got " + shape_to_string(w.shape()));
  }
  check_odd_kernel(w.dim(1), "depthwise frequency");
  const kernels::DepthwiseDims d{x.dim(0), x.dim(1), x.dim(2), w.dim(1), multiplier, stride};
  Tensor y({x.dim(0) * multiplier, kernels::strided_extent(x.dim(1), stride), x.dim(2)});
  kernels::depthwise_freq(x.data(), w.data(), y.data(), d);
  return y;
}

Tensor channel_shuffle(const Tensor& x, std::size_t groups) {
  require_rank(x, 3, "channel_shuffle");
  const std::size_t c = x.dim(0);
  if (groups == 0 || c % groups != 0) {
    throw ConfigError("shuffle groups " + std::to_string(groups) + " do not divide " + std::to_string(c) + " channels");
  }
  const std::size_t per = c / groups;
  const std::size_t plane = x.dim(1) * x.dim(2);
  Tensor y(x.shape());
  for (std::size_t a = 0; a < per; ++a) {
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t dst = a * groups + g;
      const std::size_t src = g * per + a;
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(src * plane), plane,
                  y.data().begin() + static_cast<std::ptrdiff_t>(dst * plane));
    }
  }
  return y;
}

Tensor convt_block(const Tensor& x, const ConvTSpec& spec, const ConvTWeights& w, std::size_t shuffle_groups) {
  if (x.rank() != 3 || x.dim(0) != spec.in_channels) {
    throw ShapeError("ConvT block expects " + std::to_string(spec.in_channels) + " input channels, got " +
                     shape_to_string(x.shape()));
  }
  Tensor y = pointwise_conv(x, w.pw_weight, w.pw_bias);
  relu_inplace(y);
  y = channel_shuffle(y, shuffle_groups);
  y = depthwise_conv1d_time(y, w.dw_time);
  relu_inplace(y);
  y = depthwise_conv1d_freq(y, w.dw_freq, spec.dw_multiplier, spec.freq_stride);
  relu_inplace(y);
  return y;
}

Tensor se_block(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2) {
  require_rank(x, 3, "se_block");
  const std::size_t c = x.dim(0);
  if (w1.rank() != 2 || w1.dim(1) != c || w2.rank() != 2 || w2.dim(0) != c || w2.dim(1) != w1.dim(0)) {
    throw ShapeError("se_block weights " + shape_to_string(w1.shape()) + ", " + shape_to_string(w2.shape()) +
                     " do not fit " + std::to_string(c) + " channels");
  }
  const std::size_t hidden = w1.dim(0);
  if (!b1.empty() && b1.size() != hidden) throw ShapeError("se_block fc1 bias size mismatch");
  if (!b2.empty() && b2.size() != c) throw ShapeError("se_block fc2 bias size mismatch");
  const std::size_t plane = x.dim(1) * x.dim(2);
  std::vector<double> z(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t p = 0; p < plane; ++p) s += x[ch * plane + p];
    z[ch] = s / static_cast<double>(plane);
  }
  std::vector<double> a(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    double s = b1.empty() ? 0.0 : b1[j];
    for (std::size_t ch = 0; ch < c; ++ch) s += w1.at(j, ch) * z[ch];
    a[j] = s > 0.0 ? s : 0.0;
  }
  Tensor y(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = b2.empty() ? 0.0 : b2[ch];
    for (std::size_t j = 0; j < hidden; ++j) s += w2.at(ch, j) * a[j];
    const double gate = sigmoid(s);
    for (std::size_t p = 0; p < plane; ++p) y[ch * plane + p] = gate * x[ch * plane + p];
  }
  return y;
}

Tensor se_block(const Tensor& x, const Tensor& w1, const Tensor& w2) { return se_block(x, w1, Tensor{}, w2, Tensor{}); }

Tensor hybrid_pool(const Tensor& x) {
  require_rank(x, 3, "hybrid_pool");
  if (x.dim(1) < 2 || x.dim(2) < 2) throw ShapeError("hybrid_pool needs F >= 2 and T >= 2, got " + shape_to_string(x.shape()));
  const std::size_t c = x.dim(0), fo = x.dim(1) / 2, to = x.dim(2) / 2;
  Tensor y({c, fo, to});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t f = 0; f < fo; ++f) {
      for (std::size_t t = 0; t < to; ++t) {
        const double v[4] = {x.at(ch, 2 * f, 2 * t), x.at(ch, 2 * f, 2 * t + 1), x.at(ch, 2 * f + 1, 2 * t),
                             x.at(ch, 2 * f + 1, 2 * t + 1)};
        const double mx = std::max(std::max(v[0], v[1]), std::max(v[2], v[3]));
        const double avg = 0.25 * (v[0] + v[1] + v[2] + v[3]);
        y.at(ch, f, t) = 0.5 * (mx + avg);
      }
    }
  }
  return y;
}

Tensor time_mean(const Tensor& x) {
  require_rank(x, 3, "time_mean");
  Tensor y({x.dim(0), x.dim(1)});
  const double inv = 1.0 / static_cast<double>(x.dim(2));
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    for (std::size_t f = 0; f < x.dim(1); ++f) {
      double s = 0.0;
      for (std::size_t t = 0; t < x.dim(2); ++t) s += x.at(c, f, t);
      y.at(c, f) = s * inv;
    }
  }
  return y;
}

GruTrace gru_trace(const Tensor& x, const GruParams& p) {
  require_rank(x, 2, "gru_over_frequency");
  const std::size_t steps = x.dim(0), in = x.dim(1), h = p.u_z.rank() == 2 ? p.u_z.dim(0) : 0;
  for (const Tensor* w : {&p.w_z, &p.w_r, &p.w_h}) {
    if (w->rank() != 2 || w->dim(0) != h || w->dim(1) != in) {
      throw ShapeError("GRU input weights must be [H x F'] = [" + std::to_string(h) + "x" + std::to_string(in) +
                       "], got " + shape_to_string(w->shape()));
    }
  }
  for (const Tensor* u : {&p.u_z, &p.u_r, &p.u_h}) {
    if (u->rank() != 2 || u->dim(0) != h || u->dim(1) != h) throw ShapeError("GRU recurrent weights must be [H x H]");
  }
  for (const Tensor* b : {&p.b_z, &p.b_r, &p.b_h}) {
    if (b->rank() != 1 || b->dim(0) != h) throw ShapeError("GRU biases must be [H]");
  }
  GruTrace tr{Tensor({steps, h}), Tensor({steps, h}), Tensor({steps, h}), Tensor({steps, h})};
  std::vector<double> prev(h, 0.0), gated(h);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* xt = x.data().data() + t * in;
    for (std::size_t i = 0; i < h; ++i) {
      double sz = p.b_z[i], sr = p.b_r[i];
      for (std::size_t k = 0; k < in; ++k) {
        sz += p.w_z.at(i, k) * xt[k];
        sr += p.w_r.at(i, k) * xt[k];
      }
      for (std::size_t k = 0; k < h; ++k) {
        sz += p.u_z.at(i, k) * prev[k];
        sr += p.u_r.at(i, k) * prev[k];
      }
      tr.update.at(t, i) = sigmoid(sz);
      tr.reset.at(t, i) = sigmoid(sr);
    }
    for (std::size_t k = 0; k < h; ++k) gated[k] = tr.reset.at(t, k) * prev[k];
    for (std::size_t i = 0; i < h; ++i) {
      double sh = p.b_h[i];
      for (std::size_t k = 0; k < in; ++k) sh += p.w_h.at(i, k) * xt[k];
      for (std::size_t k = 0; k < h; ++k) sh += p.u_h.at(i, k) * gated[k];
      tr.candidate.at(t, i) = std::tanh(sh);
    }
    for (std::size_t i = 0; i < h; ++i) {
      const double z = tr.update.at(t, i);
      tr.output.at(t, i) = (1.0 - z) * prev[i] + z * tr.candidate.at(t, i);
    }
    for (std::size_t i = 0; i < h; ++i) prev[i] = tr.output.at(t, i);
  }
  return tr;
}

Tensor gru_over_frequency(const Tensor& x, const GruParams& p) { return gru_trace(x, p).output; }

namespace {

Tensor branch_conv(const Tensor& seq, const Tensor& conv_w) {
  if (conv_w.rank() != 2 || conv_w.dim(1) != seq.dim(1)) {
    throw ConfigError("parallel conv weight " + shape_to_string(conv_w.shape()) + " does not match sequence " +
                      shape_to_string(seq.shape()));
  }
  // p[t] = conv_w seq[t]  <=>  P = seq * conv_w^T
  const std::size_t steps = seq.dim(0), in = seq.dim(1), h = conv_w.dim(0);
  Tensor p({steps, h});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < h; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < in; ++k) s += conv_w.at(i, k) * seq.at(t, k);
      p.at(t, i) = s;
    }
  }
  return p;
}

Tensor fuse(const Tensor& gru_out, const Tensor& branch, HeadFusion mode) {
  if (gru_out.shape() != branch.shape()) {
    throw ConfigError("GRU output " + shape_to_string(gru_out.shape()) + " and parallel branch " +
                      shape_to_string(branch.shape()) + " cannot be fused");
  }
  if (mode == HeadFusion::kAdd) {
    Tensor f = gru_out;
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += branch[i];
    return f;
  }
  const std::size_t steps = gru_out.dim(0), h = gru_out.dim(1);
  Tensor f({steps, 2 * h});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < h; ++i) {
      f.at(t, i) = gru_out.at(t, i);
      f.at(t, h + i) = branch.at(t, i);
    }
  }
  return f;
}

Tensor step_mean(const Tensor& fused) {
  Tensor pooled({fused.dim(1)});
  for (std::size_t t = 0; t < fused.dim(0); ++t) {
    for (std::size_t i = 0; i < fused.dim(1); ++i) pooled[i] += fused.at(t, i);
  }
  for (auto& v : pooled.values()) v /= static_cast<double>(fused.dim(0));
  return pooled;
}

Tensor linear_head(const Tensor& pooled, const Tensor& head_w, const Tensor& head_b) {
  if (head_w.rank() != 2 || head_w.dim(1) != pooled.size() || head_b.rank() != 1 || head_b.dim(0) != head_w.dim(0)) {
    throw ConfigError("head weights " + shape_to_string(head_w.shape()) + " do not match fused width " +
                      std::to_string(pooled.size()) + " (check head_fusion)");
  }
  Tensor logits({head_w.dim(0)});
  for (std::size_t o = 0; o < head_w.dim(0); ++o) {
    double s = head_b[o];
    for (std::size_t i = 0; i < pooled.size(); ++i) s += head_w.at(o, i) * pooled[i];
    logits[o] = s;
  }
  return logits;
}

}  // namespace

Tensor fusion_head(const Tensor& seq, const Tensor& gru_out, const Tensor& conv_w, const Tensor& head_w,
                   const Tensor& head_b, HeadFusion mode) {
  require_rank(seq, 2, "fusion_head");
  require_rank(gru_out, 2, "fusion_head");
  return linear_head(step_mean(fuse(gru_out, branch_conv(seq, conv_w), mode)), head_w, head_b);
}

std::vector<std::pair<std::string, Shape>> NetworkTrace::stage_shapes() const {
  std::vector<std::pair<std::string, Shape>> s;
  s.emplace_back("stem", stem.shape());
  s.emplace_back("pool", pool.shape());
  s.emplace_back("se0", se0.shape());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string n = "block" + std::to_string(i);
    s.emplace_back(n + ".pw", blocks[i].pointwise.shape());
    s.emplace_back(n + ".shuffle", blocks[i].shuffled.shape());
    s.emplace_back(n + ".dw_time", blocks[i].dw_time.shape());
    s.emplace_back(n + ".dw_freq", blocks[i].dw_freq.shape());
    if (!blocks[i].se.empty()) s.emplace_back("se" + std::to_string(i + 1), blocks[i].se.shape());
  }
  s.emplace_back("time_mean", sequence.shape());
  s.emplace_back("gru", gru.output.shape());
  s.emplace_back("branch", branch.shape());
  s.emplace_back("fusion", fused.shape());
  s.emplace_back("head", logits.shape());
  return s;
}

NetworkTrace run_network(const ModelConfig& cfg, const WeightStore& w, const Tensor& feature) {
  cfg.validate();
  validate_weights(cfg, w);
  if (feature.rank() != 2 || feature.dim(0) != cfg.input_mels || feature.dim(1) != cfg.input_frames) {
    throw ShapeError("feature shape " + shape_to_string(feature.shape()) + " does not match model input [" +
                     std::to_string(cfg.input_mels) + "x" + std::to_string(cfg.input_frames) + "]");
  }
  const auto se = [&](const Tensor& x, const std::string& n) {
    return se_block(x, param(w, n + ".fc1.weight"), param(w, n + ".fc1.bias"), param(w, n + ".fc2.weight"),
                    param(w, n + ".fc2.bias"));
  };
  NetworkTrace tr;
  tr.input = feature.reshaped({1, feature.dim(0), feature.dim(1)});
  tr.stem = conv2d_stem(tr.input, param(w, "stem.weight"), param(w, "stem.bias"));
  tr.pool = hybrid_pool(tr.stem);
  tr.se0 = se(tr.pool, "se0");
  const Tensor* x = &tr.se0;
  tr.blocks.resize(cfg.blocks.size());
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const ConvTSpec& spec = cfg.blocks[i];
    const std::string n = "block" + std::to_string(i);
    BlockTrace& b = tr.blocks[i];
    b.input = *x;
    b.pointwise = pointwise_conv(b.input, param(w, n + ".pw.weight"), param(w, n + ".pw.bias"));
    relu_inplace(b.pointwise);
    b.shuffled = channel_shuffle(b.pointwise, cfg.shuffle_groups);
    b.dw_time = depthwise_conv1d_time(b.shuffled, param(w, n + ".dw_time.weight"));
    relu_inplace(b.dw_time);
    b.dw_freq = depthwise_conv1d_freq(b.dw_time, param(w, n + ".dw_freq.weight"), spec.dw_multiplier, spec.freq_stride);
    relu_inplace(b.dw_freq);
    if (cfg.has_se_after_block(i)) {
      b.se = se(b.dw_freq, "se" + std::to_string(i + 1));
      x = &b.se;
    } else {
      x = &b.dw_freq;
    }
  }
  tr.sequence = time_mean(*x);
  const GruParams gp{param(w, "gru.w_z"), param(w, "gru.w_r"), param(w, "gru.w_h"),
                     param(w, "gru.u_z"), param(w, "gru.u_r"), param(w, "gru.u_h"),
                     param(w, "gru.b_z"), param(w, "gru.b_r"), param(w, "gru.b_h")};
  tr.gru = gru_trace(tr.sequence, gp);
  tr.branch = branch_conv(tr.sequence, param(w, "branch.weight"));
  tr.fused = fuse(tr.gru.output, tr.branch, cfg.head_fusion);
  tr.pooled = step_mean(tr.fused);
  tr.logits = linear_head(tr.pooled, param(w, "head.weight"), param(w, "head.bias"));
  return tr;
}

Tensor forward(const ModelConfig& cfg, const WeightStore& weights, const Tensor& feature) {
  return run_network(cfg, weights, feature).logits;
}

Tensor forward(const ModelConfig& cfg, const WeightStore& weights, const FeatureMap& feat) {
  return forward(cfg, weights, feat.values);
}

}  // namespace asc
