#include "asc/backward.hpp"

#include <cmath>

#include "asc/error.hpp"

namespace asc::grad {

Tensor relu_backward(const Tensor& y, const Tensor& dy) {
  Tensor d = dy;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(y[i] > 0.0)) d[i] = 0.0;
  }
  return d;
}

ConvGrads conv2d_stem(const Tensor& x, const Tensor& w, const Tensor& y, const Tensor& dy) {
  const Tensor d = relu_backward(y, dy);
  const std::size_t cin = x.dim(0), cout = w.dim(0);
  const long long F = static_cast<long long>(x.dim(1)), T = static_cast<long long>(x.dim(2));
  ConvGrads g{Tensor(x.shape()), Tensor(w.shape()), Tensor({cout})};
  for (std::size_t o = 0; o < cout; ++o) {
    for (long long f = 0; f < F; ++f) {
      for (long long t = 0; t < T; ++t) {
        const double go = d.at(o, static_cast<std::size_t>(f), static_cast<std::size_t>(t));
        if (go == 0.0) continue;
        g.db[o] += go;
        for (std::size_t i = 0; i < cin; ++i) {
          for (int a = 0; a < 3; ++a) {
            const long long ff = f + a - 1;
            if (ff < 0 || ff >= F) continue;
            for (int b = 0; b < 3; ++b) {
              const long long tt = t + b - 1;
              if (tt < 0 || tt >= T) continue;
              const std::size_t wi = ((o * cin + i) * 3 + static_cast<std::size_t>(a)) * 3 + static_cast<std::size_t>(b);
              const auto uf = static_cast<std::size_t>(ff), ut = static_cast<std::size_t>(tt);
              g.dw[wi] += go * x.at(i, uf, ut);
              g.dx.at(i, uf, ut) += go * w[wi];
            }
          }
        }
      }
    }
  }
  return g;
}

ConvGrads pointwise_conv(const Tensor& x, const Tensor& w, const Tensor& dy, bool has_bias) {
  const std::size_t cin = x.dim(0), cout = w.dim(0), positions = x.dim(1) * x.dim(2);
  ConvGrads g{Tensor(x.shape()), Tensor(w.shape()), has_bias ? Tensor({cout}) : Tensor{}};
  for (std::size_t o = 0; o < cout; ++o) {
    const double* go = dy.data().data() + o * positions;
    if (has_bias) {
      double s = 0.0;
      for (std::size_t p = 0; p < positions; ++p) s += go[p];
      g.db[o] = s;
    }
    for (std::size_t i = 0; i < cin; ++i) {
      const double* xi = x.data().data() + i * positions;
      double* dxi = g.dx.data().data() + i * positions;
      const double woi = w.at(o, i);
      double s = 0.0;
      for (std::size_t p = 0; p < positions; ++p) {
        s += go[p] * xi[p];
        dxi[p] += woi * go[p];
      }
      g.dw.at(o, i) = s;
    }
  }
  return g;
}

ConvGrads depthwise_conv1d_time(const Tensor& x, const Tensor& w, const Tensor& dy) {
  const std::size_t C = x.dim(0), F = x.dim(1), k = w.dim(1);
  const long long T = static_cast<long long>(x.dim(2)), pad = static_cast<long long>(k / 2);
  ConvGrads g{Tensor(x.shape()), Tensor(w.shape()), Tensor{}};
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t f = 0; f < F; ++f) {
      for (long long t = 0; t < T; ++t) {
        const double go = dy.at(c, f, static_cast<std::size_t>(t));
        for (std::size_t q = 0; q < k; ++q) {
          const long long tt = t + static_cast<long long>(q) - pad;
          if (tt < 0 || tt >= T) continue;
          g.dw.at(c, q) += go * x.at(c, f, static_cast<std::size_t>(tt));
          g.dx.at(c, f, static_cast<std::size_t>(tt)) += go * w.at(c, q);
        }
      }
    }
  }
  return g;
}

ConvGrads depthwise_conv1d_freq(const Tensor& x, const Tensor& w, std::size_t multiplier, std::size_t stride,
                                const Tensor& dy) {
  const std::size_t T = x.dim(2), k = w.dim(1), fout = dy.dim(1);
  const long long F = static_cast<long long>(x.dim(1)), pad = static_cast<long long>(k / 2);
  ConvGrads g{Tensor(x.shape()), Tensor(w.shape()), Tensor{}};
  for (std::size_t o = 0; o < w.dim(0); ++o) {
    const std::size_t c = o / multiplier;
    for (std::size_t fo = 0; fo < fout; ++fo) {
      for (std::size_t q = 0; q < k; ++q) {
        const long long ff = static_cast<long long>(fo * stride + q) - pad;
        if (ff < 0 || ff >= F) continue;
        const auto uf = static_cast<std::size_t>(ff);
        for (std::size_t t = 0; t < T; ++t) {
          const double go = dy.at(o, fo, t);
          g.dw.at(o, q) += go * x.at(c, uf, t);
          g.dx.at(c, uf, t) += go * w.at(o, q);
        }
      }
    }
  }
  return g;
}

Tensor channel_shuffle(const Tensor& dy, std::size_t groups) { return asc::channel_shuffle(dy, dy.dim(0) / groups); }

SeGrads se_block(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2,
                 const Tensor& dy) {
  const std::size_t c = x.dim(0), hidden = w1.dim(0), plane = x.dim(1) * x.dim(2);
  std::vector<double> z(c), pre1(hidden), a(hidden), s(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t p = 0; p < plane; ++p) sum += x[ch * plane + p];
    z[ch] = sum / static_cast<double>(plane);
  }
  for (std::size_t j = 0; j < hidden; ++j) {
    double v = b1.empty() ? 0.0 : b1[j];
    for (std::size_t ch = 0; ch < c; ++ch) v += w1.at(j, ch) * z[ch];
    pre1[j] = v;
    a[j] = v > 0.0 ? v : 0.0;
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    double v = b2.empty() ? 0.0 : b2[ch];
    for (std::size_t j = 0; j < hidden; ++j) v += w2.at(ch, j) * a[j];
    s[ch] = sigmoid(v);
  }
  SeGrads g{Tensor(x.shape()), Tensor(w1.shape()), Tensor({hidden}), Tensor(w2.shape()), Tensor({c})};
  std::vector<double> dpre2(c), da(hidden, 0.0), dpre1(hidden), dz(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double ds = 0.0;
    for (std::size_t p = 0; p < plane; ++p) ds += dy[ch * plane + p] * x[ch * plane + p];
    dpre2[ch] = ds * s[ch] * (1.0 - s[ch]);
    g.db2[ch] = dpre2[ch];
    for (std::size_t j = 0; j < hidden; ++j) {
      g.dw2.at(ch, j) = dpre2[ch] * a[j];
      da[j] += w2.at(ch, j) * dpre2[ch];
    }
  }
  for (std::size_t j = 0; j < hidden; ++j) {
    dpre1[j] = pre1[j] > 0.0 ? da[j] : 0.0;
    g.db1[j] = dpre1[j];
    for (std::size_t ch = 0; ch < c; ++ch) {
      g.dw1.at(j, ch) = dpre1[j] * z[ch];
      dz[ch] += w1.at(j, ch) * dpre1[j];
    }
  }
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double spread = dz[ch] / static_cast<double>(plane);
    for (std::size_t p = 0; p < plane; ++p) g.dx[ch * plane + p] = dy[ch * plane + p] * s[ch] + spread;
  }
  return g;
}

Tensor hybrid_pool(const Tensor& x, const Tensor& dy) {
  Tensor dx(x.shape());
  for (std::size_t c = 0; c < dy.dim(0); ++c) {
    for (std::size_t f = 0; f < dy.dim(1); ++f) {
      for (std::size_t t = 0; t < dy.dim(2); ++t) {
        const double g = dy.at(c, f, t);
        const std::size_t fs[4] = {2 * f, 2 * f, 2 * f + 1, 2 * f + 1};
        const std::size_t ts[4] = {2 * t, 2 * t + 1, 2 * t, 2 * t + 1};
        std::size_t best = 0;
        for (std::size_t i = 1; i < 4; ++i) {
          if (x.at(c, fs[i], ts[i]) > x.at(c, fs[best], ts[best])) best = i;
        }
        for (std::size_t i = 0; i < 4; ++i) dx.at(c, fs[i], ts[i]) += 0.125 * g;
        dx.at(c, fs[best], ts[best]) += 0.5 * g;
      }
    }
  }
  return dx;
}

Tensor time_mean(const Shape& x_shape, const Tensor& dy) {
  Tensor dx(x_shape);
  const double inv = 1.0 / static_cast<double>(x_shape[2]);
  for (std::size_t c = 0; c < x_shape[0]; ++c) {
    for (std::size_t f = 0; f < x_shape[1]; ++f) {
      for (std::size_t t = 0; t < x_shape[2]; ++t) dx.at(c, f, t) = dy.at(c, f) * inv;
    }
  }
  return dx;
}

GruGrads gru_over_frequency(const Tensor& x, const GruParams& p, const GruTrace& tr, const Tensor& dy) {
  const std::size_t steps = x.dim(0), in = x.dim(1), h = p.u_z.dim(0);
  GruGrads g{Tensor(x.shape()),     Tensor(p.w_z.shape()), Tensor(p.w_r.shape()), Tensor(p.w_h.shape()),
             Tensor(p.u_z.shape()), Tensor(p.u_r.shape()), Tensor(p.u_h.shape()), Tensor({h}),
             Tensor({h}),           Tensor({h})};
  std::vector<double> carry(h, 0.0), dh(h), prev(h), dsz(h), dsr(h), dsh(h), dgated(h), dprev(h);
  for (std::size_t step = steps; step-- > 0;) {
    for (std::size_t i = 0; i < h; ++i) {
      dh[i] = dy.at(step, i) + carry[i];
      prev[i] = step > 0 ? tr.output.at(step - 1, i) : 0.0;
    }
    for (std::size_t i = 0; i < h; ++i) {
      const double z = tr.update.at(step, i), cand = tr.candidate.at(step, i);
      dsz[i] = dh[i] * (cand - prev[i]) * z * (1.0 - z);
      dsh[i] = dh[i] * z * (1.0 - cand * cand);
      dprev[i] = dh[i] * (1.0 - z);
    }
    // Candidate path: h~ = tanh(W_h x + U_h (r . h_prev) + b_h)
    std::fill(dgated.begin(), dgated.end(), 0.0);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t k = 0; k < h; ++k) {
        g.du_h.at(i, k) += dsh[i] * tr.reset.at(step, k) * prev[k];
        dgated[k] += p.u_h.at(i, k) * dsh[i];
      }
    }
    for (std::size_t k = 0; k < h; ++k) {
      const double r = tr.reset.at(step, k);
      dsr[k] = dgated[k] * prev[k] * r * (1.0 - r);
      dprev[k] += dgated[k] * r;
    }
    const double* xt = x.data().data() + step * in;
    for (std::size_t i = 0; i < h; ++i) {
      g.db_z[i] += dsz[i];
      g.db_r[i] += dsr[i];
      g.db_h[i] += dsh[i];
      for (std::size_t k = 0; k < in; ++k) {
        g.dw_z.at(i, k) += dsz[i] * xt[k];
        g.dw_r.at(i, k) += dsr[i] * xt[k];
        g.dw_h.at(i, k) += dsh[i] * xt[k];
        g.dx.at(step, k) += p.w_z.at(i, k) * dsz[i] + p.w_r.at(i, k) * dsr[i] + p.w_h.at(i, k) * dsh[i];
      }
      for (std::size_t k = 0; k < h; ++k) {
        g.du_z.at(i, k) += dsz[i] * prev[k];
        g.du_r.at(i, k) += dsr[i] * prev[k];
        dprev[k] += p.u_z.at(i, k) * dsz[i] + p.u_r.at(i, k) * dsr[i];
      }
    }
    carry = dprev;
  }
  return g;
}

HeadGrads fusion_head(const Tensor& seq, const Tensor& gru_out, const Tensor& conv_w, const Tensor& head_w,
                      HeadFusion mode, const Tensor& dlogits) {
  const std::size_t steps = seq.dim(0), in = seq.dim(1), h = conv_w.dim(0), width = head_w.dim(1);
  HeadGrads g{Tensor(seq.shape()), Tensor(gru_out.shape()), Tensor(conv_w.shape()), Tensor(head_w.shape()),
              Tensor({head_w.dim(0)})};
  // pooled = mean over steps of fused; logits = head_w pooled + head_b
  Tensor pooled({width});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < h; ++i) {
      double branch = 0.0;
      for (std::size_t k = 0; k < in; ++k) branch += conv_w.at(i, k) * seq.at(t, k);
      if (mode == HeadFusion::kAdd) {
        pooled[i] += gru_out.at(t, i) + branch;
      } else {
        pooled[i] += gru_out.at(t, i);
        pooled[h + i] += branch;
      }
    }
  }
  for (auto& v : pooled.values()) v /= static_cast<double>(steps);
  std::vector<double> dpooled(width, 0.0);
  for (std::size_t o = 0; o < head_w.dim(0); ++o) {
    g.dhead_b[o] = dlogits[o];
    for (std::size_t i = 0; i < width; ++i) {
      g.dhead_w.at(o, i) = dlogits[o] * pooled[i];
      dpooled[i] += head_w.at(o, i) * dlogits[o];
    }
  }
  const double inv = 1.0 / static_cast<double>(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < h; ++i) {
      const double dgru = dpooled[i] * inv;
      const double dbranch = (mode == HeadFusion::kAdd ? dpooled[i] : dpooled[h + i]) * inv;
      g.dgru_out.at(t, i) = dgru;
      for (std::size_t k = 0; k < in; ++k) {
        g.dconv_w.at(i, k) += dbranch * seq.at(t, k);
        g.dseq.at(t, k) += conv_w.at(i, k) * dbranch;
      }
    }
  }
  return g;
}

}  // namespace asc::grad
