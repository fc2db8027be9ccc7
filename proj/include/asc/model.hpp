#pragma once

#include <string>
#include <utility>
#include <vector>

#include "asc/frontend.hpp"
#include "asc/model_config.hpp"
#include "asc/tensor.hpp"
#include "asc/weights.hpp"

namespace asc {

// ---- layers ----
// Activations are [C x F x T] (channel, frequency, time) unless noted.

/// 3x3 convolution, stride 1, zero padding 1, plus bias, then ReLU.
/// x [Cin x F x T], w [Cout x Cin x 3 x 3], b [Cout].
Tensor conv2d_stem(const Tensor& x, const Tensor& w, const Tensor& b);

/// y[o,f,t] = sum_i w[o,i] x[i,f,t] (+ b[o]). An empty `b` means no bias.
Tensor pointwise_conv(const Tensor& x, const Tensor& w, const Tensor& b = {});

/// Per-channel 1D convolution along time; w [C x k], odd k, same padding.
Tensor depthwise_conv1d_time(const Tensor& x, const Tensor& w);

/// Per-channel 1D convolution along frequency with channel multiplier m and
/// stride s. Output channel c*m+j reads only input channel c; w [(C*m) x k].
Tensor depthwise_conv1d_freq(const Tensor& x, const Tensor& w, std::size_t multiplier, std::size_t stride);

/// Channels viewed as [g x C/g], transposed, flattened.
Tensor channel_shuffle(const Tensor& x, std::size_t groups);

struct ConvTWeights {
  const Tensor& pw_weight;
  const Tensor& pw_bias;
  const Tensor& dw_time;
  const Tensor& dw_freq;
};

/// pointwise -> relu -> shuffle -> dw time -> relu -> dw freq -> relu
Tensor convt_block(const Tensor& x, const ConvTSpec& spec, const ConvTWeights& w, std::size_t shuffle_groups);

/// Squeeze-and-excite: gates = sigmoid(w2 relu(w1 mean(x) + b1) + b2), y = gates * x.
/// Empty bias tensors are treated as zero.
Tensor se_block(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2);
Tensor se_block(const Tensor& x, const Tensor& w1, const Tensor& w2);

/// 0.5 * (maxpool + avgpool), 2x2 window, stride 2, floor division of extents.
Tensor hybrid_pool(const Tensor& x);

/// [C x F x T] -> [C x F], mean over time.
Tensor time_mean(const Tensor& x);

struct GruParams {
  const Tensor& w_z;
  const Tensor& w_r;
  const Tensor& w_h;
  const Tensor& u_z;
  const Tensor& u_r;
  const Tensor& u_h;
  const Tensor& b_z;
  const Tensor& b_r;
  const Tensor& b_h;
};

/// Per-step GRU internals, each [C x H]. `output` row t is h after step t.
struct GruTrace {
  Tensor output;
  Tensor update;     // z
  Tensor reset;      // r
  Tensor candidate;  // h~
};

/// GRU whose sequence runs over the C channel rows of x [C x F'], h0 = 0.
///   z = sigmoid(W_z x + U_z h + b_z),  r = sigmoid(W_r x + U_r h + b_r)
///   h~ = tanh(W_h x + U_h (r . h) + b_h),  h <- (1 - z) . h + z . h~
GruTrace gru_trace(const Tensor& x, const GruParams& p);
Tensor gru_over_frequency(const Tensor& x, const GruParams& p);

/// Parallel branch p[t] = conv_w seq[t], fused with the GRU output (add or
/// concat), averaged over the C steps, then logits = head_w pooled + head_b.
Tensor fusion_head(const Tensor& seq, const Tensor& gru_out, const Tensor& conv_w, const Tensor& head_w,
                   const Tensor& head_b, HeadFusion mode = HeadFusion::kAdd);

// ---- network ----

struct BlockTrace {
  Tensor input;
  Tensor pointwise;  // after relu
  Tensor shuffled;
  Tensor dw_time;    // after relu
  Tensor dw_freq;    // after relu
  Tensor se;         // SE output, empty when the block has none
};

/// Every intermediate activation of one forward pass (used by backprop).
struct NetworkTrace {
  Tensor input;  // [1 x F x T]
  Tensor stem;
  Tensor pool;
  Tensor se0;
  std::vector<BlockTrace> blocks;
  Tensor sequence;  // [C x F']
  GruTrace gru;
  Tensor branch;  // [C x H]
  Tensor fused;   // [C x H] or [C x 2H]
  Tensor pooled;  // [H] or [2H]
  Tensor logits;

  /// (layer name, output shape) in the naming of plan_layers().
  std::vector<std::pair<std::string, Shape>> stage_shapes() const;
};

/// Full pass over a [input_mels x input_frames] feature. Validates weights.
NetworkTrace run_network(const ModelConfig& cfg, const WeightStore& weights, const Tensor& feature);

/// Logits [n_classes]; softmax is left to callers.
Tensor forward(const ModelConfig& cfg, const WeightStore& weights, const FeatureMap& feat);
Tensor forward(const ModelConfig& cfg, const WeightStore& weights, const Tensor& feature);

}  // namespace asc
