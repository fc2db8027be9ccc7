#pragma once

// Reverse-mode passes for each layer in model.hpp. `dy` is the gradient of the
// loss with respect to the layer output. Where a layer ends in ReLU, pass the
// post-activation output so the mask can be applied.

#include "asc/model.hpp"
#include "asc/tensor.hpp"

namespace asc::grad {

/// dy * (y > 0)
Tensor relu_backward(const Tensor& y, const Tensor& dy);

struct ConvGrads {
  Tensor dx;
  Tensor dw;
  Tensor db;  // empty when the layer has no bias
};

/// 3x3 stem, including its ReLU (`y` is the stem output).
ConvGrads conv2d_stem(const Tensor& x, const Tensor& w, const Tensor& y, const Tensor& dy);
/// Linear part only (no activation).
ConvGrads pointwise_conv(const Tensor& x, const Tensor& w, const Tensor& dy, bool has_bias);
ConvGrads depthwise_conv1d_time(const Tensor& x, const Tensor& w, const Tensor& dy);
ConvGrads depthwise_conv1d_freq(const Tensor& x, const Tensor& w, std::size_t multiplier, std::size_t stride,
                                const Tensor& dy);

/// Inverse permutation of channel_shuffle(x, groups).
Tensor channel_shuffle(const Tensor& dy, std::size_t groups);

struct SeGrads {
  Tensor dx, dw1, db1, dw2, db2;
};
SeGrads se_block(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2,
                 const Tensor& dy);

Tensor hybrid_pool(const Tensor& x, const Tensor& dy);
Tensor time_mean(const Shape& x_shape, const Tensor& dy);

struct GruGrads {
  Tensor dx;  // [C x F']
  Tensor dw_z, dw_r, dw_h, du_z, du_r, du_h, db_z, db_r, db_h;
};
/// Backpropagation through time; dy holds the gradient for every step's output.
GruGrads gru_over_frequency(const Tensor& x, const GruParams& p, const GruTrace& trace, const Tensor& dy);

struct HeadGrads {
  Tensor dseq;      // gradient reaching the sequence through the parallel conv
  Tensor dgru_out;  // gradient for every GRU step output
  Tensor dconv_w, dhead_w, dhead_b;
};
HeadGrads fusion_head(const Tensor& seq, const Tensor& gru_out, const Tensor& conv_w, const Tensor& head_w,
                      HeadFusion mode, const Tensor& dlogits);

}  // namespace asc::grad
