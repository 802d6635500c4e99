#pragma once

#include "nwa/nn/tensor.hpp"

namespace nwa::nn {

/// 2-d convolution (cross-correlation) with zero padding.
struct ConvLayer {
  Tensor kernel;  // (out_ch, in_ch, k, k)
  Tensor bias;    // (out_ch)
  int stride = 1;
  int padding = 0;

  ConvLayer() = default;
  ConvLayer(int in_ch, int out_ch, int k, int stride = 1, int padding = -1);

  int in_channels() const { return kernel.dim(1); }
  int out_channels() const { return kernel.dim(0); }
  int kernel_size() const { return kernel.dim(2); }
  Eigen::Index parameter_count() const { return kernel.numel() + bias.numel(); }
};

struct ConvGrads {
  Tensor input;   // empty when not requested
  Tensor kernel;
  Tensor bias;
};

// All activations are single-sample (C, H, W) tensors.

Tensor conv2d_forward(const Tensor& x, const ConvLayer& layer);
ConvGrads conv2d_backward(const Tensor& x, const ConvLayer& layer, const Tensor& grad_out,
                          bool need_input_grad = true);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

Tensor sigmoid_forward(const Tensor& x);
/// Takes the forward output y, not the input.
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out);

/// Non-overlapping average pooling with window and stride `factor`.
Tensor avgpool_forward(const Tensor& x, int factor);
Tensor avgpool_backward(const Tensor& grad_out, int factor);

/// y = lo + (hi - lo) * x. Requires 0 < lo < hi.
Tensor minmax_scale(const Tensor& x, double lo, double hi);
Tensor minmax_scale_backward(const Tensor& grad_out, double lo, double hi);

/// (x - min x) / (max x - min x) over the whole tensor; a constant tensor maps
/// to 0.5 with zero gradient.
Tensor range_normalize(const Tensor& x);
/// Takes the input x.
Tensor range_normalize_backward(const Tensor& x, const Tensor& grad_out);

/// Stacks (C_i, H, W) tensors along the channel axis.
Tensor concat_channels(const std::vector<const Tensor*>& parts);

}  // namespace nwa::nn
