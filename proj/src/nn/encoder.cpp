#include "nwa/nn/encoder.hpp"

#include <cmath>

namespace nwa::nn {

Encoder::Encoder(const EncoderConfig& config) : config_(config) {
  if (config.in_channels < 1) throw std::invalid_argument("Encoder: in_channels must be >= 1");
  if (config.tile < 1) throw std::invalid_argument("Encoder: tile must be >= 1");
  const auto& w = config.widths;
  layers_.emplace_back(config.in_channels, w[0], 3, config.stem_stride());
  layers_.emplace_back(w[0], w[1], 3);
  layers_.emplace_back(w[1], w[2], 3);
  layers_.emplace_back(w[2], 1, 1);
}

void Encoder::init(std::mt19937_64& rng) {
  for (ConvLayer& layer : layers_) {
    const int fan_in = layer.in_channels() * layer.kernel_size() * layer.kernel_size();
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < layer.kernel.numel(); ++i) layer.kernel.data()[i] = dist(rng);
    layer.bias.values().setZero();
  }
}

Tensor Encoder::forward(const Tensor& input, Cache* cache) const {
  if (input.rank() != 3 || input.dim(0) != config_.in_channels) {
    throw std::invalid_argument("Encoder: expected (" + std::to_string(config_.in_channels) +
                                ",H,W) input, got " + input.shape_string());
  }
  if (input.dim(1) % config_.tile || input.dim(2) % config_.tile) {
    throw std::invalid_argument("Encoder: resolution " + input.shape_string() +
                                " not divisible by tile size " + std::to_string(config_.tile));
  }
  Tensor stem_pre = conv2d_forward(input, layers_[0]);
  Tensor pooled = avgpool_forward(relu_forward(stem_pre), config_.tile / config_.stem_stride());
  Tensor mid1_pre = conv2d_forward(pooled, layers_[1]);
  Tensor mid1 = relu_forward(mid1_pre);
  Tensor mid2_pre = conv2d_forward(mid1, layers_[2]);
  Tensor mid2 = relu_forward(mid2_pre);
  Tensor output = conv2d_forward(mid2, layers_[3]);
  if (config_.sigmoid_head) output = sigmoid_forward(output);
  if (cache) {
    *cache = Cache{input,           std::move(stem_pre), std::move(pooled), std::move(mid1_pre),
                   std::move(mid1), std::move(mid2_pre), std::move(mid2),   output};
  }
  return output;
}

void Encoder::backward(const Cache& cache, const Tensor& grad_output,
                       Eigen::Ref<Eigen::VectorXd> param_grad, Tensor* input_grad) const {
  if (param_grad.size() != parameter_count()) {
    throw std::invalid_argument("Encoder::backward: gradient buffer has wrong size");
  }
  std::array<Eigen::Index, kLayers> offset{};
  for (int i = 1; i < kLayers; ++i) offset[i] = offset[i - 1] + layers_[i - 1].parameter_count();
  auto accumulate = [&](int layer, const ConvGrads& g) {
    param_grad.segment(offset[layer], g.kernel.numel()) += g.kernel.values();
    param_grad.segment(offset[layer] + g.kernel.numel(), g.bias.numel()) += g.bias.values();
  };

  Tensor d = config_.sigmoid_head ? sigmoid_backward(cache.output, grad_output) : grad_output;
  ConvGrads g3 = conv2d_backward(cache.mid2, layers_[3], d);
  accumulate(3, g3);
  d = relu_backward(cache.mid2_pre, g3.input);
  ConvGrads g2 = conv2d_backward(cache.mid1, layers_[2], d);
  accumulate(2, g2);
  d = relu_backward(cache.mid1_pre, g2.input);
  ConvGrads g1 = conv2d_backward(cache.pooled, layers_[1], d);
  accumulate(1, g1);
  d = relu_backward(cache.stem_pre, avgpool_backward(g1.input, config_.tile / config_.stem_stride()));
  ConvGrads g0 = conv2d_backward(cache.input, layers_[0], d, input_grad != nullptr);
  accumulate(0, g0);
  if (input_grad) *input_grad = std::move(g0.input);
}

Eigen::VectorXd Encoder::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index at = 0;
  for (const ConvLayer& layer : layers_) {
    flat.segment(at, layer.kernel.numel()) = layer.kernel.values();
    at += layer.kernel.numel();
    flat.segment(at, layer.bias.numel()) = layer.bias.values();
    at += layer.bias.numel();
  }
  return flat;
}

void Encoder::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("Encoder::set_parameters: expected " + std::to_string(parameter_count()) +
                                " values, got " + std::to_string(flat.size()));
  }
  Eigen::Index at = 0;
  for (ConvLayer& layer : layers_) {
    layer.kernel.values() = flat.segment(at, layer.kernel.numel());
    at += layer.kernel.numel();
    layer.bias.values() = flat.segment(at, layer.bias.numel());
    at += layer.bias.numel();
  }
}

Eigen::Index Encoder::parameter_count() const {
  Eigen::Index n = 0;
  for (const ConvLayer& layer : layers_) n += layer.parameter_count();
  return n;
}

Tensor cell_channel(int row, int col, int grid_height, int grid_width, int tile) {
  Tensor t({1, grid_height * tile, grid_width * tile});
  t.plane(0).block(row * tile, col * tile, tile, tile).setOnes();
  return t;
}

}  // namespace nwa::nn
