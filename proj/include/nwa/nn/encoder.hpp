#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "nwa/nn/ops.hpp"

namespace nwa::nn {

/// Fully-convolutional map encoder:
///
///   conv3x3/s(in -> w0) relu | avgpool(tile / s) | conv3x3(w0 -> w1) relu
///   | conv3x3(w1 -> w2) relu | conv1x1(w2 -> 1) sigmoid
///
/// with stem stride s = 2 for even tiles and 1 otherwise. Total downsampling
/// is exactly `tile`, so an image of (grid * tile) pixels per side maps onto
/// the grid cell for cell.
struct EncoderConfig {
  int in_channels = 3;
  std::array<int, 3> widths{16, 32, 32};
  int tile = 8;
  /// Sigmoid on the last layer; off leaves the 1x1 output linear.
  bool sigmoid_head = true;

  int stem_stride() const { return tile % 2 == 0 ? 2 : 1; }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

class Encoder {
 public:
  static constexpr int kLayers = 4;

  /// Intermediate activations kept for the backward pass.
  struct Cache {
    Tensor input;
    Tensor stem_pre;
    Tensor pooled;
    Tensor mid1_pre;
    Tensor mid1;
    Tensor mid2_pre;
    Tensor mid2;
    Tensor output;
  };

  Encoder() = default;
  explicit Encoder(const EncoderConfig& config);

  /// Kaiming-uniform (fan-in) kernels, zero biases.
  void init(std::mt19937_64& rng);

  /// (in_channels, G*tile, G*tile) -> (1, G, G), in (0, 1) with a sigmoid head.
  Tensor forward(const Tensor& input, Cache* cache = nullptr) const;

  /// Accumulates dL/dparams into `param_grad` (flat, parameter order) given
  /// dL/doutput. Writes dL/dinput when `input_grad` is non-null.
  void backward(const Cache& cache, const Tensor& grad_output, Eigen::Ref<Eigen::VectorXd> param_grad,
                Tensor* input_grad = nullptr) const;

  /// Flat parameter vector: for each layer in order, kernel (row-major) then bias.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
  Eigen::Index parameter_count() const;

  const EncoderConfig& config() const { return config_; }
  const std::vector<ConvLayer>& layers() const { return layers_; }
  std::vector<ConvLayer>& layers() { return layers_; }

 private:
  EncoderConfig config_;
  std::vector<ConvLayer> layers_;
};

/// One-hot plane (1, G*tile, G*tile) marking the pixels of grid cell (row, col).
Tensor cell_channel(int row, int col, int grid_height, int grid_width, int tile);

}  // namespace nwa::nn
