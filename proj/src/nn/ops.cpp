#include "nwa/nn/ops.hpp"

#include <cmath>

namespace nwa::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
  int c, h, w, k, stride, pad, ho, wo;
};

ConvGeometry geometry(const Tensor& x, const ConvLayer& layer) {
  if (x.rank() != 3) throw std::invalid_argument("conv2d: input must be (C,H,W), got " + x.shape_string());
  if (x.dim(0) != layer.in_channels()) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(x.dim(0)) +
                                " channels, layer expects " + std::to_string(layer.in_channels()));
  }
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), layer.kernel_size(), layer.stride, layer.padding, 0, 0};
  g.ho = (g.h + 2 * g.pad - g.k) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / g.stride + 1;
  if (g.ho <= 0 || g.wo <= 0) throw std::invalid_argument("conv2d: input smaller than kernel");
  return g;
}

RowMat im2col(const Tensor& x, const ConvGeometry& g) {
  RowMat cols = RowMat::Zero(static_cast<Eigen::Index>(g.c) * g.k * g.k,
                             static_cast<Eigen::Index>(g.ho) * g.wo);
  const double* src = x.data();
  for (int c = 0; c < g.c; ++c)
    for (int ki = 0; ki < g.k; ++ki)
      for (int kj = 0; kj < g.k; ++kj) {
        double* row = cols.row((c * g.k + ki) * g.k + kj).data();
        for (int oi = 0; oi < g.ho; ++oi) {
          const int i = oi * g.stride - g.pad + ki;
          if (i < 0 || i >= g.h) continue;
          const double* line = src + (static_cast<Eigen::Index>(c) * g.h + i) * g.w;
          for (int oj = 0; oj < g.wo; ++oj) {
            const int j = oj * g.stride - g.pad + kj;
            if (j >= 0 && j < g.w) row[oi * g.wo + oj] = line[j];
          }
        }
      }
  return cols;
}

void col2im(const RowMat& cols, const ConvGeometry& g, Tensor& dx) {
  double* dst = dx.data();
  for (int c = 0; c < g.c; ++c)
    for (int ki = 0; ki < g.k; ++ki)
      for (int kj = 0; kj < g.k; ++kj) {
        const double* row = cols.row((c * g.k + ki) * g.k + kj).data();
        for (int oi = 0; oi < g.ho; ++oi) {
          const int i = oi * g.stride - g.pad + ki;
          if (i < 0 || i >= g.h) continue;
          double* line = dst + (static_cast<Eigen::Index>(c) * g.h + i) * g.w;
          for (int oj = 0; oj < g.wo; ++oj) {
            const int j = oj * g.stride - g.pad + kj;
            if (j >= 0 && j < g.w) line[j] += row[oi * g.wo + oj];
          }
        }
      }
}

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_string() +
                                " vs " + b.shape_string());
  }
}

}  // namespace

ConvLayer::ConvLayer(int in_ch, int out_ch, int k, int stride_, int padding_)
    : kernel({out_ch, in_ch, k, k}), bias({out_ch}), stride(stride_),
      padding(padding_ < 0 ? k / 2 : padding_) {
  if (k % 2 == 0) throw std::invalid_argument("ConvLayer: kernel size must be odd");
  if (stride < 1) throw std::invalid_argument("ConvLayer: stride must be >= 1");
}

Tensor conv2d_forward(const Tensor& x, const ConvLayer& layer) {
  const ConvGeometry g = geometry(x, layer);
  const RowMat cols = im2col(x, g);
  Eigen::Map<const RowMat> k(layer.kernel.data(), layer.out_channels(), cols.rows());
  Tensor out({layer.out_channels(), g.ho, g.wo});
  Eigen::Map<RowMat> y(out.data(), layer.out_channels(), cols.cols());
  y.noalias() = k * cols;
  y.colwise() += layer.bias.values();
  return out;
}

ConvGrads conv2d_backward(const Tensor& x, const ConvLayer& layer, const Tensor& grad_out,
                          bool need_input_grad) {
  const ConvGeometry g = geometry(x, layer);
  if (grad_out.rank() != 3 || grad_out.dim(0) != layer.out_channels() || grad_out.dim(1) != g.ho ||
      grad_out.dim(2) != g.wo) {
    throw std::invalid_argument("conv2d_backward: grad_out shape " + grad_out.shape_string());
  }
  const RowMat cols = im2col(x, g);
  Eigen::Map<const RowMat> k(layer.kernel.data(), layer.out_channels(), cols.rows());
  Eigen::Map<const RowMat> dy(grad_out.data(), layer.out_channels(), cols.cols());

  ConvGrads grads{Tensor{}, Tensor(layer.kernel.shape()), Tensor(layer.bias.shape())};
  Eigen::Map<RowMat> dk(grads.kernel.data(), layer.out_channels(), cols.rows());
  dk.noalias() = dy * cols.transpose();
  grads.bias.values() = dy.rowwise().sum();
  if (need_input_grad) {
    const RowMat dcols = k.transpose() * dy;
    grads.input = Tensor(x.shape());
    col2im(dcols, g, grads.input);
  }
  return grads;
}

Tensor relu_forward(const Tensor& x) {
  return Tensor(x.shape(), x.values().cwiseMax(0.0));
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  require_same(x, grad_out, "relu_backward");
  return Tensor(x.shape(), (x.values().array() > 0.0).select(grad_out.values(), 0.0));
}

Tensor sigmoid_forward(const Tensor& x) {
  return Tensor(x.shape(), x.values().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }));
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
  require_same(y, grad_out, "sigmoid_backward");
  return Tensor(y.shape(),
                (grad_out.values().array() * y.values().array() * (1.0 - y.values().array())).matrix());
}

Tensor avgpool_forward(const Tensor& x, int factor) {
  if (x.rank() != 3) throw std::invalid_argument("avgpool: input must be (C,H,W)");
  if (factor < 1 || x.dim(1) % factor || x.dim(2) % factor) {
    throw std::invalid_argument("avgpool: resolution " + x.shape_string() +
                                " not divisible by " + std::to_string(factor));
  }
  const int c = x.dim(0), ho = x.dim(1) / factor, wo = x.dim(2) / factor;
  Tensor out({c, ho, wo});
  const double inv = 1.0 / (factor * factor);
  for (int ch = 0; ch < c; ++ch) {
    auto in = x.plane(ch);
    auto o = out.plane(ch);
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j) o(i, j) = in.block(i * factor, j * factor, factor, factor).sum() * inv;
  }
  return out;
}

Tensor avgpool_backward(const Tensor& grad_out, int factor) {
  const int c = grad_out.dim(0), ho = grad_out.dim(1), wo = grad_out.dim(2);
  Tensor dx({c, ho * factor, wo * factor});
  const double inv = 1.0 / (factor * factor);
  for (int ch = 0; ch < c; ++ch) {
    auto g = grad_out.plane(ch);
    auto d = dx.plane(ch);
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j) d.block(i * factor, j * factor, factor, factor).setConstant(g(i, j) * inv);
  }
  return dx;
}

Tensor minmax_scale(const Tensor& x, double lo, double hi) {
  if (!(lo > 0.0)) throw std::invalid_argument("minmax_scale: lower bound must be > 0");
  if (!(hi > lo)) throw std::invalid_argument("minmax_scale: upper bound must exceed lower bound");
  return Tensor(x.shape(), (lo + (hi - lo) * x.values().array()).matrix());
}

Tensor minmax_scale_backward(const Tensor& grad_out, double lo, double hi) {
  return Tensor(grad_out.shape(), (hi - lo) * grad_out.values());
}

Tensor range_normalize(const Tensor& x) {
  if (x.numel() == 0) return x;
  const double lo = x.values().minCoeff();
  const double span = x.values().maxCoeff() - lo;
  if (!(span > 0.0)) return Tensor(x.shape(), Eigen::VectorXd::Constant(x.numel(), 0.5));
  return Tensor(x.shape(), ((x.values().array() - lo) / span).matrix());
}

Tensor range_normalize_backward(const Tensor& x, const Tensor& grad_out) {
  if (grad_out.shape() != x.shape()) throw std::invalid_argument("range_normalize_backward: shape mismatch");
  Tensor g(x.shape());
  if (x.numel() == 0) return g;
  Eigen::Index i_min = 0, i_max = 0;
  const double lo = x.values().minCoeff(&i_min);
  const double span = x.values().maxCoeff(&i_max) - lo;
  if (!(span > 0.0)) return g;
  const Eigen::ArrayXd y = (x.values().array() - lo) / span;
  const Eigen::ArrayXd go = grad_out.values().array();
  g.values() = (go / span).matrix();
  g.data()[i_min] += (go * (y - 1.0)).sum() / span;
  g.data()[i_max] -= (go * y).sum() / span;
  return g;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: nothing to concatenate");
  const int h = parts.front()->dim(1), w = parts.front()->dim(2);
  int channels = 0;
  for (const Tensor* p : parts) {
    if (p->rank() != 3 || p->dim(1) != h || p->dim(2) != w) {
      throw std::invalid_argument("concat_channels: spatial shape mismatch " + p->shape_string());
    }
    channels += p->dim(0);
  }
  Tensor out({channels, h, w});
  Eigen::Index offset = 0;
  for (const Tensor* p : parts) {
    out.values().segment(offset, p->numel()) = p->values();
    offset += p->numel();
  }
  return out;
}

}  // namespace nwa::nn
