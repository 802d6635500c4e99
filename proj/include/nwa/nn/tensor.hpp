#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nwa::nn {

/// Row-major n-d array of doubles with a lazily allocated gradient buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    values_ = Eigen::VectorXd::Zero(numel_of(shape_));
  }
  Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}
  Tensor(std::vector<int> shape, Eigen::VectorXd values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != numel_of(shape_)) {
      throw std::invalid_argument("Tensor: value count does not match shape " + shape_string());
    }
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  Eigen::Index numel() const { return values_.size(); }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  bool has_grad() const { return grad_.size() == values_.size(); }
  /// Allocates a zero gradient on first use.
  Eigen::VectorXd& grad() {
    if (!has_grad()) grad_ = Eigen::VectorXd::Zero(values_.size());
    return grad_;
  }
  const Eigen::VectorXd& grad() const { return grad_; }
  void zero_grad() { grad_.setZero(values_.size()); }

  /// Channel-plane view for 3-d (C, H, W) tensors.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> plane(
      int c) const {
    return {data() + static_cast<Eigen::Index>(c) * dim(1) * dim(2), dim(1), dim(2)};
  }
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> plane(int c) {
    return {data() + static_cast<Eigen::Index>(c) * dim(1) * dim(2), dim(1), dim(2)};
  }

  std::string shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) s += (i ? "," : "") + std::to_string(shape_[i]);
    return s + "]";
  }

  static Eigen::Index numel_of(const std::vector<int>& shape) {
    Eigen::Index n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }

 private:
  std::vector<int> shape_;
  Eigen::VectorXd values_;
  Eigen::VectorXd grad_;
};

}  // namespace nwa::nn
