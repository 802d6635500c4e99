#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace nwa::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;

  static AdamState zeros(Eigen::Index n) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
  }
};

/// One bias-corrected Adam update, in place.
void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads, AdamState& state,
               const AdamConfig& config);

}  // namespace nwa::nn
