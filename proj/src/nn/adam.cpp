#include "nwa/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace nwa::nn {

void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and state sizes differ");
  }
  ++state.step;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grads;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grads.cwiseAbs2();
  const double m_corr = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double v_corr = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  params.array() -= config.lr * (state.m.array() / m_corr) /
                    ((state.v.array() / v_corr).sqrt() + config.epsilon);
}

}  // namespace nwa::nn
