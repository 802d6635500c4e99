#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace nwa::nn {

/// Scalar function of a flat input. When `grad` is non-null it must be filled
/// with the analytic gradient.
using ScalarFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  Eigen::Index worst_index = -1;
  Eigen::Index checked = 0;
};

/// Central differences against the analytic gradient. Relative error per
/// coordinate is |a - n| / max(|a|, |n|, abs_floor). When `indices` is
/// non-empty only those coordinates are probed.
GradCheckReport grad_check(const ScalarFn& fn, const Eigen::VectorXd& x, double step = 1e-4,
                           const std::vector<Eigen::Index>& indices = {},
                           double abs_floor = 1e-7);

}  // namespace nwa::nn
