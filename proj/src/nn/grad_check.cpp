#include "nwa/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace nwa::nn {

GradCheckReport grad_check(const ScalarFn& fn, const Eigen::VectorXd& x, double step,
                           const std::vector<Eigen::Index>& indices, double abs_floor) {
  Eigen::VectorXd analytic(x.size());
  fn(x, &analytic);
  std::vector<Eigen::Index> probe = indices;
  if (probe.empty()) {
    probe.resize(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) probe[i] = i;
  }
  GradCheckReport report;
  Eigen::VectorXd xp = x;
  for (Eigen::Index i : probe) {
    xp[i] = x[i] + step;
    const double up = fn(xp, nullptr);
    xp[i] = x[i] - step;
    const double down = fn(xp, nullptr);
    xp[i] = x[i];
    const double numeric = (up - down) / (2.0 * step);
    const double abs_err = std::abs(numeric - analytic[i]);
    const double rel_err = abs_err / std::max({std::abs(numeric), std::abs(analytic[i]), abs_floor});
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel_err > report.max_rel_error || report.worst_index < 0) {
      report.max_rel_error = std::max(report.max_rel_error, rel_err);
      report.worst_index = i;
    }
    ++report.checked;
  }
  return report;
}

}  // namespace nwa::nn
