#include "nwa/diff_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nwa {
namespace {

void require_same_shape(Shape a, Shape b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(a) + " vs " +
                                to_string(b));
  }
}

// softmax(-(g + h) / tau) over the listed nodes.
void selection_weights(const std::vector<int>& open, const std::vector<double>& g,
                       const double* h, double tau, std::vector<double>& out) {
  out.resize(open.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < open.size(); ++k) {
    out[k] = -(g[k] + h[open[k]]) / tau;
    best = std::max(best, out[k]);
  }
  double z = 0.0;
  for (double& v : out) {
    v = std::exp(v - best);
    z += v;
  }
  for (double& v : out) v /= z;
}

// dL/dF for every open node of one step, given the step's weights.
void softmax_pullback(const SoftSearchStep& step, const double* grad_e, double tau,
                      std::vector<double>& out) {
  double mean = 0.0;
  for (std::size_t k = 0; k < step.open.size(); ++k) mean += step.weights[k] * grad_e[step.open[k]];
  out.resize(step.open.size());
  for (std::size_t k = 0; k < step.open.size(); ++k) {
    out[k] = -step.weights[k] * (grad_e[step.open[k]] - mean) / tau;
  }
}

}  // namespace

std::pair<Mask, BlackBoxContext> blackbox_forward(const CostField& costs,
                                                  const HeuristicField<double>& h, Cell source,
                                                  Cell target, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("blackbox_forward: lambda must be > 0");
  check_costs(costs);
  SearchResult<double> res = astar(costs, h, source, target);
  BlackBoxContext ctx{costs, res.path_mask, lambda, source, target, h};
  return {std::move(res.path_mask), std::move(ctx)};
}

CostField blackbox_backward(const BlackBoxContext& ctx, const CostField& grad_y) {
  require_same_shape(shape_of(ctx.costs_in), shape_of(grad_y), "blackbox_backward");
  const CostField perturbed =
      (ctx.costs_in + ctx.lambda * grad_y).cwiseMax(kPerturbedCostFloor);
  const double scale = std::min(1.0, perturbed.minCoeff() / ctx.costs_in.minCoeff());
  HeuristicField<double> h = ctx.h_field;
  if (scale < 1.0) h.values *= scale;
  const Mask y_perturbed = astar(perturbed, h, ctx.source, ctx.target).path_mask;
  return -(ctx.y_forward.cast<double>() - y_perturbed.cast<double>()) / ctx.lambda;
}

NeuralAstarOutput neural_astar_forward(const CostField& costs, const HeuristicField<double>& h_eps,
                                       Cell source, Cell target, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("neural_astar_forward: tau must be > 0");
  if (h_eps.target != target) {
    throw std::invalid_argument("neural_astar_forward: heuristic target mismatch");
  }
  check_costs(costs);
  const Shape shape = shape_of(costs);
  SoftSearchTrace trace;
  trace.shape = shape;
  trace.tau = tau;
  trace.source = source;
  trace.target = target;
  trace.h_values = h_eps.values;
  trace.final_parent.assign(shape.size(), -1);
  trace.soft_expansions = CostField::Zero(shape.height, shape.width);

  const double* h = trace.h_values.data();
  auto record = [&](const detail::SearchState<double>& st, int chosen) {
    SoftSearchStep step;
    for (int i = 0; i < shape.size(); ++i) {
      if (!st.is_open(i)) continue;
      if (i == chosen) step.chosen = static_cast<int>(step.open.size());
      step.open.push_back(i);
      step.g.push_back(st.g[i]);
      step.parent.push_back(st.parent[i]);
    }
    selection_weights(step.open, step.g, h, tau, step.weights);
    for (std::size_t k = 0; k < step.open.size(); ++k) {
      trace.soft_expansions.data()[step.open[k]] += step.weights[k];
    }
    trace.final_parent[chosen] = st.parent[chosen];
    trace.steps.push_back(std::move(step));
  };
  SearchResult<double> res =
      detail::best_first_search(costs, h_eps.values, source, target, record);
  Mask expansions = res.expansions;
  return {std::move(expansions), std::move(res), std::move(trace)};
}

CostField neural_astar_backward(const SoftSearchTrace& trace, const CostField& grad_e) {
  require_same_shape(trace.shape, shape_of(grad_e), "neural_astar_backward");
  CostField grad_h = CostField::Zero(trace.shape.height, trace.shape.width);
  std::vector<double> d_f;
  for (const SoftSearchStep& step : trace.steps) {
    softmax_pullback(step, grad_e.data(), trace.tau, d_f);
    for (std::size_t k = 0; k < step.open.size(); ++k) grad_h.data()[step.open[k]] += d_f[k];
  }
  return grad_h;
}

CostField neural_astar_cost_backward(const SoftSearchTrace& trace, const CostField& grad_e) {
  require_same_shape(trace.shape, shape_of(grad_e), "neural_astar_cost_backward");
  CostField grad_w = CostField::Zero(trace.shape.height, trace.shape.width);
  std::vector<double> pending(trace.shape.size(), 0.0);  // dL/dG of closed nodes
  std::vector<double> d_f;
  for (const SoftSearchStep& step : trace.steps) {
    softmax_pullback(step, grad_e.data(), trace.tau, d_f);
    for (std::size_t k = 0; k < step.open.size(); ++k) {
      grad_w.data()[step.open[k]] += d_f[k];
      if (step.parent[k] >= 0) pending[step.parent[k]] += d_f[k];
    }
  }
  // Parents close before their children, so reverse expansion order drains
  // each chain from the leaves toward the source.
  for (auto it = trace.steps.rbegin(); it != trace.steps.rend(); ++it) {
    const int c = it->open[it->chosen];
    grad_w.data()[c] += pending[c];
    if (trace.final_parent[c] >= 0) pending[trace.final_parent[c]] += pending[c];
  }
  return grad_w;
}

CostField soft_expansion_field(const SoftSearchTrace& trace, const CostField& h,
                               const CostField& costs) {
  require_same_shape(trace.shape, shape_of(h), "soft_expansion_field");
  require_same_shape(trace.shape, shape_of(costs), "soft_expansion_field");
  std::vector<double> closed_g(trace.shape.size(), 0.0);
  for (const SoftSearchStep& step : trace.steps) {
    const int c = step.open[step.chosen];
    const int p = trace.final_parent[c];
    closed_g[c] = (p >= 0 ? closed_g[p] : 0.0) + costs.data()[c];
  }
  CostField out = CostField::Zero(trace.shape.height, trace.shape.width);
  std::vector<double> g;
  std::vector<double> w;
  for (const SoftSearchStep& step : trace.steps) {
    g.resize(step.open.size());
    for (std::size_t k = 0; k < step.open.size(); ++k) {
      const int p = step.parent[k];
      g[k] = (p >= 0 ? closed_g[p] : 0.0) + costs.data()[step.open[k]];
    }
    selection_weights(step.open, g, h.data(), trace.tau, w);
    for (std::size_t k = 0; k < step.open.size(); ++k) out.data()[step.open[k]] += w[k];
  }
  return out;
}

}  // namespace nwa
