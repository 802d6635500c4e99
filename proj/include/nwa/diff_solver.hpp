#pragma once

#include <utility>
#include <vector>

#include "nwa/grid.hpp"
#include "nwa/search.hpp"

namespace nwa {

// ---------------------------------------------------------------------------
// Black-Box A*: exact solver forward, perturb-and-resolve backward.
// ---------------------------------------------------------------------------

inline constexpr double kDefaultLambda = 20.0;
/// Lower clamp applied to perturbed costs so the solver precondition holds.
inline constexpr double kPerturbedCostFloor = 1e-6;

struct BlackBoxContext {
  CostField costs_in;
  Mask y_forward;
  double lambda = kDefaultLambda;
  Cell source;
  Cell target;
  HeuristicField<double> h_field;
};

/// Runs A* with `h` (expected to be the admissible Chebyshev field) and keeps
/// what the backward pass needs.
std::pair<Mask, BlackBoxContext> blackbox_forward(const CostField& costs,
                                                  const HeuristicField<double>& h, Cell source,
                                                  Cell target, double lambda = kDefaultLambda);

/// dL/dW = -(Y - Y') / lambda with Y' = solve(max(W + lambda * dL/dY, floor)).
///
/// The stored heuristic is rescaled by min(1, min(W') / min(W)) before the
/// second solve so that a Chebyshev-shaped field stays admissible for W'.
CostField blackbox_backward(const BlackBoxContext& ctx, const CostField& grad_y);

// ---------------------------------------------------------------------------
// Neural A*: hard expansions forward, softmax-relaxed selection backward.
// ---------------------------------------------------------------------------

/// One expansion step: the open set just before the pop and the selection
/// distribution softmax(-(G + H) / tau) over it.
struct SoftSearchStep {
  std::vector<int> open;     // row-major indices, ascending
  std::vector<double> g;     // G of each open node at this step
  std::vector<int> parent;   // parent of each open node at this step (-1 for the source)
  std::vector<double> weights;
  int chosen = -1;           // position in `open` of the expanded node
};

struct SoftSearchTrace {
  Shape shape;
  double tau = 1.0;
  Cell source;
  Cell target;
  CostField h_values;
  std::vector<SoftSearchStep> steps;
  /// Parent of every closed node once the search ends; fixed after closure.
  std::vector<int> final_parent;
  /// Sum over steps of the selection weights.
  CostField soft_expansions;
};

struct NeuralAstarOutput {
  Mask expansions;
  SearchResult<double> search;
  SoftSearchTrace trace;
};

NeuralAstarOutput neural_astar_forward(const CostField& costs, const HeuristicField<double>& h_eps,
                                       Cell source, Cell target, double tau);

/// dL/dH through every step's selection softmax (straight-through for the
/// hard pick). G is a constant here.
CostField neural_astar_backward(const SoftSearchTrace& trace, const CostField& grad_e);

/// dL/dW through the same softmaxes, with G(n) the cost sum along the node's
/// parent chain at that step. Only the Neural A* baselines consume this; the
/// combined planner routes costs through stop_gradient instead.
CostField neural_astar_cost_backward(const SoftSearchTrace& trace, const CostField& grad_e);

/// Fully-soft expansion field: replays the recorded trajectory (open sets,
/// parent chains) under new heuristic and cost values and sums the
/// selection weights. Reference function for finite-difference checks.
CostField soft_expansion_field(const SoftSearchTrace& trace, const CostField& h,
                               const CostField& costs);

// ---------------------------------------------------------------------------
// Gradient barrier.
// ---------------------------------------------------------------------------

inline CostField stop_gradient(const CostField& x) { return x; }

inline CostField stop_gradient_backward(const CostField& grad) {
  return CostField::Zero(grad.rows(), grad.cols());
}

}  // namespace nwa
