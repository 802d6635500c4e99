#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nwa/grid.hpp"

namespace nwa {

/// Heuristic values for a fixed target. Non-negative everywhere.
template <typename Scalar>
struct HeuristicField {
  Field<Scalar> values;
  Cell target;
};

template <typename Scalar>
struct SearchResult {
  NodeSequence path;
  Mask path_mask;
  Mask expansions;
  std::vector<Cell> pop_order;
  /// G at the target; includes the source cost.
  Scalar total_cost{};
};

class NoPathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline int chebyshev_distance(Cell a, Cell b) {
  return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col));
}

inline double euclidean_distance(Cell a, Cell b) {
  return std::hypot(static_cast<double>(a.row - b.row), static_cast<double>(a.col - b.col));
}

/// w_min * D_C(n, target).
template <typename Scalar>
HeuristicField<Scalar> h_chebyshev(Scalar w_min, Cell target, Shape shape) {
  if (!(w_min > Scalar(0))) throw std::invalid_argument("h_chebyshev: w_min must be > 0");
  if (!shape.contains(target)) throw std::invalid_argument("h_chebyshev: target out of bounds");
  HeuristicField<Scalar> h{Field<Scalar>(shape.height, shape.width), target};
  for (int r = 0; r < shape.height; ++r)
    for (int c = 0; c < shape.width; ++c)
      h.values(r, c) = w_min * static_cast<Scalar>(chebyshev_distance({r, c}, target));
  return h;
}

/// D_C + 0.001 * D_E; not scaled by the minimum cost, hence not admissible in general.
inline HeuristicField<double> h_na(Cell target, Shape shape) {
  if (!shape.contains(target)) throw std::invalid_argument("h_na: target out of bounds");
  HeuristicField<double> h{CostField(shape.height, shape.width), target};
  for (int r = 0; r < shape.height; ++r)
    for (int c = 0; c < shape.width; ++c)
      h.values(r, c) = chebyshev_distance({r, c}, target) + 0.001 * euclidean_distance({r, c}, target);
  return h;
}

template <typename Scalar>
HeuristicField<Scalar> h_zero(Cell target, Shape shape) {
  return {Field<Scalar>::Zero(shape.height, shape.width), target};
}

namespace detail {

/// Mutable state of one best-first search, exposed to pop observers.
template <typename Scalar>
struct SearchState {
  Shape shape;
  std::vector<Scalar> g;
  std::vector<int> parent;
  std::vector<std::uint8_t> closed;

  bool is_open(int i) const {
    return !closed[i] && g[i] < std::numeric_limits<Scalar>::infinity();
  }
};

template <typename Scalar>
struct HeapEntry {
  Scalar f;
  Scalar g;
  int index;
};

/// Heap order: smallest F first, then larger G, then smaller row-major index.
template <typename Scalar>
struct LowerPriority {
  bool operator()(const HeapEntry<Scalar>& a, const HeapEntry<Scalar>& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g < b.g;
    return a.index > b.index;
  }
};

struct NoObserver {
  template <typename State>
  void operator()(const State&, int) const {}
};

/// A* without re-opening, heap with lazy deletion. `on_pop(state, chosen)` runs
/// once per expansion, before `chosen` is closed.
template <typename Scalar, typename Observer = NoObserver>
SearchResult<Scalar> best_first_search(const Field<Scalar>& costs, const Field<Scalar>& h,
                                       Cell source, Cell target, Observer&& on_pop = {}) {
  const Shape shape = shape_of(costs);
  if (shape_of(h) != shape) throw std::invalid_argument("search: heuristic/cost shape mismatch");
  if (!shape.contains(source) || !shape.contains(target)) {
    throw std::invalid_argument("search: source " + to_string(source) + " or target " +
                                to_string(target) + " outside grid " + to_string(shape));
  }
  constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
  SearchState<Scalar> st{shape, std::vector<Scalar>(shape.size(), kInf),
                         std::vector<int>(shape.size(), -1),
                         std::vector<std::uint8_t>(shape.size(), 0)};
  std::priority_queue<HeapEntry<Scalar>, std::vector<HeapEntry<Scalar>>, LowerPriority<Scalar>>
      open;

  const int s = shape.index(source);
  const int t = shape.index(target);
  const Scalar* cost = costs.data();
  const Scalar* heur = h.data();

  SearchResult<Scalar> result;
  result.expansions = Mask::Zero(shape.height, shape.width);

  st.g[s] = cost[s];
  open.push({st.g[s] + heur[s], st.g[s], s});
  bool reached = false;
  while (!open.empty()) {
    const HeapEntry<Scalar> top = open.top();
    open.pop();
    if (st.closed[top.index] || top.g != st.g[top.index]) continue;
    on_pop(std::as_const(st), top.index);
    st.closed[top.index] = 1;
    const Cell cur = shape.cell(top.index);
    result.pop_order.push_back(cur);
    result.expansions(cur.row, cur.col) = 1;
    if (top.index == t) {
      reached = true;
      break;
    }
    for_each_neighbor(cur, shape, [&](Cell n) {
      const int ni = shape.index(n);
      if (st.closed[ni]) return;
      const Scalar g_new = top.g + cost[ni];
      if (g_new < st.g[ni]) {
        st.g[ni] = g_new;
        st.parent[ni] = top.index;
        open.push({g_new + heur[ni], g_new, ni});
      }
    });
  }
  if (!reached) {
    throw NoPathError("no path from " + to_string(source) + " to " + to_string(target));
  }
  for (int i = t; i != -1; i = st.parent[i]) result.path.push_back(shape.cell(i));
  std::reverse(result.path.begin(), result.path.end());
  result.path_mask = Mask::Zero(shape.height, shape.width);
  for (Cell c : result.path) result.path_mask(c.row, c.col) = 1;
  result.total_cost = st.g[t];
  return result;
}

}  // namespace detail

/// F(n) = G(n) + H(n) with G(source) = costs[source].
template <typename Scalar>
SearchResult<Scalar> astar(const Field<Scalar>& costs, const HeuristicField<Scalar>& h,
                           Cell source, Cell target) {
  if (h.target != target) {
    throw std::invalid_argument("astar: heuristic built for " + to_string(h.target) +
                                ", search target is " + to_string(target));
  }
  return detail::best_first_search(costs, h.values, source, target);
}

/// A* with the heuristic scaled by (1 + eps).
template <typename Scalar>
SearchResult<Scalar> weighted_astar(const Field<Scalar>& costs, const HeuristicField<Scalar>& h,
                                    Scalar eps, Cell source, Cell target) {
  if (!(eps >= Scalar(0))) throw std::invalid_argument("weighted_astar: eps must be >= 0");
  if (eps == Scalar(0)) return astar(costs, h, source, target);
  HeuristicField<Scalar> scaled{(Scalar(1) + eps) * h.values, h.target};
  return astar(costs, scaled, source, target);
}

template <typename Scalar>
SearchResult<Scalar> dijkstra_oracle(const Field<Scalar>& costs, Cell source, Cell target) {
  return astar(costs, h_zero<Scalar>(target, shape_of(costs)), source, target);
}

}  // namespace nwa
