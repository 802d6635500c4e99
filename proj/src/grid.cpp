#include "nwa/grid.hpp"

#include <cmath>
#include <cstdlib>
#include <deque>
#include <set>

namespace nwa {

std::string to_string(Cell c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

std::string to_string(Shape s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width);
}

std::vector<Cell> neighbors(Cell cell, Shape shape) {
  if (!shape.contains(cell)) {
    throw std::invalid_argument("neighbors: cell " + to_string(cell) + " outside grid " +
                                to_string(shape));
  }
  std::vector<Cell> out;
  out.reserve(8);
  for_each_neighbor(cell, shape, [&](Cell n) { out.push_back(n); });
  return out;
}

bool are_adjacent(Cell a, Cell b) {
  const int dr = std::abs(a.row - b.row);
  const int dc = std::abs(a.col - b.col);
  return std::max(dr, dc) == 1;
}

void check_costs(const CostField& costs) {
  for (Eigen::Index i = 0; i < costs.size(); ++i) {
    const double v = costs.data()[i];
    if (!std::isfinite(v) || v <= 0.0) {
      throw std::invalid_argument("costs must be finite and strictly positive, got " +
                                  std::to_string(v) + " at linear index " + std::to_string(i));
    }
  }
}

Mask sequence_to_mask(const NodeSequence& seq, Shape shape) {
  Mask mask = Mask::Zero(shape.height, shape.width);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Cell c = seq[i];
    if (!shape.contains(c)) {
      throw std::invalid_argument("sequence_to_mask: cell " + to_string(c) + " out of bounds");
    }
    if (i > 0 && !are_adjacent(seq[i - 1], c)) {
      throw std::invalid_argument("sequence_to_mask: cells " + to_string(seq[i - 1]) + " and " +
                                  to_string(c) + " are not adjacent");
    }
    if (mask(c.row, c.col)) {
      throw std::invalid_argument("sequence_to_mask: cell " + to_string(c) + " repeated");
    }
    mask(c.row, c.col) = 1;
  }
  return mask;
}

bool validate_path(const NodeSequence& seq, Cell source, Cell target) {
  if (seq.empty() || seq.front() != source || seq.back() != target) return false;
  std::set<Cell> seen;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i].row < 0 || seq[i].col < 0) return false;
    if (!seen.insert(seq[i]).second) return false;
    if (i > 0 && !are_adjacent(seq[i - 1], seq[i])) return false;
  }
  return true;
}

NodeSequence mask_to_sequence(const Mask& mask, Cell source, Cell target) {
  const Shape shape = shape_of(mask);
  if (!shape.contains(source) || !shape.contains(target) || !mask(source.row, source.col) ||
      !mask(target.row, target.col)) {
    return {};
  }
  std::vector<int> parent(shape.size(), -2);
  std::deque<Cell> queue{source};
  parent[shape.index(source)] = -1;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == target) break;
    for_each_neighbor(c, shape, [&](Cell n) {
      if (mask(n.row, n.col) && parent[shape.index(n)] == -2) {
        parent[shape.index(n)] = shape.index(c);
        queue.push_back(n);
      }
    });
  }
  if (parent[shape.index(target)] == -2) return {};
  NodeSequence seq;
  for (int i = shape.index(target); i != -1; i = parent[i]) seq.push_back(shape.cell(i));
  return {seq.rbegin(), seq.rend()};
}

}  // namespace nwa
