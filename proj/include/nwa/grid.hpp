#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nwa {

/// Dense row-major field over the grid, one value per cell.
template <typename Scalar>
using Field = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Strictly positive node-traversal costs.
using CostField = Field<double>;

/// Binary per-cell mask (paths, expansion sets).
using Mask = Field<std::uint8_t>;

struct Cell {
  int row = 0;
  int col = 0;

  friend constexpr bool operator==(const Cell&, const Cell&) = default;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

struct Shape {
  int height = 0;
  int width = 0;

  constexpr int size() const { return height * width; }
  constexpr bool contains(Cell c) const {
    return c.row >= 0 && c.col >= 0 && c.row < height && c.col < width;
  }
  /// Row-major linear index.
  constexpr int index(Cell c) const { return c.row * width + c.col; }
  constexpr Cell cell(int index) const { return {index / width, index % width}; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

template <typename Derived>
Shape shape_of(const Eigen::DenseBase<Derived>& field) {
  return {static_cast<int>(field.rows()), static_cast<int>(field.cols())};
}

using NodeSequence = std::vector<Cell>;

std::string to_string(Cell c);
std::string to_string(Shape s);

/// Visits the in-bounds 8-neighbors of `c` in row-major order of the 3x3 block.
/// No bounds check on `c` itself; callers in hot loops validate once.
template <typename Fn>
inline void for_each_neighbor(Cell c, Shape shape, Fn&& fn) {
  for (int dr = -1; dr <= 1; ++dr) {
    const int r = c.row + dr;
    if (r < 0 || r >= shape.height) continue;
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const int col = c.col + dc;
      if (col < 0 || col >= shape.width) continue;
      fn(Cell{r, col});
    }
  }
}

std::vector<Cell> neighbors(Cell cell, Shape shape);

bool are_adjacent(Cell a, Cell b);

/// Throws std::invalid_argument unless every cost is finite and > 0.
void check_costs(const CostField& costs);

/// <costs, mask>: sum of the costs of every cell set in the mask.
template <typename Scalar>
Scalar path_cost(const Field<Scalar>& costs, const Mask& path) {
  if (shape_of(costs) != shape_of(path)) {
    throw std::invalid_argument("path_cost: shape mismatch " + to_string(shape_of(costs)) +
                                " vs " + to_string(shape_of(path)));
  }
  return (costs.array() * path.template cast<Scalar>().array()).sum();
}

/// Throws std::invalid_argument for non-adjacent, repeated or out-of-bounds cells.
Mask sequence_to_mask(const NodeSequence& seq, Shape shape);

/// True iff `seq` starts at `source`, ends at `target`, steps between 8-neighbors
/// and never revisits a cell.
bool validate_path(const NodeSequence& seq, Cell source, Cell target);

/// Recovers the cell sequence of a simple path stored as a mask by breadth-first
/// search inside the mask. Returns an empty sequence when source and target are
/// not connected through mask cells.
NodeSequence mask_to_sequence(const Mask& mask, Cell source, Cell target);

}  // namespace nwa
