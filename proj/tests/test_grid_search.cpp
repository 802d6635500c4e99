#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nwa/grid.hpp"
#include "nwa/search.hpp"
#include "oracles.hpp"

using namespace nwa;

TEST(Neighbors, CornerEdgeInterior) {
  const Shape s{12, 12};
  EXPECT_EQ(neighbors({0, 0}, s), (std::vector<Cell>{{0, 1}, {1, 0}, {1, 1}}));
  EXPECT_EQ(neighbors({5, 5}, s).size(), 8u);
  EXPECT_EQ(neighbors({0, 5}, s).size(), 5u);
  EXPECT_THROW(neighbors({12, 0}, s), std::invalid_argument);
}

TEST(Neighbors, SymmetricAndBounded) {
  const Shape s{5, 7};
  for (int i = 0; i < s.size(); ++i) {
    const auto ns = neighbors(s.cell(i), s);
    EXPECT_GE(ns.size(), 3u);
    EXPECT_LE(ns.size(), 8u);
    for (Cell n : ns) {
      const auto back = neighbors(n, s);
      EXPECT_NE(std::find(back.begin(), back.end(), s.cell(i)), back.end());
    }
  }
}

TEST(PathCost, Examples) {
  EXPECT_DOUBLE_EQ(path_cost(CostField(CostField::Ones(3, 3)), sequence_to_mask({{0, 0}, {1, 1}, {2, 2}}, {3, 3})), 3.0);
  EXPECT_DOUBLE_EQ(path_cost(CostField(CostField::Ones(3, 3)), Mask(Mask::Zero(3, 3))), 0.0);
  CostField c(2, 2);
  c << 1, 2, 3, 4;
  Mask m(2, 2);
  m << 1, 0, 0, 1;
  EXPECT_DOUBLE_EQ(path_cost(c, m), 5.0);
  EXPECT_THROW(path_cost(c, Mask::Zero(3, 2)), std::invalid_argument);
}

TEST(PathCost, MatchesSequenceSumOnRandomWalks) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const CostField c = oracle::random_costs(rng, 6, 6);
    // Random self-avoiding walk.
    NodeSequence seq{oracle::random_cell(rng, 6, 6)};
    for (int step = 0; step < 10; ++step) {
      std::vector<Cell> free;
      for (Cell n : neighbors(seq.back(), {6, 6}))
        if (std::find(seq.begin(), seq.end(), n) == seq.end()) free.push_back(n);
      if (free.empty()) break;
      seq.push_back(free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)]);
    }
    double sum = 0.0;
    for (Cell x : seq) sum += c(x.row, x.col);
    const Mask m = sequence_to_mask(seq, {6, 6});
    EXPECT_EQ(m.cast<int>().sum(), static_cast<int>(seq.size()));
    EXPECT_NEAR(path_cost(c, m), sum, 1e-12);
  }
}

TEST(SequenceToMask, Examples) {
  const Mask diag = sequence_to_mask({{0, 0}, {1, 1}, {2, 2}}, {3, 3});
  EXPECT_EQ(diag, (Mask::Identity(3, 3)));
  const Mask one = sequence_to_mask({{1, 1}}, {3, 3});
  EXPECT_EQ(one.cast<int>().sum(), 1);
  EXPECT_EQ(one(1, 1), 1);
  EXPECT_THROW(sequence_to_mask({{0, 0}, {0, 2}}, {3, 3}), std::invalid_argument);
  EXPECT_THROW(sequence_to_mask({{0, 0}, {0, 1}, {0, 0}}, {3, 3}), std::invalid_argument);
  EXPECT_THROW(sequence_to_mask({{0, 0}, {-1, 0}}, {3, 3}), std::invalid_argument);
}

TEST(ValidatePath, Examples) {
  EXPECT_TRUE(validate_path({{0, 0}, {1, 0}}, {0, 0}, {1, 0}));
  EXPECT_FALSE(validate_path({{0, 0}, {1, 0}, {0, 0}}, {0, 0}, {0, 0}));
  EXPECT_TRUE(validate_path({{0, 0}}, {0, 0}, {0, 0}));
  EXPECT_FALSE(validate_path({{0, 0}, {1, 0}}, {0, 0}, {1, 1}));
  EXPECT_FALSE(validate_path({}, {0, 0}, {0, 0}));
}

TEST(MaskToSequence, RoundTrip) {
  const NodeSequence seq{{0, 0}, {1, 1}, {1, 2}, {2, 3}};
  EXPECT_EQ(mask_to_sequence(sequence_to_mask(seq, {4, 4}), {0, 0}, {2, 3}), seq);
}

TEST(Distances, Examples) {
  EXPECT_EQ(chebyshev_distance({1, 2}, {4, 3}), 3);
  EXPECT_EQ(chebyshev_distance({2, 2}, {2, 2}), 0);
  EXPECT_EQ(chebyshev_distance({0, 0}, {3, 3}), 3);
  EXPECT_DOUBLE_EQ(euclidean_distance({0, 0}, {3, 4}), 5.0);
  EXPECT_DOUBLE_EQ(euclidean_distance({1, 1}, {1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(euclidean_distance({0, 0}, {1, 1}), std::sqrt(2.0));
}

TEST(Heuristics, Chebyshev) {
  const auto h = h_chebyshev(1.0, {0, 0}, {3, 3});
  CostField expect(3, 3);
  expect << 0, 1, 2, 1, 1, 2, 2, 2, 2;
  EXPECT_EQ(h.values, expect);
  EXPECT_EQ(h_chebyshev(2.0, {0, 0}, {3, 3}).values, 2.0 * expect);
  EXPECT_EQ(h_chebyshev(1.5, {2, 1}, {4, 5}).values(2, 1), 0.0);
  EXPECT_THROW(h_chebyshev(0.0, {0, 0}, {3, 3}), std::invalid_argument);
}

TEST(Heuristics, NeuralAstar) {
  EXPECT_NEAR(h_na({3, 4}, {5, 5}).values(0, 0), 4.005, 1e-12);
  EXPECT_EQ(h_na({3, 4}, {5, 5}).values(3, 4), 0.0);
  EXPECT_NEAR(h_na({2, 2}, {3, 3}).values(0, 0), 2.0 + 0.001 * 2.0 * std::sqrt(2.0), 1e-12);
}

TEST(Astar, UniformDiagonal) {
  const CostField c = CostField::Ones(3, 3);
  const auto r = astar(c, h_chebyshev(1.0, {2, 2}, {3, 3}), {0, 0}, {2, 2});
  EXPECT_EQ(r.path, (NodeSequence{{0, 0}, {1, 1}, {2, 2}}));
  EXPECT_DOUBLE_EQ(r.total_cost, 3.0);
  EXPECT_DOUBLE_EQ(dijkstra_oracle(c, {0, 0}, {2, 2}).total_cost, 3.0);
}

TEST(Astar, AvoidsExpensiveCenter) {
  CostField c = CostField::Ones(3, 3);
  c(1, 1) = 100.0;
  const auto r = astar(c, h_chebyshev(1.0, {2, 2}, {3, 3}), {0, 0}, {2, 2});
  EXPECT_EQ(r.path_mask(1, 1), 0);
  EXPECT_DOUBLE_EQ(r.total_cost, oracle::min_simple_path_cost(c, {0, 0}, {2, 2}));
}

TEST(Astar, ResultInvariants) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const CostField c = oracle::random_costs(rng, 7, 9);
    const auto [s, t] = oracle::random_endpoints(rng, 7, 9);
    const auto r = astar(c, h_chebyshev(c.minCoeff(), t, {7, 9}), s, t);
    EXPECT_TRUE(validate_path(r.path, s, t));
    EXPECT_EQ(((r.path_mask.array() > 0) && (r.expansions.array() == 0)).count(), 0);
    EXPECT_NEAR(r.total_cost, path_cost(c, r.path_mask), 1e-9);
    EXPECT_EQ(static_cast<int>(r.pop_order.size()), r.expansions.cast<int>().sum());
  }
}

TEST(Astar, DegenerateSourceEqualsTarget) {
  CostField c = CostField::Constant(3, 3, 2.5);
  const auto r = dijkstra_oracle(c, {1, 1}, {1, 1});
  EXPECT_EQ(r.path, (NodeSequence{{1, 1}}));
  EXPECT_DOUBLE_EQ(r.total_cost, 2.5);
}

TEST(Astar, Errors) {
  const CostField c = CostField::Ones(3, 3);
  EXPECT_THROW(astar(c, h_chebyshev(1.0, {2, 2}, {3, 3}), {0, 0}, {1, 1}), std::invalid_argument);
  EXPECT_THROW(astar(c, h_chebyshev(1.0, {2, 2}, {3, 3}), {5, 0}, {2, 2}), std::invalid_argument);
  EXPECT_THROW(weighted_astar(c, h_chebyshev(1.0, {2, 2}, {3, 3}), -0.5, {0, 0}, {2, 2}), std::invalid_argument);
}

TEST(Astar, ZeroHeuristicMatchesIndependentDijkstra) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const CostField c = oracle::random_costs(rng, 8, 8);
    const auto [s, t] = oracle::random_endpoints(rng, 8, 8);
    EXPECT_NEAR(dijkstra_oracle(c, s, t).total_cost, oracle::dijkstra_cost(c, s, t), 1e-9);
  }
}

TEST(Astar, ChebyshevOptimalOnRandomGrids) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> side(4, 16);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = side(rng), w = side(rng);
    const CostField c = oracle::random_costs(rng, h, w);
    const auto [s, t] = oracle::random_endpoints(rng, h, w);
    EXPECT_EQ(astar(c, h_chebyshev(c.minCoeff(), t, {h, w}), s, t).total_cost,
              dijkstra_oracle(c, s, t).total_cost);
  }
}

TEST(Astar, ChebyshevIsAdmissible) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const CostField c = oracle::random_costs(rng, 6, 6);
    const Cell t = oracle::random_cell(rng, 6, 6);
    const auto h = h_chebyshev(c.minCoeff(), t, {6, 6});
    for (int i = 0; i < 36; ++i) {
      const Cell n{i / 6, i % 6};
      EXPECT_LE(h.values(n.row, n.col), oracle::dijkstra_cost(c, n, t));
    }
  }
}

TEST(Astar, DijkstraMatchesEnumerationOn4x4) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const CostField c = oracle::random_costs(rng, 4, 4);
    const auto [s, t] = oracle::random_endpoints(rng, 4, 4);
    EXPECT_NEAR(dijkstra_oracle(c, s, t).total_cost, oracle::min_simple_path_cost(c, s, t), 1e-9);
  }
}

TEST(Astar, DeterministicPopOrder) {
  std::mt19937_64 rng(10);
  const CostField c = oracle::random_costs(rng, 10, 10);
  const auto h = h_chebyshev(c.minCoeff(), {9, 9}, {10, 10});
  EXPECT_EQ(astar(c, h, {0, 0}, {9, 9}).pop_order, astar(c, h, {0, 0}, {9, 9}).pop_order);
}

TEST(Astar, TieBreakPrefersDeeperNode) {
  // Uniform costs with zero heuristic: all nodes at distance 1 share F = 2.
  // Among equal F and G the smaller row-major index goes first.
  const CostField c = CostField::Ones(3, 3);
  const auto r = dijkstra_oracle(c, {1, 1}, {2, 2});
  ASSERT_GE(r.pop_order.size(), 2u);
  EXPECT_EQ(r.pop_order[1], (Cell{0, 0}));
  // 2x3 grid toward (1,2): after (0,0) and (0,1), cells (1,1) [G=2] and (1,2)
  // [G=3] both have F = 3; the deeper one wins although its index is larger.
  const CostField c2 = CostField::Ones(2, 3);
  const auto a = astar(c2, h_chebyshev(1.0, {1, 2}, {2, 3}), {0, 0}, {1, 2});
  EXPECT_EQ(a.pop_order, (std::vector<Cell>{{0, 0}, {0, 1}, {1, 2}}));
}

TEST(WeightedAstar, EpsZeroIdentical) {
  std::mt19937_64 rng(12);
  const CostField c = oracle::random_costs(rng, 8, 8);
  const auto h = h_chebyshev(c.minCoeff(), {7, 0}, {8, 8});
  const auto a = astar(c, h, {0, 7}, {7, 0});
  const auto b = weighted_astar(c, h, 0.0, {0, 7}, {7, 0});
  EXPECT_EQ(a.pop_order, b.pop_order);
  EXPECT_EQ(a.path, b.path);
}

TEST(WeightedAstar, BoundAndFewerExpansions) {
  std::mt19937_64 rng(13);
  double pops0 = 0.0, pops10 = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const CostField c = oracle::random_costs(rng, 8, 8);
    const auto [s, t] = oracle::random_endpoints(rng, 8, 8);
    const auto h = h_chebyshev(c.minCoeff(), t, {8, 8});
    const double opt = oracle::dijkstra_cost(c, s, t);
    const auto w = weighted_astar(c, h, 10.0, s, t);
    EXPECT_LE(w.total_cost, 11.0 * opt + 1e-9);
    pops10 += static_cast<double>(w.pop_order.size());
    pops0 += static_cast<double>(astar(c, h, s, t).pop_order.size());
  }
  EXPECT_LE(pops10 / 100.0, pops0 / 100.0);
}
