#include <gtest/gtest.h>

#include <sstream>
#include <thread>
#include <vector>

#include "monofix/distribution.hpp"
#include "monofix/grid_table.hpp"
#include "monofix/oracle.hpp"
#include "monofix/testbeds.hpp"

using namespace monofix;

TEST(Oracle, TableLookupOnOneDimensionalGrid) {
  GridTable t({1, 3}, std::vector<double>{0.5, 0.2, 0.7});
  auto f = make_grid_oracle(t);
  EXPECT_DOUBLE_EQ(f.evaluate({2}), 0.2);
}

TEST(Oracle, ConstantOne) {
  auto f = make_constant_oracle(3, 1.0);
  EXPECT_DOUBLE_EQ(f.evaluate({0.1, 5.0, -2.0}), 1.0);
}

TEST(Oracle, CounterCountsEveryCall) {
  auto f = make_constant_oracle(1, 0.3);
  EXPECT_EQ(f.queries(), 0u);
  f.evaluate({0.1});
  f.evaluate({0.2});
  EXPECT_EQ(f.queries(), 2u);
  auto copy = f;
  copy.evaluate({0.3});
  EXPECT_EQ(f.queries(), 3u) << "copies share one counter";
}

TEST(Oracle, CounterIsExactUnderConcurrency) {
  auto f = make_constant_oracle(1, 0.5);
  std::vector<std::thread> pool;
  for (int t = 0; t < 8; ++t)
    pool.emplace_back([&f] {
      for (int i = 0; i < 5000; ++i) f.evaluate({0.0});
    });
  for (auto& th : pool) th.join();
  EXPECT_EQ(f.queries(), 40000u);
}

TEST(Oracle, DimensionMismatchThrows) {
  auto f = make_constant_oracle(2, 0.5);
  EXPECT_THROW(f.evaluate({0.1}), DimensionError);
  EXPECT_THROW(QueryOracle(0, [](std::span<const double>) { return 0.0; }), DimensionError);
}

TEST(Oracle, OutOfRangeRejectedOrClamped) {
  QueryOracle bad(1, [](std::span<const double>) { return 1.7; });
  EXPECT_THROW(bad.evaluate({0.0}), RangeError);
  QueryOracle nan(1, [](std::span<const double>) { return std::nan(""); }, RangePolicy::clamp);
  EXPECT_THROW(nan.evaluate({0.0}), RangeError);
  QueryOracle clamped(1, [](std::span<const double>) { return -0.2; }, RangePolicy::clamp);
  clamped.set_echo_warnings(false);
  EXPECT_DOUBLE_EQ(clamped.evaluate({0.0}), 0.0);
  EXPECT_EQ(clamped.clamp_count(), 1u);
  ASSERT_EQ(clamped.warnings().size(), 1u);
}

TEST(MakeTableOracle, PointInCellReadsTheCell) {
  auto grid = build_grid(ProductDistribution::uniform_cube(1), 3, 1);
  auto f = make_table_oracle(grid, GridTable({1, 3}, std::vector<double>{0, 1, 0}));
  EXPECT_DOUBLE_EQ(f.evaluate({0.5}), 1.0);
  // Same cell, same value.
  EXPECT_DOUBLE_EQ(f.evaluate({0.4}), f.evaluate({0.6}));
}

TEST(MakeTableOracle, ConstantTwoByTwo) {
  auto grid = build_grid(ProductDistribution::uniform_cube(2), 2, 1);
  auto f = make_table_oracle(grid, GridTable({2, 2}, 0.4));
  EXPECT_DOUBLE_EQ(f.evaluate({0.1, 0.9}), 0.4);
  EXPECT_DOUBLE_EQ(f.evaluate({0.7, 0.2}), 0.4);
}

TEST(MakeTableOracle, CardinalityAndRangeErrors) {
  EXPECT_THROW(GridTable({2, 2}, std::vector<double>{0.1, 0.2, 0.3}), TableError);
  auto grid = build_grid(ProductDistribution::uniform_cube(2), 2, 1);
  EXPECT_THROW(make_table_oracle(grid, GridTable({2, 3}, 0.1)), TableError);
  EXPECT_THROW(make_table_oracle(grid, GridTable({2, 2}, 1.5)), TableError);
}

TEST(TableCsv, RoundTrip) {
  GridTable t({2, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t.values()[i] = 0.1 * static_cast<double>(i) / 2;
  std::stringstream ss;
  write_table_csv(ss, t);
  auto back = read_table_csv(ss);
  EXPECT_EQ(back.shape(), t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_DOUBLE_EQ(back.values()[i], t.values()[i]);
}

TEST(TableCsv, RejectsMalformedInput) {
  std::stringstream missing("i1,i2,value\n1,1,0.5\n1,2,0.5\n2,1,0.5\n");
  EXPECT_THROW(read_table_csv(missing), TableError);
  std::stringstream dup("i1,value\n1,0.5\n1,0.6\n");
  EXPECT_THROW(read_table_csv(dup), TableError);
  std::stringstream header("x,value\n1,0.5\n");
  EXPECT_THROW(read_table_csv(header), TableError);
  std::stringstream range("i1,value\n1,0.5\n2,1.5\n");
  EXPECT_THROW(read_table_csv(range), TableError);
}

namespace {
KnapsackInstance anecdote() { return KnapsackInstance::single({{10, 10}, {9, 6}, {9, 6}}, 0.0, 20.0); }
}  // namespace

TEST(Knapsack, GreedyMatchesOptimumAtSix) { EXPECT_DOUBLE_EQ(greedy_knapsack_quality(anecdote(), 6.0), 1.0); }

TEST(Knapsack, GreedyLosesAtTen) { EXPECT_DOUBLE_EQ(greedy_knapsack_quality(anecdote(), 10.0), 0.9); }

TEST(Knapsack, GreedyMatchesOptimumAtTwelve) { EXPECT_DOUBLE_EQ(greedy_knapsack_quality(anecdote(), 12.0), 1.0); }

TEST(Knapsack, EmptyPackingCountsAsOptimal) { EXPECT_DOUBLE_EQ(greedy_knapsack_quality(anecdote(), 1.0), 1.0); }

TEST(Knapsack, QualityInUnitIntervalAndOptimumNondecreasing) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto inst = KnapsackInstance::random(8, 1, seed);
    double prev = 0.0;
    for (int s = 0; s <= 200; ++s) {
      const double W = inst.capacity_range[0].second * 2.0 * s / 200.0;
      const double q = greedy_knapsack_quality(inst, W);
      EXPECT_GE(q, 0.0);
      EXPECT_LE(q, 1.0);
      const double opt = optimal_knapsack_value(inst, std::span<const double>(&W, 1));
      EXPECT_GE(opt, prev);
      prev = opt;
    }
  }
}

TEST(Knapsack, NegativeCapacityRejected) { EXPECT_THROW(greedy_knapsack_quality(anecdote(), -1.0), std::invalid_argument); }

TEST(RandomFunction, PiecewiseConstantAndSeeded) {
  auto f = make_random_function_oracle(2, 4, 9);
  auto g = make_random_function_oracle(2, 4, 9);
  EXPECT_DOUBLE_EQ(f.evaluate({0.1, 0.3}), f.evaluate({0.2, 0.4}));
  EXPECT_DOUBLE_EQ(f.evaluate({0.6, 0.9}), g.evaluate({0.6, 0.9}));
  auto h = make_random_function_oracle(2, 4, 10);
  EXPECT_NE(f.evaluate({0.6, 0.9}), h.evaluate({0.6, 0.9}));
}
