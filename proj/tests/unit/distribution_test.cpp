#include <gtest/gtest.h>

#include <random>

#include "monofix/distribution.hpp"
#include "monofix/verify.hpp"
#include "support/oracles.hpp"

using namespace monofix;

TEST(BuildGrid, UniformHalves) {
  auto g = build_grid(ProductDistribution::uniform_cube(1), 2, 3);
  EXPECT_DOUBLE_EQ(g.boundary(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.boundary(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(g.boundary(0, 2), 1.0);
  EXPECT_GE(g.representative(0, 1), 0.0);
  EXPECT_LT(g.representative(0, 1), 0.5);
  EXPECT_GE(g.representative(0, 2), 0.5);
  EXPECT_LE(g.representative(0, 2), 1.0);
}

TEST(BuildGrid, SingleInterval) {
  auto g = build_grid(ProductDistribution::uniform_cube(1), 1, 3);
  EXPECT_EQ(g.m(), 1);
  EXPECT_DOUBLE_EQ(g.boundary(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.boundary(0, 1), 1.0);
  EXPECT_EQ(g.grid_index(std::vector<double>{0.77}), (GridIndex{1}));
}

TEST(BuildGrid, DeterministicInSeed) {
  auto a = build_grid(ProductDistribution::uniform_cube(3), 7, 11);
  auto b = build_grid(ProductDistribution::uniform_cube(3), 7, 11);
  auto c = build_grid(ProductDistribution::uniform_cube(3), 7, 12);
  bool differs = false;
  for (int i = 0; i < 3; ++i)
    for (int k = 1; k <= 7; ++k) {
      EXPECT_EQ(a.representative(i, k), b.representative(i, k));
      differs |= a.representative(i, k) != c.representative(i, k);
    }
  EXPECT_TRUE(differs);
}

TEST(BuildGrid, RepresentativesInsideTheirIntervals) {
  ProductDistribution dist({CoordinateDistribution::uniform(-2.0, 3.0),
                            CoordinateDistribution::cdf({{0.0, 0.0}, {1.0, 0.8}, {10.0, 1.0}}),
                            CoordinateDistribution::empirical({5, 1, 4, 2, 3, 9, 7, 8, 6, 10})});
  auto g = build_grid(dist, 5, 2);
  for (int i = 0; i < 3; ++i)
    for (int k = 1; k <= 5; ++k) {
      EXPECT_LE(g.boundary(i, k - 1), g.representative(i, k));
      EXPECT_LE(g.representative(i, k), g.boundary(i, k));
    }
  // cdf coordinate: quantile 0.4 sits at x = 0.5
  EXPECT_NEAR(g.boundary(1, 2), 0.5, 1e-12);
}

TEST(GridIndex, BoundaryConventions) {
  auto g = build_grid(ProductDistribution::uniform_cube(1), 2, 3);
  EXPECT_EQ(g.grid_index(std::vector<double>{0.3})[0], 1);
  EXPECT_EQ(g.grid_index(std::vector<double>{0.5})[0], 2);
  EXPECT_EQ(g.grid_index(std::vector<double>{1.0})[0], 2);
  EXPECT_EQ(g.grid_index(std::vector<double>{-4.0})[0], 1);
  EXPECT_EQ(g.grid_index(std::vector<double>{7.0})[0], 2);
}

TEST(GridIndex, WeaklyMonotone) {
  auto g = build_grid(ProductDistribution::uniform_cube(2), 9, 5);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.1, 1.1);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> x{u(rng), u(rng)}, y{x[0] + std::abs(u(rng)) * 0.2, x[1] + std::abs(u(rng)) * 0.2};
    auto a = g.grid_index(x), b = g.grid_index(y);
    EXPECT_LE(a[0], b[0]);
    EXPECT_LE(a[1], b[1]);
  }
}

TEST(GridIndex, AtomsTakeTheLowestNonemptyInterval) {
  // Four equal samples: all cuts coincide with the atom.
  auto g = build_grid(ProductDistribution({CoordinateDistribution::empirical({2, 2, 2, 2})}), 4, 1);
  EXPECT_EQ(g.grid_index(std::vector<double>{2.0})[0], 4);
  for (int k = 1; k <= 4; ++k) EXPECT_DOUBLE_EQ(g.representative(0, k), 2.0);
  auto h = build_grid(ProductDistribution({CoordinateDistribution::empirical({1, 1, 3, 4})}), 4, 1);
  // Cuts (1, 1, 1, 3, 4): intervals 1 and 2 are empty, the atom at 1 opens interval 3.
  EXPECT_EQ(h.grid_index(std::vector<double>{1.0})[0], 3);
  EXPECT_EQ(h.grid_index(std::vector<double>{3.5})[0], 4);
}

TEST(Discretize, IdentityOnUnitInterval) {
  QueryOracle f(1, [](std::span<const double> x) { return x[0]; });
  auto grid = std::make_shared<const GridSpec>(build_grid(ProductDistribution::uniform_cube(1), 2, 8));
  auto g = discretize(f, grid);
  EXPECT_DOUBLE_EQ(g.evaluate({1}), 0.0);
  EXPECT_EQ(f.queries(), 0u);
  const double u = grid->representative(0, 1);
  EXPECT_DOUBLE_EQ(g.evaluate({2}), u);
  EXPECT_EQ(f.queries(), 1u);
  // E[f~] = u/2 >= E[f] - eps = 0.
  const double e = expectation_exact(GridTable::tabulate({1, 2}, [&](std::span<const int> i) { return g(i); })).mean;
  EXPECT_DOUBLE_EQ(e, 0.5 * u);
  EXPECT_GE(e, 0.0);
}

TEST(Discretize, LowestBandCostsNoQuery) {
  auto f = make_constant_oracle(2, 0.9);
  auto g = discretize(f, build_grid(ProductDistribution::uniform_cube(2), 4, 1));
  for (int j = 1; j <= 4; ++j) EXPECT_DOUBLE_EQ(g.evaluate({1, j}), 0.0);
  EXPECT_EQ(f.queries(), 0u);
  EXPECT_DOUBLE_EQ(g.evaluate({2, 2}), 0.9);
}

TEST(Discretize, FeasibleOnTableOracles) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 3, m = 2 + trial % 4;
    auto dist = ProductDistribution::uniform_cube(d);
    auto grid = std::make_shared<const GridSpec>(build_grid(dist, m, trial));
    GridTable base({d, m}, testref::random_table(rng, GridShape{d, m}.cells()));
    auto f = make_table_oracle(grid, base);
    auto g = GridTable::tabulate({d, m}, [&](std::span<const int> i) { return discretize(f, grid)(i); });
    auto clo = testref::closure(std::vector<double>(base.values().begin(), base.values().end()), d, m);
    for (std::size_t c = 0; c < g.size(); ++c) EXPECT_LE(g.values()[c], clo[c]);
  }
}

TEST(Discretize, MonotoneStaysMonotone) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2, m = 3 + trial % 3;
    auto grid = std::make_shared<const GridSpec>(build_grid(ProductDistribution::uniform_cube(d), m, trial));
    auto raw = testref::random_table(rng, GridShape{d, m}.cells());
    auto mono = testref::closure(raw, d, m);
    for (auto& v : mono) v = std::min(v, 1.0);
    auto f = make_table_oracle(grid, GridTable({d, m}, mono));
    auto dg = discretize(f, grid);
    auto g = GridTable::tabulate({d, m}, [&](std::span<const int> i) { return dg(i); });
    EXPECT_TRUE(testref::monotone(std::vector<double>(g.values().begin(), g.values().end()), d, m));
  }
}

TEST(Discretize, OneDimensionalLossWithinEpsOnAverage) {
  // f(x) = x on [0,1], m = 1/eps: E[f~] averaged over representative draws
  // is (m - 1)^2 / (2 m^2) >= 1/2 - eps.
  QueryOracle f(1, [](std::span<const double> x) { return x[0]; });
  const int m = 10;
  MeanAccumulator acc;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    auto g = discretize(f, build_grid(ProductDistribution::uniform_cube(1), m, s));
    double sum = 0;
    for (int k = 1; k <= m; ++k) sum += g.evaluate({k});
    acc.add(sum / m);
  }
  EXPECT_GE(acc.mean() + 3 * acc.std_error(), 0.5 - 0.1);
  EXPECT_NEAR(acc.mean(), 0.405, 4 * acc.std_error() + 1e-9);
}

TEST(Discretize, LowestBandProbability) {
  for (int d = 1; d <= 6; ++d)
    for (double eps : {0.05, 0.1, 0.3}) {
      const int m = static_cast<int>(std::ceil(d / eps - 1e-9));
      EXPECT_LE(lowest_band_probability(d, m), eps + 1e-12);
    }
  EXPECT_DOUBLE_EQ(lowest_band_probability(2, 2), 0.75);
}

TEST(DistributionJson, ParsesAllKinds) {
  auto j = nlohmann::json::parse(R"({"coords": [{"kind": "uniform", "a": 0, "b": 2},
    {"kind": "cdf", "points": [[0, 0], [1, 1]]}, {"kind": "empirical", "samples": [3, 1, 2]}]})");
  auto d = distribution_from_json(j);
  EXPECT_EQ(d.dimension(), 3);
  EXPECT_DOUBLE_EQ(d[0].quantile(0.5), 1.0);
  EXPECT_DOUBLE_EQ(d[1].quantile(0.25), 0.25);
  EXPECT_DOUBLE_EQ(d[2].quantile(0.5), 2.0);
  EXPECT_THROW(distribution_from_json(nlohmann::json::parse(R"([{"kind": "normal"}])")), DistributionError);
  EXPECT_THROW(CoordinateDistribution::cdf({{0, 0}, {1, 0.5}}), DistributionError);
}
