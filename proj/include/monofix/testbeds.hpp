#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "monofix/distribution.hpp"
#include "monofix/oracle.hpp"
#include "monofix/rng.hpp"

namespace monofix {

// Knapsack with one weight per capacity dimension. With a single weight
// dimension this is the ordinary 0/1 knapsack.
struct KnapsackItem {
  double value = 0.0;
  std::vector<double> weights;
};

struct KnapsackInstance {
  std::vector<KnapsackItem> items;
  // Capacity range per dimension, used as the input distribution.
  std::vector<std::pair<double, double>> capacity_range;

  int dimension() const { return static_cast<int>(capacity_range.size()); }

  void validate() const {
    if (items.empty()) throw std::invalid_argument("knapsack needs at least one item");
    if (items.size() > 24) throw std::invalid_argument("knapsack optimum is exhaustive; at most 24 items");
    if (capacity_range.empty()) throw std::invalid_argument("knapsack needs a capacity range");
    double total = 0.0;
    for (const auto& it : items) {
      if (!(it.value > 0.0)) throw std::invalid_argument("item values must be positive");
      if (it.weights.size() != capacity_range.size())
        throw std::invalid_argument("item weight dimension mismatch");
      for (double w : it.weights)
        if (!(w > 0.0)) throw std::invalid_argument("item weights must be positive");
      total += it.value;
    }
    if (!(total > 0.0)) throw std::invalid_argument("total value must be positive");
  }

  ProductDistribution capacity_distribution() const {
    std::vector<CoordinateDistribution> c;
    for (auto [lo, hi] : capacity_range) c.push_back(CoordinateDistribution::uniform(lo, hi));
    return ProductDistribution(std::move(c));
  }

  static KnapsackInstance single(std::vector<std::pair<double, double>> value_weight,
                                 double w_min, double w_max) {
    KnapsackInstance inst;
    for (auto [v, w] : value_weight) inst.items.push_back({v, {w}});
    inst.capacity_range = {{w_min, w_max}};
    inst.validate();
    return inst;
  }

  // Random instance with `n` items and `d` capacity dimensions; capacities
  // range over [0, total weight / 2] per dimension.
  static KnapsackInstance random(int n, int d, std::uint64_t seed) {
    Rng rng(seed);
    KnapsackInstance inst;
    std::vector<double> total(static_cast<std::size_t>(d), 0.0);
    for (int k = 0; k < n; ++k) {
      KnapsackItem it;
      it.value = rng.uniform(1.0, 10.0);
      for (int i = 0; i < d; ++i) {
        it.weights.push_back(rng.uniform(1.0, 10.0));
        total[static_cast<std::size_t>(i)] += it.weights.back();
      }
      inst.items.push_back(std::move(it));
    }
    for (double t : total) inst.capacity_range.emplace_back(0.0, t / 2.0);
    inst.validate();
    return inst;
  }
};

namespace detail {

inline bool fits(std::span<const double> used, const KnapsackItem& it,
                 std::span<const double> cap) {
  for (std::size_t i = 0; i < cap.size(); ++i)
    if (used[i] + it.weights[i] > cap[i]) return false;
  return true;
}

}  // namespace detail

// Greedy order: density value / sum(weights) descending, then value
// descending, then input order.
inline std::vector<std::size_t> greedy_order(const KnapsackInstance& inst) {
  std::vector<std::size_t> order(inst.items.size());
  std::iota(order.begin(), order.end(), 0);
  auto density = [&](std::size_t k) {
    const auto& it = inst.items[k];
    return it.value / std::accumulate(it.weights.begin(), it.weights.end(), 0.0);
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    double da = density(a), db = density(b);
    if (da != db) return da > db;
    return inst.items[a].value > inst.items[b].value;
  });
  return order;
}

inline double greedy_knapsack_value(const KnapsackInstance& inst, std::span<const double> cap,
                                    std::span<const std::size_t> order) {
  std::vector<double> used(cap.size(), 0.0);
  double value = 0.0;
  for (auto k : order) {
    const auto& it = inst.items[k];
    if (!detail::fits(used, it, cap)) continue;
    for (std::size_t i = 0; i < cap.size(); ++i) used[i] += it.weights[i];
    value += it.value;
  }
  return value;
}

// Exhaustive optimum over all 2^n subsets.
inline double optimal_knapsack_value(const KnapsackInstance& inst, std::span<const double> cap) {
  const auto n = inst.items.size();
  const auto dims = cap.size();
  double best = 0.0;
  std::vector<double> used(dims);
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    std::fill(used.begin(), used.end(), 0.0);
    double value = 0.0;
    bool ok = true;
    for (std::size_t k = 0; k < n && ok; ++k) {
      if (!(mask >> k & 1)) continue;
      const auto& it = inst.items[k];
      for (std::size_t i = 0; i < dims; ++i) {
        used[i] += it.weights[i];
        if (used[i] > cap[i]) ok = false;
      }
      value += it.value;
    }
    if (ok) best = std::max(best, value);
  }
  return best;
}

// Greedy value over optimal value at capacity W; 0/0 counts as 1.
inline double greedy_knapsack_quality(const KnapsackInstance& inst, std::span<const double> cap) {
  if (cap.size() != inst.capacity_range.size()) throw DimensionError("capacity dimension mismatch");
  for (double c : cap)
    if (c < 0.0) throw std::invalid_argument("capacity must be >= 0");
  auto order = greedy_order(inst);
  double opt = optimal_knapsack_value(inst, cap);
  if (opt <= 0.0) return 1.0;
  return std::min(1.0, greedy_knapsack_value(inst, cap, order) / opt);
}

inline double greedy_knapsack_quality(const KnapsackInstance& inst, double W) {
  return greedy_knapsack_quality(inst, std::span<const double>(&W, 1));
}

inline QueryOracle make_knapsack_oracle(KnapsackInstance inst) {
  inst.validate();
  auto shared = std::make_shared<const KnapsackInstance>(std::move(inst));
  auto order = std::make_shared<const std::vector<std::size_t>>(greedy_order(*shared));
  const auto d = static_cast<std::size_t>(shared->dimension());
  return QueryOracle(d, [shared, order](std::span<const double> cap) {
    std::vector<double> c(cap.begin(), cap.end());
    for (auto& v : c) v = std::max(v, 0.0);
    double opt = optimal_knapsack_value(*shared, c);
    if (opt <= 0.0) return 1.0;
    return std::min(1.0, greedy_knapsack_value(*shared, c, *order) / opt);
  });
}

// Seeded random function on [0,1]^d: piecewise constant on a hidden
// resolution^d lattice with i.i.d. uniform cell values. Stateless; the cell
// value is a hash of (seed, cell).
inline QueryOracle make_random_function_oracle(int d, int resolution, std::uint64_t seed) {
  if (d < 1 || resolution < 1) throw std::invalid_argument("random function needs d, resolution >= 1");
  return QueryOracle(static_cast<std::size_t>(d), [resolution, seed](std::span<const double> x) {
    std::uint64_t h = mix64(seed);
    for (double v : x) {
      auto c = static_cast<std::int64_t>(std::floor(std::clamp(v, 0.0, 1.0) * resolution));
      c = std::min<std::int64_t>(c, resolution - 1);
      h = mix64(h ^ static_cast<std::uint64_t>(c));
    }
    return to_unit(mix64(h));
  });
}

}  // namespace monofix
