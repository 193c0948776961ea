#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "monofix/distribution.hpp"
#include "monofix/grid_table.hpp"
#include "monofix/rng.hpp"

namespace monofix {

class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Brute-force checks refuse grids with d * m^d above this many cell visits.
struct VerifyBudget {
  std::size_t max_work = 10'000'000;

  void check(const GridShape& shape) const {
    const double work = static_cast<double>(shape.d) * std::pow(static_cast<double>(shape.m), shape.d);
    if (work > static_cast<double>(max_work)) {
      throw BudgetError("grid " + std::to_string(shape.m) + "^" + std::to_string(shape.d) +
                        " exceeds the brute-force budget");
    }
  }
};

// g(x) = max_{y <= x} f(y), by one running-max sweep per coordinate.
inline GridTable monotone_closure(const GridTable& table, VerifyBudget budget = {}) {
  const auto& shape = table.shape();
  budget.check(shape);
  GridTable g = table;
  auto vals = g.values();
  const auto m = static_cast<std::size_t>(shape.m);
  std::size_t stride = 1;
  for (int axis = shape.d - 1; axis >= 0; --axis) {
    // Cells are grouped in blocks of m*stride; inside, step `stride` moves
    // one along this axis.
    const std::size_t block = stride * m;
    for (std::size_t base = 0; base < vals.size(); base += block) {
      for (std::size_t off = 0; off < stride; ++off) {
        for (std::size_t k = 1; k < m; ++k) {
          auto& cur = vals[base + off + k * stride];
          cur = std::max(cur, vals[base + off + (k - 1) * stride]);
        }
      }
    }
    stride = block;
  }
  return g;
}

// A pair of grid points with `lower` one step below `upper` in exactly one
// coordinate and f(lower) > f(upper) + tolerance.
struct MonotoneViolation {
  GridIndex lower;
  GridIndex upper;
  double lower_value = 0.0;
  double upper_value = 0.0;
};

// All violating low-1-neighbor pairs; empty iff the table is monotone.
inline std::vector<MonotoneViolation> check_monotone(const GridTable& table, double tolerance = 0.0,
                                                     VerifyBudget budget = {}) {
  const auto& shape = table.shape();
  budget.check(shape);
  std::vector<MonotoneViolation> out;
  GridIndex idx = shape.first();
  do {
    const double hi = table[idx];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] == 1) continue;
      GridIndex lo = idx;
      --lo[i];
      const double lv = table[lo];
      if (lv > hi + tolerance) out.push_back({lo, idx, lv, hi});
    }
  } while (shape.next(idx));
  return out;
}

inline bool is_monotone(const GridTable& table, double tolerance = 0.0) {
  return check_monotone(table, tolerance).empty();
}

// Cells where `candidate` exceeds the monotone closure of `base`.
inline std::vector<GridIndex> closure_exceedances(const GridTable& candidate, const GridTable& base,
                                                  double tolerance = 0.0) {
  if (candidate.shape() != base.shape()) throw TableError("closure check: shape mismatch");
  auto closure = monotone_closure(base);
  std::vector<GridIndex> out;
  for (std::size_t f = 0; f < candidate.size(); ++f)
    if (candidate.values()[f] > closure.values()[f] + tolerance) out.push_back(candidate.shape().unflat(f));
  return out;
}

// Exact marginal over the 0-based coordinates in `subset` (ascending, unique)
// under the grid-uniform distribution. The result is a table over [m]^|I|.
inline GridTable exact_marginal(const GridTable& table, std::span<const int> subset,
                                VerifyBudget budget = {}) {
  const auto& shape = table.shape();
  budget.check(shape);
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (subset[k] < 0 || subset[k] >= shape.d || (k > 0 && subset[k] <= subset[k - 1]))
      throw std::invalid_argument("marginal subset must be ascending coordinates in [0, d)");
  }
  if (subset.empty()) throw std::invalid_argument("marginal subset must be nonempty");
  GridShape sub{static_cast<int>(subset.size()), shape.m};
  GridTable out(sub);
  auto sums = out.values();
  GridIndex idx = shape.first();
  GridIndex proj(subset.size());
  std::size_t f = 0;
  do {
    for (std::size_t k = 0; k < subset.size(); ++k) proj[k] = idx[static_cast<std::size_t>(subset[k])];
    sums[sub.flat(proj)] += table.values()[f++];
  } while (shape.next(idx));
  const double per_cell = static_cast<double>(shape.cells() / sub.cells());
  for (auto& s : sums) s /= per_cell;
  return out;
}

inline GridTable exact_marginal(const GridTable& table, std::initializer_list<int> subset) {
  return exact_marginal(table, std::span<const int>(subset.begin(), subset.size()));
}

// All nonempty subsets of {0..d-1} with at most k elements, ordered by size
// then lexicographically.
inline std::vector<std::vector<int>> subsets_up_to(int d, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  for (int size = 1; size <= std::min(k, d); ++size) {
    cur.assign(static_cast<std::size_t>(size), 0);
    for (int i = 0; i < size; ++i) cur[static_cast<std::size_t>(i)] = i;
    while (true) {
      out.push_back(cur);
      int i = size - 1;
      while (i >= 0 && cur[static_cast<std::size_t>(i)] == d - size + i) --i;
      if (i < 0) break;
      ++cur[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < size; ++j) cur[static_cast<std::size_t>(j)] = cur[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return out;
}

// Every <=k-subset marginal of `table` that is not nondecreasing (beyond
// `tolerance`), reported as (subset, violations inside the marginal table).
struct MarginalViolation {
  std::vector<int> subset;
  MonotoneViolation pair;
};

inline std::vector<MarginalViolation> check_k_marginals(const GridTable& table, int k,
                                                        double tolerance = 1e-12) {
  std::vector<MarginalViolation> out;
  for (const auto& s : subsets_up_to(table.d(), k)) {
    for (auto& v : check_monotone(exact_marginal(table, s), tolerance)) out.push_back({s, std::move(v)});
  }
  return out;
}

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
};

// Mean over grid-uniform cells.
template <class Eval>
Estimate expectation_exact(Eval&& eval, GridShape shape, VerifyBudget budget = {}) {
  budget.check(shape);
  double sum = 0.0;
  GridIndex idx = shape.first();
  do {
    sum += eval(std::span<const int>(idx));
  } while (shape.next(idx));
  return {sum / static_cast<double>(shape.cells()), 0.0, shape.cells()};
}

inline Estimate expectation_exact(const GridTable& table) {
  double sum = 0.0;
  for (double v : table.values()) sum += v;
  return {sum / static_cast<double>(table.size()), 0.0, table.size()};
}

// Accumulates a mean and its standard error (Welford).
class MeanAccumulator {
 public:
  void add(double v) {
    ++n_;
    double delta = v - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (v - mean_);
  }
  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
  Estimate estimate() const { return {mean_, std_error(), n_}; }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Seeded Monte-Carlo mean of eval(x) for x ~ dist.
template <class Eval>
Estimate expectation_monte_carlo(Eval&& eval, const ProductDistribution& dist, std::uint64_t n,
                                 std::uint64_t seed) {
  Rng rng(seed);
  MeanAccumulator acc;
  for (std::uint64_t s = 0; s < n; ++s) {
    Point x = dist.sample(rng);
    acc.add(eval(std::span<const double>(x)));
  }
  return acc.estimate();
}

// Seeded Monte-Carlo mean of eval(idx) for idx grid-uniform.
template <class Eval>
Estimate expectation_monte_carlo(Eval&& eval, GridShape shape, std::uint64_t n, std::uint64_t seed) {
  Rng rng(seed);
  MeanAccumulator acc;
  GridIndex idx(static_cast<std::size_t>(shape.d));
  for (std::uint64_t s = 0; s < n; ++s) {
    for (auto& v : idx) v = rng.between(1, shape.m);
    acc.add(eval(std::span<const int>(idx)));
  }
  return acc.estimate();
}

}  // namespace monofix
