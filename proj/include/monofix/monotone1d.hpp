#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "monofix/oracle.hpp"
#include "monofix/rng.hpp"

namespace monofix {

// Source of the random order in which the points of [m] are visited.
//
// A pivot source answers "which point of {l..r} comes first in the order?".
// That is all the local evaluator needs, and it lets the order be implicit:
// SeededPivots draws the answer from a keyed hash of (seed, l, r), so the
// order is never stored and every query point sees the same one.
template <class P>
concept PivotSource = requires(const P& p, int l, int r) {
  { p.pivot(l, r) } -> std::convertible_to<int>;
};

class SeededPivots {
 public:
  explicit SeededPivots(std::uint64_t seed) : seed_(seed) {}

  // Uniform over {l..r} across seeds; deterministic for a fixed seed.
  int pivot(int l, int r) const {
    if (l > r) throw std::invalid_argument("pivot: empty interval");
    const auto width = static_cast<std::uint64_t>(r - l) + 1;
    const std::uint64_t h =
        mix64(mix64(seed_ ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(l))) ^
              (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r)) << 32));
    return l + static_cast<int>(scale_to(h, width));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

// Pivots read off an explicit permutation: the first element of the
// permutation that lies in {l..r}.
class PermutationPivots {
 public:
  explicit PermutationPivots(std::vector<int> permutation) : perm_(std::move(permutation)) {
    const auto m = perm_.size();
    rank_.assign(m + 1, -1);
    for (std::size_t pos = 0; pos < m; ++pos) {
      int v = perm_[pos];
      if (v < 1 || static_cast<std::size_t>(v) > m || rank_[static_cast<std::size_t>(v)] != -1)
        throw std::invalid_argument("not a permutation of 1..m");
      rank_[static_cast<std::size_t>(v)] = static_cast<int>(pos);
    }
  }

  int pivot(int l, int r) const {
    if (l > r) throw std::invalid_argument("pivot: empty interval");
    int best = l;
    for (int v = l + 1; v <= r; ++v)
      if (rank_[static_cast<std::size_t>(v)] < rank_[static_cast<std::size_t>(best)]) best = v;
    return best;
  }

  const std::vector<int>& permutation() const { return perm_; }

 private:
  std::vector<int> perm_;
  std::vector<int> rank_;
};

// Maximum recursion depth of the local evaluator. Disabled (0) means no cap.
struct CapPolicy {
  int cap = 0;

  static CapPolicy disabled() { return {}; }
  static CapPolicy depth(int cap) {
    if (cap < 1) throw std::invalid_argument("cap must be >= 1");
    return {cap};
  }
  // constant * ceil(log2(m / delta)), at least 1.
  static CapPolicy for_budget(int m, double delta, int constant = 4) {
    if (!(delta > 0.0)) throw std::invalid_argument("cap failure budget must be > 0");
    const double bits = std::ceil(std::log2(static_cast<double>(m) / delta));
    return {std::max(1, constant * static_cast<int>(std::max(1.0, bits)))};
  }

  bool enabled() const { return cap > 0; }
};

// median{v, lb, ub} for lb <= ub, infinities allowed.
constexpr double median3(double v, double lb, double ub) { return std::min(std::max(v, lb), ub); }

struct EvalStats {
  int queries = 0;
  bool capped = false;
};

// Local evaluation of the greedy random-order monotonization at x in [m].
//
// The evaluator keeps the interval {l..r} that can still influence x and the
// bounds [lb, ub] the answer must respect. Each step takes the first point p
// of the order inside {l..r}, settles it at median{f(p), lb, ub}, and either
// returns (p == x) or narrows to the side containing x, tightening the bound.
// Exactly one query per step. When the cap is hit, every point still in the
// interval is assigned max(lb, 0).
template <class Slice, PivotSource Pivots>
  requires std::invocable<Slice&, int>
double eval_monotone_1d(Slice&& f, int m, const Pivots& pivots, CapPolicy cap, int x,
                        EvalStats* stats = nullptr) {
  if (x < 1 || x > m) throw std::out_of_range("eval_monotone_1d: x=" + std::to_string(x) + " outside [1," + std::to_string(m) + "]");
  int l = 1, r = m;
  double lb = -std::numeric_limits<double>::infinity();
  double ub = std::numeric_limits<double>::infinity();
  int depth = 0;
  while (true) {
    if (cap.enabled() && depth == cap.cap) {
      if (stats) stats->capped = true;
      return std::max(lb, 0.0);
    }
    const int p = pivots.pivot(l, r);
    const double v = median3(static_cast<double>(f(p)), lb, ub);
    ++depth;
    if (stats) ++stats->queries;
    if (p == x) return v;
    if (p > x) {
      ub = v;
      r = p - 1;
    } else {
      lb = v;
      l = p + 1;
    }
  }
}

// Convenience form over a one-dimensional grid oracle.
template <PivotSource Pivots>
double eval_monotone_1d(const GridOracle& oracle, int m, const Pivots& pivots, CapPolicy cap, int x,
                        EvalStats* stats = nullptr) {
  if (oracle.dimension() != 1) throw DimensionError("eval_monotone_1d needs a 1-D oracle");
  return eval_monotone_1d([&oracle](int k) { return oracle(std::span<const int>(&k, 1)); }, m, pivots,
                          cap, x, stats);
}

// Reference (global) construction: visit the permutation in order and give
// each point the value closest to f that is consistent with the points
// already visited. Used as the ground truth for the local evaluator.
inline std::vector<double> build_full_monotone_1d(std::span<const double> f, std::span<const int> permutation) {
  const auto m = f.size();
  if (permutation.size() != m) throw std::invalid_argument("permutation length differs from table");
  std::vector<char> seen(m + 1, 0);
  for (int v : permutation) {
    if (v < 1 || static_cast<std::size_t>(v) > m || seen[static_cast<std::size_t>(v)])
      throw std::invalid_argument("not a permutation of 1..m");
    seen[static_cast<std::size_t>(v)] = 1;
  }
  std::map<int, double> assigned;
  std::vector<double> out(m);
  for (int p : permutation) {
    auto above = assigned.upper_bound(p);
    const double high = above == assigned.end() ? std::numeric_limits<double>::infinity() : above->second;
    const double low = above == assigned.begin() ? -std::numeric_limits<double>::infinity()
                                                  : std::prev(above)->second;
    const double v = median3(f[static_cast<std::size_t>(p - 1)], low, high);
    assigned.emplace(p, v);
    out[static_cast<std::size_t>(p - 1)] = v;
  }
  return out;
}

// A permutation of [m] whose first-in-interval answers coincide with the
// given pivot source (pre-order walk of its recursion tree).
template <PivotSource Pivots>
std::vector<int> implied_permutation(const Pivots& pivots, int m) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(m));
  std::vector<std::pair<int, int>> stack{{1, m}};
  while (!stack.empty()) {
    auto [l, r] = stack.back();
    stack.pop_back();
    if (l > r) continue;
    const int p = pivots.pivot(l, r);
    out.push_back(p);
    stack.emplace_back(p + 1, r);
    stack.emplace_back(l, p - 1);
  }
  return out;
}

}  // namespace monofix
