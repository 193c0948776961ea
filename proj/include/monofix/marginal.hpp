#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "monofix/distribution.hpp"
#include "monofix/grid_table.hpp"
#include "monofix/oracle.hpp"
#include "monofix/rng.hpp"
#include "monofix/verify.hpp"

namespace monofix {

// Per-coordinate remap phi_i : [m] -> [m] with phi_i(j) <= j. Applying the
// stored map once yields the final target (phi_i o phi_i == phi_i).
class ReplacementMap {
 public:
  ReplacementMap() = default;

  static ReplacementMap identity(GridShape shape) {
    ReplacementMap r;
    r.shape_ = shape;
    r.targets_.resize(static_cast<std::size_t>(shape.d));
    for (auto& t : r.targets_) {
      t.resize(static_cast<std::size_t>(shape.m));
      for (int j = 1; j <= shape.m; ++j) t[static_cast<std::size_t>(j - 1)] = j;
    }
    return r;
  }

  const GridShape& shape() const { return shape_; }

  // coord is 0-based, j 1-based.
  int target(int coord, int j) const {
    return targets_[static_cast<std::size_t>(coord)][static_cast<std::size_t>(j - 1)];
  }
  const std::vector<int>& targets(int coord) const { return targets_[static_cast<std::size_t>(coord)]; }

  void apply_in_place(std::span<int> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = targets_[i][static_cast<std::size_t>(x[i] - 1)];
  }

  GridIndex apply(std::span<const int> x) const {
    GridIndex y(x.begin(), x.end());
    apply_in_place(y);
    return y;
  }

  // Sends every index whose image is phi(j+1) to phi(j): the support value
  // phi(j+1) disappears from coordinate `coord`.
  void merge(int coord, int j) {
    auto& t = targets_[static_cast<std::size_t>(coord)];
    const int from = t[static_cast<std::size_t>(j)];
    const int to = t[static_cast<std::size_t>(j - 1)];
    for (auto& v : t)
      if (v == from) v = to;
  }

  bool is_identity() const {
    for (const auto& t : targets_)
      for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] != static_cast<int>(k) + 1) return false;
    return true;
  }

  // Number of distinct images per coordinate, summed.
  int support_size() const {
    int n = 0;
    for (const auto& t : targets_)
      for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] == static_cast<int>(k) + 1) ++n;
    return n;
  }

  bool operator==(const ReplacementMap&) const = default;

  // [{"coord": 1, "map": [1, 1, 3]}, ...] with 1-based coordinates and targets.
  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < targets_.size(); ++i)
      arr.push_back({{"coord", static_cast<int>(i) + 1}, {"map", targets_[i]}});
    return arr;
  }

  static ReplacementMap from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) throw std::invalid_argument("replacement map must be a nonempty array");
    const int d = static_cast<int>(j.size());
    const int m = static_cast<int>(j.at(0).at("map").size());
    ReplacementMap r = identity({d, m});
    std::vector<char> seen(static_cast<std::size_t>(d), 0);
    for (const auto& e : j) {
      const int coord = e.at("coord").get<int>();
      auto t = e.at("map").get<std::vector<int>>();
      if (coord < 1 || coord > d || seen[static_cast<std::size_t>(coord - 1)])
        throw std::invalid_argument("replacement map: bad coord");
      if (static_cast<int>(t.size()) != m) throw std::invalid_argument("replacement map: ragged maps");
      for (int k = 1; k <= m; ++k) {
        const int v = t[static_cast<std::size_t>(k - 1)];
        if (v < 1 || v > k) throw std::invalid_argument("replacement map: target must satisfy 1 <= phi(j) <= j");
      }
      for (int k = 1; k <= m; ++k)
        if (t[static_cast<std::size_t>(t[static_cast<std::size_t>(k - 1)] - 1)] != t[static_cast<std::size_t>(k - 1)])
          throw std::invalid_argument("replacement map: not idempotent");
      seen[static_cast<std::size_t>(coord - 1)] = 1;
      r.targets_[static_cast<std::size_t>(coord - 1)] = std::move(t);
    }
    return r;
  }

 private:
  GridShape shape_;
  std::vector<std::vector<int>> targets_;
};

// Estimated single-coordinate marginals: estimates[i][j-1] for coordinate i.
struct MarginalTable {
  std::vector<std::vector<double>> estimates;
  std::vector<std::vector<std::uint64_t>> counts;
  // Hoeffding radius each estimate is within, with the configured confidence.
  double radius = 0.0;
};

// Mean of f(phi(x)) over n grid points with x_coord = j and the other
// coordinates grid-uniform.
inline double estimate_marginal(const GridOracle& f, GridShape shape, const ReplacementMap& phi, int coord, int j,
                                std::uint64_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("estimate_marginal: n must be >= 1");
  if (coord < 0 || coord >= shape.d || j < 1 || j > shape.m) throw std::out_of_range("estimate_marginal: bad cell");
  Rng rng(seed);
  GridIndex x(static_cast<std::size_t>(shape.d));
  double first = 0.0, sum = 0.0;
  for (std::uint64_t s = 0; s < n; ++s) {
    for (int i = 0; i < shape.d; ++i)
      x[static_cast<std::size_t>(i)] = i == coord ? j : 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(shape.m)));
    phi.apply_in_place(x);
    const double v = f(std::span<const int>(x));
    if (s == 0) first = v;
    sum += v - first;
  }
  return first + sum / static_cast<double>(n);
}

// First (lowest coordinate, then lowest j) pair with t_i(j) > t_i(j+1) + threshold.
inline std::optional<std::pair<int, int>> find_marginal_violation(const std::vector<std::vector<double>>& tables,
                                                                  double threshold) {
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto& t = tables[i];
    for (std::size_t j = 0; j + 1 < t.size(); ++j)
      if (t[j] > t[j + 1] + threshold) return std::pair{static_cast<int>(i), static_cast<int>(j) + 1};
  }
  return std::nullopt;
}

struct ExactMarginalFix {
  ReplacementMap map;
  int merges = 0;
  // The per-coordinate tables after the merges (all nondecreasing).
  std::vector<std::vector<double>> tables;
};

// Runs the merge rule on given per-coordinate tables treated as exact: a
// merge of (i, j) copies t_i(j) onto every index sharing j+1's image.
// Each merge removes one support value, so at most d(m-1) merges happen.
inline ExactMarginalFix fix_marginals_exact(std::vector<std::vector<double>> tables, int m, int d) {
  if (static_cast<int>(tables.size()) != d) throw std::invalid_argument("need one marginal table per coordinate");
  for (const auto& t : tables)
    if (static_cast<int>(t.size()) != m) throw std::invalid_argument("marginal table must have m entries");
  ExactMarginalFix out{ReplacementMap::identity({d, m}), 0, std::move(tables)};
  while (auto v = find_marginal_violation(out.tables, 0.0)) {
    auto [i, j] = *v;
    auto& t = out.tables[static_cast<std::size_t>(i)];
    const int from = out.map.target(i, j + 1);
    const double value = t[static_cast<std::size_t>(j - 1)];
    for (int k = 1; k <= m; ++k)
      if (out.map.target(i, k) == from) t[static_cast<std::size_t>(k - 1)] = value;
    out.map.merge(i, j);
    ++out.merges;
    if (out.merges > d * (m - 1)) throw std::logic_error("marginal merges exceeded d(m-1)");
  }
  return out;
}

// max{0, value - multiplier * delta * sum_i (m - j_i)}: turns a
// (multiplier*delta)-approximately monotone function into a monotone one.
inline double exact_correction(double value, std::span<const int> index, double delta, int m, int multiplier) {
  if (multiplier != 2 && multiplier != 4) throw std::invalid_argument("correction multiplier must be 2 or 4");
  if (!(delta > 0.0)) throw std::invalid_argument("correction delta must be > 0");
  long deficit = 0;
  for (int j : index) deficit += m - j;
  return std::max(0.0, value - multiplier * delta * static_cast<double>(deficit));
}

struct MarginalRounds {
  ReplacementMap map;
  int merges = 0;
  int rounds = 0;  // estimation rounds performed
  bool budget_exhausted = false;
};

// The generic loop: estimate the marginals of f o phi, merge the first
// violation above `threshold`, repeat. `estimate(phi, round)` returns one
// table per coordinate. In one-shot mode the first estimate is reused and
// updated as if exact.
template <class Estimator>
MarginalRounds run_marginal_rounds(GridShape shape, Estimator&& estimate, double threshold, int max_merges,
                                   bool one_shot = false) {
  MarginalRounds out{ReplacementMap::identity(shape)};
  std::vector<std::vector<double>> tables;
  while (true) {
    if (!one_shot || out.rounds == 0) {
      tables = estimate(static_cast<const ReplacementMap&>(out.map), out.rounds);
      ++out.rounds;
    }
    auto v = find_marginal_violation(tables, threshold);
    if (!v) break;
    if (out.merges >= max_merges) {
      out.budget_exhausted = true;
      break;
    }
    auto [i, j] = *v;
    if (one_shot) {
      auto& t = tables[static_cast<std::size_t>(i)];
      const int from = out.map.target(i, j + 1);
      for (int k = 1; k <= shape.m; ++k)
        if (out.map.target(i, k) == from) t[static_cast<std::size_t>(k - 1)] = t[static_cast<std::size_t>(j - 1)];
    }
    out.map.merge(i, j);
    ++out.merges;
  }
  return out;
}

// Exact marginals of table o phi, one vector per coordinate.
inline std::vector<std::vector<double>> exact_marginals_of(const GridTable& table, const ReplacementMap& phi) {
  const auto shape = table.shape();
  auto composed = GridTable::tabulate(shape, [&](std::span<const int> x) { return table[phi.apply(x)]; });
  std::vector<std::vector<double>> out;
  for (int i = 0; i < shape.d; ++i) {
    auto marg = exact_marginal(composed, {i});
    out.emplace_back(marg.values().begin(), marg.values().end());
  }
  return out;
}

// The merge loop driven by exact marginals of table o phi, recomputed every
// round (threshold 0).
inline MarginalRounds fix_marginals_with_exact_marginals(const GridTable& table) {
  const auto shape = table.shape();
  return run_marginal_rounds(
      shape, [&](const ReplacementMap& phi, int) { return exact_marginals_of(table, phi); }, 0.0,
      shape.d * (shape.m - 1));
}

struct MarginalOptions {
  double eta = 0.01;        // failure budget of all estimates together
  bool one_shot = false;    // estimate once instead of every round
  int multiplier = 4;       // exact-correction multiplier
  double threshold_factor = 2.0;  // merge when estimates differ by more than factor * delta
};

struct MarginalFix {
  ReplacementMap map;
  double delta = 0.0;
  int multiplier = 4;
  int merges = 0;
  int rounds = 0;
  bool budget_exhausted = false;
  std::uint64_t samples_per_cell = 0;
  std::uint64_t queries = 0;
  std::uint64_t query_budget = 0;
  MarginalTable last_estimates;
  // x -> max{0, f(phi(x)) - multiplier * delta * sum_i (m - j_i)}
  GridOracle corrected;
};

inline std::uint64_t hoeffding_samples(double delta, double union_size, double eta) {
  return static_cast<std::uint64_t>(std::ceil(std::log(2.0 * union_size / eta) / (2.0 * delta * delta)));
}

// Marginal monotonization of a grid oracle with sampled marginals.
//
// delta = eps / (3 d m); each round estimates every marginal cell of f o phi
// with n = ceil(ln(2 d m R / eta) / (2 delta^2)) samples, R = d(m-1), so all
// estimates of all rounds are within delta of the truth with probability
// >= 1 - eta.
inline MarginalFix fix_marginals(const GridOracle& f, GridShape shape, double eps, std::uint64_t seed,
                                 MarginalOptions opt = {}) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0,1)");
  if (static_cast<int>(f.dimension()) != shape.d) throw DimensionError("oracle and grid dimensions differ");
  MarginalFix out;
  const int d = shape.d, m = shape.m;
  const int max_merges = d * (m - 1);
  const int max_rounds = max_merges + 1;
  out.delta = eps / (3.0 * d * m);
  out.multiplier = opt.multiplier;
  out.samples_per_cell = hoeffding_samples(out.delta, static_cast<double>(d) * m * std::max(1, max_merges), opt.eta);
  out.query_budget = static_cast<std::uint64_t>(max_rounds) * static_cast<std::uint64_t>(d * m) * out.samples_per_cell;

  const auto before = f.queries();
  auto estimator = [&](const ReplacementMap& phi, int round) {
    MarginalTable tab;
    tab.estimates.assign(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(m)));
    tab.counts.assign(static_cast<std::size_t>(d), std::vector<std::uint64_t>(static_cast<std::size_t>(m), out.samples_per_cell));
    tab.radius = out.delta;
    for (int i = 0; i < d; ++i)
      for (int j = 1; j <= m; ++j)
        tab.estimates[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - 1)] = estimate_marginal(
            f, shape, phi, i, j, out.samples_per_cell,
            derive_seed(seed, {static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(j)}));
    out.last_estimates = tab;
    return tab.estimates;
  };
  auto rounds = run_marginal_rounds(shape, estimator, opt.threshold_factor * out.delta, max_merges, opt.one_shot);
  out.queries = f.queries() - before;
  out.map = rounds.map;
  out.merges = rounds.merges;
  out.rounds = rounds.rounds;
  out.budget_exhausted = rounds.budget_exhausted;
  if (out.queries > out.query_budget) throw std::logic_error("marginal fix exceeded its query budget");

  auto phi = std::make_shared<const ReplacementMap>(out.map);
  out.corrected = GridOracle(static_cast<std::size_t>(d),
                             [f, phi, delta = out.delta, m, mult = out.multiplier](std::span<const int> x) {
                               GridIndex y = phi->apply(x);
                               return exact_correction(f(std::span<const int>(y)), x, delta, m, mult);
                             });
  return out;
}

// Continuous-domain form: discretize `oracle` on `grid`, fix the marginals
// of the discretized oracle, and answer points through their grid cell.
struct ContinuousMarginalFix {
  MarginalFix grid_fix;
  QueryOracle corrected;
};

inline ContinuousMarginalFix fix_marginals(const QueryOracle& oracle, std::shared_ptr<const GridSpec> grid, double eps,
                                           std::uint64_t seed, MarginalOptions opt = {}) {
  auto fixed = fix_marginals(discretize(oracle, grid), grid->shape(), eps, seed, opt);
  auto corrected = fixed.corrected;
  QueryOracle q(oracle.dimension(), [grid, corrected](std::span<const double> x) {
    GridIndex idx = grid->grid_index(x);
    return corrected(std::span<const int>(idx));
  });
  return {std::move(fixed), std::move(q)};
}

}  // namespace monofix
