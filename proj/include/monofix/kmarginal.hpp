#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "monofix/distribution.hpp"
#include "monofix/grid_table.hpp"
#include "monofix/marginal.hpp"
#include "monofix/oracle.hpp"
#include "monofix/rng.hpp"
#include "monofix/verify.hpp"

namespace monofix {

// All indices one step below y in exactly one coordinate, lowest coordinate
// first.
inline std::vector<GridIndex> low_one_neighborhood(std::span<const int> y) {
  std::vector<GridIndex> out;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] <= 1) continue;
    GridIndex z(y.begin(), y.end());
    --z[i];
    out.push_back(std::move(z));
  }
  return out;
}

// "If x restricted to `subset` equals `pattern`, overwrite it with
// `replacement`." Coordinates outside the subset are wildcards.
struct ReplacementRule {
  std::vector<int> subset;  // 0-based, ascending
  GridIndex pattern;
  GridIndex replacement;

  void validate(int d, int m) const {
    if (subset.empty() || pattern.size() != subset.size() || replacement.size() != subset.size())
      throw std::invalid_argument("rule: subset, pattern and replacement must have equal nonzero length");
    bool strict = false;
    for (std::size_t k = 0; k < subset.size(); ++k) {
      if (subset[k] < 0 || subset[k] >= d || (k > 0 && subset[k] <= subset[k - 1]))
        throw std::invalid_argument("rule: subset must be ascending coordinates");
      if (pattern[k] < 1 || pattern[k] > m || replacement[k] < 1 || replacement[k] > m)
        throw std::invalid_argument("rule: index outside [1, m]");
      if (replacement[k] > pattern[k]) throw std::invalid_argument("rule: replacement must not exceed pattern");
      strict |= replacement[k] < pattern[k];
    }
    if (!strict) throw std::invalid_argument("rule: replacement must be strictly below pattern somewhere");
  }

  bool matches(std::span<const int> x) const {
    for (std::size_t k = 0; k < subset.size(); ++k)
      if (x[static_cast<std::size_t>(subset[k])] != pattern[k]) return false;
    return true;
  }

  bool operator==(const ReplacementRule&) const = default;
};

// Ordered rules, applied once each from first to last.
class RuleList {
 public:
  RuleList() = default;
  RuleList(int d, int m) : d_(d), m_(m) {}

  int d() const { return d_; }
  int m() const { return m_; }
  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }
  const std::deque<ReplacementRule>& rules() const { return rules_; }
  const ReplacementRule& operator[](std::size_t i) const { return rules_[i]; }

  void push_front(ReplacementRule r) {
    r.validate(d_, m_);
    rules_.push_front(std::move(r));
  }
  void push_back(ReplacementRule r) {
    r.validate(d_, m_);
    rules_.push_back(std::move(r));
  }

  void apply_in_place(std::span<int> x) const {
    for (const auto& r : rules_) {
      if (!r.matches(x)) continue;
      for (std::size_t k = 0; k < r.subset.size(); ++k) x[static_cast<std::size_t>(r.subset[k])] = r.replacement[k];
    }
  }

  GridIndex apply(std::span<const int> x) const {
    GridIndex y(x.begin(), x.end());
    apply_in_place(y);
    return y;
  }

  // [{"subset": [1, 3], "pattern": [...], "replacement": [...]}, ...]
  // Subsets are 1-based here, like grid indices.
  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& r : rules_) {
      std::vector<int> sub;
      for (int c : r.subset) sub.push_back(c + 1);
      arr.push_back({{"subset", sub}, {"pattern", r.pattern}, {"replacement", r.replacement}});
    }
    return arr;
  }

  static RuleList from_json(const nlohmann::json& j, int d, int m) {
    if (!j.is_array()) throw std::invalid_argument("rule list must be an array");
    RuleList out(d, m);
    for (const auto& e : j) {
      ReplacementRule r;
      for (int c : e.at("subset").get<std::vector<int>>()) r.subset.push_back(c - 1);
      r.pattern = e.at("pattern").get<GridIndex>();
      r.replacement = e.at("replacement").get<GridIndex>();
      out.push_back(std::move(r));
    }
    return out;
  }

 private:
  int d_ = 0;
  int m_ = 0;
  std::deque<ReplacementRule> rules_;
};

// Estimated marginal tables for every subset of size <= k.
class KMarginalTable {
 public:
  KMarginalTable() = default;
  KMarginalTable(int d, int m, int k) : m_(m), subsets_(subsets_up_to(d, k)) {
    for (const auto& s : subsets_) {
      const auto cells = GridShape{static_cast<int>(s.size()), m}.cells();
      means_.emplace_back(cells, 0.0);
      counts_.emplace_back(cells, 0);
    }
  }

  int m() const { return m_; }
  const std::vector<std::vector<int>>& subsets() const { return subsets_; }
  GridShape shape_of(std::size_t s) const { return {static_cast<int>(subsets_[s].size()), m_}; }

  double mean(std::size_t s, std::span<const int> xi) const { return means_[s][shape_of(s).flat(xi)]; }
  std::uint64_t count(std::size_t s, std::span<const int> xi) const { return counts_[s][shape_of(s).flat(xi)]; }
  std::vector<double>& means(std::size_t s) { return means_[s]; }
  const std::vector<double>& means(std::size_t s) const { return means_[s]; }
  std::vector<std::uint64_t>& counts(std::size_t s) { return counts_[s]; }

  std::uint64_t min_count() const {
    std::uint64_t lo = std::numeric_limits<std::uint64_t>::max();
    for (const auto& c : counts_)
      for (auto v : c) lo = std::min(lo, v);
    return lo;
  }
  bool has_empty_cells() const { return min_count() == 0; }

  std::size_t total_cells() const {
    std::size_t n = 0;
    for (const auto& c : means_) n += c.size();
    return n;
  }

 private:
  int m_ = 0;
  std::vector<std::vector<int>> subsets_;
  std::vector<std::vector<double>> means_;
  std::vector<std::vector<std::uint64_t>> counts_;
};

// One pass of n grid-uniform samples of eval; each sample lands in one cell
// of every subset table.
template <class Eval>
KMarginalTable estimate_all_marginals(Eval&& eval, GridShape shape, int k, std::uint64_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("estimate_all_marginals: n must be >= 1");
  KMarginalTable tab(shape.d, shape.m, k);
  // Sums are kept relative to the first value seen in each cell, so a cell
  // that always sees the same value reports it exactly.
  std::vector<std::vector<double>> sums, shift;
  for (std::size_t s = 0; s < tab.subsets().size(); ++s) {
    sums.emplace_back(tab.means(s).size(), 0.0);
    shift.emplace_back(tab.means(s).size(), 0.0);
  }
  Rng rng(seed);
  GridIndex x(static_cast<std::size_t>(shape.d));
  GridIndex xi;
  for (std::uint64_t t = 0; t < n; ++t) {
    for (auto& v : x) v = rng.between(1, shape.m);
    const double v = eval(std::span<const int>(x));
    for (std::size_t s = 0; s < tab.subsets().size(); ++s) {
      const auto& sub = tab.subsets()[s];
      xi.resize(sub.size());
      for (std::size_t q = 0; q < sub.size(); ++q) xi[q] = x[static_cast<std::size_t>(sub[q])];
      const auto cell = tab.shape_of(s).flat(xi);
      if (tab.counts(s)[cell]++ == 0) shift[s][cell] = v;
      sums[s][cell] += v - shift[s][cell];
    }
  }
  for (std::size_t s = 0; s < sums.size(); ++s)
    for (std::size_t c = 0; c < sums[s].size(); ++c) {
      const auto cnt = tab.counts(s)[c];
      tab.means(s)[c] = cnt ? shift[s][c] + sums[s][c] / static_cast<double>(cnt) : 0.0;
    }
  return tab;
}

// Exact marginals of a table for every subset of size <= k (counts left 0).
inline KMarginalTable exact_all_marginals(const GridTable& table, int k) {
  KMarginalTable tab(table.d(), table.m(), k);
  for (std::size_t s = 0; s < tab.subsets().size(); ++s) {
    auto marg = exact_marginal(table, tab.subsets()[s]);
    std::copy(marg.values().begin(), marg.values().end(), tab.means(s).begin());
  }
  return tab;
}

struct KViolation {
  std::size_t subset_pos = 0;
  std::vector<int> subset;
  GridIndex lower;  // x_I
  GridIndex upper;  // y_I, one step above x_I in one coordinate of I
};

// First pair (x_I, y_I) with table(x_I) > table(y_I) + threshold; subsets in
// size-then-lexicographic order, x_I lexicographic, y_I by raised coordinate.
inline std::optional<KViolation> detect_violation(const KMarginalTable& tables, double threshold) {
  for (std::size_t s = 0; s < tables.subsets().size(); ++s) {
    const auto shape = tables.shape_of(s);
    const auto& means = tables.means(s);
    GridIndex x = shape.first();
    do {
      const double lo = means[shape.flat(x)];
      for (std::size_t c = 0; c < x.size(); ++c) {
        if (x[c] == shape.m) continue;
        GridIndex y = x;
        ++y[c];
        if (lo > means[shape.flat(y)] + threshold) return KViolation{s, tables.subsets()[s], x, y};
      }
    } while (shape.next(x));
  }
  return std::nullopt;
}

// The neighbour of y_I (inside the I-table) with the largest marginal,
// first one on ties.
inline GridIndex best_low_neighbor(const KMarginalTable& tables, std::size_t s, std::span<const int> y) {
  auto nbrs = low_one_neighborhood(y);
  if (nbrs.empty()) throw std::logic_error("violation upper point has no low neighbours");
  std::size_t best = 0;
  for (std::size_t q = 1; q < nbrs.size(); ++q)
    if (tables.mean(s, nbrs[q]) > tables.mean(s, nbrs[best])) best = q;
  return nbrs[best];
}

struct KMarginalOptions {
  double eta = 0.01;
  // 0 means the default budget floor(m^k / delta).
  std::uint64_t max_rounds = 0;
  int multiplier = 4;
  double threshold_factor = 2.0;
};

struct KMarginalFix {
  RuleList rules;
  double delta = 0.0;
  int multiplier = 4;
  std::uint64_t rounds = 0;  // estimation rounds performed
  std::uint64_t round_budget = 0;
  bool budget_exhausted = false;
  std::uint64_t samples_per_cell = 0;
  std::uint64_t samples_per_round = 0;
  std::uint64_t min_cell_count = 0;  // smallest cell count seen in any round
  std::uint64_t queries = 0;
  std::uint64_t query_budget = 0;
  GridOracle corrected;
};

// The rule loop. `estimate(rules, round)` returns the marginal tables of
// f o rules. A found violation (x_I below y_I) adds, in front of the list,
// the rule y_I -> the best low neighbour of y_I, so f o rules at any input
// matching y_I becomes f o (old rules) at that neighbour.
template <class Estimator>
void run_rule_rounds(KMarginalFix& fix, Estimator&& estimate, double threshold) {
  while (true) {
    auto tables = estimate(static_cast<const RuleList&>(fix.rules), fix.rounds);
    ++fix.rounds;
    auto v = detect_violation(tables, threshold);
    if (!v) return;
    if (fix.rules.size() >= fix.round_budget) {
      fix.budget_exhausted = true;
      return;
    }
    fix.rules.push_front({v->subset, v->upper, best_low_neighbor(tables, v->subset_pos, v->upper)});
  }
}

inline std::uint64_t default_round_budget(int m, int k, double delta) {
  return static_cast<std::uint64_t>(std::floor(std::pow(static_cast<double>(m), k) / delta));
}

inline GridOracle make_kmarginal_oracle(const GridOracle& f, std::shared_ptr<const RuleList> rules, double delta,
                                        int multiplier) {
  const int m = rules->m();
  return GridOracle(f.dimension(), [f, rules, delta, m, multiplier](std::span<const int> x) {
    GridIndex y = rules->apply(x);
    return exact_correction(f(std::span<const int>(y)), x, delta, m, multiplier);
  });
}

// f(apply_rules(x)) minus the 4*delta ramp, clamped at 0.
inline double eval_kmarginal(const GridOracle& f, const RuleList& rules, double delta, std::span<const int> x,
                             int multiplier = 4) {
  GridIndex y = rules.apply(x);
  return exact_correction(f(std::span<const int>(y)), x, delta, rules.m(), multiplier);
}

// k-marginal monotonization of a grid oracle with sampled marginals.
//
// delta = eps / (4 d m). Each round draws m^k * n_cell grid-uniform samples,
// n_cell = ceil(ln(2 C R / eta) / (2 delta^2)) with C the number of marginal
// cells over all subsets and R the round budget, so that a cell of a k-subset
// table receives n_cell samples on average.
inline KMarginalFix build_rule_list(const GridOracle& f, GridShape shape, int k, double eps, std::uint64_t seed,
                                    KMarginalOptions opt = {}) {
  if (k < 1 || k > shape.d) throw std::invalid_argument("k must lie in [1, d]");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0,1)");
  if (static_cast<int>(f.dimension()) != shape.d) throw DimensionError("oracle and grid dimensions differ");
  KMarginalFix fix;
  fix.rules = RuleList(shape.d, shape.m);
  fix.delta = eps / (4.0 * shape.d * shape.m);
  fix.multiplier = opt.multiplier;
  fix.round_budget = opt.max_rounds ? opt.max_rounds : default_round_budget(shape.m, k, fix.delta);
  const double cells = static_cast<double>(KMarginalTable(shape.d, shape.m, k).total_cells());
  fix.samples_per_cell = hoeffding_samples(fix.delta, cells * static_cast<double>(fix.round_budget), opt.eta);
  fix.samples_per_round =
      static_cast<std::uint64_t>(std::pow(static_cast<double>(shape.m), k)) * fix.samples_per_cell;
  fix.query_budget = (fix.round_budget + 1) * fix.samples_per_round;
  fix.min_cell_count = std::numeric_limits<std::uint64_t>::max();

  const auto before = f.queries();
  auto estimator = [&](const RuleList& rules, std::uint64_t round) {
    GridIndex y;
    auto tab = estimate_all_marginals(
        [&](std::span<const int> x) {
          y.assign(x.begin(), x.end());
          rules.apply_in_place(y);
          return f(std::span<const int>(y));
        },
        shape, k, fix.samples_per_round, derive_seed(seed, {0x6b6d6172ULL, round}));
    fix.min_cell_count = std::min(fix.min_cell_count, tab.min_count());
    return tab;
  };
  run_rule_rounds(fix, estimator, opt.threshold_factor * fix.delta);
  fix.queries = f.queries() - before;
  if (fix.queries > fix.rounds * fix.samples_per_round) throw std::logic_error("k-marginal fix exceeded its query budget");
  fix.corrected = make_kmarginal_oracle(f, std::make_shared<const RuleList>(fix.rules), fix.delta, fix.multiplier);
  return fix;
}

// The same loop on a materialized table with exact marginals, recomputed
// every round, and the violation threshold delta.
inline KMarginalFix build_rule_list_exact(const GridTable& table, int k, double eps, KMarginalOptions opt = {}) {
  const auto shape = table.shape();
  if (k < 1 || k > shape.d) throw std::invalid_argument("k must lie in [1, d]");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0,1)");
  KMarginalFix fix;
  fix.rules = RuleList(shape.d, shape.m);
  fix.delta = eps / (4.0 * shape.d * shape.m);
  fix.multiplier = opt.multiplier;
  fix.round_budget = opt.max_rounds ? opt.max_rounds : default_round_budget(shape.m, k, fix.delta);
  auto estimator = [&](const RuleList& rules, std::uint64_t) {
    auto composed = GridTable::tabulate(shape, [&](std::span<const int> x) { return table[rules.apply(x)]; });
    return exact_all_marginals(composed, k);
  };
  run_rule_rounds(fix, estimator, fix.delta);
  fix.corrected = make_kmarginal_oracle(make_grid_oracle(table), std::make_shared<const RuleList>(fix.rules),
                                        fix.delta, fix.multiplier);
  return fix;
}

struct ContinuousKMarginalFix {
  KMarginalFix grid_fix;
  QueryOracle corrected;
};

inline ContinuousKMarginalFix build_rule_list(const QueryOracle& oracle, std::shared_ptr<const GridSpec> grid, int k,
                                              double eps, std::uint64_t seed, KMarginalOptions opt = {}) {
  auto fixed = build_rule_list(discretize(oracle, grid), grid->shape(), k, eps, seed, opt);
  auto corrected = fixed.corrected;
  QueryOracle q(oracle.dimension(), [grid, corrected](std::span<const double> x) {
    GridIndex idx = grid->grid_index(x);
    return corrected(std::span<const int>(idx));
  });
  return {std::move(fixed), std::move(q)};
}

}  // namespace monofix
