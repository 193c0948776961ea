#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "monofix/distribution.hpp"
#include "monofix/monotone1d.hpp"
#include "monofix/oracle.hpp"
#include "monofix/rng.hpp"

namespace monofix {

// Parameters of the coordinate-by-coordinate chain f_0 -> f_1 -> ... -> f_d.
//
// Coordinate i's pivots are keyed only on (master_seed, i): every 1-D slice
// along coordinate i uses the same order, whatever the other coordinates are.
struct ChainConfig {
  int d = 1;
  int m = 1;
  double eps = 0.1;
  std::uint64_t master_seed = 0;
  CapPolicy cap;

  // m = ceil(d / eps); per-coordinate cap 4 * ceil(log2(d * m / eps)), i.e. the
  // 1-D cap with failure budget eps / d.
  static ChainConfig make(int d, double eps, std::uint64_t master_seed) {
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0,1)");
    ChainConfig c;
    c.d = d;
    c.eps = eps;
    c.m = static_cast<int>(std::ceil(d / eps - 1e-9));
    c.master_seed = master_seed;
    c.cap = CapPolicy::for_budget(c.m, eps / d);
    return c;
  }

  // Explicit grid and cap, e.g. for data that is already discrete.
  static ChainConfig on_grid(int d, int m, std::uint64_t master_seed, CapPolicy cap) {
    if (d < 1 || m < 1) throw std::invalid_argument("grid needs d, m >= 1");
    ChainConfig c;
    c.d = d;
    c.m = m;
    c.eps = 0.0;
    c.master_seed = master_seed;
    c.cap = cap;
    return c;
  }

  SeededPivots pivots(int coord) const {
    return SeededPivots(derive_seed(master_seed, {0x7069766f74ULL, static_cast<std::uint64_t>(coord)}));
  }

  std::uint64_t grid_seed() const { return derive_seed(master_seed, {0x67726964ULL}); }

  // cap^d, the hard limit on base queries per evaluation (infinite if uncapped).
  double query_cap() const {
    if (!cap.enabled()) return std::numeric_limits<double>::infinity();
    return std::pow(static_cast<double>(cap.cap), d);
  }
};

// grid_queries counts level-0 calls, an upper bound on base-oracle queries
// (lowest-band cells of a discretized oracle are answered without a query).
struct NdStats {
  std::uint64_t grid_queries = 0;
  int capped_levels = 0;
};

namespace detail {

template <class Base>
double eval_level(const Base& base, const ChainConfig& cfg, const std::vector<SeededPivots>& pivots, int level,
                  std::vector<int>& idx, NdStats* stats) {
  if (level == 0) {
    if (stats) ++stats->grid_queries;
    return base(std::span<const int>(idx));
  }
  const auto coord = static_cast<std::size_t>(level - 1);
  const int home = idx[coord];
  auto slice = [&](int k) {
    idx[coord] = k;
    double v = eval_level(base, cfg, pivots, level - 1, idx, stats);
    idx[coord] = home;
    return v;
  };
  EvalStats s;
  double v = eval_monotone_1d(slice, cfg.m, pivots[coord], cfg.cap, home, &s);
  if (stats && s.capped) ++stats->capped_levels;
  return v;
}

}  // namespace detail

// Level-d value of the chain at grid index x. Level 0 is `base` (normally the
// discretized oracle); level i runs the 1-D evaluator along coordinate i on
// level i-1. Levels are composed lazily, nothing is materialized.
template <class Base>
double eval_monotone_nd(const Base& base, const ChainConfig& cfg, std::span<const int> x, NdStats* stats = nullptr) {
  if (static_cast<int>(x.size()) != cfg.d) throw DimensionError("grid index dimension mismatch");
  for (int v : x)
    if (v < 1 || v > cfg.m) throw std::out_of_range("grid index outside [1, m]");
  std::vector<SeededPivots> pivots;
  pivots.reserve(static_cast<std::size_t>(cfg.d));
  for (int i = 0; i < cfg.d; ++i) pivots.push_back(cfg.pivots(i));
  std::vector<int> idx(x.begin(), x.end());
  return detail::eval_level(base, cfg, pivots, cfg.d, idx, stats);
}

// End-to-end monotonization of a black box over a product distribution:
// discretize onto an m = ceil(d/eps) grid, then chain. The result is monotone
// and feasible on the grid; a point is answered through its grid cell.
class Monotonizer {
 public:
  Monotonizer(QueryOracle base, const ProductDistribution& dist, double eps, std::uint64_t master_seed)
      : base_(std::move(base)) {
    if (static_cast<int>(base_.dimension()) != dist.dimension())
      throw DimensionError("oracle and distribution dimensions differ");
    config_ = ChainConfig::make(dist.dimension(), eps, master_seed);
    grid_ = std::make_shared<const GridSpec>(build_grid(dist, config_.m, config_.grid_seed()));
    discretized_ = discretize(base_, grid_);
  }

  double at(std::span<const int> idx, NdStats* stats = nullptr) const {
    return eval_monotone_nd(discretized_, config_, idx, stats);
  }

  double operator()(std::span<const double> x, NdStats* stats = nullptr) const {
    return at(grid_->grid_index(x), stats);
  }

  QueryOracle as_oracle() const {
    auto self = std::make_shared<const Monotonizer>(*this);
    return QueryOracle(static_cast<std::size_t>(config_.d),
                       [self](std::span<const double> x) { return (*self)(x); });
  }

  const ChainConfig& config() const { return config_; }
  const GridSpec& grid() const { return *grid_; }
  std::shared_ptr<const GridSpec> grid_ptr() const { return grid_; }
  const GridOracle& discretized() const { return discretized_; }
  const QueryOracle& base() const { return base_; }

 private:
  QueryOracle base_;
  ChainConfig config_;
  std::shared_ptr<const GridSpec> grid_;
  GridOracle discretized_;
};

inline Monotonizer monotonize(QueryOracle oracle, const ProductDistribution& dist, double eps,
                              std::uint64_t master_seed) {
  return Monotonizer(std::move(oracle), dist, eps, master_seed);
}

}  // namespace monofix
