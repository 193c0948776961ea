#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "monofix/grid_table.hpp"
#include "monofix/oracle.hpp"
#include "monofix/rng.hpp"

namespace monofix {

class DistributionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UniformDist {
  double a = 0.0;
  double b = 1.0;
};

// CDF given by breakpoints (x, p), linear in between. p runs from 0 to 1.
struct PiecewiseCdf {
  std::vector<std::pair<double, double>> points;
};

// Empirical distribution of a sample set (stored sorted).
struct EmpiricalDist {
  std::vector<double> samples;
};

// One coordinate D_i of the input distribution, accessed through its
// quantile function (generalized inverse CDF).
class CoordinateDistribution {
 public:
  using Kind = std::variant<UniformDist, PiecewiseCdf, EmpiricalDist>;

  static CoordinateDistribution uniform(double a, double b) {
    if (!(std::isfinite(a) && std::isfinite(b)) || a > b)
      throw DistributionError("uniform needs finite a <= b");
    return CoordinateDistribution(UniformDist{a, b});
  }

  static CoordinateDistribution cdf(std::vector<std::pair<double, double>> points) {
    if (points.size() < 2) throw DistributionError("cdf needs at least two points");
    for (std::size_t k = 0; k < points.size(); ++k) {
      auto [x, p] = points[k];
      if (!std::isfinite(x) || !(p >= 0.0 && p <= 1.0))
        throw DistributionError("cdf point out of range");
      if (k > 0 && (x < points[k - 1].first || p < points[k - 1].second))
        throw DistributionError("cdf points must be nondecreasing in x and p");
    }
    if (points.front().second != 0.0 || points.back().second != 1.0)
      throw DistributionError("cdf must start at p=0 and end at p=1");
    return CoordinateDistribution(PiecewiseCdf{std::move(points)});
  }

  static CoordinateDistribution empirical(std::vector<double> samples) {
    if (samples.empty()) throw DistributionError("empirical needs samples");
    for (double s : samples)
      if (!std::isfinite(s)) throw DistributionError("empirical sample not finite");
    std::sort(samples.begin(), samples.end());
    return CoordinateDistribution(EmpiricalDist{std::move(samples)});
  }

  // Nondecreasing in p; p is clamped to [0,1].
  double quantile(double p) const {
    p = std::clamp(p, 0.0, 1.0);
    return std::visit([p](const auto& k) { return quantile_of(k, p); }, kind_);
  }

  double sample(Rng& rng) const { return quantile(rng.uniform()); }

  const Kind& kind() const { return kind_; }

 private:
  explicit CoordinateDistribution(Kind k) : kind_(std::move(k)) {}

  static double quantile_of(const UniformDist& u, double p) {
    return u.a + p * (u.b - u.a);
  }

  static double quantile_of(const PiecewiseCdf& c, double p) {
    const auto& pts = c.points;
    // First breakpoint with cumulative probability >= p.
    auto it = std::lower_bound(pts.begin(), pts.end(), p,
                               [](const auto& pt, double q) { return pt.second < q; });
    if (it == pts.begin()) return pts.front().first;
    if (it == pts.end()) return pts.back().first;
    const auto& [x1, p1] = *it;
    const auto& [x0, p0] = *(it - 1);
    if (p1 <= p0) return x1;
    return x0 + (p - p0) / (p1 - p0) * (x1 - x0);
  }

  static double quantile_of(const EmpiricalDist& e, double p) {
    const auto n = e.samples.size();
    auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    return e.samples[k == 0 ? 0 : std::min(k - 1, n - 1)];
  }

  Kind kind_;
};

// D = D_1 x ... x D_d.
class ProductDistribution {
 public:
  ProductDistribution() = default;
  explicit ProductDistribution(std::vector<CoordinateDistribution> coords)
      : coords_(std::move(coords)) {
    if (coords_.empty()) throw DistributionError("product distribution needs d >= 1");
  }

  static ProductDistribution uniform_cube(int d) {
    return ProductDistribution(std::vector<CoordinateDistribution>(
        static_cast<std::size_t>(d), CoordinateDistribution::uniform(0.0, 1.0)));
  }

  int dimension() const { return static_cast<int>(coords_.size()); }
  const CoordinateDistribution& operator[](int i) const {
    return coords_[static_cast<std::size_t>(i)];
  }

  Point sample(Rng& rng) const {
    Point x(coords_.size());
    for (std::size_t i = 0; i < coords_.size(); ++i) x[i] = coords_[i].sample(rng);
    return x;
  }

 private:
  std::vector<CoordinateDistribution> coords_;
};

// Per-coordinate equal-probability partition of the support into m intervals
// I_1..I_m, plus one frozen representative drawn from D_i | I_k for every
// interval. Immutable after construction.
//
// Interval k of coordinate i is [boundary(i,k-1), boundary(i,k)), the top
// interval closed. Duplicated quantiles (atoms) give zero-width intervals,
// which grid_index never returns for points strictly inside the support.
class GridSpec {
 public:
  GridSpec() = default;
  GridSpec(int m, std::uint64_t seed, std::vector<std::vector<double>> boundaries,
           std::vector<std::vector<double>> representatives)
      : m_(m),
        seed_(seed),
        boundaries_(std::move(boundaries)),
        representatives_(std::move(representatives)) {}

  int d() const { return static_cast<int>(boundaries_.size()); }
  int m() const { return m_; }
  GridShape shape() const { return {d(), m_}; }
  std::uint64_t seed() const { return seed_; }

  // k in 0..m; boundary(i,0) is the lower end of the support.
  double boundary(int i, int k) const {
    return boundaries_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  // Representative of interval k in 1..m.
  double representative(int i, int k) const {
    return representatives_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k - 1)];
  }
  const std::vector<double>& boundaries(int i) const {
    return boundaries_[static_cast<std::size_t>(i)];
  }

  int index_of(int i, double x) const {
    const auto& b = boundaries_[static_cast<std::size_t>(i)];
    // Interior cut points b[1..m-1]; the count of cuts <= x is the zero-based
    // interval. Points outside the support clamp to the end intervals.
    auto it = std::upper_bound(b.begin() + 1, b.end() - 1, x);
    return static_cast<int>(it - (b.begin() + 1)) + 1;
  }

  GridIndex grid_index(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != d()) throw DimensionError("point dimension mismatch");
    GridIndex idx(x.size());
    for (int i = 0; i < d(); ++i) idx[static_cast<std::size_t>(i)] = index_of(i, x[static_cast<std::size_t>(i)]);
    return idx;
  }

  // The smallest point of the cell (its lower corner).
  Point lower_corner(std::span<const int> idx) const {
    Point p(idx.size());
    for (int i = 0; i < d(); ++i)
      p[static_cast<std::size_t>(i)] = boundary(i, idx[static_cast<std::size_t>(i)] - 1);
    return p;
  }

 private:
  int m_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<double>> boundaries_;
  std::vector<std::vector<double>> representatives_;
};

inline GridSpec build_grid(const ProductDistribution& dist, int m, std::uint64_t seed) {
  if (m < 1) throw DistributionError("grid size m must be >= 1");
  const int d = dist.dimension();
  std::vector<std::vector<double>> bounds(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> reps(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    const auto& di = dist[i];
    auto& b = bounds[static_cast<std::size_t>(i)];
    auto& r = reps[static_cast<std::size_t>(i)];
    b.resize(static_cast<std::size_t>(m) + 1);
    for (int k = 0; k <= m; ++k) b[static_cast<std::size_t>(k)] = di.quantile(static_cast<double>(k) / m);
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    r.resize(static_cast<std::size_t>(m));
    for (int k = 1; k <= m; ++k) {
      // Inverse-CDF draw from D_i conditioned on I_k.
      double u = (static_cast<double>(k - 1) + rng.uniform()) / m;
      double v = di.quantile(u);
      r[static_cast<std::size_t>(k - 1)] = std::clamp(v, b[static_cast<std::size_t>(k - 1)], b[static_cast<std::size_t>(k)]);
    }
  }
  return GridSpec(m, seed, std::move(bounds), std::move(reps));
}

// The shifted piecewise-constant oracle over grid indices: a cell with some
// coordinate in its lowest interval is worth 0 (no query); otherwise the base
// oracle is queried once at the representatives of the intervals one step
// below.
inline GridOracle discretize(QueryOracle base, std::shared_ptr<const GridSpec> grid) {
  if (static_cast<int>(base.dimension()) != grid->d())
    throw DimensionError("grid and oracle dimensions differ");
  const auto d = base.dimension();
  return GridOracle(d, [base = std::move(base), grid](std::span<const int> idx) {
    Point z(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      int k = idx[i];
      if (k < 1 || k > grid->m()) throw OracleError("grid index out of range");
      if (k == 1) return 0.0;
      z[i] = grid->representative(static_cast<int>(i), k - 1);
    }
    return base(z);
  });
}

inline GridOracle discretize(QueryOracle base, const GridSpec& grid) {
  return discretize(std::move(base), std::make_shared<const GridSpec>(grid));
}

// Oracle over R^d reading a table through the grid's cell lookup.
inline QueryOracle make_table_oracle(std::shared_ptr<const GridSpec> grid, GridTable table) {
  if (table.shape() != grid->shape()) {
    throw TableError("table has " + std::to_string(table.size()) + " cells, grid needs " +
                     std::to_string(grid->shape().cells()));
  }
  table.validate_range();
  auto shared = std::make_shared<const GridTable>(std::move(table));
  const auto d = static_cast<std::size_t>(grid->d());
  return QueryOracle(d, [grid, shared](std::span<const double> x) {
    return (*shared)[grid->grid_index(x)];
  });
}

inline QueryOracle make_table_oracle(const GridSpec& grid, GridTable table) {
  return make_table_oracle(std::make_shared<const GridSpec>(grid), std::move(table));
}

// Probability that at least one of d coordinates lands in its lowest of m
// equiprobable intervals.
inline double lowest_band_probability(int d, int m) {
  return 1.0 - std::pow(1.0 - 1.0 / m, d);
}

// {"coords": [{"kind": "uniform", "a": 0, "b": 1}, {"kind": "cdf",
// "points": [[x, p], ...]}, {"kind": "empirical", "samples": [...]}]}
// A bare array of coordinate objects is accepted too.
inline CoordinateDistribution coordinate_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "uniform") return CoordinateDistribution::uniform(j.at("a").get<double>(), j.at("b").get<double>());
  if (kind == "cdf") {
    std::vector<std::pair<double, double>> pts;
    for (const auto& pt : j.at("points")) {
      if (!pt.is_array() || pt.size() != 2) throw DistributionError("cdf point must be [x, p]");
      pts.emplace_back(pt[0].get<double>(), pt[1].get<double>());
    }
    return CoordinateDistribution::cdf(std::move(pts));
  }
  if (kind == "empirical") return CoordinateDistribution::empirical(j.at("samples").get<std::vector<double>>());
  throw DistributionError("unknown distribution kind '" + kind + "'");
}

inline ProductDistribution distribution_from_json(const nlohmann::json& j) {
  const auto& arr = j.is_array() ? j : j.at("coords");
  std::vector<CoordinateDistribution> coords;
  for (const auto& c : arr) coords.push_back(coordinate_from_json(c));
  return ProductDistribution(std::move(coords));
}

inline ProductDistribution load_distribution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DistributionError("cannot open " + path);
  try {
    return distribution_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DistributionError("bad distribution file " + path + ": " + e.what());
  }
}

}  // namespace monofix
