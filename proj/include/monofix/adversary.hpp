#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "monofix/monotone_nd.hpp"
#include "monofix/rng.hpp"
#include "monofix/verify.hpp"

namespace monofix {

// Subsets of [d] are bit masks: element i (0-based) is bit i.
using Subset = std::uint64_t;

inline int subset_size(Subset x) { return std::popcount(x); }
inline bool is_subset(Subset a, Subset b) { return (a & ~b) == 0; }
inline Subset full_set(int d) { return d == 64 ? ~Subset{0} : (Subset{1} << d) - 1; }

struct AdversarialInstance {
  int d = 0;
  int z = 0;
  Subset S = 0;
  Subset T = 0;
  std::uint64_t seed = 0;
};

// Each element: in S and T w.p. 1/2, in T only w.p. 1/4, in neither w.p. 1/4.
inline AdversarialInstance sample_instance(int d, std::uint64_t seed) {
  if (d < 1 || d > 64) throw std::invalid_argument("adversary dimension must lie in [1, 64]");
  Rng rng(seed);
  AdversarialInstance a{d, rng.coin() ? 1 : 0, 0, 0, seed};
  for (int i = 0; i < d; ++i) {
    const auto r = rng.below(4);
    if (r <= 1) a.S |= Subset{1} << i;
    if (r <= 2) a.T |= Subset{1} << i;
  }
  return a;
}

// Thresholds in integers: |X| >= 4d/10 is 10|X| >= 4d.
inline int eval_f1(int d, Subset x) { return 10 * subset_size(x) >= 4 * d ? 1 : 0; }

inline int eval_family(const AdversarialInstance& a, Subset x) {
  if (10 * subset_size(x) < 4 * a.d) return 0;
  if (!is_subset(x, a.T)) return 1;
  if (10 * subset_size(x & ~a.S) <= a.d) return a.z;
  return 0;
}

inline AdversarialInstance with_z(AdversarialInstance a, int z) {
  a.z = z;
  return a;
}

// Pr[Bin(d, 1/2) >= 4d/10].
inline double f1_expectation_exact(int d) {
  double total = 0.0;
  for (int s = 0; s <= d; ++s)
    if (10 * s >= 4 * d) total += std::exp(std::lgamma(d + 1.0) - std::lgamma(s + 1.0) - std::lgamma(d - s + 1.0) - d * std::log(2.0));
  return total;
}

// max over Y subset of X of f(Y), by submask enumeration.
template <class Fn>
int closure_at(Fn&& f, Subset x) {
  int best = f(Subset{0});
  for (Subset y = x; y; y = (y - 1) & x) {
    best = std::max(best, static_cast<int>(f(y)));
    if (best == 1) break;
  }
  return best;
}

// A counted, optionally recorded, oracle on the hypercube.
class CubeOracle {
 public:
  CubeOracle(int d, std::function<int(Subset)> f, bool record = false) : d_(d), f_(std::move(f)), record_(record) {}

  double operator()(Subset x) const {
    ++queries_;
    const int v = f_(x);
    if (record_) transcript_.emplace_back(x, v);
    return v;
  }

  int d() const { return d_; }
  std::uint64_t queries() const { return queries_; }
  const std::vector<std::pair<Subset, int>>& transcript() const { return transcript_; }

 private:
  int d_;
  std::function<int(Subset)> f_;
  bool record_;
  mutable std::uint64_t queries_ = 0;
  mutable std::vector<std::pair<Subset, int>> transcript_;
};

// A meta-algorithm on the hypercube: answers input X using the oracle and a
// seed (the same seed must give one consistent function).
struct Strategy {
  std::string name;
  std::function<double(const CubeOracle&, Subset, std::uint64_t)> run;
};

inline Strategy constant_zero_strategy() {
  return {"constant-zero", [](const CubeOracle&, Subset, std::uint64_t) { return 0.0; }};
}

// Reads the whole cube and returns the closure at X.
inline Strategy full_grid_strategy() {
  return {"full-grid", [](const CubeOracle& f, Subset x, std::uint64_t) {
            if (f.d() > 24) throw std::invalid_argument("full-grid strategy limited to d <= 24");
            double best = 0.0;
            for (Subset y = 0; y <= full_set(f.d()); ++y) {
              const double v = f(y);
              if (is_subset(y, x)) best = std::max(best, v);
            }
            return best;
          }};
}

// The coordinate chain on {1,2}^d (index 2 means "element present").
inline Strategy chain_strategy() {
  return {"chain", [](const CubeOracle& f, Subset x, std::uint64_t seed) {
            const int d = f.d();
            auto cfg = ChainConfig::on_grid(d, 2, seed, CapPolicy::disabled());
            auto base = [&f](std::span<const int> idx) {
              Subset y = 0;
              for (std::size_t i = 0; i < idx.size(); ++i)
                if (idx[i] == 2) y |= Subset{1} << i;
              return f(y);
            };
            GridIndex idx(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = (x >> i & 1) ? 2 : 1;
            return eval_monotone_nd(base, cfg, idx);
          }};
}

// q subsets drawn uniformly from the seed (the same for every input); the
// answer is the best probe contained in X.
inline Strategy random_probe_strategy(int q) {
  if (q < 1) throw std::invalid_argument("random-probe needs q >= 1");
  return {"random-probe", [q](const CubeOracle& f, Subset x, std::uint64_t seed) {
            Rng rng(seed);
            double best = 0.0;
            for (int t = 0; t < q; ++t) {
              const Subset r = rng.next() & full_set(f.d());
              const double v = f(r);
              if (is_subset(r, x)) best = std::max(best, v);
            }
            return best;
          }};
}

inline Strategy make_strategy(const std::string& name, int probes = 64) {
  if (name == "constant-zero") return constant_zero_strategy();
  if (name == "full-grid") return full_grid_strategy();
  if (name == "chain") return chain_strategy();
  if (name == "random-probe") return random_probe_strategy(probes);
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

struct AdversaryReport {
  int d = 0;
  std::uint64_t trials = 0;
  std::string strategy;
  Estimate E_f;
  Estimate E_M;
  double E_f_exact = 0.0;
  double mean_queries = 0.0;
  std::uint64_t max_queries = 0;
  std::uint64_t feasibility_violations = 0;
  std::uint64_t monotonicity_violations = 0;
  // Transcripts differ: f^1_{S,T} vs f^1 at input S.
  double distinguish_rate = 0.0;
  // Transcripts differ: f^1_{S,T} vs f^0_{S,T} at input T.
  double distinguish_rate_claim4 = 0.0;

  nlohmann::json to_json() const {
    return {{"d", d},
            {"trials", trials},
            {"strategy", strategy},
            {"E_f", E_f.mean},
            {"E_f_se", E_f.std_error},
            {"E_f_exact", E_f_exact},
            {"E_M", E_M.mean},
            {"E_M_se", E_M.std_error},
            {"mean_queries", mean_queries},
            {"max_queries", max_queries},
            {"feasibility_violations", feasibility_violations},
            {"monotonicity_violations", monotonicity_violations},
            {"distinguish_rate", distinguish_rate},
            {"distinguish_rate_claim4", distinguish_rate_claim4}};
  }
};

inline bool transcripts_differ(const Strategy& s, int d, const std::function<int(Subset)>& a,
                               const std::function<int(Subset)>& b, Subset input, std::uint64_t seed) {
  CubeOracle oa(d, a, true), ob(d, b, true);
  const double va = s.run(oa, input, seed);
  const double vb = s.run(ob, input, seed);
  return va != vb || oa.transcript() != ob.transcript();
}

// Per trial: fresh instance and uniform input X. The strategy answers X on
// f^1 (counted); its answer is checked against the closure of f^1 at X and
// against its own answer at a random subset of X; then paired runs with a
// shared seed test whether the oracles of Claims 4 and 5 can be told apart.
inline AdversaryReport run_experiment(const Strategy& strategy, int d, std::uint64_t trials, std::uint64_t seed) {
  if (d < 1 || d > 64) throw std::invalid_argument("adversary dimension must lie in [1, 64]");
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  AdversaryReport rep;
  rep.d = d;
  rep.trials = trials;
  rep.strategy = strategy.name;
  rep.E_f_exact = f1_expectation_exact(d);
  MeanAccumulator ef, em, q;
  std::uint64_t claim5 = 0, claim4 = 0;
  const auto f1 = [d](Subset x) { return eval_f1(d, x); };
  for (std::uint64_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, {t, 0x78}));
    const auto inst = sample_instance(d, derive_seed(seed, {t, 0x69}));
    const auto sseed = derive_seed(seed, {t, 0x73});
    const Subset x = rng.next() & full_set(d);

    CubeOracle oracle(d, f1);
    const double out = strategy.run(oracle, x, sseed);
    ef.add(f1(x));
    em.add(out);
    q.add(static_cast<double>(oracle.queries()));
    rep.max_queries = std::max(rep.max_queries, oracle.queries());

    // f^1 is monotone, so its closure at X is f^1(X); enumerate anyway when cheap.
    const int closure = subset_size(x) <= 20 ? closure_at(f1, x) : f1(x);
    if (out > closure) ++rep.feasibility_violations;
    const Subset y = x & rng.next();
    CubeOracle again(d, f1);
    if (strategy.run(again, y, sseed) > out) ++rep.monotonicity_violations;

    const auto f1st = [inst](Subset r) { return eval_family(with_z(inst, 1), r); };
    const auto f0st = [inst](Subset r) { return eval_family(with_z(inst, 0), r); };
    if (transcripts_differ(strategy, d, f1st, f1, inst.S, sseed)) ++claim5;
    if (transcripts_differ(strategy, d, f1st, f0st, inst.T, sseed)) ++claim4;
  }
  rep.E_f = ef.estimate();
  rep.E_M = em.estimate();
  rep.mean_queries = q.mean();
  rep.distinguish_rate = static_cast<double>(claim5) / static_cast<double>(trials);
  rep.distinguish_rate_claim4 = static_cast<double>(claim4) / static_cast<double>(trials);
  return rep;
}

}  // namespace monofix
