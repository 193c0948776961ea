#include <gtest/gtest.h>

#include "monofix/adversary.hpp"
#include "support/oracles.hpp"

using namespace monofix;

namespace {

Subset bits(std::initializer_list<int> elems) {
  Subset s = 0;
  for (int e : elems) s |= Subset{1} << e;
  return s;
}

}  // namespace

TEST(Instance, SIsInsideTAndDeterministic) {
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    auto a = sample_instance(17, seed);
    EXPECT_TRUE(is_subset(a.S, a.T));
    EXPECT_TRUE(is_subset(a.T, full_set(17)));
    auto b = sample_instance(17, seed);
    EXPECT_EQ(a.S, b.S);
    EXPECT_EQ(a.T, b.T);
    EXPECT_EQ(a.z, b.z);
  }
  EXPECT_THROW(sample_instance(0, 1), std::invalid_argument);
  EXPECT_THROW(sample_instance(65, 1), std::invalid_argument);
}

TEST(Instance, MembershipFrequencies) {
  const int d = 20, n = 100000;
  std::vector<int> in_s(d, 0), in_t(d, 0);
  int z = 0;
  for (int seed = 0; seed < n; ++seed) {
    auto a = sample_instance(d, static_cast<std::uint64_t>(seed));
    z += a.z;
    for (int i = 0; i < d; ++i) {
      in_s[static_cast<std::size_t>(i)] += (a.S >> i) & 1;
      in_t[static_cast<std::size_t>(i)] += (a.T >> i) & 1;
    }
  }
  for (int i = 0; i < d; ++i) {
    EXPECT_NEAR(in_s[static_cast<std::size_t>(i)] / double(n), 0.5, 0.01);
    EXPECT_NEAR(in_t[static_cast<std::size_t>(i)] / double(n), 0.75, 0.01);
  }
  EXPECT_NEAR(z / double(n), 0.5, 0.01);
}

TEST(Family, DefinitionCases) {
  // d = 10: S = {0,1,2,3}, T = {0,...,5}.
  AdversarialInstance a{10, 0, bits({0, 1, 2, 3}), bits({0, 1, 2, 3, 4, 5}), 0};
  EXPECT_EQ(eval_family(a, bits({0, 1, 2})), 0);
  EXPECT_EQ(eval_family(a, bits({0, 1, 2, 3, 9})), 1);
  EXPECT_EQ(eval_family(a, bits({0, 1, 2, 3, 4})), 0);
  EXPECT_EQ(eval_family(with_z(a, 1), bits({0, 1, 2, 3, 4})), 1);
  // |X \ S| = 2 > d/10 inside T.
  EXPECT_EQ(eval_family(with_z(a, 1), bits({0, 1, 2, 4, 5})), 0);
}

TEST(F1, ThresholdAndExpectation) {
  EXPECT_EQ(eval_f1(10, bits({0, 1, 2, 3})), 1);
  EXPECT_EQ(eval_f1(10, bits({0, 1, 2})), 0);
  EXPECT_NEAR(f1_expectation_exact(8), 163.0 / 256.0, 1e-12);
  EXPECT_NEAR(f1_expectation_exact(16), testref::f1_tail_numerator(16) / 65536.0, 1e-12);
  EXPECT_NEAR(f1_expectation_exact(16), 0.7728, 1e-4);
}

TEST(F1, Monotone) {
  const int d = 10;
  for (Subset x = 0; x <= full_set(d); ++x)
    for (int i = 0; i < d; ++i) EXPECT_LE(eval_f1(d, x), eval_f1(d, x | (Subset{1} << i)));
}

TEST(Family, ZeroVariantClosureAtTIsZero) {
  for (int d = 2; d <= 12; ++d)
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto a = with_z(sample_instance(d, seed), 0);
      int best = 0;
      for (Subset y = a.T;; y = (y - 1) & a.T) {
        best = std::max(best, eval_family(a, y));
        if (y == 0) break;
      }
      EXPECT_EQ(best, 0);
      EXPECT_EQ(closure_at([&](Subset y) { return eval_family(a, y); }, a.T), 0);
    }
}

TEST(Family, OneVariantIsNotMonotone) {
  int found = 0;
  for (std::uint64_t seed = 0; seed < 20 && !found; ++seed) {
    auto a = with_z(sample_instance(12, seed), 1);
    for (Subset x = 0; x <= full_set(12) && !found; ++x)
      for (int i = 0; i < 12; ++i)
        if (eval_family(a, x) > eval_family(a, x | (Subset{1} << i))) {
          ++found;
          break;
        }
  }
  EXPECT_EQ(found, 1);
}

TEST(Closure, Submasks) {
  auto f = [](Subset y) { return y == bits({1, 3}) ? 1 : 0; };
  EXPECT_EQ(closure_at(f, bits({1, 2, 3})), 1);
  EXPECT_EQ(closure_at(f, bits({1, 2})), 0);
}

TEST(Strategy, FullGridMatchesF1AtEight) {
  auto rep = run_experiment(full_grid_strategy(), 8, 2000, 5);
  EXPECT_DOUBLE_EQ(rep.E_M.mean, rep.E_f.mean);
  EXPECT_EQ(rep.max_queries, 256u);
  EXPECT_DOUBLE_EQ(rep.mean_queries, 256.0);
  EXPECT_NEAR(rep.E_M.mean, 163.0 / 256.0, 4 * rep.E_M.std_error);
  EXPECT_EQ(rep.feasibility_violations, 0u);
  EXPECT_EQ(rep.monotonicity_violations, 0u);
  // Reading the whole cube always sees where f^1_{S,T} and f^0_{S,T} differ
  // whenever they differ at all.
  EXPECT_GT(rep.distinguish_rate_claim4, 0.0);
}

TEST(Strategy, ConstantZero) {
  auto rep = run_experiment(constant_zero_strategy(), 30, 500, 2);
  EXPECT_EQ(rep.E_M.mean, 0.0);
  EXPECT_EQ(rep.max_queries, 0u);
  EXPECT_EQ(rep.feasibility_violations, 0u);
  EXPECT_EQ(rep.monotonicity_violations, 0u);
  EXPECT_EQ(rep.distinguish_rate, 0.0);
  EXPECT_EQ(rep.distinguish_rate_claim4, 0.0);
}

TEST(Strategy, ChainIsFeasibleAndMonotone) {
  auto rep = run_experiment(chain_strategy(), 10, 300, 3);
  EXPECT_EQ(rep.feasibility_violations, 0u);
  EXPECT_EQ(rep.monotonicity_violations, 0u);
  EXPECT_GT(rep.E_M.mean, 0.0);
}

TEST(Strategy, RandomProbeIsFeasibleAndMonotone) {
  auto rep = run_experiment(random_probe_strategy(32), 16, 2000, 4);
  EXPECT_EQ(rep.feasibility_violations, 0u);
  EXPECT_EQ(rep.monotonicity_violations, 0u);
  EXPECT_EQ(rep.max_queries, 32u);
  EXPECT_LE(rep.E_M.mean, rep.E_f.mean);
}

TEST(Strategy, NamesAndErrors) {
  EXPECT_EQ(make_strategy("chain").name, "chain");
  EXPECT_EQ(make_strategy("random-probe", 3).name, "random-probe");
  EXPECT_THROW(make_strategy("oracle"), std::invalid_argument);
  EXPECT_THROW(random_probe_strategy(0), std::invalid_argument);
  EXPECT_THROW(run_experiment(constant_zero_strategy(), 8, 0, 1), std::invalid_argument);
  CubeOracle big(30, [](Subset) { return 0; });
  EXPECT_THROW(full_grid_strategy().run(big, 0, 1), std::invalid_argument);
}

TEST(Transcripts, IdenticalAnswersGiveIdenticalRuns) {
  // Transcripts differ exactly when some query of the first run is answered
  // differently by the second oracle.
  const int d = 12;
  auto s = random_probe_strategy(16);
  const auto f1 = [d](Subset x) { return eval_f1(d, x); };
  int differ = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    auto inst = with_z(sample_instance(d, seed), 1);
    const auto f1st = [inst](Subset r) { return eval_family(inst, r); };
    CubeOracle rec(d, f1st, true);
    s.run(rec, inst.S, seed + 7);
    bool disagree = false;
    for (const auto& [r, v] : rec.transcript()) disagree |= v != f1(r);
    EXPECT_EQ(transcripts_differ(s, d, f1st, f1, inst.S, seed + 7), disagree);
    differ += disagree;
  }
  EXPECT_GT(differ, 0);
  EXPECT_LT(differ, 400);
}

TEST(Report, JsonFields) {
  auto j = run_experiment(constant_zero_strategy(), 8, 10, 1).to_json();
  for (const char* k : {"d", "trials", "strategy", "E_f", "E_f_se", "E_f_exact", "E_M", "E_M_se", "mean_queries",
                        "max_queries", "feasibility_violations", "monotonicity_violations", "distinguish_rate",
                        "distinguish_rate_claim4"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["strategy"], "constant-zero");
}
