#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "monofix/monofix.hpp"

namespace monofix::cli {
namespace {

using nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SourceOptions {
  std::string table;
  std::string testbed;
  std::string command;
  std::string dist;
  int dim = 0;
  int items = 8;
  int resolution = 8;
  std::uint64_t testbed_seed = 1;
  bool clamp = false;
};

struct RunOptions {
  std::uint64_t seed = 0;
  std::string out;
  bool verify = false;
  double eps = 0.1;
  int k = 0;
  int m = 0;
  std::uint64_t samples = 20000;
  std::uint64_t max_cells = 100000;
  std::uint64_t max_rounds = 0;
  bool one_shot = false;
  // verify
  std::string property = "monotone";
  std::string base;
  std::string closure_out;
  // bench
  std::string sweep = "m";
  std::vector<double> values;
  int bench_d = 1;
  double bench_delta = 0.01;
  std::uint64_t evals = 1000;
  bool no_cap = false;
  // adversary
  int adv_d = 8;
  std::uint64_t trials = 1000;
  std::string strategy = "random-probe";
  int probes = 64;
};

struct Source {
  std::optional<GridTable> table;
  QueryOracle oracle;
  ProductDistribution dist;
  json describe;
};

ProductDistribution pick_distribution(const SourceOptions& s, int d, std::optional<ProductDistribution> fallback) {
  ProductDistribution dist = !s.dist.empty() ? load_distribution(s.dist)
                             : fallback     ? *fallback
                                            : ProductDistribution::uniform_cube(d);
  if (dist.dimension() != d)
    throw ConfigError("distribution has dimension " + std::to_string(dist.dimension()) + ", oracle has " +
                      std::to_string(d));
  return dist;
}

Source load_source(const SourceOptions& s, std::uint64_t seed) {
  const int given = !s.table.empty() + !s.testbed.empty() + !s.command.empty();
  if (given != 1) throw ConfigError("give exactly one of --table, --testbed, --command");
  Source src;
  src.describe = {{"dist", s.dist.empty() ? json("default") : json(s.dist)}};
  if (!s.table.empty()) {
    GridTable t = read_table_csv(s.table);
    src.dist = pick_distribution(s, t.d(), std::nullopt);
    // The table is read as a step function on the distribution's
    // equal-probability cells.
    auto grid = std::make_shared<const GridSpec>(build_grid(src.dist, t.m(), derive_seed(seed, {0x7461626cULL})));
    src.oracle = make_table_oracle(grid, t);
    src.describe["table"] = s.table;
    src.describe["table_shape"] = {{"d", t.d()}, {"m", t.m()}};
    src.table = std::move(t);
    return src;
  }
  if (!s.testbed.empty()) {
    const int d = s.dim > 0 ? s.dim : 2;
    src.describe["testbed"] = s.testbed;
    src.describe["dim"] = d;
    src.describe["testbed_seed"] = s.testbed_seed;
    if (s.testbed == "knapsack") {
      auto inst = KnapsackInstance::random(s.items, d, s.testbed_seed);
      src.dist = pick_distribution(s, d, inst.capacity_distribution());
      src.oracle = make_knapsack_oracle(inst);
      src.describe["items"] = s.items;
    } else if (s.testbed == "random") {
      src.dist = pick_distribution(s, d, std::nullopt);
      src.oracle = make_random_function_oracle(d, s.resolution, s.testbed_seed);
      src.describe["resolution"] = s.resolution;
    } else {
      throw ConfigError("unknown testbed '" + s.testbed + "' (knapsack | random)");
    }
    return src;
  }
  if (s.dim < 1) throw ConfigError("--command needs --dim");
  src.dist = pick_distribution(s, s.dim, std::nullopt);
  src.oracle = make_subprocess_oracle(s.command, s.dim, {s.clamp});
  src.describe["command"] = s.command;
  src.describe["dim"] = s.dim;
  src.describe["clamp"] = s.clamp;
  return src;
}

void check_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("--eps must lie in (0,1)");
}

double cells_of(GridShape shape) { return std::pow(static_cast<double>(shape.m), shape.d); }

json index_list(const std::vector<GridIndex>& v, std::size_t limit = 20) {
  auto arr = json::array();
  for (std::size_t i = 0; i < v.size() && i < limit; ++i) arr.push_back(v[i]);
  return arr;
}

json monotone_violations_json(const std::vector<MonotoneViolation>& v, std::size_t limit = 20) {
  auto arr = json::array();
  for (std::size_t i = 0; i < v.size() && i < limit; ++i)
    arr.push_back({{"kind", "monotone"},
                   {"lower", v[i].lower},
                   {"upper", v[i].upper},
                   {"lower_value", v[i].lower_value},
                   {"upper_value", v[i].upper_value}});
  return arr;
}

json marginal_violations_json(const std::vector<MarginalViolation>& v, std::size_t limit = 20) {
  auto arr = json::array();
  for (std::size_t i = 0; i < v.size() && i < limit; ++i) {
    std::vector<int> sub;
    for (int c : v[i].subset) sub.push_back(c + 1);
    arr.push_back({{"kind", "marginal"},
                   {"subset", sub},
                   {"lower", v[i].pair.lower},
                   {"upper", v[i].pair.upper},
                   {"lower_value", v[i].pair.lower_value},
                   {"upper_value", v[i].pair.upper_value}});
  }
  return arr;
}

json unchecked() { return {{"monotone", nullptr}, {"feasible", nullptr}, {"violations", json::array()}}; }

struct PerEval {
  MeanAccumulator acc;
  std::uint64_t max = 0;
  void add(std::uint64_t q) {
    acc.add(static_cast<double>(q));
    max = std::max(max, q);
  }
};

json expectation_json(const Estimate& before, const Estimate& after, const std::string& method) {
  return {{"before", before.mean},
          {"before_se", before.std_error},
          {"after", after.mean},
          {"after_se", after.std_error},
          {"loss", before.mean - after.mean},
          {"method", method}};
}

json base_config(const std::string& command, const RunOptions& o, const Source* src) {
  json c = {{"command", command}, {"version", version}, {"seed", o.seed}, {"verify", o.verify}};
  if (src) c["source"] = src->describe;
  return c;
}

// E[f] under the distribution: exact for a table (its cells are
// equiprobable), Monte Carlo otherwise.
Estimate expectation_before(const Source& src, const RunOptions& o) {
  if (src.table) return expectation_exact(*src.table);
  return expectation_monte_carlo(src.oracle, src.dist, o.samples, derive_seed(o.seed, {0x626566ULL}));
}

// A grid function and the points it lives on, for marginal and kmarginal.
struct GridProblem {
  GridOracle oracle;
  GridShape shape;
  std::shared_ptr<const GridSpec> grid;  // null for a table source
};

GridProblem grid_problem(const Source& src, const RunOptions& o) {
  if (src.table) return {make_grid_oracle(*src.table), src.table->shape(), nullptr};
  const int d = src.dist.dimension();
  const int m = o.m > 0 ? o.m : static_cast<int>(std::ceil(d / o.eps - 1e-9));
  auto grid = std::make_shared<const GridSpec>(build_grid(src.dist, m, derive_seed(o.seed, {0x67726964ULL})));
  return {discretize(src.oracle, grid), grid->shape(), grid};
}

int cmd_monotonize(const SourceOptions& so, const RunOptions& o, json& report) {
  check_eps(o.eps);
  auto src = load_source(so, o.seed);
  Monotonizer mono(src.oracle, src.dist, o.eps, o.seed);
  const auto& cfg = mono.config();
  const GridShape shape{cfg.d, cfg.m};
  const bool enumerate = o.verify || cells_of(shape) <= static_cast<double>(o.max_cells);
  if (o.verify) VerifyBudget{}.check(shape);

  PerEval per;
  Estimate before = expectation_before(src, o), after;
  std::string method;
  std::optional<GridTable> table;
  const auto q0 = src.oracle.queries();
  if (enumerate) {
    table = GridTable::tabulate(shape, [&](std::span<const int> idx) {
      const auto before_q = src.oracle.queries();
      const double v = mono.at(idx);
      per.add(src.oracle.queries() - before_q);
      return v;
    });
    after = expectation_exact(*table);
    method = src.table ? "exact" : "exact_after_mc_before";
  } else {
    Rng rng(derive_seed(o.seed, {0x616674ULL}));
    MeanAccumulator acc;
    for (std::uint64_t s = 0; s < o.samples; ++s) {
      Point x = src.dist.sample(rng);
      const auto before_q = src.oracle.queries();
      acc.add(mono(x));
      per.add(src.oracle.queries() - before_q);
    }
    after = acc.estimate();
    method = "monte_carlo";
  }
  const auto total = src.oracle.queries() - q0;

  json checks = unchecked();
  int status = exit_ok;
  std::uint64_t verification_queries = 0;
  if (o.verify) {
    const auto v0 = src.oracle.queries();
    auto g = GridTable::tabulate(shape, [&](std::span<const int> idx) { return mono.discretized()(idx); });
    verification_queries = src.oracle.queries() - v0;
    auto mono_v = check_monotone(*table);
    auto exceed = closure_exceedances(*table, g, 1e-12);
    const bool cap_ok = static_cast<double>(per.max) <= cfg.query_cap();
    auto viol = monotone_violations_json(mono_v);
    for (const auto& e : index_list(exceed)) viol.push_back({{"kind", "closure"}, {"at", e}});
    checks = {{"monotone", mono_v.empty()},
              {"feasible", exceed.empty()},
              {"query_cap", cap_ok},
              {"violation_count", mono_v.size() + exceed.size()},
              {"violations", viol}};
    if (!mono_v.empty() || !exceed.empty() || !cap_ok) status = exit_verification;
  }

  report["config"] = base_config("monotonize", o, &src);
  report["config"]["eps"] = o.eps;
  report["config"]["m"] = cfg.m;
  report["config"]["d"] = cfg.d;
  report["config"]["cap"] = cfg.cap.cap;
  report["queries"] = {{"total", total},
                       {"per_eval_mean", per.acc.mean()},
                       {"per_eval_max", per.max},
                       {"evaluations", per.acc.count()},
                       {"query_cap", cfg.query_cap()},
                       {"verification", verification_queries}};
  report["expectation"] = expectation_json(before, after, method);
  report["checks"] = checks;
  return status;
}

// Shared tail of marginal and kmarginal: evaluate the corrected grid
// oracle everywhere, then check k-marginals and feasibility.
int finish_grid_fix(const Source& src, const GridProblem& gp, const GridOracle& corrected, int k,
                    std::uint64_t construction, std::uint64_t budget, const RunOptions& o, json& report) {
  const bool enumerate = o.verify || cells_of(gp.shape) <= static_cast<double>(o.max_cells);
  if (o.verify) VerifyBudget{}.check(gp.shape);
  if (!enumerate) throw ConfigError("grid too large to evaluate; raise --max-cells or lower the resolution");
  PerEval per;
  const auto q0 = gp.oracle.queries();
  auto table = GridTable::tabulate(gp.shape, [&](std::span<const int> idx) {
    const auto before_q = gp.oracle.queries();
    const double v = corrected(idx);
    per.add(gp.oracle.queries() - before_q);
    return v;
  });
  const auto eval_queries = gp.oracle.queries() - q0;
  const Estimate before = expectation_before(src, o);
  const Estimate after = expectation_exact(table);

  json checks = unchecked();
  int status = exit_ok;
  std::uint64_t verification_queries = 0;
  if (o.verify) {
    const auto v0 = gp.oracle.queries();
    GridTable g = src.table ? *src.table : GridTable::tabulate(gp.shape, [&](std::span<const int> idx) {
      return gp.oracle(idx);
    });
    verification_queries = gp.oracle.queries() - v0;
    auto marg = check_k_marginals(table, k);
    auto exceed = closure_exceedances(table, g, 1e-12);
    auto viol = marginal_violations_json(marg);
    for (const auto& e : index_list(exceed)) viol.push_back({{"kind", "closure"}, {"at", e}});
    checks = {{"monotone", marg.empty()},
              {"feasible", exceed.empty()},
              {"violation_count", marg.size() + exceed.size()},
              {"violations", viol}};
    if (!marg.empty() || !exceed.empty()) status = exit_verification;
  }
  report["queries"] = {{"total", construction + eval_queries},
                       {"construction", construction},
                       {"construction_budget", budget},
                       {"per_eval_mean", per.acc.mean()},
                       {"per_eval_max", per.max},
                       {"evaluations", per.acc.count()},
                       {"verification", verification_queries}};
  report["expectation"] = expectation_json(before, after, src.table ? "exact" : "exact_after_mc_before");
  report["checks"] = checks;
  return status;
}

int cmd_marginal(const SourceOptions& so, const RunOptions& o, json& report) {
  check_eps(o.eps);
  auto src = load_source(so, o.seed);
  auto gp = grid_problem(src, o);
  MarginalOptions mo;
  mo.one_shot = o.one_shot;
  auto fix = fix_marginals(gp.oracle, gp.shape, o.eps, o.seed, mo);
  report["config"] = base_config("marginal", o, &src);
  report["config"]["eps"] = o.eps;
  report["config"]["m"] = gp.shape.m;
  report["config"]["d"] = gp.shape.d;
  report["config"]["one_shot"] = o.one_shot;
  report["result"] = {{"map", fix.map.to_json()},
                      {"delta", fix.delta},
                      {"multiplier", fix.multiplier},
                      {"merges", fix.merges},
                      {"rounds", fix.rounds},
                      {"budget_exhausted", fix.budget_exhausted},
                      {"samples_per_cell", fix.samples_per_cell}};
  return finish_grid_fix(src, gp, fix.corrected, 1, fix.queries, fix.query_budget, o, report);
}

int cmd_kmarginal(const SourceOptions& so, const RunOptions& o, json& report) {
  check_eps(o.eps);
  auto src = load_source(so, o.seed);
  const int d = src.dist.dimension();
  if (o.k < 1 || o.k > d) throw ConfigError("--k must lie in [1, d]");
  auto gp = grid_problem(src, o);
  KMarginalOptions ko;
  ko.max_rounds = o.max_rounds;
  auto fix = build_rule_list(gp.oracle, gp.shape, o.k, o.eps, o.seed, ko);
  report["config"] = base_config("kmarginal", o, &src);
  report["config"]["eps"] = o.eps;
  report["config"]["k"] = o.k;
  report["config"]["m"] = gp.shape.m;
  report["config"]["d"] = gp.shape.d;
  report["config"]["max_rounds"] = fix.round_budget;
  report["result"] = {{"rules", fix.rules.to_json()},
                      {"rule_count", fix.rules.size()},
                      {"delta", fix.delta},
                      {"multiplier", fix.multiplier},
                      {"rounds", fix.rounds},
                      {"budget_exhausted", fix.budget_exhausted},
                      {"samples_per_round", fix.samples_per_round},
                      {"min_cell_count", fix.min_cell_count}};
  return finish_grid_fix(src, gp, fix.corrected, o.k, fix.queries, fix.query_budget, o, report);
}

int cmd_verify(const SourceOptions& so, const RunOptions& o, json& report) {
  if (so.table.empty()) throw ConfigError("verify needs --table");
  GridTable t = read_table_csv(so.table);
  int k = 0;
  if (o.property == "marginal") k = 1;
  else if (o.property == "kmarginal") k = o.k;
  else if (o.property != "monotone") throw ConfigError("--property must be monotone | marginal | kmarginal");
  if (o.property == "kmarginal" && (k < 1 || k > t.d())) throw ConfigError("--k must lie in [1, d]");

  auto mono_v = check_monotone(t);
  json viol = monotone_violations_json(mono_v);
  std::size_t count = mono_v.size();
  bool ok = k == 0 ? mono_v.empty() : true;
  json checks = {{"monotone", mono_v.empty()}};
  if (k > 0) {
    auto marg = check_k_marginals(t, k);
    checks["k_marginal"] = marg.empty();
    ok = marg.empty();
    for (auto& v : marginal_violations_json(marg)) viol.push_back(v);
    count = k > 0 ? marg.size() : count;
  }
  checks["feasible"] = nullptr;
  if (!o.base.empty()) {
    GridTable base = read_table_csv(o.base);
    auto exceed = closure_exceedances(t, base, 1e-12);
    checks["feasible"] = exceed.empty();
    for (const auto& e : index_list(exceed)) viol.push_back({{"kind", "closure"}, {"at", e}});
    count += exceed.size();
    ok = ok && exceed.empty();
  }
  if (!o.closure_out.empty()) {
    std::ofstream f(o.closure_out);
    if (!f) throw ConfigError("cannot write " + o.closure_out);
    write_table_csv(f, monotone_closure(t));
  }
  checks["violation_count"] = count;
  checks["violations"] = viol;
  checks["property"] = o.property;
  const auto e = expectation_exact(t);
  report["config"] = base_config("verify", o, nullptr);
  report["config"]["table"] = so.table;
  report["config"]["property"] = o.property;
  if (k > 0) report["config"]["k"] = k;
  report["config"]["d"] = t.d();
  report["config"]["m"] = t.m();
  report["queries"] = {{"total", 0}, {"per_eval_mean", 0.0}, {"per_eval_max", 0}};
  report["expectation"] = {{"before", e.mean}, {"after", e.mean}, {"loss", 0.0}, {"method", "exact"}};
  report["checks"] = checks;
  return ok ? exit_ok : exit_verification;
}

double quantile_nearest_rank(std::vector<std::uint64_t> v, double p) {
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  return static_cast<double>(v[std::clamp<std::size_t>(rank, 1, v.size()) - 1]);
}

json bench_point(const std::vector<std::uint64_t>& q, std::uint64_t capped) {
  MeanAccumulator acc;
  std::uint64_t mx = 0;
  for (auto v : q) {
    acc.add(static_cast<double>(v));
    mx = std::max(mx, v);
  }
  return {{"mean", acc.mean()},
          {"p50", quantile_nearest_rank(q, 0.5)},
          {"p99", quantile_nearest_rank(q, 0.99)},
          {"max", mx},
          {"capped_fraction", static_cast<double>(capped) / static_cast<double>(q.size())}};
}

// Query counts of the chain per evaluation, swept over m (fixed grid with
// hashed values), d or eps (random-function testbed through the full
// pipeline).
int cmd_bench(const SourceOptions& so, const RunOptions& o, json& report) {
  if (o.values.empty()) throw ConfigError("bench needs --values");
  if (o.evals < 1) throw ConfigError("--evals must be >= 1");
  auto points = json::array();
  std::uint64_t total = 0, worst = 0;
  MeanAccumulator all;
  for (std::size_t vi = 0; vi < o.values.size(); ++vi) {
    const double value = o.values[vi];
    const auto pseed = derive_seed(o.seed, {vi});
    std::vector<std::uint64_t> q;
    std::uint64_t capped = 0;
    json p;
    if (o.sweep == "m") {
      const int m = static_cast<int>(value);
      const int d = o.bench_d;
      if (m < 1 || d < 1) throw ConfigError("bench m sweep needs m, d >= 1");
      if (!(o.bench_delta > 0.0 && o.bench_delta < 1.0)) throw ConfigError("--delta must lie in (0,1)");
      const auto cap = o.no_cap ? CapPolicy::disabled() : CapPolicy::for_budget(m, o.bench_delta / d);
      const auto cfg = ChainConfig::on_grid(d, m, pseed, cap);
      const auto vseed = derive_seed(pseed, {0x76616cULL});
      GridOracle base(static_cast<std::size_t>(d), [vseed](std::span<const int> idx) {
        std::uint64_t h = vseed;
        for (int v : idx) h = mix64(h ^ static_cast<std::uint64_t>(v));
        return to_unit(mix64(h));
      });
      Rng rng(derive_seed(pseed, {0x707473ULL}));
      GridIndex idx(static_cast<std::size_t>(d));
      for (std::uint64_t e = 0; e < o.evals; ++e) {
        for (auto& v : idx) v = rng.between(1, m);
        NdStats st;
        const auto b = base.queries();
        eval_monotone_nd(base, cfg, idx, &st);
        q.push_back(base.queries() - b);
        if (st.capped_levels) ++capped;
      }
      p = {{"m", m}, {"d", d}, {"cap", cap.cap}, {"query_cap", cfg.query_cap()}};
    } else if (o.sweep == "d" || o.sweep == "eps") {
      const int d = o.sweep == "d" ? static_cast<int>(value) : o.bench_d;
      const double eps = o.sweep == "eps" ? value : o.eps;
      check_eps(eps);
      if (d < 1) throw ConfigError("bench d sweep needs d >= 1");
      auto oracle = make_random_function_oracle(d, so.resolution, so.testbed_seed);
      const auto dist = ProductDistribution::uniform_cube(d);
      Monotonizer mono(oracle, dist, eps, pseed);
      Rng rng(derive_seed(pseed, {0x707473ULL}));
      for (std::uint64_t e = 0; e < o.evals; ++e) {
        Point x = dist.sample(rng);
        NdStats st;
        const auto b = oracle.queries();
        mono(x, &st);
        q.push_back(oracle.queries() - b);
        if (st.capped_levels) ++capped;
      }
      p = {{"m", mono.config().m}, {"d", d}, {"eps", eps}, {"cap", mono.config().cap.cap},
           {"query_cap", mono.config().query_cap()}};
    } else {
      throw ConfigError("--sweep must be m | d | eps");
    }
    p["value"] = value;
    p.update(bench_point(q, capped));
    for (auto v : q) {
      total += v;
      worst = std::max(worst, v);
      all.add(static_cast<double>(v));
    }
    points.push_back(p);
  }
  report["config"] = base_config("bench", o, nullptr);
  report["config"]["sweep"] = o.sweep;
  report["config"]["values"] = o.values;
  report["config"]["evals"] = o.evals;
  report["config"]["d"] = o.bench_d;
  report["config"]["eps"] = o.eps;
  report["config"]["delta"] = o.bench_delta;
  report["config"]["cap"] = !o.no_cap;
  report["queries"] = {{"total", total}, {"per_eval_mean", all.mean()}, {"per_eval_max", worst}};
  report["points"] = points;
  report["expectation"] = nullptr;
  report["checks"] = unchecked();
  return exit_ok;
}

int cmd_adversary(const RunOptions& o, json& report) {
  if (o.adv_d < 1 || o.adv_d > 64) throw ConfigError("--d must lie in [1, 64]");
  if (o.trials < 1) throw ConfigError("--trials must be >= 1");
  if (o.strategy == "full-grid" && o.adv_d > 24) throw ConfigError("full-grid strategy needs d <= 24");
  if (o.probes < 1) throw ConfigError("--probes must be >= 1");
  Strategy s;
  try {
    s = make_strategy(o.strategy, o.probes);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  auto rep = run_experiment(s, o.adv_d, o.trials, o.seed);
  report = rep.to_json();
  report["config"] = base_config("adversary", o, nullptr);
  report["config"]["d"] = o.adv_d;
  report["config"]["trials"] = o.trials;
  report["config"]["strategy"] = o.strategy;
  report["config"]["probes"] = o.probes;
  report["queries"] = {{"total", static_cast<double>(rep.trials) * rep.mean_queries},
                       {"per_eval_mean", rep.mean_queries},
                       {"per_eval_max", rep.max_queries}};
  report["expectation"] = {{"before", rep.E_f.mean}, {"after", rep.E_M.mean}, {"loss", rep.E_f.mean - rep.E_M.mean},
                           {"method", "monte_carlo"}};
  const bool feasible = rep.feasibility_violations == 0, monotone = rep.monotonicity_violations == 0;
  report["checks"] = {{"monotone", monotone}, {"feasible", feasible}, {"violations", json::array()}};
  return o.verify && !(feasible && monotone) ? exit_verification : exit_ok;
}

void add_source_options(CLI::App* app, SourceOptions& s) {
  app->add_option("--table", s.table, "CSV table with header i1,...,id,value");
  app->add_option("--testbed", s.testbed, "knapsack | random");
  app->add_option("--command", s.command, "external oracle: one point per line in, one value per line out");
  app->add_option("--dist", s.dist, "product distribution JSON");
  app->add_option("--dim", s.dim, "dimension for --testbed / --command");
  app->add_option("--items", s.items, "knapsack item count");
  app->add_option("--resolution", s.resolution, "random testbed lattice resolution");
  app->add_option("--testbed-seed", s.testbed_seed, "seed of the testbed instance");
  app->add_flag("--clamp", s.clamp, "clamp out-of-range oracle answers instead of failing");
}

void add_run_options(CLI::App* app, RunOptions& o, bool seed_required = true) {
  auto* seed = app->add_option("--seed", o.seed, "master seed");
  if (seed_required) seed->required();
  app->add_option("--out", o.out, "report path (default stdout)");
  app->add_flag("--verify", o.verify, "run brute-force checks; failures exit with status 1");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monotonization of black-box functions over product distributions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version));
  SourceOptions so;
  RunOptions o;

  auto* mono = app.add_subcommand("monotonize", "full monotonization with the local chain");
  add_source_options(mono, so);
  add_run_options(mono, o);
  mono->add_option("--eps", o.eps, "accuracy (0,1)");
  mono->add_option("--samples", o.samples, "Monte-Carlo samples for expectations");
  mono->add_option("--max-cells", o.max_cells, "enumerate the grid when it has at most this many cells");

  auto* marg = app.add_subcommand("marginal", "marginal monotonization");
  add_source_options(marg, so);
  add_run_options(marg, o);
  marg->add_option("--eps", o.eps, "accuracy (0,1)");
  marg->add_option("--m", o.m, "grid size for continuous sources (default ceil(d/eps))");
  marg->add_option("--samples", o.samples, "Monte-Carlo samples for E[f] of continuous sources");
  marg->add_option("--max-cells", o.max_cells, "largest grid evaluated exhaustively");
  marg->add_flag("--one-shot", o.one_shot, "estimate marginals once instead of every round");

  auto* kmarg = app.add_subcommand("kmarginal", "k-marginal monotonization");
  add_source_options(kmarg, so);
  add_run_options(kmarg, o);
  kmarg->add_option("--eps", o.eps, "accuracy (0,1)");
  kmarg->add_option("--k", o.k, "largest subset size")->required();
  kmarg->add_option("--m", o.m, "grid size for continuous sources (default ceil(d/eps))");
  kmarg->add_option("--samples", o.samples, "Monte-Carlo samples for E[f] of continuous sources");
  kmarg->add_option("--max-cells", o.max_cells, "largest grid evaluated exhaustively");
  kmarg->add_option("--max-rounds", o.max_rounds, "round budget override (default floor(m^k/delta))");

  auto* ver = app.add_subcommand("verify", "check a CSV table");
  ver->add_option("--table", so.table, "CSV table")->required();
  add_run_options(ver, o, false);
  ver->add_option("--property", o.property, "monotone | marginal | kmarginal");
  ver->add_option("--k", o.k, "subset size for --property kmarginal");
  ver->add_option("--base", o.base, "table whose monotone closure must bound --table");
  ver->add_option("--closure-out", o.closure_out, "write the monotone closure as CSV");

  auto* bench = app.add_subcommand("bench", "query-count sweeps");
  add_run_options(bench, o);
  bench->add_option("--sweep", o.sweep, "m | d | eps");
  bench->add_option("--values", o.values, "sweep values")->expected(1, -1);
  bench->add_option("--d", o.bench_d, "dimension for m and eps sweeps");
  bench->add_option("--eps", o.eps, "accuracy for the d sweep");
  bench->add_option("--delta", o.bench_delta, "cap failure budget for the m sweep");
  bench->add_option("--evals", o.evals, "evaluations per point");
  bench->add_flag("--no-cap", o.no_cap, "disable the depth cap in the m sweep");
  bench->add_option("--resolution", so.resolution, "random testbed lattice resolution");
  bench->add_option("--testbed-seed", so.testbed_seed, "seed of the random testbed");

  auto* adv = app.add_subcommand("adversary", "hard-instance harness on the hypercube");
  add_run_options(adv, o);
  adv->add_option("--d", o.adv_d, "dimension");
  adv->add_option("--trials", o.trials, "trials");
  adv->add_option("--strategy", o.strategy, "constant-zero | full-grid | chain | random-probe");
  adv->add_option("--probes", o.probes, "probe count for random-probe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config;
  }

  json report;
  int status = exit_ok;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (mono->parsed()) status = cmd_monotonize(so, o, report);
    else if (marg->parsed()) status = cmd_marginal(so, o, report);
    else if (kmarg->parsed()) status = cmd_kmarginal(so, o, report);
    else if (ver->parsed()) status = cmd_verify(so, o, report);
    else if (bench->parsed()) status = cmd_bench(so, o, report);
    else status = cmd_adversary(o, report);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }
  report["timing_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  const auto text = report.dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
  } else {
    std::ofstream f(o.out);
    if (!f) {
      err << "error: cannot write " << o.out << '\n';
      return exit_config;
    }
    f << text;
  }
  if (status == exit_verification) err << "verification failed\n";
  return status;
}

}  // namespace monofix::cli
