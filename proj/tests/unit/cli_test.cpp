#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "../tools/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
  json report() const { return json::parse(out); }
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "monofix");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = monofix::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("monofix_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    auto p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  fs::path dir_;
};

const char* kNonMonotone3x3 =
    "i1,i2,value\n1,1,0.9\n1,2,0.1\n1,3,0.4\n2,1,0.2\n2,2,0.8\n2,3,0.3\n3,1,0.5\n3,2,0.6\n3,3,0.0\n";
const char* kMonotone2x2 = "i1,i2,value\n1,1,0.1\n1,2,0.2\n2,1,0.3\n2,2,0.4\n";

}  // namespace

TEST_F(CliTest, MonotonizeTableWithVerify) {
  auto t = write("t.csv", kNonMonotone3x3);
  auto r = run({"monotonize", "--table", t, "--eps", "0.3", "--seed", "4", "--verify"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = r.report();
  EXPECT_EQ(j["checks"]["monotone"], true);
  EXPECT_EQ(j["checks"]["feasible"], true);
  EXPECT_EQ(j["checks"]["query_cap"], true);
  EXPECT_EQ(j["config"]["seed"], 4);
  EXPECT_TRUE(j["config"].contains("version"));
  EXPECT_TRUE(j.contains("timing_ms"));
  EXPECT_GE(j["queries"]["total"].get<double>(), 0.0);
}

TEST_F(CliTest, VerifyMonotoneTable) {
  auto t = write("t.csv", kMonotone2x2);
  auto r = run({"verify", "--table", t});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.report()["checks"]["violation_count"], 0);
}

TEST_F(CliTest, VerifyNonMonotoneTableFails) {
  auto t = write("t.csv", kNonMonotone3x3);
  auto closure = (dir_ / "closure.csv").string();
  auto r = run({"verify", "--table", t, "--closure-out", closure});
  EXPECT_EQ(r.code, 1);
  EXPECT_GT(r.report()["checks"]["violation_count"].get<int>(), 0);
  EXPECT_EQ(run({"verify", "--table", closure}).code, 0);
  EXPECT_EQ(run({"verify", "--table", closure, "--base", t}).code, 0);
  EXPECT_EQ(run({"verify", "--table", t, "--base", write("zero.csv", "i1,i2,value\n1,1,0\n1,2,0\n2,1,0\n2,2,0\n"
                                                                      "1,3,0\n2,3,0\n3,1,0\n3,2,0\n3,3,0\n")})
                .code,
            1);
}

TEST_F(CliTest, VerifyMarginalProperty) {
  auto t = write("t.csv", "i1,value\n1,0.5\n2,0.2\n3,0.7\n");
  EXPECT_EQ(run({"verify", "--table", t, "--property", "marginal"}).code, 1);
  EXPECT_EQ(run({"verify", "--table", t, "--property", "kmarginal", "--k", "2"}).code, 2);
  EXPECT_EQ(run({"verify", "--table", t, "--property", "joint"}).code, 2);
}

TEST_F(CliTest, ConfigurationErrors) {
  auto t = write("t.csv", kMonotone2x2);
  EXPECT_EQ(run({"monotonize", "--table", t, "--eps", "0.3"}).code, 2);
  EXPECT_EQ(run({"monotonize", "--table", t, "--eps", "1.5", "--seed", "1"}).code, 2);
  EXPECT_EQ(run({"monotonize", "--table", (dir_ / "missing.csv").string(), "--seed", "1"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"verify", "--table", write("bad.csv", "a,b\n1,2\n")}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, MarginalAndKMarginalOnTable) {
  auto t = write("t.csv", "i1,value\n1,0.5\n2,0.2\n3,0.7\n");
  auto r = run({"marginal", "--table", t, "--eps", "0.3", "--seed", "1", "--verify"});
  ASSERT_EQ(r.code, 0) << r.err << r.out;
  auto j = r.report();
  EXPECT_EQ(j["result"]["map"][0]["map"], json({1, 1, 3}));
  auto k = run({"kmarginal", "--table", t, "--eps", "0.3", "--k", "1", "--seed", "1", "--verify"});
  ASSERT_EQ(k.code, 0) << k.err << k.out;
  EXPECT_EQ(k.report()["result"]["rules"].size(), 1u);
}

TEST_F(CliTest, AdversaryFullGridReport) {
  auto r = run({"adversary", "--d", "8", "--trials", "400", "--strategy", "full-grid", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = r.report();
  EXPECT_EQ(j["expectation"]["before"], j["expectation"]["after"]);
  EXPECT_EQ(j["queries"]["per_eval_max"], 256);
  EXPECT_EQ(j["checks"]["monotone"], true);
  EXPECT_EQ(j["checks"]["feasible"], true);
}

TEST_F(CliTest, RandomTestbedMonotonize) {
  auto r = run({"monotonize", "--testbed", "random", "--dim", "2", "--eps", "0.25", "--seed", "9", "--verify"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.report()["expectation"]["method"], "exact_after_mc_before");
}

TEST_F(CliTest, ExternalCommandSource) {
  auto r = run({"monotonize", "--command", "while read a b; do echo $a; done", "--dim", "2", "--eps", "0.4", "--seed",
                "2", "--verify"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.report()["checks"]["monotone"], true);
}

TEST_F(CliTest, BenchSweep) {
  auto r = run({"bench", "--sweep", "m", "--values", "16", "64", "--evals", "50", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.report()["points"].size(), 2u);
}

TEST_F(CliTest, ReproducibleApartFromTiming) {
  auto t = write("t.csv", kNonMonotone3x3);
  auto strip = [](json j) {
    j.erase("timing_ms");
    return j;
  };
  for (const char* cmd : {"monotonize", "marginal"}) {
    auto a = run({cmd, "--table", t, "--eps", "0.3", "--seed", "12"});
    auto b = run({cmd, "--table", t, "--eps", "0.3", "--seed", "12"});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(strip(a.report()), strip(b.report())) << cmd;
  }
}

TEST_F(CliTest, OutFile) {
  auto t = write("t.csv", kMonotone2x2);
  auto out = (dir_ / "r.json").string();
  auto r = run({"verify", "--table", t, "--out", out});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  std::ifstream f(out);
  EXPECT_EQ(json::parse(f)["checks"]["monotone"], true);
}
