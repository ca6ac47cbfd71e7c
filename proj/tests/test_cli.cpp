#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const fs::path& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string(BICAUSE_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testutil::read_file(out), testutil::read_file(err)};
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, SimulateWritesDeterministicCsv) {
  const auto dir = testutil::scratch_dir("cli_sim");
  const auto a = dir / "a.csv", b = dir / "b.csv";
  ASSERT_EQ(run(dir, "simulate natural-experiment --seed 4 --out " + a.string()).code, 0);
  ASSERT_EQ(run(dir, "simulate natural-experiment --seed 4 --out " + b.string()).code, 0);
  const auto text = testutil::read_file(a);
  EXPECT_EQ(text, testutil::read_file(b));
  EXPECT_EQ(first_line(text), "S,A,T,Y,y0,y1");
  EXPECT_EQ(count_lines(text), 20001u);

  const auto p = dir / "p.csv";
  ASSERT_EQ(run(dir, "simulate natural-experiment --n 500 --noise-features 48 --out " + p.string()).code, 0);
  const auto header = first_line(testutil::read_file(p));
  // 50 features plus T, Y, y0, y1
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 53);
  EXPECT_EQ(header.substr(0, 12), "S,A,noise_0,");
  EXPECT_EQ(header.substr(header.size() - 10), ",T,Y,y0,y1");
}

TEST(Cli, FitEstimateAuditExplain) {
  const auto dir = testutil::scratch_dir("cli_flow");
  const auto data = (dir / "data.csv").string(), tree = (dir / "tree.json").string();
  ASSERT_EQ(run(dir, "simulate positivity --seed 1 --out " + data).code, 0);

  auto r = run(dir, "fit --data " + data + " --out " + tree + " --emit-dot " + (dir / "tree.dot").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("violating_leaves=2"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "tree.dot"));
  const auto j = nlohmann::json::parse(testutil::read_file(tree));
  EXPECT_EQ(j["version"], "bicause_tree_v1");

  const auto report = (dir / "ate.json").string();
  r = run(dir, "estimate --tree " + tree + " --data " + data + " --out " + report);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rj = nlohmann::json::parse(testutil::read_file(report));
  EXPECT_EQ(rj["method"], "bicause-marginal");
  EXPECT_LT(rj["kept_fraction"].get<double>(), 1.0);
  EXPECT_EQ(rj["n_excluded"].get<std::size_t>(), rj["excluded_row_ids"].size());
  EXPECT_NEAR(rj["kept_fraction"].get<double>(), 0.671, 0.03);
  EXPECT_NE(r.out.find("kept_fraction="), std::string::npos);

  r = run(dir, "estimate --estimator ipw --tree " + tree + " --data " + data + " --out " + (dir / "ate.csv").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("fallback_count="), std::string::npos);
  EXPECT_EQ(first_line(testutil::read_file(dir / "ate.csv")), "method,ate,kept_fraction,n_excluded");

  r = run(dir, "audit --tree " + tree);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("S <= 0 AND C <= 0 AND A <= 0"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("S > 0 AND C > 0 AND A > 0"), std::string::npos) << r.out;

  const auto text = r.out;
  r = run(dir, "audit --format json --tree " + tree);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto audit = nlohmann::json::parse(r.out);
  // both encodings carry the same rules
  ASSERT_EQ(audit["violating_leaves"].size(), 2u);
  for (const auto& leaf : audit["violating_leaves"]) EXPECT_NE(text.find(leaf["rule"].get<std::string>()), std::string::npos);

  // data lacking one of the tree's features cannot be scored
  const auto ne = (dir / "ne.csv").string(), ne_tree = (dir / "ne.json").string();
  ASSERT_EQ(run(dir, "simulate natural-experiment --n 3000 --out " + ne).code, 0);
  EXPECT_EQ(run(dir, "estimate --tree " + tree + " --data " + ne + " --out " + (dir / "x.json").string()).code, 2);

  // a root-only tree has nothing to flag
  ASSERT_EQ(run(dir, "fit --asmd-threshold 100 --data " + ne + " --out " + ne_tree).code, 0);
  r = run(dir, "audit --format json --tree " + ne_tree);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(nlohmann::json::parse(r.out)["violating_leaves"].empty());

  r = run(dir, "explain --tree " + tree + " --leaf 0");
  EXPECT_NE(r.code, 0);  // root is internal
  r = run(dir, "explain --tree " + tree);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("[violating]"), std::string::npos);
}

TEST(Cli, BenchmarkOutputsAreReproducible) {
  const auto dir = testutil::scratch_dir("cli_bench");
  const std::string common = "benchmark --kind natural-experiment --n 2000 --reps 2 --methods bicause-marginal,marginal --no-runtime --out ";
  ASSERT_EQ(run(dir, common + (dir / "a").string()).code, 0);
  ASSERT_EQ(run(dir, common + (dir / "b").string() + " --jobs 2").code, 0);
  EXPECT_EQ(testutil::read_file(dir / "a_bias.csv"), testutil::read_file(dir / "b_bias.csv"));
  EXPECT_EQ(testutil::read_file(dir / "a_summary.csv"), testutil::read_file(dir / "b_summary.csv"));
  EXPECT_EQ(count_lines(testutil::read_file(dir / "a_bias.csv")), 1u + 2 * 2);

  ASSERT_EQ(run(dir, "benchmark --kind positivity --n 3000 --reps 2 --methods all --out " + (dir / "all").string()).code, 0);
  EXPECT_EQ(count_lines(testutil::read_file(dir / "all_bias.csv")), 1u + 5 * 2);

  ASSERT_EQ(run(dir, "benchmark --kind natural-experiment --n 1000 --reps 1 --methods marginal --no-runtime --out " +
                         (dir / "one").string()).code, 0);
  EXPECT_EQ(count_lines(testutil::read_file(dir / "one_bias.csv")), 2u);

  ASSERT_EQ(run(dir, "benchmark --kind natural-experiment --n 2000 --reps 2 --mode depth-sweep --depths 1,2,5 --out " +
                         (dir / "sweep").string()).code, 0);
  EXPECT_EQ(count_lines(testutil::read_file(dir / "sweep_depth_bias.csv")), 1u + 3 * 2);
}

TEST(Cli, ConfigFileAndPrecedence) {
  const auto dir = testutil::scratch_dir("cli_config");
  const auto data = (dir / "data.csv").string();
  ASSERT_EQ(run(dir, "simulate natural-experiment --n 4000 --out " + data).code, 0);
  const auto cfg = testutil::write_file(dir / "fit.cfg", "# depth one only\nmax_depth = 1\ndata = " + data + "\n");

  auto r = run(dir, "fit --config " + cfg + " --out " + (dir / "t1.json").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(testutil::read_file(dir / "t1.json"))["config"]["max_depth"], 1);

  r = run(dir, "fit --config " + cfg + " --max-depth 3 --out " + (dir / "t3.json").string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(testutil::read_file(dir / "t3.json"))["config"]["max_depth"], 3);

  const auto bad = testutil::write_file(dir / "bad.cfg", "depth_limit = 2\n");
  r = run(dir, "fit --config " + bad + " --data " + data + " --out " + (dir / "t.json").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("depth_limit"), std::string::npos) << r.err;
}

TEST(Cli, ExitCodes) {
  const auto dir = testutil::scratch_dir("cli_errors");
  EXPECT_EQ(run(dir, "--help").code, 0);
  EXPECT_EQ(run(dir, "").code, 2);
  EXPECT_EQ(run(dir, "fit --out x.json").code, 2);  // --data missing
  auto r = run(dir, "fit --data " + (dir / "absent.csv").string() + " --out x.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("absent.csv"), std::string::npos) << r.err;
  EXPECT_EQ(run(dir, "simulate unknown-kind --out x.csv").code, 2);
  r = run(dir, "benchmark --kind positivity --methods magic");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bicause-marginal, bicause-ipw, ipw-lr, matching, marginal"), std::string::npos) << r.err;

  const auto one_arm = testutil::write_file(dir / "one_arm.csv", "x,T,Y\n1,1,0\n2,1,1\n3,1,0\n");
  r = run(dir, "fit --data " + one_arm + " --out " + (dir / "t.json").string());
  EXPECT_EQ(r.code, 3) << r.err;

  const auto non_binary = testutil::write_file(dir / "nb.csv", "x,T,Y\n1,0,0\n2,2,1\n");
  r = run(dir, "fit --data " + non_binary + " --out " + (dir / "t.json").string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;

  const auto no_treatment = testutil::write_file(dir / "nt.csv", "x,W,Y\n1,0,0\n");
  EXPECT_EQ(run(dir, "fit --data " + no_treatment + " --out " + (dir / "t.json").string()).code, 2);
}
