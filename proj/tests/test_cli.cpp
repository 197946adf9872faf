#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rbmlab/cli.hpp"

using namespace rbmlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rbmlab_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

int run_text(const std::string& sub, const std::string& text, const fs::path& out, std::size_t workers = 1,
             std::string* err = nullptr) {
  cli::Options o;
  o.subcommand = sub;
  o.config_text = text;
  o.out = out.string();
  o.workers = workers;
  std::ostringstream es;
  const int code = cli::execute(o, es);
  if (err) *err = es.str();
  return code;
}

std::string slurp(const fs::path& p) { return read_file(p.string()); }

const char* kInterval = "domain = { kind = \"box\", lo = [0.0], hi = [1.0] }\n";

}  // namespace

TEST(Cli, EstimateOfConstantIsExactlyOne) {
  const fs::path out = scratch("one");
  const std::string cfg = std::string("seed = 3\n") +
                          "domain = { kind = \"ball\", center = [0.0, 0.0], radius = 1.0 }\n"
                          "[params]\npaths = 200\n"
                          "[estimate]\nestimators = [\"semigroup\"]\nfunctions = [\"one\"]\n"
                          "points = [[0.2, 0.3]]\nt = [0.1]\n";
  ASSERT_EQ(run_text("estimate", cfg, out), 0);
  const std::string csv = slurp(out / "estimates.csv");
  EXPECT_EQ(csv,
            "estimator,domain,t,x1,x2,value,stderr,M,h,seed\n"
            "semigroup:one,ball,0.1,0.2,0.3,1,0,200,0.001,3\n");
}

TEST(Cli, MalformedConfigExitsTwoWithLine) {
  std::string err;
  EXPECT_EQ(run_text("estimate", std::string(kInterval) + "[estimate]\nt = [0.1,\n", scratch("bad"), 1, &err), 2);
  EXPECT_NE(err.find("line"), std::string::npos);
}

TEST(Cli, UnknownKeyExitsTwo) {
  std::string err;
  const std::string cfg = std::string(kInterval) + "[estimate]\nfunctoins = [\"one\"]\n";
  EXPECT_EQ(run_text("estimate", cfg, scratch("unknown"), 1, &err), 2);
  EXPECT_NE(err.find("estimate.functoins"), std::string::npos);
  EXPECT_NE(err.find("line 3"), std::string::npos);
}

TEST(Cli, UnknownTopLevelKeyExitsTwo) {
  EXPECT_EQ(run_text("estimate", std::string(kInterval) + "sed = 4\n", scratch("top")), 2);
}

TEST(Cli, UnknownFunctionExitsTwo) {
  std::string err;
  const std::string cfg = std::string(kInterval) + "[estimate]\nfunctions = [\"sin1_x1\"]\n";
  EXPECT_EQ(run_text("estimate", cfg, scratch("fn"), 1, &err), 2);
  EXPECT_NE(err.find("sin1_x1"), std::string::npos);
}

TEST(Cli, PointOutsideDomainExitsTwo) {
  const std::string cfg = std::string(kInterval) + "[estimate]\npoints = [[1.5]]\n";
  EXPECT_EQ(run_text("estimate", cfg, scratch("pt")), 2);
}

TEST(Cli, MissingDomainExitsTwo) {
  EXPECT_EQ(run_text("simulate", "seed = 1\n", scratch("nodom")), 2);
}

TEST(Cli, ExponentOutsideShortTimeWindowExitsTwo) {
  const std::string cfg = std::string(kInterval) +
                          "[verify.late]\nkind = \"ondiagonal_exponent\"\nt_range = [0.5, 2.0]\n";
  EXPECT_EQ(run_text("verify", cfg, scratch("late")), 2);
}

TEST(Cli, FailingCheckExitsOne) {
  // equilibrium times with the short-time guard off: the fitted exponent is ~0, not -1/2
  const std::string cfg = std::string(kInterval) +
                          "[params]\nstep_h = 1e-2\npaths = 2000\n"
                          "[verify.flat]\nkind = \"ondiagonal_exponent\"\nt_range = [1.0, 2.0]\nshort_time = false\n";
  const fs::path out = scratch("fail");
  EXPECT_EQ(run_text("verify", cfg, out), 1);
  const std::string summary = slurp(out / "summary.txt");
  EXPECT_EQ(summary.rfind("check=flat pass=0", 0), 0U);
}

TEST(Cli, ManifestListsEveryOutputWithHash) {
  const fs::path out = scratch("manifest");
  const std::string cfg = std::string("seed = 9\n") + kInterval +
                          "[simulate]\nhorizon = 0.01\ntrajectories = 3\ndump = true\n";
  ASSERT_EQ(run_text("simulate", cfg, out), 0);
  const std::string m = slurp(out / "manifest.txt");
  for (const char* f : {"endpoints.csv", "trajectories.csv"}) {
    const std::string key = std::string("file.") + f + "=" + hex64(fnv1a(slurp(out / f)));
    EXPECT_NE(m.find(key), std::string::npos) << key;
  }
  for (const char* k : {"tool=rbmlab\n", "subcommand=simulate\n", "seed=9\n", "workers=1\n", "config_hash=",
                        "params.step_h=0.001\n", "simulate.trajectories=3\n", "time.simulate="}) {
    EXPECT_NE(m.find(k), std::string::npos) << k;
  }
  std::ifstream traj(out / "trajectories.csv");
  std::string header;
  std::getline(traj, header);
  EXPECT_EQ(header, "path,step,time,x1,local_time");
}

TEST(Cli, SeedFlagOverridesConfig) {
  const std::string cfg = std::string("seed = 1\n") + kInterval + "[simulate]\nhorizon = 0.01\ntrajectories = 4\n";
  cli::Options o;
  o.subcommand = "simulate";
  o.config_text = cfg;
  o.seed = 2;
  o.out = scratch("seed2").string();
  std::ostringstream es;
  ASSERT_EQ(cli::execute(o, es), 0);
  const std::string a = slurp(fs::path(*o.out) / "endpoints.csv");
  o.seed.reset();
  o.out = scratch("seed1").string();
  ASSERT_EQ(cli::execute(o, es), 0);
  EXPECT_NE(a, slurp(fs::path(*o.out) / "endpoints.csv"));
  EXPECT_NE(slurp(scratch("seed1").parent_path() / "rbmlab_cli_test_seed2" / "manifest.txt").find("seed=2\n"),
            std::string::npos);
}

TEST(Cli, OutputsIndependentOfWorkerCount) {
  const std::string cfg = std::string(kInterval) +
                          "[params]\npaths = 3000\n"
                          "[estimate]\nestimators = [\"semigroup\", \"gradient\", \"kernel\"]\n"
                          "functions = [\"cos1_x1\"]\npoints = [[0.3], [0.9]]\nt = [0.02]\ncells = 10\n";
  const fs::path a = scratch("w1"), b = scratch("w3");
  ASSERT_EQ(run_text("estimate", cfg, a, 1), 0);
  ASSERT_EQ(run_text("estimate", cfg, b, 3), 0);
  EXPECT_EQ(slurp(a / "estimates.csv"), slurp(b / "estimates.csv"));
}

TEST(Cli, GreenOutputColumns) {
  const fs::path out = scratch("green");
  const std::string cfg = std::string(kInterval) +
                          "[params]\npaths = 500\n"
                          "[green.u]\nop = \"apply\"\nfunction = \"cos1_x1\"\npoints = [[0.0]]\n";
  ASSERT_EQ(run_text("green", cfg, out), 0);
  std::ifstream in(out / "green.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "op,domain,x1,value1,stderr,trunc_bound,q,ratio");
  EXPECT_EQ(row.rfind("apply:u,box,0,", 0), 0U);
}

TEST(Cli, GreenRejectsNonMeanZero) {
  const std::string cfg = std::string(kInterval) + "[green.u]\nop = \"apply\"\nfunction = \"x1\"\n";
  EXPECT_EQ(run_text("green", cfg, scratch("green_mz")), 2);
}

TEST(Cli, ArgvParsing) {
  const char* argv1[] = {"rbmlab", "frobnicate", "--config", "x.toml"};
  EXPECT_EQ(cli::run(4, const_cast<char**>(argv1)), 2);
  const char* argv2[] = {"rbmlab", "simulate"};
  EXPECT_EQ(cli::run(2, const_cast<char**>(argv2)), 2);
  const char* argv3[] = {"rbmlab", "simulate", "--config", "/nonexistent/rbmlab.toml"};
  EXPECT_EQ(cli::run(4, const_cast<char**>(argv3)), 2);
  const char* argv4[] = {"rbmlab", "simulate", "--config", "a.toml", "--workers", "0"};
  EXPECT_EQ(cli::run(6, const_cast<char**>(argv4)), 2);
}
