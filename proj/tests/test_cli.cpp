#include "esuot/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace esuot;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("esuot_cli_" + name);
  fs::remove_all(p);
  return p;
}

// Tiny settings so each pipeline call takes well under a second.
std::vector<std::string> tiny_run(std::vector<std::string> head) {
  for (const char* a : {"--family", "gaussian_shift", "--shift-x", "2", "--n", "120", "--stages", "1", "--epochs", "5",
                        "--batch", "32", "--hidden", "8", "--clf-epochs", "3", "--clf-hidden", "8"})
    head.emplace_back(a);
  return head;
}

class SeedEnv : public ::testing::Test {
 protected:
  void SetUp() override { unsetenv("SUOT_SEED"); }
  void TearDown() override { unsetenv("SUOT_SEED"); }
};

}  // namespace

TEST_F(SeedEnv, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run({}).code, cli::kExitConfig);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitConfig);
  EXPECT_EQ(run({"gen-data", "--bogus", "1", "--out", "x"}).code, cli::kExitConfig);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST_F(SeedEnv, RotationFamilyNeedsAngle) {
  const Result r = run({"gen-data", "--out", scratch("noangle").string()});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("--angle"), std::string::npos);
}

TEST_F(SeedEnv, GenDataIsDeterministic) {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  ASSERT_EQ(run({"gen-data", "--angle", "30", "--n", "50", "--seed", "4", "--out", a.string()}).code, 0);
  ASSERT_EQ(run({"gen-data", "--angle", "30", "--n", "50", "--seed", "4", "--out", b.string()}).code, 0);
  EXPECT_EQ(slurp(a / "source.csv"), slurp(b / "source.csv"));
  EXPECT_EQ(slurp(a / "target.csv"), slurp(b / "target.csv"));
  const Dataset d = data::load_csv((a / "target.csv").string());
  EXPECT_EQ(d.size(), 50);
  EXPECT_EQ(d.domain_index, 1);
}

TEST_F(SeedEnv, EnvironmentSeedOverridesFlag) {
  const fs::path a = scratch("env_a"), b = scratch("env_b");
  setenv("SUOT_SEED", "9", 1);
  ASSERT_EQ(run({"gen-data", "--angle", "30", "--n", "40", "--seed", "1", "--out", a.string()}).code, 0);
  unsetenv("SUOT_SEED");
  ASSERT_EQ(run({"gen-data", "--angle", "30", "--n", "40", "--seed", "9", "--out", b.string()}).code, 0);
  EXPECT_EQ(slurp(a / "source.csv"), slurp(b / "source.csv"));
  setenv("SUOT_SEED", "nine", 1);
  EXPECT_EQ(run({"gen-data", "--angle", "30", "--out", a.string()}).code, cli::kExitConfig);
}

TEST_F(SeedEnv, ConfigFileIsOverriddenByFlags) {
  const fs::path dir = scratch("cfg");
  fs::create_directories(dir);
  const fs::path cfg = dir / "gen.cfg";
  std::ofstream(cfg) << "# generator settings\nangle = 30\nn = 70   # samples\nseed=3\n";
  ASSERT_EQ(run({"gen-data", "--config", cfg.string(), "--out", (dir / "a").string()}).code, 0);
  EXPECT_EQ(data::load_csv((dir / "a" / "source.csv").string()).size(), 70);
  ASSERT_EQ(run({"gen-data", "--config", cfg.string(), "--n", "25", "--out", (dir / "b").string()}).code, 0);
  EXPECT_EQ(data::load_csv((dir / "b" / "source.csv").string()).size(), 25);
  std::ofstream(dir / "bad.cfg") << "angle 30\n";
  EXPECT_EQ(run({"gen-data", "--config", (dir / "bad.cfg").string(), "--out", dir.string()}).code, cli::kExitConfig);
  EXPECT_EQ(run({"gen-data", "--config", (dir / "missing.cfg").string(), "--out", dir.string()}).code,
            cli::kExitConfig);
}

TEST_F(SeedEnv, RunGdaWritesReport) {
  const Result r = run(tiny_run({"run-gda", "--seed", "2"}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["command"], "run-gda");
  EXPECT_EQ(j["seed"], 2);
  EXPECT_EQ(j["per_stage"].size(), 2u);
  EXPECT_TRUE(j.contains("bound_report"));
  EXPECT_TRUE(j.contains("wall_time_s"));
  EXPECT_FALSE(j.contains("step_size_advisory"));
}

TEST_F(SeedEnv, RunGdaAdvisory) {
  const Result r = run(tiny_run({"run-gda", "--no-w2", "--eta", "0.4", "--advisory-a", "1", "--advisory-bg", "2",
                                 "--advisory-h0", "1"}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["step_size_advisory"]["limit"], 0.5);
  EXPECT_EQ(j["step_size_advisory"]["ok"], true);
  EXPECT_EQ(j["per_stage"][0]["w2_to_target"], nullptr);
}

TEST_F(SeedEnv, RunGdaErrorsMapToExitCodes) {
  EXPECT_EQ(run(tiny_run({"run-gda", "--epsilon", "0"})).code, cli::kExitConfig);
  EXPECT_EQ(run(tiny_run({"run-gda", "--fstar", "js"})).code, cli::kExitConfig);
  EXPECT_EQ(run(tiny_run({"run-gda", "--trainer", "adversarial", "--fstar", "identity"})).code, cli::kExitConfig);
  EXPECT_EQ(run({"run-gda", "--source-csv", "/nonexistent/s.csv", "--target-csv", "/nonexistent/t.csv"}).code,
            cli::kExitData);
  EXPECT_EQ(run({"run-gda", "--source-csv", "/nonexistent/s.csv"}).code, cli::kExitConfig);
}

TEST_F(SeedEnv, RunGdaFromCsv) {
  const fs::path dir = scratch("csv");
  ASSERT_EQ(run({"gen-data", "--family", "gaussian_shift", "--shift-x", "2", "--n", "100", "--out", dir.string()}).code,
            0);
  std::vector<std::string> args = tiny_run({"run-gda", "--no-w2"});
  args.insert(args.end(), {"--source-csv", (dir / "source.csv").string(), "--target-csv", (dir / "target.csv").string()});
  const Result r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["data"]["source_csv"], (dir / "source.csv").string());

  std::ofstream(dir / "broken.csv") << "f0,f1,label,domain\n1,2,0\n";
  args = tiny_run({"run-gda"});
  args.insert(args.end(), {"--source-csv", (dir / "broken.csv").string(), "--target-csv", (dir / "target.csv").string()});
  EXPECT_EQ(run(args).code, cli::kExitData);
}

TEST_F(SeedEnv, AblationGridAndParallelDeterminism) {
  const Result serial = run(tiny_run({"ablate", "--n-seeds", "2"}));
  ASSERT_EQ(serial.code, 0) << serial.err;
  std::stringstream ss(serial.out);
  const data::Table t = data::read_table(ss);
  EXPECT_EQ(t.header.front(), "trainer");
  EXPECT_EQ(t.rows.size(), 8u * 2u);
  const Result parallel = run(tiny_run({"ablate", "--n-seeds", "2", "--jobs", "3"}));
  EXPECT_EQ(parallel.out, serial.out);
}

TEST_F(SeedEnv, AblationSweep) {
  const Result r = run(tiny_run({"ablate", "--sweep", "eta", "--values", "0.25,1"}));
  ASSERT_EQ(r.code, 0) << r.err;
  std::stringstream ss(r.out);
  const data::Table t = data::read_table(ss);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][2], "eta");
  EXPECT_EQ(t.rows[1][3], "1");
  EXPECT_EQ(run(tiny_run({"ablate", "--sweep", "hidden", "--values", "3"})).code, cli::kExitConfig);
  EXPECT_EQ(run(tiny_run({"ablate", "--sweep", "batch", "--values", "2.5"})).code, cli::kExitConfig);
  EXPECT_EQ(run(tiny_run({"ablate", "--sweep", "eta", "--values", "x"})).code, cli::kExitConfig);
}

TEST_F(SeedEnv, LabelShiftTable) {
  const Result r = run(tiny_run({"label-shift", "--priors", "0,1"}));
  ASSERT_EQ(r.code, 0) << r.err;
  std::stringstream ss(r.out);
  const data::Table t = data::read_table(ss);
  EXPECT_EQ(t.header, (std::vector<std::string>{"prior", "seed", "initial_accuracy", "balanced_accuracy",
                                                "unbalanced_accuracy"}));
  EXPECT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(run(tiny_run({"label-shift", "--priors", "1.5"})).code, cli::kExitConfig);
}

TEST_F(SeedEnv, MotivationOutputs) {
  const fs::path dir = scratch("mot");
  const Result r = run({"motivation", "--n", "200", "--epochs", "10", "--dsm-epochs", "10", "--langevin-steps", "10",
                        "--out", (dir / "m.json").string(), "--snapshots-csv", (dir / "snap.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(dir / "m.json"));
  EXPECT_TRUE(j["winner"] == "dir_trans" || j["winner"] == "est_trans");
  const Dataset snaps = data::load_csv((dir / "snap.csv").string());
  EXPECT_EQ(snaps.size(), 200 * 6);
}

TEST_F(SeedEnv, ToolBinaryExitCodes) {
  const std::string tool = ESUOT_TOOL_PATH;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status(tool + " --help"), 0);
  EXPECT_EQ(status(tool + " gen-data --out " + scratch("bin").string()), 2);
  EXPECT_EQ(status(tool + " gen-data --angle 10 --n 20 --out " + scratch("bin").string()), 0);
}
