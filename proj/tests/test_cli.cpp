// Copyright 2026 The slowbeam Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "slowbeam/runner.hpp"
#include "slowbeam/scenario.hpp"

namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("slowbeam_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(SLOWBEAM_CLI_PATH) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::vector<std::string> read_lines(const std::string& p) {
    std::ifstream is(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(is, line);) out.push_back(line);
    return out;
  }

  static std::string read_all(const std::string& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

const std::string kQuick = " --small --trials 1 --steps 3 --seed 5";

TEST_F(CliTest, RunWritesStepsAndSummary) {
  ASSERT_EQ(run("run" + kQuick + " --methods geb,dft --out " + path("steps.csv") + " --summary " + path("sum.csv")),
            0);
  const auto steps = read_lines(path("steps.csv"));
  ASSERT_GE(steps.size(), 3u);
  EXPECT_EQ(steps[0], "# schema_version: 1");
  EXPECT_EQ(steps[1], slowbeam::kStepCsvHeader);
  const auto sum = read_lines(path("sum.csv"));
  ASSERT_GE(sum.size(), 3u);
  EXPECT_EQ(sum[1], slowbeam::kSummaryCsvHeader);
}

TEST_F(CliTest, RunIsReproducible) {
  const std::string args = "run" + kQuick + " --methods wiener --out ";
  ASSERT_EQ(run(args + path("a.csv")), 0);
  ASSERT_EQ(run(args + path("b.csv")), 0);
  EXPECT_EQ(read_all(path("a.csv")), read_all(path("b.csv")));
}

TEST_F(CliTest, OverridesApply) {
  ASSERT_EQ(run("run" + kQuick + " --methods geb --set groups.1.num_users=1 --out " + path("o.csv")), 0);
  const auto lines = read_lines(path("o.csv"));
  EXPECT_EQ(lines.size(), 2u + 3u);
}

TEST_F(CliTest, SweepEmitsEveryPoint) {
  ASSERT_EQ(run("sweep" + kQuick + " --methods geb --axis sigma_est=0.5,2 --out " + path("s.csv")), 0);
  const auto lines = read_lines(path("s.csv"));
  bool seen0 = false, seen1 = false;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    seen0 |= lines[i].rfind("0,", 0) == 0;
    seen1 |= lines[i].rfind("1,", 0) == 0;
  }
  EXPECT_TRUE(seen0);
  EXPECT_TRUE(seen1);
}

TEST_F(CliTest, PatternAndSpread) {
  ASSERT_EQ(run("pattern --small --out " + path("p.csv")), 0);
  const auto p = read_lines(path("p.csv"));
  ASSERT_GE(p.size(), 3u);
  EXPECT_EQ(p[1], "beamformer,column,phi_deg,power,power_db");
  ASSERT_EQ(run("spread --sigma-est 0,1 --out " + path("w.csv")), 0);
  const auto w = read_lines(path("w.csv"));
  ASSERT_GE(w.size(), 3u);
  EXPECT_EQ(w[1], "sigma_est_deg,sigma_e_rad,phi_deg,power,power_db,half_power_width_deg");
}

TEST_F(CliTest, ScenarioRoundTrip) {
  ASSERT_EQ(run("scenario --small --out " + path("sc.json")), 0);
  const auto c = slowbeam::load_scenario(path("sc.json"));
  EXPECT_EQ(c.num_antennas, 32);
  ASSERT_EQ(run("run --scenario " + path("sc.json") + " --trials 1 --steps 2 --methods dft --out " + path("r.csv")),
            0);
  EXPECT_EQ(read_lines(path("sc.json")).empty(), false);
  const std::string shipped = std::string(SLOWBEAM_SOURCE_DIR) + "/scenarios/table1_small.json";
  EXPECT_EQ(slowbeam::load_scenario(shipped).num_antennas, 32);
}

TEST_F(CliTest, ConfigurationErrorsExitOne) {
  EXPECT_EQ(run("run" + kQuick + " --alpha 1.5 --out " + path("x.csv")), 1);
  EXPECT_NE(read_all(path("stderr.txt")).find("error"), std::string::npos);
  EXPECT_EQ(run("run" + kQuick + " --methods nonsense --out " + path("x.csv")), 1);
  EXPECT_EQ(run("run --scenario " + path("missing.json") + " --out " + path("x.csv")), 1);
  EXPECT_EQ(run("sweep" + kQuick + " --axis gamma=1 --out " + path("x.csv")), 1);
  EXPECT_EQ(run("run" + kQuick), 1);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("run" + kQuick + " --out /nonexistent_dir/x.csv"), 1);
}

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(run("--help"), 0); }

}  // namespace
