// Copyright 2021 Google LLC
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

// Drives the mesc binary named by $MESC_CLI against the fixtures in $MESC_DATA.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "mesc/io.hpp"
#include "mesc/rounding.hpp"

using namespace mesc;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

std::string env_or_skip(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

Run run(const std::string& args) {
  const std::string cmd = "\"" + env_or_skip("MESC_CLI") + "\" " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string data(const std::string& file) { return "\"" + env_or_skip("MESC_DATA") + "/" + file + "\""; }

std::filesystem::path scratch(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / ("mesc_cli_test_" + name);
  std::ofstream(p) << text;
  return p;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    if (env_or_skip("MESC_CLI").empty() || env_or_skip("MESC_DATA").empty())
      GTEST_SKIP() << "MESC_CLI and MESC_DATA must be set";
  }
};

}  // namespace

TEST_F(Cli, MaxcorrDepolarized) {
  const auto r = run("maxcorr " + data("state_depolarized_qubit.json"));
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_NEAR(j.at("rho").get<double>(), 0.75, 1e-8);
  EXPECT_EQ(j.at("command"), "maxcorr");
}

TEST_F(Cli, MaxcorrProduct) {
  const auto r = run("maxcorr " + data("state_product.json"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NEAR(json::parse(r.out).at("rho").get<double>(), 0.0, 1e-12);
}

TEST_F(Cli, MalformedInputExitsOne) {
  const auto p = scratch("bad.json", "{\"psi\": [1, 2,");
  EXPECT_EQ(run("maxcorr \"" + p.string() + "\"").code, 1);
  EXPECT_EQ(run("maxcorr /nonexistent/state.json").code, 1);
  EXPECT_EQ(run("no-such-command").code, 1);
  std::filesystem::remove(p);
}

TEST_F(Cli, BoundToyMatchesGoldenAndIsDeterministic) {
  const auto a = run("bound --preset toy");
  const auto b = run("bound --preset toy");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  std::ifstream f(env_or_skip("MESC_DATA") + "/toy_bound.json");
  const json golden = json::parse(f);
  EXPECT_EQ(json::parse(a.out).at("bound"), golden);
}

TEST_F(Cli, BoundRefusesRhoOne) {
  EXPECT_EQ(run("bound --preset toy --rho 1").code, 2);
  EXPECT_EQ(run("bound --preset nonsense").code, 1);
}

TEST_F(Cli, EvaluateTrivialGame) {
  GaussianSampler s(3);
  Strategy st{0, random_adjoint_choi({1}, {2}, s, 1), random_adjoint_choi({1}, {2}, s, 2)};
  const auto p = scratch("strategy.json", strategy_to_json(st).dump());
  const auto r = run("evaluate " + data("trivial_game.json") + " \"" + p.string() + "\"");
  ASSERT_EQ(r.code, 0);
  EXPECT_NEAR(json::parse(r.out).at("value").get<double>(), 1.0, 1e-12);
  const auto o = run("evaluate " + data("trivial_game.json") + " optimize");
  ASSERT_EQ(o.code, 0);
  EXPECT_NEAR(json::parse(o.out).at("value").get<double>(), 1.0, 1e-9);
  std::filesystem::remove(p);
}

TEST_F(Cli, CompressDemo) {
  const auto r = run("--config " + data("demo_config.toml") + " compress " + data("demo_game.json") + " " +
                     data("demo_strategy.json"));
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  const auto& rep = j.at("report");
  EXPECT_FALSE(j.at("constants").empty());
  EXPECT_FALSE(j.at("tolerances").empty());
  EXPECT_TRUE(rep.at("aggregation_holds").get<bool>());
  const auto& stages = rep.at("pipeline").at("stages");
  ASSERT_GE(stages.size(), 8u);
  for (const auto& s : stages) EXPECT_TRUE(s.contains("checks")) << s.at("stage");
}

TEST_F(Cli, SelftestSingleSuite) {
  const auto r = run("selftest 2 12");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j.at("pass").get<bool>());
  EXPECT_EQ(j.at("results").size(), 2u);
  EXPECT_EQ(run("selftest 13").code, 2);
}
