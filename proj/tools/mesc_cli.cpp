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

// mesc: command-line driver. Reports go to stdout (or --out) as JSON, diagnostics to stderr.
// Exit codes: 0 ok, 1 parse, 2 domain, 3 resource.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mesc/selftest.hpp"

#ifndef MESC_DATA_DIR
#define MESC_DATA_DIR "data"
#endif

namespace {

using mesc::json;

struct Globals {
  std::uint64_t seed = 1;
  std::optional<long long> mc_samples;
  std::string config;
  std::string out;
  std::string override_params;
};

enum Exit { kOk = 0, kParse = 1, kDomain = 2, kResource = 3 };

void emit(const Globals& g, const json& report) {
  const std::string text = report.dump(2) + "\n";
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(g.out, std::ios::binary);
  if (!f) throw mesc::ResourceError("cannot write " + g.out);
  f << text;
}

mesc::RunConfig load(const Globals& g) {
  mesc::RunConfig cfg;
  if (!g.config.empty()) cfg = mesc::load_config(g.config);
  cfg.params.seed = g.seed;
  if (g.mc_samples) cfg.params.monte_carlo_N = *g.mc_samples;
  if (!g.override_params.empty()) mesc::parse_overrides(g.override_params, cfg.params.overrides);
  return cfg;
}

json envelope(const std::string& command, const mesc::PipelineParams& P) {
  return {{"command", command},
          {"seed", P.seed},
          {"constants", mesc::constants_to_json(P.constants)},
          {"tolerances", mesc::tolerances_to_json()}};
}

// The resource state comes from the strategy file, then the game file; games played without copies may omit it.
std::optional<mesc::NoisyMesProfile> find_state(const json& a, const json& b) {
  for (const json* j : {&a, &b})
    if (j->is_object() && j->contains("state")) return mesc::state_from_json(j->at("state"));
  return std::nullopt;
}

int cmd_maxcorr(const Globals& g, const std::string& path) {
  const auto prof = mesc::state_from_json(mesc::read_json_file(path));
  json r = envelope("maxcorr", mesc::PipelineParams{});
  r["seed"] = g.seed;
  r["s"] = prof.s;
  r["t"] = prof.t;
  r["rho"] = prof.rho;
  r["spectrum"] = prof.spectrum;
  emit(g, r);
  return kOk;
}

int cmd_bound(const Globals& g, const std::string& preset, std::optional<double> rho, std::optional<double> eps) {
  auto cfg = load(g);
  mesc::PipelineParams P = preset == "toy" ? mesc::toy_preset() : cfg.params;
  if (!preset.empty() && preset != "toy") throw mesc::ParseError("unknown preset \"" + preset + "\"");
  P.seed = g.seed;
  if (cfg.rho_override) P.rho = *cfg.rho_override;
  if (rho) P.rho = *rho;
  if (!eps) eps = cfg.epsilon;
  const auto B = eps ? mesc::preset_from_epsilon(P, *eps) : mesc::compute_bound(P);
  json r = envelope("bound", B);
  r["bound"] = mesc::bound_to_json(B);
  emit(g, r);
  return kOk;
}

int cmd_compress(const Globals& g, const std::string& game_path, const std::string& strategy_path) {
  auto cfg = load(g);
  const json gj = mesc::read_json_file(game_path), sj = mesc::read_json_file(strategy_path);
  const auto game = mesc::game_from_json(gj);
  const auto st = mesc::strategy_from_json(sj);
  const auto prof = find_state(sj, gj);
  if (!prof) throw mesc::ParseError("compress: no \"state\" in the strategy or game file");
  try {
    const auto cmp = mesc::compare_compression(game, *prof, st, cfg.params);
    json r = envelope("compress", cmp.pipeline.params);
    r["report"] = mesc::comparison_to_json(cmp);
    emit(g, r);
    return kOk;
  } catch (const mesc::StageFailure& e) {
    json r = envelope("compress", cfg.params);
    r["error"] = e.what();
    r["failed_stage"] = mesc::stage_to_json(e.report);
    emit(g, r);
    std::cerr << "mesc: " << e.what() << "\n";
    return kDomain;
  }
}

int cmd_evaluate(const Globals& g, const std::string& game_path, const std::string& what, int copies, bool brute) {
  auto cfg = load(g);
  const json gj = mesc::read_json_file(game_path);
  const auto game = mesc::game_from_json(gj);
  json r = envelope("evaluate", cfg.params);
  if (what == "optimize") {
    auto prof = find_state(gj, json::object());
    if (!prof) {
      if (copies > 0) throw mesc::ParseError("evaluate: copies > 0 needs a \"state\" in the game file");
      prof = mesc::depolarized_mes(2, 1.0);
    }
    r["copies"] = copies;
    if (brute) {
      const auto rep = mesc::brute_force_value(game, *prof, copies, cfg.net_step);
      r["method"] = "brute_force";
      r["value"] = rep.value;
      r["report"] = mesc::value_report_to_json(rep);
    } else {
      auto opt = cfg.seesaw;
      opt.seed = g.seed;
      const auto [st, rep] = mesc::optimize_value_seesaw(game, *prof, copies, opt);
      r["method"] = "seesaw";
      r["value"] = rep.value;
      r["report"] = mesc::value_report_to_json(rep);
      r["strategy"] = mesc::strategy_to_json(st);
    }
  } else {
    const json sj = mesc::read_json_file(what);
    const auto st = mesc::strategy_from_json(sj);
    auto prof = find_state(sj, gj);
    if (!prof) {
      if (st.copies > 0) throw mesc::ParseError("evaluate: no \"state\" in the strategy or game file");
      prof = mesc::depolarized_mes(2, 1.0);
    }
    r["copies"] = st.copies;
    r["value"] = mesc::winning_probability(game, st, *prof);
    r["table"] = mesc::table_to_json(mesc::correlation_table(game, st, *prof));
  }
  emit(g, r);
  return kOk;
}

int cmd_selftest(const Globals& g, const std::vector<int>& ids_in, const std::string& data_dir) {
  std::vector<int> ids = ids_in;
  if (ids.empty())
    for (int i = 1; i <= mesc::selftest::kCriteria; ++i) ids.push_back(i);
  json r = envelope("selftest", mesc::PipelineParams{});
  r["seed"] = g.seed;
  json results = json::array();
  bool all = true;
  for (int id : ids) {
    auto res = mesc::selftest::run_criterion(id, g.seed, data_dir);
    std::cerr << "criterion " << id << " (" << res.name << "): " << (res.pass ? "PASS" : "FAIL") << " in "
              << res.seconds << " s" << (res.detail.empty() ? "" : " [" + res.detail + "]") << "\n";
    json j = mesc::selftest::result_to_json(res);
    j.erase("seconds");  // keeps the report byte-stable; timings go to stderr
    results.push_back(j);
    all = all && res.pass;
  }
  r["results"] = results;
  r["pass"] = all;
  emit(g, r);
  return all ? kOk : kDomain;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mesc: compression of fully quantum game strategies over noisy MES"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--mc-samples", g.mc_samples, "Monte Carlo sample count");
  app.add_option("--config", g.config, "TOML configuration file");
  app.add_option("--out", g.out, "write the report here instead of stdout");
  app.add_option("--override-params", g.override_params, "d1=..,n0=..,d2=..,n1=..,D=..,D_extra=..");

  std::string state_path;
  auto* maxcorr = app.add_subcommand("maxcorr", "maximal correlation and aligned spectrum of a state");
  maxcorr->add_option("state", state_path, "state JSON")->required();

  std::string preset;
  std::optional<double> rho, eps;
  auto* bound = app.add_subcommand("bound", "parameter chain and D");
  bound->add_option("--preset", preset, "named preset (toy)");
  bound->add_option("--rho", rho, "maximal correlation of the resource state");
  bound->add_option("--epsilon", eps, "epsilon-driven preset");

  std::string game_path, strategy_path;
  auto* compress = app.add_subcommand("compress", "run the compression pipeline on a strategy");
  compress->add_option("game", game_path, "game JSON")->required();
  compress->add_option("strategy", strategy_path, "strategy JSON")->required();

  std::string what;
  int copies = 0;
  bool brute = false;
  auto* evaluate = app.add_subcommand("evaluate", "winning probability of a strategy, or optimize");
  evaluate->add_option("game", game_path, "game JSON")->required();
  evaluate->add_option("strategy", what, "strategy JSON or \"optimize\"")->required();
  evaluate->add_option("--copies", copies, "copies of the state when optimizing");
  evaluate->add_flag("--brute-force", brute, "bracket the value by branch and bound");

  std::vector<int> suite;
  std::string data_dir;
  if (const char* env = std::getenv("MESC_DATA")) data_dir = env;
  if (data_dir.empty()) data_dir = MESC_DATA_DIR;
  auto* selftest = app.add_subcommand("selftest", "run the acceptance batteries");
  selftest->add_option("suite", suite, "criterion numbers (default: all)");
  selftest->add_option("--data-dir", data_dir, "fixture directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParse;
  }

  try {
    if (*maxcorr) return cmd_maxcorr(g, state_path);
    if (*bound) return cmd_bound(g, preset, rho, eps);
    if (*compress) return cmd_compress(g, game_path, strategy_path);
    if (*evaluate) return cmd_evaluate(g, game_path, what, copies, brute);
    if (*selftest) return cmd_selftest(g, suite, data_dir);
  } catch (const mesc::ParseError& e) {
    std::cerr << "mesc: parse error: " << e.what() << "\n";
    return kParse;
  } catch (const mesc::json::exception& e) {
    std::cerr << "mesc: parse error: " << e.what() << "\n";
    return kParse;
  } catch (const mesc::ResourceError& e) {
    std::cerr << "mesc: resource limit: " << e.what() << "\n";
    return kResource;
  } catch (const mesc::StageFailure& e) {
    std::cerr << "mesc: stage failure: " << e.what() << "\n";
    return kDomain;
  } catch (const mesc::DomainError& e) {
    std::cerr << "mesc: " << e.what() << "\n";
    return kDomain;
  } catch (const std::exception& e) {
    std::cerr << "mesc: " << e.what() << "\n";
    return kDomain;
  }
  return kParse;
}
