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

#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "toml.hpp"

#include "mesc/game.hpp"

namespace mesc {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Matrices and operators.

inline json matrix_to_json(const Mat& m) {
  json re = json::array(), im = json::array();
  bool any_im = false;
  for (long long i = 0; i < m.rows(); ++i) {
    json rr = json::array(), ir = json::array();
    for (long long j = 0; j < m.cols(); ++j) {
      rr.push_back(m(i, j).real());
      ir.push_back(m(i, j).imag());
      any_im = any_im || m(i, j).imag() != 0.0;
    }
    re.push_back(rr);
    im.push_back(ir);
  }
  json out{{"re", re}};
  if (any_im) out["im"] = im;
  return out;
}

inline Mat matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("re") || !j["re"].is_array())
    throw ParseError(what + ": expected an object with a \"re\" array");
  const auto& re = j["re"];
  const long long rows = static_cast<long long>(re.size());
  if (rows == 0) throw ParseError(what + ": empty matrix");
  const long long cols = re[0].is_array() ? static_cast<long long>(re[0].size()) : 0;
  Mat m = Mat::Zero(rows, cols);
  const json* im = j.contains("im") ? &j["im"] : nullptr;
  if (im && (!im->is_array() || static_cast<long long>(im->size()) != rows))
    throw ParseError(what + ": \"im\" shape does not match \"re\"");
  for (long long i = 0; i < rows; ++i) {
    if (!re[i].is_array() || static_cast<long long>(re[i].size()) != cols) throw ParseError(what + ": ragged rows");
    for (long long k = 0; k < cols; ++k) {
      if (!re[i][k].is_number()) throw ParseError(what + ": non-numeric entry");
      double imv = 0.0;
      if (im) {
        const auto& row = (*im)[i];
        if (!row.is_array() || static_cast<long long>(row.size()) != cols || !row[k].is_number())
          throw ParseError(what + ": \"im\" shape does not match \"re\"");
        imv = row[k].get<double>();
      }
      m(i, k) = cd(re[i][k].get<double>(), imv);
    }
  }
  return m;
}

inline Dims dims_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + ": expected an array of dimensions");
  Dims d;
  for (const auto& x : j) {
    if (!x.is_number_integer() || x.get<long long>() < 1) throw ParseError(what + ": dimensions must be positive integers");
    d.push_back(x.get<int>());
  }
  return d;
}

inline json operator_to_json(const Mat& m, const Dims& dims) {
  json j = matrix_to_json(m);
  j["dims"] = dims;
  return j;
}

inline HermitianTensorOperator operator_from_json(const json& j) {
  if (!j.is_object() || !j.contains("dims")) throw ParseError("operator: missing \"dims\"");
  Dims d = dims_from_json(j["dims"], "operator.dims");
  Mat m = matrix_from_json(j, "operator");
  if (m.rows() != dim_product(d) || m.cols() != m.rows()) throw ParseError("operator: matrix size does not match dims");
  return HermitianTensorOperator::from_dims(d, m);
}

inline json channel_to_json(const ChoiMatrix& c) {
  return {{"in", c.in}, {"out", c.out}, {"choi_adjoint", matrix_to_json(c.j)}};
}

inline ChoiMatrix channel_from_json(const json& j, const std::string& what = "channel") {
  if (!j.is_object() || !j.contains("in") || !j.contains("out") || !j.contains("choi_adjoint"))
    throw ParseError(what + ": expected {\"in\", \"out\", \"choi_adjoint\"}");
  ChoiMatrix c{dims_from_json(j["in"], what + ".in"), dims_from_json(j["out"], what + ".out"),
               matrix_from_json(j["choi_adjoint"], what + ".choi_adjoint")};
  const long long d = c.in_dim() * c.out_dim();
  if (c.j.rows() != d || c.j.cols() != d) throw ParseError(what + ": Choi size does not match in/out");
  return c;
}

// ---------------------------------------------------------------------------
// States.

inline json state_to_json(const NoisyMesProfile& p) {
  return {{"s", p.s}, {"t", p.t}, {"psi", matrix_to_json(p.psi)}};
}

/// @brief Either {"kind":"depolarized_mes","m":..,"eps":..} or {"s":..,"t":..,"psi":{re,im}}.
inline Mat state_matrix_from_json(const json& j, int& s, int& t) {
  if (!j.is_object()) throw ParseError("state: expected an object");
  if (j.contains("kind")) {
    if (!j["kind"].is_string() || j["kind"] != "depolarized_mes") throw ParseError("state: unknown kind");
    if (!j.contains("m") || !j["m"].is_number_integer() || !j.contains("eps") || !j["eps"].is_number())
      throw ParseError("state: depolarized_mes needs integer \"m\" and numeric \"eps\"");
    s = t = j["m"].get<int>();
    if (s < 1) throw ParseError("state: m must be positive");
    const double eps = j["eps"].get<double>();
    if (!(eps >= 0 && eps <= 1)) throw DomainError("state: eps must lie in [0,1]");
    return depolarized_mes_state(s, eps);
  }
  if (!j.contains("s") || !j.contains("t") || !j["s"].is_number_integer() || !j["t"].is_number_integer())
    throw ParseError("state: missing integer \"s\"/\"t\"");
  s = j["s"].get<int>();
  t = j["t"].get<int>();
  if (s < 1 || t < 1) throw ParseError("state: s and t must be positive");
  if (!j.contains("psi")) throw ParseError("state: missing \"psi\"");
  Mat psi = matrix_from_json(j["psi"], "state.psi");
  if (psi.rows() != static_cast<long long>(s) * t || psi.cols() != psi.rows())
    throw ParseError("state: psi size does not match s*t");
  return psi;
}

inline NoisyMesProfile state_from_json(const json& j) {
  int s = 0, t = 0;
  Mat psi = state_matrix_from_json(j, s, t);
  return align_bases(psi, s, t);
}

// ---------------------------------------------------------------------------
// Games and strategies.

inline json game_to_json(const FullyQuantumGame& g) {
  return {{"systems", {{"p", g.dims.p}, {"q", g.dims.q}, {"r", g.dims.r}, {"a", g.dims.a}, {"b", g.dims.b}}},
          {"phi_in", matrix_to_json(g.phi_in)},
          {"m_win", matrix_to_json(g.m_win)}};
}

inline FullyQuantumGame game_from_json(const json& j) {
  if (!j.is_object() || !j.contains("systems") || !j.contains("phi_in") || !j.contains("m_win"))
    throw ParseError("game: expected {\"systems\", \"phi_in\", \"m_win\"}");
  const auto& s = j["systems"];
  auto get = [&](const char* k) {
    if (!s.contains(k) || !s[k].is_number_integer() || s[k].get<int>() < 1)
      throw ParseError(std::string("game.systems: missing positive integer \"") + k + "\"");
    return s[k].get<int>();
  };
  FullyQuantumGame g{{get("p"), get("q"), get("r"), get("a"), get("b")},
                     matrix_from_json(j["phi_in"], "game.phi_in"),
                     matrix_from_json(j["m_win"], "game.m_win")};
  g.validate();
  return g;
}

inline json strategy_to_json(const Strategy& st) {
  return {{"copies", st.copies}, {"alice", channel_to_json(st.alice)}, {"bob", channel_to_json(st.bob)}};
}

inline Strategy strategy_from_json(const json& j) {
  if (!j.is_object() || !j.contains("copies") || !j["copies"].is_number_integer() || !j.contains("alice") ||
      !j.contains("bob"))
    throw ParseError("strategy: expected {\"copies\", \"alice\", \"bob\"}");
  Strategy st{j["copies"].get<int>(), channel_from_json(j["alice"], "strategy.alice"),
              channel_from_json(j["bob"], "strategy.bob")};
  if (st.copies < 0) throw ParseError("strategy: copies must be non-negative");
  return st;
}

// ---------------------------------------------------------------------------
// Polynomials.

inline json hermite_to_json(const HermiteExpansion& f) {
  json terms = json::array();
  for (const auto& [k, v] : f.coeffs) terms.push_back({{"index", k}, {"value", v}});
  return {{"n", f.n}, {"terms", terms}};
}

inline HermiteExpansion hermite_from_json(const json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("terms")) throw ParseError("polynomial: expected {n, terms}");
  HermiteExpansion f;
  f.n = j["n"].get<int>();
  for (const auto& t : j["terms"]) {
    auto k = t.at("index").get<std::vector<int>>();
    if (static_cast<int>(k.size()) != f.n) throw ParseError("polynomial: index length must equal n");
    f.coeffs[k] += t.at("value").get<double>();
  }
  return f;
}

inline json random_operator_to_json(const RandomOperator& r) {
  json terms = json::array();
  for (const auto& [k, m] : r.terms) {
    json t = matrix_to_json(m);
    t["index"] = k;
    terms.push_back(t);
  }
  return {{"op_dims", r.op_dims}, {"n", r.n}, {"terms", terms}};
}

inline RandomOperator random_operator_from_json(const json& j) {
  if (!j.is_object() || !j.contains("op_dims") || !j.contains("n") || !j.contains("terms"))
    throw ParseError("random operator: expected {op_dims, n, terms}");
  RandomOperator r;
  r.op_dims = dims_from_json(j["op_dims"], "random operator.op_dims");
  r.n = j["n"].get<int>();
  for (const auto& t : j["terms"]) {
    auto k = t.at("index").get<std::vector<int>>();
    if (static_cast<int>(k.size()) != r.n) throw ParseError("random operator: index length must equal n");
    Mat m = matrix_from_json(t, "random operator term");
    if (m.rows() != r.op_dim()) throw ParseError("random operator: term size does not match op_dims");
    r.add(k, m);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reports.

inline json chain_value_to_json(const ChainValue& v) {
  json j{{"log10", v.log10}};
  if (v.exact) j["exact"] = *v.exact;
  return j;
}

inline json constants_to_json(const Constants& c) {
  return {{"C_smooth", c.C_smooth}, {"C_d1", c.C_d1}, {"C_n0", c.C_n0}, {"c_n0_exp", c.c_n0_exp},
          {"C_d2", c.C_d2},         {"C_n1", c.C_n1}, {"C_delta", c.C_delta}};
}

inline json tolerances_to_json() {
  return {{"structural_zero", kStructuralZero},
          {"cptp", 1e-9},
          {"cptp_input", 1e-6},
          {"marginal", kMarginalTol},
          {"exact_stage", 1e-10},
          {"norm_identity", 1e-12},
          {"monte_carlo_band_se", 3},
          {"seesaw_stall", 1e-7},
          {"dense_cap", kDenseCap},
          {"game_dim_cap", kGameDimCap}};
}

inline json overrides_to_json(const Overrides& o) {
  json j = json::object();
  if (o.d1) j["d1"] = *o.d1;
  if (o.n0) j["n0"] = *o.n0;
  if (o.d2) j["d2"] = *o.d2;
  if (o.n1) j["n1"] = *o.n1;
  if (o.D) j["D"] = *o.D;
  if (o.D_extra) j["D_extra"] = *o.D_extra;
  return j;
}

inline json params_to_json(const PipelineParams& P) {
  json j{{"delta", P.delta},
         {"theta", P.theta},
         {"theta_log10", P.theta_log10},
         {"rho", P.rho},
         {"dims", {{"p", P.p}, {"q", P.q}, {"r", P.r}, {"s", P.s}, {"t", P.t}, {"a", P.a}, {"b", P.b}}},
         {"seed", P.seed},
         {"monte_carlo_N", P.monte_carlo_N},
         {"alpha", P.alpha},
         {"max_retries", P.max_retries},
         {"constants", constants_to_json(P.constants)},
         {"overrides", overrides_to_json(P.overrides)},
         {"desk_scale", P.desk_scale()},
         {"delta1_prime", P.delta1_prime},
         {"gamma", P.gamma},
         {"gamma_threshold", P.gamma_threshold},
         {"tsmooth_epsilon", P.tsmooth_eps},
         {"delta2_prime", P.delta2_prime},
         {"nu", P.nu},
         {"d1", chain_value_to_json(P.d1)},
         {"h_cap", chain_value_to_json(P.h_cap)},
         {"n0", chain_value_to_json(P.n0)},
         {"d2", chain_value_to_json(P.d2)},
         {"n1", chain_value_to_json(P.n1)},
         {"D", chain_value_to_json(P.D)},
         {"formulas", P.chain},
         {"n0_exponent_note", "d^{O(d)} instantiated as d1^(c_n0_exp * d1)"}};
  if (P.theta_decimal) j["theta_decimal"] = *P.theta_decimal;
  return j;
}

/// @brief Fixed-precision decimal text, so the bound report does not depend on shortest-round-trip printing.
inline std::string decimal(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline json chain_value_decimal(const ChainValue& v) {
  json j{{"log10", decimal(v.log10)}};
  if (v.exact) j["exact"] = *v.exact;
  return j;
}

/// @brief The parameter chain with every float written as a decimal string.
inline json bound_to_json(const PipelineParams& P) {
  const auto& C = P.constants;
  json j{{"inputs",
          {{"delta", decimal(P.delta)},
           {"theta", P.theta_decimal ? *P.theta_decimal : decimal(P.theta)},
           {"rho", decimal(P.rho)},
           {"dims", {{"p", P.p}, {"q", P.q}, {"r", P.r}, {"s", P.s}, {"t", P.t}, {"a", P.a}, {"b", P.b}}},
           {"constants",
            {{"C_smooth", decimal(C.C_smooth)},
             {"C_d1", decimal(C.C_d1)},
             {"C_n0", decimal(C.C_n0)},
             {"c_n0_exp", decimal(C.c_n0_exp)},
             {"C_d2", decimal(C.C_d2)},
             {"C_n1", decimal(C.C_n1)},
             {"C_delta", decimal(C.C_delta)}}}}},
         {"derived",
          {{"theta_log10", decimal(P.theta_log10)},
           {"delta1_prime", decimal(P.delta1_prime)},
           {"gamma", decimal(P.gamma)},
           {"gamma_threshold", decimal(P.gamma_threshold)},
           {"tsmooth_epsilon", decimal(P.tsmooth_eps)},
           {"delta2_prime", decimal(P.delta2_prime)},
           {"nu", decimal(P.nu)}}},
         {"chain",
          {{"d1", chain_value_decimal(P.d1)},
           {"h_cap", chain_value_decimal(P.h_cap)},
           {"n0", chain_value_decimal(P.n0)},
           {"d2", chain_value_decimal(P.d2)},
           {"n1", chain_value_decimal(P.n1)},
           {"D", chain_value_decimal(P.D)}}},
         {"formulas", P.chain}};
  return j;
}

inline json table_to_json(const CorrelationTable& t) {
  return {{"na", t.na}, {"nb", t.nb}, {"nr", t.nr}, {"values", t.v}};
}

inline json check_to_json(const BoundCheck& c) {
  return {{"name", c.name}, {"measured", c.measured}, {"bound", c.bound}, {"slack", c.slack},
          {"pass", c.pass},  {"certified", c.certified}};
}

inline json stage_to_json(const StageReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back(check_to_json(c));
  json j{{"stage", r.stage},
         {"verdict", r.passed() ? "pass" : "fail"},
         {"measured_only", r.measured_only},
         {"checks", checks},
         {"values", r.values},
         {"table", table_to_json(r.table)},
         {"table_standard_error", r.table_se}};
  if (!r.attempts.empty()) {
    json a = json::array();
    for (const auto& x : r.attempts) a.push_back(stage_to_json(x));
    j["attempts"] = a;
  }
  return j;
}

inline json ledger_to_json(const Ledger& L) {
  json rows = json::array();
  for (size_t i = 0; i < L.stages.size(); ++i)
    rows.push_back({{"stage", L.stages[i]},
                    {"deviation", L.deviation[i]},
                    {"budget", L.budget[i]},
                    {"budget_is_measured", static_cast<bool>(L.measured_budget[i])}});
  return {{"stages", rows},
          {"total_deviation", L.total_deviation},
          {"sum_stage_deviation", L.sum_deviation},
          {"sum_budget", L.sum_budget},
          {"monte_carlo_slack", L.mc_slack},
          {"reconciled", L.reconciled},
          {"within_budget", L.within_budget}};
}

inline json cptp_to_json(const CptpReport& r) {
  return {{"min_choi_eigenvalue", r.min_choi_eig}, {"marginal_residual", r.marginal_residual}, {"valid", r.verdict}};
}

inline json rounding_to_json(const RoundingReport& r) {
  return {{"zeta", r.zeta},
          {"eps", r.eps},
          {"distance_sq", r.distance_sq},
          {"bound_a52_sqrt_eps", r.bound},
          {"measured_constant", r.measured_constant},
          {"marginal_deviation", r.marginal_dev},
          {"term1", r.term1},
          {"term1_bound", r.term1_bound},
          {"term2", r.term2},
          {"term2_bound", r.term2_bound},
          {"support_rank", r.support_rank}};
}

inline json pipeline_to_json(const PipelineResult& res) {
  json stages = json::array();
  for (const auto& s : res.stages) stages.push_back(stage_to_json(s));
  return {{"copies", res.copies},
          {"H", res.H},
          {"params", params_to_json(res.params)},
          {"tolerances", tolerances_to_json()},
          {"stages", stages},
          {"ledger", ledger_to_json(res.ledger)},
          {"table_before", table_to_json(res.before)},
          {"table_after", table_to_json(res.after)},
          {"max_abr_deviation", res.after.max_abs_diff(res.before)},
          {"alice_cptp", cptp_to_json(res.alice_cptp)},
          {"bob_cptp", cptp_to_json(res.bob_cptp)},
          {"alice_rounding", rounding_to_json(res.alice_round)},
          {"bob_rounding", rounding_to_json(res.bob_round)}};
}

inline json value_report_to_json(const ValueReport& r) {
  return {{"value", r.value},       {"lower", r.lower},
          {"upper", r.upper},       {"radius", r.radius},
          {"iterations", r.iterations}, {"restarts", r.restarts},
          {"boxes", r.boxes},       {"best_per_restart", r.best_per_restart},
          {"max_sweep_drop", r.max_sweep_drop}};
}

inline json comparison_to_json(const CompressionComparison& c) {
  return {{"pipeline", pipeline_to_json(c.pipeline)},
          {"compressed_strategy",
           strategy_to_json(Strategy{c.pipeline.copies, c.pipeline.alice, c.pipeline.bob})},
          {"max_table_deviation", c.max_table_deviation},
          {"value_before", c.value_before},
          {"value_after", c.value_after},
          {"value_drop", c.value_drop},
          {"aggregation_bound", c.aggregation_bound},
          {"aggregation_holds", c.aggregation_holds}};
}

// ---------------------------------------------------------------------------
// Files and configuration.

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// @brief Parses "d1=4,n0=16,d2=4,n1=2,D_extra=2" into overrides.
inline void parse_overrides(const std::string& text, Overrides& o) {
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ParseError("override \"" + item + "\": expected key=value");
    const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    long long v = 0;
    try {
      size_t used = 0;
      v = std::stoll(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw ParseError("override \"" + item + "\": value must be an integer");
    }
    if (v < 0) throw ParseError("override \"" + item + "\": value must be non-negative");
    if (key == "d1") o.d1 = v;
    else if (key == "n0") o.n0 = v;
    else if (key == "d2") o.d2 = v;
    else if (key == "n1") o.n1 = v;
    else if (key == "D") o.D = v;
    else if (key == "D_extra") o.D_extra = v;
    else throw ParseError("override: unknown key \"" + key + "\"");
  }
}

struct RunConfig {
  PipelineParams params;
  std::optional<double> rho_override;
  std::optional<double> epsilon;  // ε-driven preset for the bound command
  SeesawOptions seesaw;
  double net_step = 1e-2;
};

inline RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  toml::table tbl;
  try {
    tbl = toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    throw ParseError(path + ": " + std::string(e.description()));
  }
  auto& P = cfg.params;
  auto num = [](const toml::node_view<toml::node>& n, const char* key) -> std::optional<double> {
    if (!n) return std::nullopt;
    if (auto v = n.value<double>()) return *v;
    throw ParseError(std::string("config: \"") + key + "\" must be numeric");
  };
  auto integer = [](const toml::node_view<toml::node>& n, const char* key) -> std::optional<long long> {
    if (!n) return std::nullopt;
    if (auto v = n.value<long long>()) return *v;
    throw ParseError(std::string("config: \"") + key + "\" must be an integer");
  };
  auto params = tbl["params"];
  if (auto v = num(params["delta"], "delta")) P.delta = *v;
  if (auto v = num(params["theta"], "theta")) P.theta = *v;
  if (auto v = num(params["rho_override"], "rho_override")) cfg.rho_override = *v;
  if (auto v = num(params["epsilon"], "epsilon")) cfg.epsilon = *v;
  if (auto v = integer(params["seed"], "seed")) P.seed = static_cast<std::uint64_t>(*v);
  if (auto v = integer(params["monte_carlo_N"], "monte_carlo_N")) P.monte_carlo_N = *v;
  if (auto v = num(params["alpha"], "alpha")) P.alpha = *v;
  if (auto v = integer(params["max_retries"], "max_retries")) P.max_retries = static_cast<int>(*v);
  auto c = params["constants"];
  auto& C = P.constants;
  for (auto [key, ref] : std::initializer_list<std::pair<const char*, double*>>{{"C_smooth", &C.C_smooth},
                                                                               {"C_d1", &C.C_d1},
                                                                               {"C_n0", &C.C_n0},
                                                                               {"c_n0_exp", &C.c_n0_exp},
                                                                               {"C_d2", &C.C_d2},
                                                                               {"C_n1", &C.C_n1},
                                                                               {"C_delta", &C.C_delta}})
    if (auto v = num(c[key], key)) *ref = *v;
  auto o = params["overrides"];
  for (auto [key, ref] : std::initializer_list<std::pair<const char*, std::optional<long long>*>>{
           {"d1", &P.overrides.d1},
           {"n0", &P.overrides.n0},
           {"d2", &P.overrides.d2},
           {"n1", &P.overrides.n1},
           {"D", &P.overrides.D},
           {"D_extra", &P.overrides.D_extra}})
    if (auto v = integer(o[key], key)) *ref = *v;
  auto dims = tbl["dims"];
  for (auto [key, ref] : std::initializer_list<std::pair<const char*, int*>>{
           {"p", &P.p}, {"q", &P.q}, {"r", &P.r}, {"s", &P.s}, {"t", &P.t}, {"a", &P.a}, {"b", &P.b}})
    if (auto v = integer(dims[key], key)) *ref = static_cast<int>(*v);
  auto ss = tbl["seesaw"];
  if (auto v = integer(ss["restarts"], "restarts")) cfg.seesaw.restarts = static_cast<int>(*v);
  if (auto v = integer(ss["iterations"], "iterations")) cfg.seesaw.iterations = static_cast<int>(*v);
  if (auto v = num(tbl["brute_force"]["net_step"], "net_step")) cfg.net_step = *v;
  return cfg;
}

}  // namespace mesc
