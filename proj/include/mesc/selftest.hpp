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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mesc/game.hpp"
#include "mesc/io.hpp"
#include "mesc/oracles.hpp"
#include "mesc/pipeline.hpp"

namespace mesc::selftest {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0;
  double limit_seconds = 0;
  std::string detail;
  json metrics = json::object();
};

inline json result_to_json(const CriterionResult& r) {
  return {{"id", r.id},         {"name", r.name},     {"pass", r.pass},     {"seconds", r.seconds},
          {"limit_seconds", r.limit_seconds}, {"detail", r.detail}, {"metrics", r.metrics}};
}

namespace detail {

inline std::uint64_t stream(int crit, int k, int sub = 0) {
  return (static_cast<std::uint64_t>(crit) << 48) | (static_cast<std::uint64_t>(k) << 16) |
         static_cast<std::uint64_t>(sub);
}

inline double max_abs(const Mat& x) { return x.size() ? x.cwiseAbs().maxCoeff() : 0.0; }

inline RMat random_orthogonal(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  RMat g(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) g(i, j) = nd(rng);
  Eigen::HouseholderQR<RMat> qr(g);
  return qr.householderQ();
}

inline Mat random_unitary(int d, const GaussianSampler& s, std::uint64_t st) {
  Eigen::HouseholderQR<Mat> qr(ginibre(d, d, s, st));
  return qr.householderQ();
}

inline Mat random_density(long long d, const GaussianSampler& s, std::uint64_t st) {
  Mat w = ginibre(d, d, s, st);
  Mat x = w * w.adjoint();
  return x / x.trace().real();
}

inline std::vector<Mat> normalized_basis(int d) { return trace_normalized(make_standard_basis(d)); }

// Correlation table from the index-loop oracle, flattened in (a, b, r) order.
inline std::vector<double> oracle_table(const Mat& phi_in, const GameDims& g, const NoisyMesProfile& prof, int copies,
                                        const Mat& ja, const Mat& jb) {
  const Mat omega = oracle::joint_state(phi_in, g.p, g.q, g.r, prof.psi, prof.s, prof.t, copies);
  const long long dx = oracle::prod(std::vector<int>(copies, prof.s)) * g.p;
  const long long dy = oracle::prod(std::vector<int>(copies, prof.t)) * g.q;
  return oracle::correlation_table(omega, ja, dx, jb, dy, normalized_basis(g.a), normalized_basis(g.b),
                                   normalized_basis(g.r));
}

inline double max_diff(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "selftest: table size mismatch");
  double m = 0;
  for (size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

inline std::vector<int> random_dims(int count, std::mt19937_64& rng, bool qutrit_only) {
  std::vector<int> d;
  for (int i = 0; i < count; ++i) d.push_back(qutrit_only ? 3 : 2 + static_cast<int>(rng() % 2));
  return d;
}

inline CriterionResult make_result(int id, const char* name, double limit) {
  CriterionResult r;
  r.id = id;
  r.name = name;
  r.limit_seconds = limit;
  return r;
}

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace detail

// 1 ------------------------------------------------------------------------

inline CriterionResult fourier_foundation(std::uint64_t seed) {
  auto r = detail::make_result(1, "fourier_foundation", 30);
  detail::Stopwatch sw;
  GaussianSampler s(seed);
  std::mt19937_64 rng(seed ^ 0x11);
  double parseval = 0, round_trip = 0, infl = 0, trunc = 0;
  for (int k = 0; k < 200; ++k) {
    const int ns = 1 + k % 3;
    const Dims d = detail::random_dims(ns, rng, k % 2 == 0);
    const long long dim = dim_product(d);
    const Mat h = random_hermitian(dim, s, detail::stream(1, k));
    const auto bases = default_bases(d);
    const Vec c = fourier_vector(h, d, bases);
    parseval = std::max(parseval, std::abs(c.squaredNorm() - oracle::nsq(h)));

    const auto op = HermitianTensorOperator::from_dims(d, h);
    const auto f = fourier_expand(op);
    round_trip = std::max(round_trip, detail::max_abs(fourier_synthesize(f).dense() - h));

    for (int i = 0; i < ns; ++i) {
      const double lib = influence(h, d, i);
      infl = std::max({infl, std::abs(lib - oracle::influence(h, d, i)), std::abs(lib - influence_fourier(f, i))});
    }

    std::vector<StandardBasis> rotated;
    for (int i = 0; i < ns; ++i) rotated.push_back(rotate_basis(bases[i], detail::random_orthogonal(d[i] * d[i] - 1, rng)));
    const int t = static_cast<int>(rng() % (ns + 1));
    const Mat low1 = truncate_degree(h, d, t, {}, bases).first;
    const Mat low2 = truncate_degree(h, d, t, {}, rotated).first;
    trunc = std::max(trunc, detail::max_abs(low1 - low2));
  }
  r.seconds = sw.seconds();
  r.metrics = {{"parseval", parseval}, {"round_trip", round_trip}, {"influence", infl}, {"truncation", trunc}};
  r.pass = parseval <= 1e-10 && round_trip <= 1e-10 && infl <= 1e-10 && trunc <= 1e-10 && r.seconds < r.limit_seconds;
  return r;
}

// 2 ------------------------------------------------------------------------

inline CriterionResult depolarizing(std::uint64_t seed) {
  auto r = detail::make_result(2, "depolarizing", 10);
  detail::Stopwatch sw;
  GaussianSampler s(seed);
  std::mt19937_64 rng(seed ^ 0x22);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  double eigen_action = 0, vs_oracle = 0;
  for (int k = 0; k < 100; ++k) {
    const int ns = 1 + k % 3;
    const Dims d = detail::random_dims(ns, rng, false);
    const Mat h = random_hermitian(dim_product(d), s, detail::stream(2, k));
    const double gamma = ud(rng);
    std::vector<int> targets;
    for (int i = 0; i < ns; ++i)
      if (rng() % 2) targets.push_back(i);
    const Mat hd = depolarize(h, d, gamma, targets);
    vs_oracle = std::max(vs_oracle, detail::max_abs(hd - oracle::depolarize(h, d, gamma, targets)));
    const auto bases = default_bases(d);
    const Vec c = fourier_vector(h, d, bases), c_dep = fourier_vector(hd, d, bases);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const auto sig = unflatten_sigma(i, d);
      int cnt = 0;
      for (int t : targets) cnt += sig[t] != 0;
      eigen_action = std::max(eigen_action, std::abs(c_dep(i) - std::pow(gamma, cnt) * c(i)));
    }
  }

  double worst_eig = 0, worst_marg = 0;
  bool choi_ok = true;
  for (double gamma : {0.0, 0.3, 0.7, 1.0})
    for (int dd : {2, 3}) {
      const auto rep = is_cptp(depolarizing_channel(dd, gamma), 1e-9);
      worst_eig = std::min(worst_eig, rep.min_choi_eig);
      worst_marg = std::max(worst_marg, rep.marginal_residual);
      choi_ok = choi_ok && rep.verdict;
    }

  double tail_slack = -INFINITY;
  int tail_violations = 0;
  for (int k = 0; k < 100; ++k) {
    const int ns = 1 + k % 3;
    const Dims d = detail::random_dims(ns, rng, false);
    const Mat h = random_hermitian(dim_product(d), s, detail::stream(2, 1000 + k));
    const double gamma = ud(rng);
    const int t = static_cast<int>(rng() % (ns + 1));
    std::vector<int> all(ns);
    for (int i = 0; i < ns; ++i) all[i] = i;
    const Mat high = truncate_degree(depolarize(h, d, gamma, all), d, t, {}, default_bases(d)).second;
    const double lhs = std::sqrt(nnorm2_sq(high)), rhs = std::pow(gamma, t) * std::sqrt(oracle::nsq(h));
    tail_slack = std::max(tail_slack, lhs - rhs);
    if (lhs > rhs + 1e-12) ++tail_violations;
  }
  r.seconds = sw.seconds();
  r.metrics = {{"eigen_action", eigen_action}, {"library_vs_oracle", vs_oracle}, {"choi_min_eig", worst_eig},
               {"choi_marginal", worst_marg},  {"tail_max_excess", tail_slack},  {"tail_violations", tail_violations}};
  r.pass = eigen_action <= 1e-12 && vs_oracle <= 1e-12 && choi_ok && worst_eig >= -1e-9 && worst_marg <= 1e-9 &&
           tail_violations == 0 && r.seconds < r.limit_seconds;
  return r;
}

// 3 ------------------------------------------------------------------------

inline CriterionResult maximal_correlation_check(std::uint64_t seed) {
  auto r = detail::make_result(3, "maximal_correlation", 60);
  detail::Stopwatch sw;
  GaussianSampler s(seed);
  double closed_form = 0;
  for (int m : {2, 3})
    for (double eps : {0.0, 0.1, 0.25, 0.5, 1.0})
      closed_form = std::max(closed_form, std::abs(maximal_correlation(depolarized_mes_state(m, eps), m, m) - (1 - eps)));

  double vs_oracle = 0;
  json cases = json::array();
  for (int k = 0; k < 20; ++k) {
    const int m = 2 + k % 2;
    const Mat phi = mes_state(m);
    const Vec w = s.normals(detail::stream(3, k), 4).cwiseAbs();
    Mat psi = w(0) * Mat::Identity(m * m, m * m) / static_cast<double>(m * m);
    for (int j = 1; j < 4; ++j) {
      const Mat uv = kron(detail::random_unitary(m, s, detail::stream(3, k, 2 * j)),
                          detail::random_unitary(m, s, detail::stream(3, k, 2 * j + 1)));
      psi += w(j) * uv * phi * uv.adjoint();
    }
    psi /= w.sum();
    const double lib = maximal_correlation(psi, m, m);
    const double orc = oracle::maximal_correlation(psi, m, m, 50, seed + static_cast<std::uint64_t>(k));
    vs_oracle = std::max(vs_oracle, std::abs(lib - orc));
    cases.push_back({{"m", m}, {"library", lib}, {"oracle", orc}});
  }
  r.seconds = sw.seconds();
  r.metrics = {{"closed_form", closed_form}, {"svd_vs_oracle", vs_oracle}, {"random_cases", cases}};
  r.pass = closed_form <= 1e-8 && vs_oracle <= 1e-6 && r.seconds < r.limit_seconds;
  return r;
}

// 4 ------------------------------------------------------------------------

inline CriterionResult choi_cptp(std::uint64_t seed) {
  auto r = detail::make_result(4, "choi_cptp", 10);
  detail::Stopwatch sw;
  GaussianSampler s(seed);
  double round_trip = 0, marginal = 0, psd = 0;
  int equivalence_failures = 0;
  for (int k = 0; k < 100; ++k) {
    const int din = 2 + k % 2, dout = 2 + (k / 2) % 2, nk = 1 + k % 3 + (din > dout ? 1 : 0);
    std::vector<Mat> kraus;
    Mat sum = Mat::Zero(din, din);
    for (int i = 0; i < nk; ++i) {
      kraus.push_back(ginibre(dout, din, s, detail::stream(4, k, i)));
      sum += kraus.back().adjoint() * kraus.back();
    }
    const Mat isq = spectral_map(hermitian_part(sum), [](double l) { return 1.0 / std::sqrt(l); });
    for (auto& kk : kraus) kk = kk * isq;
    for (double scale : {1.0, 1.1}) {
      std::vector<Mat> kr = kraus;
      for (auto& kk : kr) kk *= scale;
      LinearFn fwd = [&](const Mat& x) {
        Mat o = Mat::Zero(dout, dout);
        for (const auto& kk : kr) o += kk * x * kk.adjoint();
        return o;
      };
      LinearFn adj = [&](const Mat& y) {
        Mat o = Mat::Zero(din, din);
        for (const auto& kk : kr) o += kk.adjoint() * y * kk;
        return o;
      };
      const auto c1 = channel_from_forward(fwd, {din}, {dout});
      const auto c2 = channel_from_adjoint(adj, {din}, {dout});
      const Mat x = random_hermitian(din, s, detail::stream(4, k, 100));
      const Mat y = random_hermitian(dout, s, detail::stream(4, k, 101));
      round_trip = std::max({round_trip, detail::max_abs(c1.choi_adjoint.j - c2.choi_adjoint.j),
                             detail::max_abs(apply_channel(c1, x) - fwd(x)), detail::max_abs(apply_adjoint(c1, y) - adj(y)),
                             detail::max_abs(adjoint_map(adjoint_map(c1)).choi_adjoint.j - c1.choi_adjoint.j)});
      const Mat& j = c1.choi_adjoint.j;
      psd = std::min(psd, min_eigenvalue(j));
      const Mat adj_unit = adj(Mat::Identity(dout, dout));
      const Mat marg_lib = partial_trace(j, c1.choi_adjoint.all_dims(), c1.choi_adjoint.out_systems());
      marginal = std::max({marginal, detail::max_abs(marg_lib - adj_unit), detail::max_abs(oracle::trace_last(j, dout) - adj_unit)});
      const bool unital = detail::max_abs(adj_unit - Mat::Identity(din, din)) <= 1e-10;
      const bool marg_identity = detail::max_abs(marg_lib - Mat::Identity(din, din)) <= 1e-10;
      const bool verdict = is_cptp(c1, 1e-10).verdict;
      if (unital != marg_identity || verdict != unital || unital != (scale == 1.0)) ++equivalence_failures;
    }
  }
  double transpose_eig = 0;
  bool transpose_rejected = true;
  for (int d : {2, 3}) {
    const auto rep = is_cptp(transpose_map(d), 1e-9);
    transpose_rejected = transpose_rejected && !rep.verdict;
    if (d == 2) transpose_eig = rep.min_choi_eig;
  }
  r.seconds = sw.seconds();
  r.metrics = {{"round_trip", round_trip},       {"marginal_vs_kraus", marginal},
               {"cp_min_eig", psd},              {"equivalence_failures", equivalence_failures},
               {"transpose_min_eig", transpose_eig}, {"transpose_rejected", transpose_rejected}};
  r.pass = round_trip <= 1e-12 && marginal <= 1e-10 && psd >= -1e-12 && equivalence_failures == 0 && transpose_rejected &&
           transpose_eig <= -0.1 && r.seconds < r.limit_seconds;
  return r;
}

// 5 ------------------------------------------------------------------------

inline CriterionResult rounding_lemma(std::uint64_t seed) {
  auto r = detail::make_result(5, "rounding", 60);
  detail::Stopwatch sw;
  GaussianSampler s(seed);
  std::mt19937_64 rng(seed ^ 0x55);
  std::uniform_real_distribution<double> ud(0.25, 1.0);
  const double eps_list[] = {1e-4, 1e-3, 1e-2, 1e-1};
  double worst_eig = 0, worst_marg = 0, worst_const = 0, worst_oracle = 0;
  int violations = 0;
  for (int k = 0; k < 200; ++k) {
    const double eps = eps_list[k % 4];
    const bool flip = (k / 4) % 2;
    const Dims in{flip ? 4 : 2}, out{flip ? 2 : 4};
    const long long ds = dim_product(in), da = dim_product(out);
    Dims all = in;
    all.push_back(out[0]);
    const ChoiMatrix j0 = random_adjoint_choi(in, out, s, detail::stream(5, k), 1 + static_cast<long long>(rng() % 2));
    Mat y = random_hermitian(ds * da, s, detail::stream(5, k, 1));
    y -= kron(partial_trace(y, all, {1}), Mat::Identity(da, da) / static_cast<double>(da));
    y /= std::sqrt(nnorm2_sq(y));
    const double target = static_cast<double>(ds) * eps * ud(rng);
    auto zeta_at = [&](double tau) { return zeta_trace(j0.j + tau * y); };
    double lo = 0, hi = 1;
    while (zeta_at(hi) < target) hi *= 2;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (zeta_at(mid) < target ? lo : hi) = mid;
    }
    const Mat j = j0.j + lo * y;
    RoundingReport rep;
    const ChoiMatrix jt = step_round(j, in, out, &rep);
    worst_eig = std::min(worst_eig, rep.min_eig_out);
    worst_marg = std::max(worst_marg, rep.marginal_residual_out);
    const double eps_j = zeta_trace(j) / static_cast<double>(ds);
    const double bound = std::pow(static_cast<double>(da), 2.5) * std::sqrt(eps_j);
    const double dist = oracle::nsq(j - jt.j);
    worst_oracle = std::max(worst_oracle, std::abs(dist - rep.distance_sq));
    const double oracle_marg = detail::max_abs(oracle::trace_last(jt.j, da) - Mat::Identity(ds, ds));
    worst_marg = std::max(worst_marg, oracle_marg);
    worst_const = std::max(worst_const, bound > 0 ? dist / bound : 0.0);
    if (dist > 10 * bound || eps_j > eps) ++violations;
  }
  r.seconds = sw.seconds();
  r.metrics = {{"min_eig", worst_eig},
               {"marginal_residual", worst_marg},
               {"measured_constant", worst_const},
               {"distance_library_vs_oracle", worst_oracle},
               {"violations", violations}};
  r.pass = worst_eig >= -1e-9 && worst_marg <= 1e-9 && violations == 0 && worst_oracle <= 1e-10 &&
           r.seconds < r.limit_seconds;
  return r;
}

// 6 ------------------------------------------------------------------------

inline CriterionResult invariance_identities(std::uint64_t seed) {
  auto r = detail::make_result(6, "invariance_identities", 120);
  detail::Stopwatch sw;
  GaussianSampler s(seed);
  std::mt19937_64 rng(seed ^ 0x66);
  double fwd_norm = 0, fwd_table = 0, fwd_oracle = 0, back_norm = 0, back_table = 0, back_oracle = 0;
  const double eps_list[] = {0.1, 0.25, 0.4};
  for (int k = 0; k < 50; ++k) {
    const auto prof = depolarized_mes(2, eps_list[k % 3]);
    PipelineContext ctx;
    ctx.profile = prof;
    ctx.sampler = GaussianSampler(seed + static_cast<std::uint64_t>(k));
    ctx.params.monte_carlo_N = 200;

    // Forward: operators on n copies, H kept, the rest replaced by Gaussians.
    {
      const int n = 1 + k % 3;
      GameDims g{n <= 2 ? 1 + (k / 3) % 2 : 1, n <= 2 ? 1 + (k / 5) % 2 : 1, 1 + (k / 2) % 2, 2, 2};
      ctx.g = g;
      ctx.phi_in = detail::random_density(g.p * g.q * g.r, s, detail::stream(6, k, 0));
      Dims in_a(n, 2), in_b(n, 2);
      in_a.push_back(g.p);
      in_b.push_back(g.q);
      const Mat m1 = random_adjoint_choi(in_a, {g.a}, s, detail::stream(6, k, 1)).j;
      const Mat n1 = random_adjoint_choi(in_b, {g.b}, s, detail::stream(6, k, 2)).j;
      std::vector<int> H;
      for (int i = 0; i < n; ++i)
        if (rng() % 2) H.push_back(i);
      CorrelationEvaluator ev_full(ctx.phi_in, g, prof.psi, 2, 2, n);
      CorrelationEvaluator ev_h(ctx.phi_in, g, prof.psi, 2, 2, static_cast<int>(H.size()));
      const auto t1 = ev_full.table(m1, n1);
      const auto ot = detail::oracle_table(ctx.phi_in, g, prof, n, m1, n1);
      fwd_oracle = std::max(fwd_oracle, detail::max_diff(t1.v, ot));
      const auto res = step_invariance(m1, n1, n, H, ctx, t1, ev_h, 2);
      for (const auto& c : res.report.checks)
        if (c.name == "slice_norm_identity") fwd_norm = std::max(fwd_norm, c.measured);
      fwd_table = std::max(fwd_table, detail::max_diff(res.report.table.v, ot));
    }

    // Backward: a random multilinear pair on h copies and V variables.
    {
      const int V = 1 + k % 3, h = V == 3 ? 0 : (k / 3) % 2;
      GameDims g{1, 1, 1 + (k / 2) % 2, 2, 2};
      ctx.g = g;
      ctx.phi_in = detail::random_density(g.r, s, detail::stream(6, k, 3));
      JointRandomOperatorPair pair;
      pair.rho = prof.rho;
      Dims od(h, 2);
      od.push_back(1);
      od.push_back(2);
      pair.m.op_dims = pair.n.op_dims = od;
      pair.m.n = pair.n.n = V;
      const long long dim = dim_product(od);
      int sub = 10;
      for (int mask = 0; mask < (1 << V); ++mask) {
        if (mask && rng() % 3 == 0) continue;
        std::vector<int> key(V);
        for (int v = 0; v < V; ++v) key[v] = (mask >> v) & 1;
        pair.m.add(key, random_hermitian(dim, s, detail::stream(6, k, sub++)));
        pair.n.add(key, random_hermitian(dim, s, detail::stream(6, k, sub++)));
      }
      CorrelationEvaluator ev_h(ctx.phi_in, g, prof.psi, 2, 2, h);
      const auto res = step_invariance_back(pair, ctx, ev_h, McResult{}, McResult{}, 2, 0.1);
      for (const auto& c : res.report.checks)
        if (c.name == "slice_norm_identity") back_norm = std::max(back_norm, c.measured);
      // Analytic side from the oracle: Σ_σ ρ^{|σ|} t(M_σ, N_σ) on h copies.
      std::vector<double> analytic;
      for (const auto& [key, mm] : pair.m.terms) {
        const int deg = abs_degree(key);
        const auto t = detail::oracle_table(ctx.phi_in, g, prof, h, mm, pair.n.terms.at(key));
        if (analytic.empty()) analytic.assign(t.size(), 0.0);
        for (size_t e = 0; e < t.size(); ++e) analytic[e] += std::pow(prof.rho, deg) * t[e];
      }
      const auto dense = detail::oracle_table(ctx.phi_in, g, prof, res.copies, res.m6, res.n6);
      back_table = std::max(back_table, detail::max_diff(res.report.table.v, analytic));
      back_oracle = std::max(back_oracle, detail::max_diff(dense, analytic));
    }
  }
  r.seconds = sw.seconds();
  r.metrics = {{"forward_norm_residual", fwd_norm},  {"forward_table_residual", fwd_table},
               {"forward_library_vs_oracle", fwd_oracle}, {"back_norm_residual", back_norm},
               {"back_table_residual", back_table},  {"back_dense_vs_analytic", back_oracle}};
  r.pass = fwd_norm <= 1e-10 && fwd_table <= 1e-10 && fwd_oracle <= 1e-10 && back_norm <= 1e-10 &&
           back_table <= 1e-10 && back_oracle <= 1e-10 && r.seconds < r.limit_seconds;
  return r;
}

// 7 ------------------------------------------------------------------------

inline CriterionResult hypercontractivity(std::uint64_t seed, long long samples = 100000) {
  auto r = detail::make_result(7, "hypercontractivity", 300);
  detail::Stopwatch sw;
  GaussianSampler s(seed);
  std::mt19937_64 rng(seed ^ 0x77);
  int violations = 0;
  double worst_ratio = 0;
  for (int k = 0; k < 100; ++k) {
    const int h = 1 + k % 2, nvars = 2 + k % 3;
    const int p = h == 2 ? 1 : 2, a = 2;
    RandomOperator op;
    op.op_dims = Dims(h, 2);
    op.op_dims.push_back(p);
    op.op_dims.push_back(a);
    op.n = nvars;
    const Dims sd(h, 2);
    const auto sb = default_bases(sd);
    const long long ds = dim_product(sd), dpa = static_cast<long long>(p) * a;
    int sub = 0, d = 0;
    for (int mask = 0; mask < (1 << nvars); ++mask) {
      const int deg = __builtin_popcount(static_cast<unsigned>(mask));
      if (deg > 4 || rng() % 2) continue;
      std::vector<int> key(nvars);
      for (int v = 0; v < nvars; ++v) key[v] = (mask >> v) & 1;
      Mat term = Mat::Zero(ds * dpa, ds * dpa);
      for (long long si = 0; si < ds * ds; ++si) {
        const auto sig = unflatten_sigma(si, sd);
        const int ss = support_size(sig);
        if (deg + ss > 4 || rng() % 2) continue;
        d = std::max(d, deg + ss);
        Vec e = Vec::Zero(ds * ds);
        e(si) = 1;
        term += kron(fourier_synthesize_vector(e, sd, sb), random_hermitian(dpa, s, detail::stream(7, k, sub++)));
      }
      op.add(key, term);
    }
    if (op.terms.empty()) op.add(std::vector<int>(nvars, 0), kron(Mat::Identity(ds, ds), Mat::Identity(dpa, dpa)));
    const auto mom = random_operator_moments(op, s, samples, detail::stream(7, k, 1000));
    const double rhs = std::pow(3.0, d / 2.0) * std::pow(p, 1.75) * std::pow(a, 1.75) * std::pow(2.0, d / 4.0) *
                       std::sqrt(mom.l2_sq_exact);
    const double rhs4 = std::pow(rhs, 4);
    worst_ratio = std::max(worst_ratio, std::pow(mom.p4.mean, 0.25) / rhs);
    if (mom.p4.mean - 3 * mom.p4.std_error > rhs4) ++violations;
  }
  r.seconds = sw.seconds();
  r.metrics = {{"violations", violations}, {"max_lhs_over_rhs", worst_ratio}, {"samples", samples}};
  r.pass = violations == 0 && r.seconds < r.limit_seconds;
  return r;
}

// 8 ------------------------------------------------------------------------

inline CriterionResult mean_variance(std::uint64_t seed, long long inner = 20000) {
  auto r = detail::make_result(8, "mean_variance", 600);
  detail::Stopwatch sw;
  GaussianSampler s(seed);
  std::mt19937_64 rng(seed ^ 0x88);
  const int n = 20, n0 = 200, draws = 50;
  const double delta = 0.1;
  const auto prof = depolarized_mes(2, 0.25);
  const GameDims g{1, 1, 1, 2, 2};
  const Mat phi_in = Mat::Identity(1, 1);
  JointRandomOperatorPair pair;
  pair.rho = prof.rho;
  pair.m.op_dims = pair.n.op_dims = Dims{2, 1, 2};
  pair.m.n = pair.n.n = n;
  std::vector<std::vector<int>> keys{std::vector<int>(n, 0)};
  while (keys.size() < 10) {
    std::vector<int> key(n, 0);
    const int deg = 1 + static_cast<int>(rng() % 2);
    for (int j = 0; j < deg; ++j) key[rng() % n] = 1;
    keys.push_back(key);
  }
  int sub = 0;
  for (const auto& key : keys) {
    pair.m.add(key, random_hermitian(4, s, detail::stream(8, 0, sub++)));
    pair.n.add(key, random_hermitian(4, s, detail::stream(8, 0, sub++)));
  }
  const double sm = std::sqrt(pair.m.l2_sq()), sn = std::sqrt(pair.n.l2_sq());
  for (auto& [k, m] : pair.m.terms) m /= sm;
  for (auto& [k, m] : pair.n.terms) m /= sn;

  CorrelationEvaluator ev(phi_in, g, prof.psi, 2, 2, 1);
  const auto gval = random_pair_table(pair, ev);
  std::vector<double> analytic;
  for (const auto& [key, mm] : pair.m.terms) {
    const auto t = detail::oracle_table(phi_in, g, prof, 1, mm, pair.n.terms.at(key));
    if (analytic.empty()) analytic.assign(t.size(), 0.0);
    for (size_t e = 0; e < t.size(); ++e) analytic[e] += std::pow(prof.rho, abs_degree(key)) * t[e];
  }
  const double gval_vs_oracle = detail::max_diff(gval.v, analytic);

  const size_t entries = gval.v.size();
  std::vector<McAccumulator> acc(entries);
  std::vector<std::vector<double>> vals(entries);
  for (int gi = 0; gi < draws; ++gi) {
    RMat G(n, n0);
    for (int i = 0; i < n; ++i) G.row(i) = s.normals(detail::stream(8, 1 + gi), n0, static_cast<std::uint64_t>(i) * n0).transpose();
    ReducedPair rp{pair, G, n0};
    const auto rc = reduced_correlation(rp, ev, s, inner, detail::stream(8, 1000 + gi));
    for (size_t e = 0; e < entries; ++e) {
      acc[e].add(rc.mean.v[e]);
      vals[e].push_back(rc.mean.v[e]);
    }
  }
  double worst_mean = -INFINITY, worst_var = -INFINITY, max_mean_dev = 0, max_var = 0;
  for (size_t e = 0; e < entries; ++e) {
    const auto res = acc[e].result();
    const double dev = std::abs(res.mean - gval.v[e]);
    max_mean_dev = std::max(max_mean_dev, dev);
    worst_mean = std::max(worst_mean, dev - (delta + 3 * res.std_error));
    // Sample variance of the per-G estimates; includes the inner Monte Carlo noise, so it over-estimates Var_G F.
    const double var = res.std_error * res.std_error * draws;
    const double var_se = var * std::sqrt(2.0 / (draws - 1));
    max_var = std::max(max_var, var);
    worst_var = std::max(worst_var, var - (delta + 3 * var_se));
  }
  r.seconds = sw.seconds();
  r.metrics = {{"max_mean_deviation", max_mean_dev}, {"max_variance", max_var},
               {"mean_excess", worst_mean},          {"variance_excess", worst_var},
               {"gaussian_value_vs_oracle", gval_vs_oracle}, {"inner_samples", inner},
               {"draws", draws}, {"delta", delta}};
  r.pass = worst_mean <= 0 && worst_var <= 0 && gval_vs_oracle <= 1e-10 && r.seconds < r.limit_seconds;
  return r;
}

// 9 ------------------------------------------------------------------------

inline CriterionResult smoothing_lemmas(std::uint64_t seed) {
  auto r = detail::make_result(9, "smoothing_lemmas", 60);
  detail::Stopwatch sw;
  GaussianSampler s(seed);
  std::mt19937_64 rng(seed ^ 0x99);
  std::uniform_real_distribution<double> ud(0.3, 0.99);
  int ts_viol = 0, cut_viol = 0;
  double ts_ratio = 0, cut_ratio = 0;
  for (int k = 0; k < 100; ++k) {
    const double eps = k % 2 ? 0.5 : 0.25;
    const auto prof = depolarized_mes(2, eps);
    const int n = 1 + k % 4, d = 1 + (k / 4) % 3;
    const GameDims g{n <= 2 ? 1 + (k / 3) % 2 : 1, n <= 2 ? 1 + (k / 7) % 2 : 1, 1 + (k / 2) % 2, 2, 2};
    const Mat phi_in = detail::random_density(g.p * g.q * g.r, s, detail::stream(9, k));
    Dims ia(n, 2), ib(n, 2);
    ia.push_back(g.p);
    ia.push_back(g.a);
    ib.push_back(g.q);
    ib.push_back(g.b);
    const Mat m = random_adjoint_choi(Dims(ia.begin(), ia.end() - 1), {g.a}, s, detail::stream(9, k, 1)).j;
    const Mat nn = random_adjoint_choi(Dims(ib.begin(), ib.end() - 1), {g.b}, s, detail::stream(9, k, 2)).j;
    const double gamma = ud(rng);
    std::vector<int> targets(n);
    for (int i = 0; i < n; ++i) targets[i] = i;
    std::vector<bool> mask(n + 2, false);
    for (int i = 0; i < n; ++i) mask[i] = true;
    const Mat mp = depolarize(m, ia, gamma, targets), np = depolarize(nn, ib, gamma, targets);
    const Mat mc = truncate_degree(mp, ia, d, mask, default_bases(ia)).first;
    const Mat nc = truncate_degree(np, ib, d, mask, default_bases(ib)).first;

    const long long dx = (1LL << n) * g.p, dy = (1LL << n) * g.q;
    const auto t0 = detail::oracle_table(phi_in, g, prof, n, m, nn);
    const auto tm = detail::oracle_table(phi_in, g, prof, n, mp, np);
    const auto t1 = detail::oracle_table(phi_in, g, prof, n, mc, nc);
    const auto at = detail::normalized_basis(g.a), bt = detail::normalized_basis(g.b);
    auto norms = [](const Mat& j, long long dxx, int aa, const std::vector<Mat>& basis) {
      std::vector<double> v;
      for (const auto& x : basis) v.push_back(std::sqrt(oracle::nsq(oracle::adjoint_apply(j, dxx, aa, x))));
      return v;
    };
    const auto ma = norms(m, dx, g.a, at), nb = norms(nn, dy, g.b, bt);
    const auto ma2 = norms(mp, dx, g.a, at), nb2 = norms(np, dy, g.b, bt);
    const double pq = std::sqrt(static_cast<double>(g.p) * g.q);
    const double eg = tsmooth_epsilon(gamma, prof.rho), rd = std::pow(prof.rho, d);
    const int nr = g.r * g.r, nbb = g.b * g.b;
    for (size_t e = 0; e < t0.size(); ++e) {
      const int ai = static_cast<int>(e) / (nbb * nr), bi = (static_cast<int>(e) / nr) % nbb;
      const double l1 = std::abs(t0[e] - tm[e]), r1 = eg * pq * ma[ai] * nb[bi];
      const double l2 = std::abs(tm[e] - t1[e]), r2 = rd * pq * ma2[ai] * nb2[bi];
      if (l1 > r1 + 1e-12) ++ts_viol;
      if (l2 > r2 + 1e-12) ++cut_viol;
      if (r1 > 0) ts_ratio = std::max(ts_ratio, l1 / r1);
      if (r2 > 0) cut_ratio = std::max(cut_ratio, l2 / r2);
    }
  }
  r.seconds = sw.seconds();
  r.metrics = {{"tsmooth_violations", ts_viol}, {"cutoff_violations", cut_viol},
               {"tsmooth_max_ratio", ts_ratio}, {"cutoff_max_ratio", cut_ratio}};
  r.pass = ts_viol == 0 && cut_viol == 0 && r.seconds < r.limit_seconds;
  return r;
}

// 10 -----------------------------------------------------------------------

inline CriterionResult end_to_end(std::uint64_t seed, const std::string& data_dir) {
  auto r = detail::make_result(10, "end_to_end", 600);
  detail::Stopwatch sw;
  const auto game = game_from_json(read_json_file(data_dir + "/demo_game.json"));
  const json sj = read_json_file(data_dir + "/demo_strategy.json");
  const auto st = strategy_from_json(sj);
  const auto prof = state_from_json(sj.at("state"));
  auto cfg = load_config(data_dir + "/demo_config.toml");
  cfg.params.seed = seed;
  const auto cmp = compare_compression(game, prof, st, cfg.params);
  const auto& res = cmp.pipeline;
  const auto ca = is_cptp(res.alice, 1e-9), cb = is_cptp(res.bob, 1e-9);

  auto oracle_value = [&](const Strategy& x) {
    const Mat omega = oracle::joint_state(game.phi_in, game.dims.p, game.dims.q, game.dims.r, prof.psi, prof.s, prof.t,
                                          x.copies);
    const long long dx = x.alice.in_dim(), dy = x.bob.in_dim();
    return oracle::winning_probability(omega, x.alice.j, dx, game.dims.a, x.bob.j, dy, game.dims.b, game.dims.r,
                                       game.m_win);
  };
  const Strategy after{res.copies, res.alice, res.bob};
  const double vb = oracle_value(st), va = oracle_value(after);
  const double value_vs_oracle = std::max(std::abs(vb - cmp.value_before), std::abs(va - cmp.value_after));
  const auto tb = detail::oracle_table(game.phi_in, game.dims, prof, st.copies, st.alice.j, st.bob.j);
  const auto ta = detail::oracle_table(game.phi_in, game.dims, prof, res.copies, res.alice.j, res.bob.j);
  const double table_vs_oracle = std::max(detail::max_diff(tb, cmp.before.v), detail::max_diff(ta, cmp.after.v));
  const double abr = static_cast<double>(game.dims.a) * game.dims.b * game.dims.r;
  const double agg = std::pow(abr, 1.5) * detail::max_diff(ta, tb);
  const bool aggregation = std::abs(vb - va) <= agg + 1e-9;
  r.seconds = sw.seconds();
  r.metrics = {{"copies", res.copies},
               {"alice_cptp", cptp_to_json(ca)},
               {"bob_cptp", cptp_to_json(cb)},
               {"ledger", ledger_to_json(res.ledger)},
               {"value_before", vb},
               {"value_after", va},
               {"aggregation_bound", agg},
               {"value_vs_oracle", value_vs_oracle},
               {"table_vs_oracle", table_vs_oracle}};
  r.pass = ca.verdict && cb.verdict && res.ledger.reconciled && res.ledger.within_budget && aggregation &&
           cmp.aggregation_holds && value_vs_oracle <= 1e-10 && table_vs_oracle <= 1e-10 && r.seconds < r.limit_seconds;
  return r;
}

// 11 -----------------------------------------------------------------------

/// @brief A classical game embedded as a fully quantum one: the referee register holds (x, y).
inline FullyQuantumGame classical_embedding(const std::vector<double>& pi, const std::vector<double>& v, int p, int q,
                                            int a, int b) {
  FullyQuantumGame game;
  game.dims = {p, q, p * q, a, b};
  const int r = p * q;
  game.phi_in = Mat::Zero(p * q * r, p * q * r);
  game.m_win = Mat::Zero(a * b * r, a * b * r);
  for (int x = 0; x < p; ++x)
    for (int y = 0; y < q; ++y) {
      const int i = (x * q + y) * r + (x * q + y);
      game.phi_in(i, i) = pi[x * q + y];
      for (int fa = 0; fa < a; ++fa)
        for (int gb = 0; gb < b; ++gb) {
          const int o = (fa * b + gb) * r + (x * q + y);
          game.m_win(o, o) = v[((fa * b + gb) * p + x) * q + y];
        }
    }
  return game;
}

inline CriterionResult game_optimization(std::uint64_t seed) {
  auto r = detail::make_result(11, "game_optimization", 300);
  detail::Stopwatch sw;
  std::mt19937_64 rng(seed ^ 0xbb);
  std::uniform_real_distribution<double> ud(0.1, 1.0);
  const int p = 2, q = 2, a = 2, b = 2;
  std::vector<double> pi(p * q), v(a * b * p * q);
  double tot = 0;
  for (auto& x : pi) tot += (x = ud(rng));
  for (auto& x : pi) x /= tot;
  for (auto& x : v) x = static_cast<double>(rng() % 2);
  const auto game = classical_embedding(pi, v, p, q, a, b);
  const auto prof = depolarized_mes(2, 0.25);
  SeesawOptions opt;
  opt.restarts = 32;
  opt.seed = seed;
  const auto [st, rep] = optimize_value_seesaw(game, prof, 0, opt);
  const double classical = oracle::classical_value(pi, v, p, q, a, b);
  const double seesaw_gap = std::abs(rep.value - classical);

  FullyQuantumGame g00;
  g00.dims = {1, 1, 1, 2, 2};
  g00.phi_in = Mat::Identity(1, 1);
  g00.m_win = Mat::Zero(4, 4);
  g00.m_win(0, 0) = 1;
  const auto bf = brute_force_value(g00, prof, 0, 1e-2);
  const bool contains = bf.lower <= 1 + 1e-12 && bf.upper >= 1 - 1e-12;
  r.seconds = sw.seconds();
  r.metrics = {{"seesaw_value", rep.value},        {"classical_value", classical}, {"seesaw_gap", seesaw_gap},
               {"brute_force", value_report_to_json(bf)}};
  r.pass = seesaw_gap <= 1e-6 && contains && bf.radius <= 1e-2 && r.seconds < r.limit_seconds;
  return r;
}

// 12 -----------------------------------------------------------------------

inline CriterionResult bound_determinism(const std::string& data_dir) {
  auto r = detail::make_result(12, "bound_determinism", 60);
  detail::Stopwatch sw;
  const std::string a = bound_to_json(compute_bound(toy_preset())).dump(2);
  const std::string b = bound_to_json(compute_bound(toy_preset())).dump(2);
  std::string golden;
  bool golden_ok = false;
  try {
    golden = read_file(data_dir + "/toy_bound.json");
    while (!golden.empty() && (golden.back() == '\n' || golden.back() == '\r')) golden.pop_back();
    golden_ok = golden == a;
  } catch (const std::exception&) {
    golden_ok = false;
  }
  r.seconds = sw.seconds();
  r.metrics = {{"repeat_identical", a == b}, {"matches_golden", golden_ok}, {"bytes", a.size()}};
  r.pass = a == b && golden_ok && r.seconds < r.limit_seconds;
  return r;
}

// ---------------------------------------------------------------------------

inline constexpr int kCriteria = 12;

inline CriterionResult run_criterion(int id, std::uint64_t seed, const std::string& data_dir) {
  if (id < 1 || id > kCriteria) throw DomainError("selftest: unknown criterion " + std::to_string(id));
  CriterionResult out;
  try {
    switch (id) {
      case 1: return fourier_foundation(seed);
      case 2: return depolarizing(seed);
      case 3: return maximal_correlation_check(seed);
      case 4: return choi_cptp(seed);
      case 5: return rounding_lemma(seed);
      case 6: return invariance_identities(seed);
      case 7: return hypercontractivity(seed);
      case 8: return mean_variance(seed);
      case 9: return smoothing_lemmas(seed);
      case 10: return end_to_end(seed, data_dir);
      case 11: return game_optimization(seed);
      case 12: return bound_determinism(data_dir);
    }
  } catch (const std::exception& e) {
    out.id = id;
    out.name = "criterion_" + std::to_string(id);
    out.pass = false;
    out.detail = e.what();
  }
  return out;
}

}  // namespace mesc::selftest
