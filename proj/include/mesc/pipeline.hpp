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

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mesc/correlation.hpp"
#include "mesc/params.hpp"
#include "mesc/rounding.hpp"

namespace mesc {

/// @brief One two-sided inequality audit: measured ≤ bound + slack.
struct BoundCheck {
  std::string name;
  double measured = 0;
  double bound = 0;
  double slack = 0;  // Monte Carlo allowance (3 standard errors) or roundoff
  bool pass = false;
  bool certified = true;  // false when the bound constant or parameters are desk-scale stand-ins
};

struct StageReport {
  std::string stage;
  std::vector<BoundCheck> checks;
  std::map<std::string, double> values;
  CorrelationTable table;  // correlation table after this stage
  double table_se = 0;     // largest standard error of `table` entries (0 when exact)
  bool measured_only = false;
  std::vector<StageReport> attempts;

  BoundCheck& check(const std::string& name, double measured, double bound, double slack = 0, bool certified = true) {
    BoundCheck c{name, measured, bound, slack, measured <= bound + slack, certified};
    checks.push_back(c);
    return checks.back();
  }
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.pass; });
  }
};

/// @brief Raised when a stage cannot produce an acceptable output; carries its attempt reports.
struct StageFailure : std::runtime_error {
  StageFailure(const std::string& what, StageReport r) : std::runtime_error(what), report(std::move(r)) {}
  StageReport report;
};

/// @brief Everything shared by the stages.
struct PipelineContext {
  GameDims g;
  Mat phi_in;
  NoisyMesProfile profile;
  PipelineParams params;
  GaussianSampler sampler;
};

// Stream ids keep Monte Carlo draws of different stages independent.
inline constexpr std::uint64_t kStreamInvariance = 1ULL << 40;
inline constexpr std::uint64_t kStreamReduce = 2ULL << 40;
inline constexpr std::uint64_t kStreamSmoothRandom = 3ULL << 40;
inline constexpr std::uint64_t kStreamMultilinear = 4ULL << 40;
inline constexpr std::uint64_t kStreamBack = 5ULL << 40;
inline constexpr std::uint64_t kAttemptStride = 1ULL << 32;

namespace detail {

inline Dims player_dims(int copies, int site, int in, int out) {
  Dims d(copies, site);
  d.push_back(in);
  d.push_back(out);
  return d;
}

inline long long ipow_ll(long long b, int e) {
  long long r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

/// @brief |||M_a|||₂ for every a, normalized on the non-answer systems.
inline std::vector<double> answer_slice_norms(const Mat& m, long long dx, int a) {
  std::vector<double> out;
  for (const auto& ma : CorrelationEvaluator::a_slices(m, dx, a)) out.push_back(nnorm2(ma));
  return out;
}

/// @brief max |M_0 − I/√a| entrywise.
inline double identity_slice_residual(const Mat& m, long long dx, int a) {
  Mat m0 = contract_last(m, dx, a, Mat::Identity(a, a) / std::sqrt(static_cast<double>(a)));
  return (m0 - Mat::Identity(dx, dx) / std::sqrt(static_cast<double>(a))).cwiseAbs().maxCoeff();
}

/// @brief |||M_{p,a}|||₂² for every (p,a) of an operator on [S^k, P, A].
inline std::vector<double> pa_norms_sq(const Mat& m, const Dims& s_dims, int p, int a) {
  auto sl = slice(m, s_dims, p, a);
  std::vector<double> out;
  for (const auto& row : sl.m_pa)
    for (const auto& x : row) out.push_back(nnorm2_sq(x));
  return out;
}

/// @brief max_v Σ_{σ ∋ v} |||M_σ|||₂²: the regularity level of a multilinear random operator.
inline double max_variable_influence(const RandomOperator& r) {
  std::vector<double> inf(r.n, 0.0);
  for (const auto& [k, m] : r.terms)
    for (int v = 0; v < r.n; ++v)
      if (k[v]) inf[v] += nnorm2_sq(m);
  return inf.empty() ? 0.0 : *std::max_element(inf.begin(), inf.end());
}

inline double max_abs_diff(const std::vector<double>& x, const std::vector<double>& y) {
  double m = 0;
  for (size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

/// @brief Σ_σ |||(M_σ)_{p,a}|||₂² for every (p,a).
inline std::vector<double> random_pa_norms_sq(const RandomOperator& r, int p, int a) {
  Dims s_dims(r.op_dims.begin(), r.op_dims.end() - 2);
  std::vector<double> tot(static_cast<size_t>(p) * p * a * a, 0.0);
  for (const auto& [k, m] : r.terms) {
    auto v = pa_norms_sq(m, s_dims, p, a);
    for (size_t i = 0; i < v.size(); ++i) tot[i] += v[i];
  }
  return tot;
}

/// @brief Σ_σ |||(M_σ)_a|||₂² for every a.
inline std::vector<double> random_a_norms_sq(const RandomOperator& r, int a) {
  const long long dx = r.op_dim() / a;
  std::vector<double> tot(static_cast<size_t>(a) * a, 0.0);
  for (const auto& [k, m] : r.terms) {
    auto v = answer_slice_norms(m, dx, a);
    for (size_t i = 0; i < v.size(); ++i) tot[i] += v[i] * v[i];
  }
  return tot;
}

/// @brief Largest deviation of the a=0 slice of a random operator from I/√a (constant term), other terms zero.
inline double random_identity_slice_residual(const RandomOperator& r, int a) {
  const long long dx = r.op_dim() / a;
  double worst = 0;
  bool saw_const = false;
  for (const auto& [k, m] : r.terms) {
    Mat m0 = contract_last(m, dx, a, Mat::Identity(a, a) / std::sqrt(static_cast<double>(a)));
    if (abs_degree(k) == 0) {
      saw_const = true;
      worst = std::max(worst, (m0 - Mat::Identity(dx, dx) / std::sqrt(static_cast<double>(a))).cwiseAbs().maxCoeff());
    } else {
      worst = std::max(worst, m0.cwiseAbs().maxCoeff());
    }
  }
  if (!saw_const) worst = std::max(worst, 1.0 / std::sqrt(static_cast<double>(a)));
  return worst;
}

inline std::vector<StandardBasis> op_bases(const StandardBasis& site, int copies, int in, int out) {
  std::vector<StandardBasis> b(copies, site);
  b.push_back(make_standard_basis(in));
  b.push_back(make_standard_basis(out));
  return b;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage 1: smoothing.

struct SmoothingAudit {
  BoundCheck tsmooth, cutoff;
};

/// @brief Checks the two halves of the smoothing argument entry by entry:
/// |t(M,N) − t(Δ_γM,Δ_γN)| ≤ ε_γ √(pq) |||M_a||| |||N_b||| with ε_γ = sup_d ρ^d(1−γ^{2d}), and
/// |t(M',N') − t(M'^{≤d},N'^{≤d})| ≤ ρ^d √(pq) |||M'_a||| |||N'_b|||.
inline SmoothingAudit audit_smoothing(const Mat& m, const Mat& n, const Mat& m_noisy, const Mat& n_noisy,
                                      const Mat& m_cut, const Mat& n_cut, const CorrelationEvaluator& ev, double gamma,
                                      double rho, int d) {
  const auto& g = ev.dims();
  const double pq = std::sqrt(static_cast<double>(g.p) * g.q);
  auto t0 = ev.table(m, n), tm = ev.table(m_noisy, n_noisy), t1 = ev.table(m_cut, n_cut);
  auto ma = detail::answer_slice_norms(m, ev.alice_dim(), g.a);
  auto nb = detail::answer_slice_norms(n, ev.bob_dim(), g.b);
  auto ma2 = detail::answer_slice_norms(m_noisy, ev.alice_dim(), g.a);
  auto nb2 = detail::answer_slice_norms(n_noisy, ev.bob_dim(), g.b);
  const double eps = tsmooth_epsilon(gamma, rho);
  const double rd = std::pow(rho, d);
  SmoothingAudit out;
  double worst_t = -INFINITY, worst_c = -INFINITY;
  out.tsmooth = {"tsmooth", 0, 0, 1e-12, true, true};
  out.cutoff = {"cutoff", 0, 0, 1e-12, true, true};
  for (int a = 0; a < t0.na; ++a)
    for (int b = 0; b < t0.nb; ++b)
      for (int r = 0; r < t0.nr; ++r) {
        const double l1 = std::abs(t0.at(a, b, r) - tm.at(a, b, r));
        const double r1 = eps * pq * ma[a] * nb[b];
        if (l1 - r1 > worst_t) {
          worst_t = l1 - r1;
          out.tsmooth.measured = l1;
          out.tsmooth.bound = r1;
        }
        const double l2 = std::abs(tm.at(a, b, r) - t1.at(a, b, r));
        const double r2 = rd * pq * ma2[a] * nb2[b];
        if (l2 - r2 > worst_c) {
          worst_c = l2 - r2;
          out.cutoff.measured = l2;
          out.cutoff.bound = r2;
        }
      }
  out.tsmooth.pass = worst_t <= out.tsmooth.slack;
  out.cutoff.pass = worst_c <= out.cutoff.slack;
  return out;
}

struct SmoothResult {
  Mat m1, n1;
  StageReport report;
};

inline SmoothResult step_smooth(const ChoiMatrix& M, const ChoiMatrix& N, const PipelineContext& ctx,
                                const CorrelationEvaluator& ev, int d1, double gamma) {
  if (!is_cptp(M, 1e-6).verdict || !is_cptp(N, 1e-6).verdict)
    throw DomainError("step_smooth: inputs must be valid adjoint Choi matrices");
  const auto& g = ctx.g;
  const int n = static_cast<int>(M.in.size()) - 1;
  const Dims dm = M.all_dims(), dn = N.all_dims();
  std::vector<int> targets(n);
  std::iota(targets.begin(), targets.end(), 0);
  std::vector<bool> mask_m(dm.size(), false), mask_n(dn.size(), false);
  for (int i = 0; i < n; ++i) mask_m[i] = mask_n[i] = true;

  Mat mp = depolarize(M.j, dm, gamma, targets);
  Mat np = depolarize(N.j, dn, gamma, targets);
  SmoothResult out;
  out.m1 = truncate_degree(mp, dm, d1, mask_m, default_bases(dm)).first;
  out.n1 = truncate_degree(np, dn, d1, mask_n, default_bases(dn)).first;

  auto& rep = out.report;
  rep.stage = "smooth";
  const bool cert = !ctx.params.desk_scale();
  rep.values["gamma"] = gamma;
  rep.values["gamma_threshold"] = ctx.params.gamma_threshold;
  rep.values["d1"] = d1;
  auto t0 = ev.table(M.j, N.j);
  rep.table = ev.table(out.m1, out.n1);
  const double dev = rep.table.max_abs_diff(t0);
  rep.check("correlation_deviation", dev, ctx.params.delta, 1e-12, cert);

  auto audit = audit_smoothing(M.j, N.j, mp, np, out.m1, out.n1, ev, gamma, ctx.profile.rho, d1);
  rep.checks.push_back(audit.tsmooth);
  rep.checks.push_back(audit.cutoff);

  double worst_norm = 0;
  for (double v : detail::answer_slice_norms(out.m1, ev.alice_dim(), g.a)) worst_norm = std::max(worst_norm, v);
  for (double v : detail::answer_slice_norms(out.n1, ev.bob_dim(), g.b)) worst_norm = std::max(worst_norm, v);
  rep.check("answer_slice_norm", worst_norm, 1.0, 1e-12);

  const double zm = zeta_trace(out.m1) / static_cast<double>(detail::ipow_ll(ctx.profile.s, n));
  const double zn = zeta_trace(out.n1) / static_cast<double>(detail::ipow_ll(ctx.profile.t, n));
  rep.values["zeta_m"] = zm;
  rep.values["zeta_n"] = zn;
  rep.check("zeta_m_normalized", zm, ctx.params.delta, 1e-12, cert);
  rep.check("zeta_n_normalized", zn, ctx.params.delta, 1e-12, cert);

  const double r0 = std::max(detail::identity_slice_residual(out.m1, ev.alice_dim(), g.a),
                             detail::identity_slice_residual(out.n1, ev.bob_dim(), g.b));
  rep.check("identity_slice", r0, 1e-10);
  const int deg = std::max(degree(out.m1, dm, mask_m), degree(out.n1, dn, mask_n));
  rep.check("slice_degree", deg, d1);
  return out;
}

// ---------------------------------------------------------------------------
// Stage 2: regularization.

struct RegularizeResult {
  std::vector<int> H;
  StageReport report;
};

inline RegularizeResult step_regularize(const Mat& m1, const Mat& n1, int n, const PipelineContext& ctx, double theta,
                                        int d) {
  const auto& g = ctx.g;
  const Dims dm = detail::player_dims(n, ctx.profile.s, g.p, g.a);
  const Dims dn = detail::player_dims(n, ctx.profile.t, g.q, g.b);
  RegularizeResult out;
  auto& rep = out.report;
  rep.stage = "regularize";
  double tot_m = 0, tot_n = 0, worst_out = 0;
  for (int i = 0; i < n; ++i) {
    const double im = influence(m1, dm, i), in = influence(n1, dn, i);
    tot_m += im;
    tot_n += in;
    rep.values["inf_m_" + std::to_string(i)] = im;
    rep.values["inf_n_" + std::to_string(i)] = in;
    if (im > theta || in > theta)
      out.H.push_back(i);
    else
      worst_out = std::max({worst_out, im, in});
  }
  rep.values["h"] = static_cast<double>(out.H.size());
  rep.check("h_cardinality", static_cast<double>(out.H.size()), d * (g.a + g.b) / theta);
  rep.check("outside_influence", worst_out, theta);
  auto norm_sum = [](const std::vector<double>& v, int a) {
    double s = 0;
    for (double x : v) s += x * x;
    return s / a;
  };
  const double bm = d * norm_sum(detail::answer_slice_norms(m1, dim_product(dm) / g.a, g.a), g.a);
  const double bn = d * norm_sum(detail::answer_slice_norms(n1, dim_product(dn) / g.b, g.b), g.b);
  rep.check("total_influence_m", tot_m, bm, 1e-10);
  rep.check("total_influence_n", tot_n, bn, 1e-10);
  return out;
}

// ---------------------------------------------------------------------------
// Stage 3: invariance to random operators.

/// @brief Gaussian variable for (non-H coordinate, traceless index k ≥ 1, draw 0/1).
inline int invariance_var(int i_local, int k, int which, int kmax) { return ((i_local * kmax) + (k - 1)) * 2 + which; }

/// @brief Expands the non-H coordinates of an operator on [site^n, in, out] into Gaussian monomials.
inline RandomOperator expand_non_h(const Mat& m, int n, int site, int in, int out, const std::vector<int>& H,
                                   const StandardBasis& basis, int kmax, bool bob, const std::vector<double>& spectrum,
                                   double rho) {
  const Dims dims = detail::player_dims(n, site, in, out);
  std::vector<int> nonh = detail::complement(n, H);
  std::vector<int> perm = nonh;
  perm.insert(perm.end(), H.begin(), H.end());
  perm.push_back(n);
  perm.push_back(n + 1);
  Mat mp = permute_systems(m, dims, perm);
  const int k = static_cast<int>(nonh.size());
  const int h = static_cast<int>(H.size());
  const long long dx = detail::ipow_ll(site, k);
  const long long rest = detail::ipow_ll(site, h) * in * out;
  const int nvars = 2 * kmax * k;

  RandomOperator r;
  r.op_dims = detail::player_dims(h, site, in, out);
  r.n = nvars;
  const long long count = detail::ipow_ll(static_cast<long long>(site) * site, k);
  const int ss = site * site;
  for (long long flat = 0; flat < count; ++flat) {
    std::vector<int> sigma(k);
    long long f = flat;
    for (int j = k - 1; j >= 0; --j) {
      sigma[j] = static_cast<int>(f % ss);
      f /= ss;
    }
    Mat b = Mat::Identity(1, 1);
    for (int j = 0; j < k; ++j) b = kron(b, basis.elements[sigma[j]]);
    Mat x = contract_first(mp, dx, rest, b) / static_cast<double>(dx);
    if (x.cwiseAbs().maxCoeff() < kStructuralZero) continue;
    x = hermitian_part(x);
    if (!bob) {
      std::vector<int> key(nvars, 0);
      for (int j = 0; j < k; ++j)
        if (sigma[j]) key[invariance_var(j, sigma[j], 0, kmax)] = 1;
      r.add(key, x);
      continue;
    }
    // Bob: Π_j ((c/ρ) y_{v0} + √(1 − c²/ρ²) y_{v1}).
    std::vector<std::pair<std::vector<int>, double>> partial{{std::vector<int>(nvars, 0), 1.0}};
    for (int j = 0; j < k; ++j) {
      if (!sigma[j]) continue;
      const double c = sigma[j] < static_cast<int>(spectrum.size()) ? spectrum[sigma[j]] : 0.0;
      const double al = rho > 0 ? std::min(1.0, c / rho) : 0.0;
      const double be = std::sqrt(std::max(0.0, 1.0 - al * al));
      std::vector<std::pair<std::vector<int>, double>> next;
      for (const auto& [key, w] : partial) {
        if (al != 0.0) {
          auto k0 = key;
          k0[invariance_var(j, sigma[j], 0, kmax)] = 1;
          next.emplace_back(k0, w * al);
        }
        if (be != 0.0) {
          auto k1 = key;
          k1[invariance_var(j, sigma[j], 1, kmax)] = 1;
          next.emplace_back(k1, w * be);
        }
      }
      partial.swap(next);
    }
    for (const auto& [key, w] : partial) r.add(key, w * x);
  }
  r.prune();
  if (r.terms.empty()) r.add(std::vector<int>(nvars, 0), Mat::Zero(rest, rest));
  return r;
}

struct InvarianceResult {
  JointRandomOperatorPair pair;
  StageReport report;
};

inline InvarianceResult step_invariance(const Mat& m1, const Mat& n1, int n, const std::vector<int>& H,
                                        const PipelineContext& ctx, const CorrelationTable& t1,
                                        const CorrelationEvaluator& ev_h, int d) {
  for (size_t i = 0; i < H.size(); ++i) {
    if (H[i] < 0 || H[i] >= n || (i > 0 && H[i] <= H[i - 1])) throw DomainError("step_invariance: invalid index set H");
  }
  const auto& g = ctx.g;
  const auto& prof = ctx.profile;
  const int kmax = std::max(prof.s * prof.s, prof.t * prof.t) - 1;
  InvarianceResult out;
  out.pair.rho = prof.rho;
  out.pair.m = expand_non_h(m1, n, prof.s, g.p, g.a, H, prof.s_basis, kmax, false, prof.spectrum, prof.rho);
  out.pair.n = expand_non_h(n1, n, prof.t, g.q, g.b, H, prof.t_basis, kmax, true, prof.spectrum, prof.rho);

  auto& rep = out.report;
  rep.stage = "invariance";
  const int h = static_cast<int>(H.size());
  rep.values["variables"] = out.pair.m.n;
  const Dims sm(n, prof.s), st(n, prof.t);
  const double norm_res =
      std::max(detail::max_abs_diff(detail::random_pa_norms_sq(out.pair.m, g.p, g.a), detail::pa_norms_sq(m1, sm, g.p, g.a)),
               detail::max_abs_diff(detail::random_pa_norms_sq(out.pair.n, g.q, g.b), detail::pa_norms_sq(n1, st, g.q, g.b)));
  rep.check("slice_norm_identity", norm_res, 1e-12);
  rep.table = random_pair_table(out.pair, ev_h);
  rep.check("correlation_identity", rep.table.max_abs_diff(t1), 1e-10);

  const long long N = ctx.params.monte_carlo_N;
  auto zm = random_operator_zeta(out.pair.m, ctx.sampler, N, kStreamInvariance);
  auto zn = random_operator_zeta(out.pair.n, ctx.sampler, N, kStreamInvariance + kAttemptStride);
  const double shm = static_cast<double>(detail::ipow_ll(prof.s, h)), snm = static_cast<double>(detail::ipow_ll(prof.s, n));
  const double tht = static_cast<double>(detail::ipow_ll(prof.t, h)), tnt = static_cast<double>(detail::ipow_ll(prof.t, n));
  const double devm = std::abs(zm.mean / shm - zeta_trace(m1) / snm);
  const double devn = std::abs(zn.mean / tht - zeta_trace(n1) / tnt);
  const double theta = ctx.params.theta;
  auto ipb = [&](int pp, int aa, int site) {
    return std::pow(pp, 10.0 / 3.0) * std::pow(aa, 4.0) *
           std::pow(std::pow(3.0, d) * std::pow(site, d / 2.0) * std::sqrt(theta) * d, 2.0 / 3.0);
  };
  rep.values["zeta_m_mc"] = zm.mean;
  rep.values["zeta_n_mc"] = zn.mean;
  rep.check("zeta_deviation_m", devm, ipb(g.p, g.a, prof.s), 3 * zm.std_error / shm, false);
  rep.check("zeta_deviation_n", devn, ipb(g.q, g.b, prof.t), 3 * zn.std_error / tht, false);
  const double r0 = std::max(detail::random_identity_slice_residual(out.pair.m, g.a),
                             detail::random_identity_slice_residual(out.pair.n, g.b));
  rep.check("identity_slice", r0, 1e-10);
  return out;
}

// ---------------------------------------------------------------------------
// Stage 4: dimension reduction (lazy form z = Gx/‖x‖).

/// @brief Σ over perfect matchings of Π Gram(i_k, i_l) (Wick/Isserlis).
inline double wick_sum(const RMat& gram, std::vector<int>& idx) {
  if (idx.empty()) return 1.0;
  if (idx.size() & 1) return 0.0;
  const int first = idx[0];
  double total = 0;
  for (size_t j = 1; j < idx.size(); ++j) {
    const int other = idx[j];
    std::vector<int> rest;
    for (size_t k = 1; k < idx.size(); ++k)
      if (k != j) rest.push_back(idx[k]);
    total += gram(first, other) * wick_sum(gram, rest);
  }
  return total;
}

/// @brief E r^m for r ~ χ_{n0} and even m: n0(n0+2)…(n0+m−2).
inline double chi_even_moment(int n0, int m) {
  double v = 1.0;
  for (int j = 0; j < m; j += 2) v *= n0 + j;
  return v;
}

struct ReducedPair {
  JointRandomOperatorPair base;  // multilinear over n variables
  RMat G;                        // n × n0
  int n0 = 0;
};

inline std::vector<int> support_of(const std::vector<int>& key) {
  std::vector<int> s;
  for (size_t i = 0; i < key.size(); ++i)
    if (key[i]) s.push_back(static_cast<int>(i));
  return s;
}

/// @brief Exact E_x |||(𝐌^G)_{p,a}|||₂² for every (p,a).
inline std::vector<double> reduced_pa_norms_sq(const RandomOperator& r, const RMat& G, int n0, int p, int a) {
  Dims s_dims(r.op_dims.begin(), r.op_dims.end() - 2);
  RMat gram = G * G.transpose();
  std::vector<std::vector<int>> supp;
  std::vector<std::vector<Mat>> slices;
  for (const auto& [k, m] : r.terms) {
    supp.push_back(support_of(k));
    auto sl = slice(m, s_dims, p, a);
    std::vector<Mat> flat;
    for (const auto& row : sl.m_pa)
      for (const auto& x : row) flat.push_back(x);
    slices.push_back(flat);
  }
  std::vector<double> tot(static_cast<size_t>(p) * p * a * a, 0.0);
  for (size_t i = 0; i < supp.size(); ++i)
    for (size_t j = 0; j < supp.size(); ++j) {
      std::vector<int> idx = supp[i];
      idx.insert(idx.end(), supp[j].begin(), supp[j].end());
      if (idx.size() & 1) continue;
      const double w = wick_sum(gram, idx) / chi_even_moment(n0, static_cast<int>(idx.size()));
      if (w == 0.0) continue;
      for (size_t e = 0; e < tot.size(); ++e) {
        const Mat& x = slices[i][e];
        tot[e] += w * (x.adjoint() * slices[j][e]).trace().real() / static_cast<double>(x.rows());
      }
    }
  return tot;
}

/// @brief z = Gx/‖x‖.
inline Vec sphere_projection(const RMat& G, const Vec& x) {
  const double nx = x.norm();
  if (nx == 0.0) return Vec::Zero(G.rows());
  return G * x / nx;
}

inline double monomial_value(const std::vector<int>& supp, const Vec& z) {
  double v = 1.0;
  for (int i : supp) v *= z(i);
  return v;
}

struct ReducedCorrelation {
  CorrelationTable mean;
  double max_se = 0;
};

/// @brief Monte Carlo E_{x,y} table(𝐌^G(x), 𝐍^G(y)) with (x,y) ~ G_ρ^{⊗n0}.
inline ReducedCorrelation reduced_correlation(const ReducedPair& rp, const CorrelationEvaluator& ev,
                                              const GaussianSampler& sampler, long long samples,
                                              std::uint64_t stream) {
  const auto& g = ev.dims();
  std::vector<std::vector<int>> sm, sn;
  std::vector<const Mat*> mm, nn;
  for (const auto& [k, m] : rp.base.m.terms) {
    sm.push_back(support_of(k));
    mm.push_back(&m);
  }
  for (const auto& [k, m] : rp.base.n.terms) {
    sn.push_back(support_of(k));
    nn.push_back(&m);
  }
  const int entries = g.a * g.a * g.b * g.b * g.r * g.r;
  std::vector<RMat> K(entries, RMat::Zero(sm.size(), sn.size()));
  for (size_t i = 0; i < sm.size(); ++i)
    for (size_t j = 0; j < sn.size(); ++j) {
      auto t = ev.table(*mm[i], *nn[j]);
      for (int e = 0; e < entries; ++e) K[e](i, j) = t.v[e];
    }
  std::vector<McAccumulator> acc(entries);
  Vec u(sm.size()), v(sn.size());
  for (long long s = 0; s < samples; ++s) {
    auto [x, y] = sampler.correlated(stream + static_cast<std::uint64_t>(s), rp.n0, rp.base.rho);
    Vec zx = sphere_projection(rp.G, x), zy = sphere_projection(rp.G, y);
    for (size_t i = 0; i < sm.size(); ++i) u(i) = monomial_value(sm[i], zx);
    for (size_t j = 0; j < sn.size(); ++j) v(j) = monomial_value(sn[j], zy);
    for (int e = 0; e < entries; ++e) acc[e].add(u.dot(K[e] * v));
  }
  ReducedCorrelation out;
  out.mean = CorrelationTable(g.a * g.a, g.b * g.b, g.r * g.r);
  for (int e = 0; e < entries; ++e) {
    auto r = acc[e].result();
    out.mean.v[e] = r.mean;
    out.max_se = std::max(out.max_se, r.std_error);
  }
  return out;
}

/// @brief Monte Carlo E_x Tr ζ(𝐌^G(x)).
inline McResult reduced_zeta(const RandomOperator& r, const RMat& G, int n0, const GaussianSampler& sampler,
                             long long samples, std::uint64_t stream) {
  RandomOperatorEvaluator ev(r);
  McAccumulator acc;
  for (long long s = 0; s < samples; ++s)
    acc.add(zeta_trace(ev.evaluate(sphere_projection(G, sampler.normals(stream + static_cast<std::uint64_t>(s), n0)))));
  return acc.result();
}

struct DimReductionResult {
  ReducedPair pair;
  StageReport report;
  McResult zeta_m, zeta_n;  // E_x Tr ζ of the reduced operators
  std::vector<double> norms_m, norms_n;
};

inline DimReductionResult step_dimension_reduce(const JointRandomOperatorPair& pair, const PipelineContext& ctx,
                                                const CorrelationEvaluator& ev_h, const CorrelationTable& t3, int n0) {
  if (!pair.m.multilinear() || !pair.n.multilinear())
    throw DomainError("step_dimension_reduce: pair must be multilinear");
  const auto& g = ctx.g;
  const auto& P = ctx.params;
  DimReductionResult out;
  out.pair.base = pair;
  out.pair.n0 = n0;
  auto& rep = out.report;
  rep.stage = "dimension_reduce";
  const int n = pair.m.n;
  const auto base_m = detail::random_pa_norms_sq(pair.m, g.p, g.a);
  const auto base_n = detail::random_pa_norms_sq(pair.n, g.q, g.b);

  if (pair.m.degree() == 0 && pair.n.degree() == 0) {
    out.pair.G = RMat::Zero(n, n0);
    rep.table = t3;
    rep.values["retries"] = 0;
    rep.check("correlation_deviation", 0.0, P.delta);
    out.norms_m = base_m;
    out.norms_n = base_n;
    out.zeta_m = random_operator_zeta(pair.m, ctx.sampler, std::max<long long>(P.monte_carlo_N, 100));
    out.zeta_n = random_operator_zeta(pair.n, ctx.sampler, std::max<long long>(P.monte_carlo_N, 100));
    return out;
  }

  const long long N = P.monte_carlo_N;
  auto zg_m = random_operator_zeta(pair.m, ctx.sampler, N, kStreamReduce);
  auto zg_n = random_operator_zeta(pair.n, ctx.sampler, N, kStreamReduce + 1 * kAttemptStride);
  const double inv_alpha = 1.0 / P.alpha;
  for (int attempt = 0; attempt < P.max_retries; ++attempt) {
    StageReport ar;
    ar.stage = "dimension_reduce_attempt";
    ar.values["attempt"] = attempt;
    const std::uint64_t base = kStreamReduce + (4 + 4ULL * attempt) * kAttemptStride;
    RMat G(n, n0);
    for (int i = 0; i < n; ++i) {
      Vec row = ctx.sampler.normals(base, n0, static_cast<std::uint64_t>(i) * (n0 + (n0 & 1)));
      G.row(i) = row.transpose();
    }
    ReducedPair rp{pair, G, n0};
    auto nm = reduced_pa_norms_sq(pair.m, G, n0, g.p, g.a);
    auto nn = reduced_pa_norms_sq(pair.n, G, n0, g.q, g.b);
    double worst = -INFINITY, lhs = 0, rhs = 0;
    for (size_t e = 0; e < nm.size(); ++e)
      if (nm[e] - (1 + P.delta) * base_m[e] > worst) {
        worst = nm[e] - (1 + P.delta) * base_m[e];
        lhs = nm[e];
        rhs = (1 + P.delta) * base_m[e];
      }
    for (size_t e = 0; e < nn.size(); ++e)
      if (nn[e] - (1 + P.delta) * base_n[e] > worst) {
        worst = nn[e] - (1 + P.delta) * base_n[e];
        lhs = nn[e];
        rhs = (1 + P.delta) * base_n[e];
      }
    ar.check("norm_inflation", lhs, rhs, 1e-12, false);

    auto corr = reduced_correlation(rp, ev_h, ctx.sampler, N, base + kAttemptStride);
    ar.table = corr.mean;
    ar.table_se = corr.max_se;
    ar.check("correlation_deviation", corr.mean.max_abs_diff(t3), P.delta, 3 * corr.max_se, false);

    auto zm = reduced_zeta(pair.m, G, n0, ctx.sampler, N, base + 2 * kAttemptStride);
    auto zn = reduced_zeta(pair.n, G, n0, ctx.sampler, N, base + 3 * kAttemptStride);
    ar.values["zeta_m_reduced"] = zm.mean;
    ar.values["zeta_m_gaussian"] = zg_m.mean;
    ar.values["zeta_n_reduced"] = zn.mean;
    ar.values["zeta_n_gaussian"] = zg_n.mean;
    ar.check("zeta_inflation_m", zm.mean, inv_alpha * zg_m.mean, 3 * (zm.std_error + inv_alpha * zg_m.std_error), false);
    ar.check("zeta_inflation_n", zn.mean, inv_alpha * zg_n.mean, 3 * (zn.std_error + inv_alpha * zg_n.std_error), false);
    const double r0 = std::max(detail::random_identity_slice_residual(pair.m, g.a),
                               detail::random_identity_slice_residual(pair.n, g.b));
    ar.check("identity_slice", r0, 1e-10);

    const bool ok = ar.passed();
    rep.attempts.push_back(ar);
    if (ok) {
      out.pair = rp;
      rep.checks = ar.checks;
      rep.table = ar.table;
      rep.table_se = ar.table_se;
      rep.values = ar.values;
      rep.values["retries"] = attempt;
      rep.measured_only = true;
      out.zeta_m = zm;
      out.zeta_n = zn;
      out.norms_m = nm;
      out.norms_n = nn;
      return out;
    }
  }
  throw StageFailure("dimension reduction: retry cap exhausted", rep);
}

// ---------------------------------------------------------------------------
// Stage 5: smoothing the reduced random operators.

namespace detail {

using Sparse = std::vector<std::pair<int, int>>;  // (coordinate, exponent), sorted

inline Sparse to_sparse(const std::vector<int>& dense) {
  Sparse s;
  for (size_t i = 0; i < dense.size(); ++i)
    if (dense[i]) s.emplace_back(static_cast<int>(i), dense[i]);
  return s;
}

/// @brief E x^{γ+e} for standard Gaussian x, both exponent vectors sparse.
inline double joint_moment(const Sparse& a, const Sparse& b) {
  double v = 1.0;
  size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    int e;
    if (j >= b.size() || (i < a.size() && a[i].first < b[j].first)) {
      e = a[i++].second;
    } else if (i >= a.size() || b[j].first < a[i].first) {
      e = b[j++].second;
    } else {
      e = a[i++].second + b[j++].second;
    }
    if (e & 1) return 0.0;
    v *= gaussian_moment(e);
  }
  return v;
}

inline void enumerate_budget(int n0, int budget, int start, std::vector<int>& w, const std::function<void()>& f) {
  f();
  if (budget <= 0) return;
  for (int i = start; i < n0; ++i) {
    ++w[i];
    enumerate_budget(n0, budget - 1, i, w, f);
    --w[i];
  }
}

}  // namespace detail

/// @brief Hermite coefficients of x ↦ Π_{i∈S} (G_iᵀx)/‖x‖^{|S|} up to total degree d, using
/// E[f x^e] = (E r^{|e|} / E r^{k+|e|}) E[q(x) x^e] for the homogeneous numerator q.
inline std::map<std::vector<int>, double> sphere_monomial_hermite(const RMat& G, const std::vector<int>& S, int d) {
  const int n0 = static_cast<int>(G.cols());
  const int k = static_cast<int>(S.size());
  std::map<std::vector<int>, double> q{{std::vector<int>(n0, 0), 1.0}};
  for (int i : S) {
    std::map<std::vector<int>, double> next;
    for (const auto& [gam, c] : q)
      for (int l = 0; l < n0; ++l) {
        if (G(i, l) == 0.0) continue;
        auto g2 = gam;
        ++g2[l];
        next[g2] += c * G(i, l);
      }
    q.swap(next);
  }
  // Group numerator monomials by their odd-coordinate set.
  std::map<std::vector<int>, std::vector<std::pair<detail::Sparse, double>>> groups;
  for (const auto& [gam, c] : q) {
    std::vector<int> odd;
    for (int l = 0; l < n0; ++l)
      if (gam[l] & 1) odd.push_back(l);
    groups[odd].emplace_back(detail::to_sparse(gam), c);
  }
  std::map<std::vector<int>, double> out;
  std::vector<int> w(n0, 0);
  for (const auto& [odd, mons] : groups) {
    const int rem = d - static_cast<int>(odd.size());
    if (rem < 0) continue;
    detail::enumerate_budget(n0, rem / 2, 0, w, [&]() {
      std::vector<int> beta = w;
      for (int& x : beta) x *= 2;
      for (int l : odd) beta[l] += 1;
      // Expand H_β into monomials x^e with e ≤ β, e ≡ β (mod 2).
      detail::Sparse bs = detail::to_sparse(beta);
      double coeff = 0;
      std::vector<int> e(bs.size());
      for (size_t t = 0; t < bs.size(); ++t) e[t] = bs[t].second;
      while (true) {
        double hw = 1.0;
        int tot = 0;
        detail::Sparse es;
        for (size_t t = 0; t < bs.size(); ++t) {
          hw *= hermite_monomial_coeff(bs[t].second, e[t]);
          tot += e[t];
          if (e[t]) es.emplace_back(bs[t].first, e[t]);
        }
        if (hw != 0.0) {
          double mom = 0;
          for (const auto& [gs, c] : mons) mom += c * detail::joint_moment(gs, es);
          if (mom != 0.0) coeff += hw * mom * chi_moment(n0, tot) / chi_moment(n0, tot + k);
        }
        size_t t = 0;
        for (; t < bs.size(); ++t) {
          if (e[t] >= 2) {
            e[t] -= 2;
            break;
          }
          e[t] = bs[t].second;
        }
        if (t == bs.size()) break;
      }
      if (std::abs(coeff) > kStructuralZero) out[beta] += coeff;
    });
  }
  return out;
}

/// @brief U_ν then degree-d truncation of the lazy reduced operator, as an explicit Hermite random operator.
inline RandomOperator project_reduced(const RandomOperator& r, const RMat& G, int n0, double nu, int d) {
  RandomOperator out;
  out.op_dims = r.op_dims;
  out.n = n0;
  for (const auto& [k, m] : r.terms) {
    auto coeffs = sphere_monomial_hermite(G, support_of(k), d);
    for (const auto& [beta, c] : coeffs) out.add(beta, std::pow(nu, abs_degree(beta)) * c * m);
  }
  out.prune();
  if (out.terms.empty()) out.add(std::vector<int>(n0, 0), Mat::Zero(r.op_dim(), r.op_dim()));
  return out;
}

struct SmoothRandomResult {
  JointRandomOperatorPair pair;
  StageReport report;
  McResult zeta_m, zeta_n;
};

inline SmoothRandomResult step_smooth_random(const DimReductionResult& dr, const PipelineContext& ctx,
                                             const CorrelationEvaluator& ev_h, const CorrelationTable& t4, double t4_se,
                                             double nu, int d2) {
  const auto& g = ctx.g;
  const auto& P = ctx.params;
  const auto& rp = dr.pair;
  SmoothRandomResult out;
  out.pair.rho = rp.base.rho;
  out.pair.m = project_reduced(rp.base.m, rp.G, rp.n0, nu, d2);
  out.pair.n = project_reduced(rp.base.n, rp.G, rp.n0, nu, d2);
  auto& rep = out.report;
  rep.stage = "smooth_random";
  rep.values["nu"] = nu;
  rep.values["d2"] = d2;
  const bool cert = !P.desk_scale();
  double worst = -INFINITY, lhs = 0, rhs = 0;
  auto am = detail::random_pa_norms_sq(out.pair.m, g.p, g.a);
  auto an = detail::random_pa_norms_sq(out.pair.n, g.q, g.b);
  for (size_t e = 0; e < am.size(); ++e)
    if (am[e] - dr.norms_m[e] > worst) {
      worst = am[e] - dr.norms_m[e];
      lhs = am[e];
      rhs = dr.norms_m[e];
    }
  for (size_t e = 0; e < an.size(); ++e)
    if (an[e] - dr.norms_n[e] > worst) {
      worst = an[e] - dr.norms_n[e];
      lhs = an[e];
      rhs = dr.norms_n[e];
    }
  rep.check("norm_nonincrease", lhs, rhs, 1e-10);
  rep.table = random_pair_table(out.pair, ev_h);
  rep.check("correlation_deviation", rep.table.max_abs_diff(t4), P.delta, 3 * t4_se, cert);
  const long long N = P.monte_carlo_N;
  out.zeta_m = random_operator_zeta(out.pair.m, ctx.sampler, N, kStreamSmoothRandom);
  out.zeta_n = random_operator_zeta(out.pair.n, ctx.sampler, N, kStreamSmoothRandom + kAttemptStride);
  rep.values["zeta_m"] = out.zeta_m.mean;
  rep.values["zeta_n"] = out.zeta_n.mean;
  rep.check("zeta_increase_m", out.zeta_m.mean - dr.zeta_m.mean, P.delta, 3 * (out.zeta_m.std_error + dr.zeta_m.std_error),
            cert);
  rep.check("zeta_increase_n", out.zeta_n.mean - dr.zeta_n.mean, P.delta, 3 * (out.zeta_n.std_error + dr.zeta_n.std_error),
            cert);
  rep.check("degree", std::max(out.pair.m.degree(), out.pair.n.degree()), d2);
  const double r0 = std::max(detail::random_identity_slice_residual(out.pair.m, g.a),
                             detail::random_identity_slice_residual(out.pair.n, g.b));
  rep.check("identity_slice", r0, 1e-10);
  return out;
}

// ---------------------------------------------------------------------------
// Stage 6: multilinearization.

/// @brief Substitutes x_i → n₁^{-1/2} Σ_j z_{i n₁ + j} and keeps the multilinear part:
/// H_k(x_i) contributes √(k!) n₁^{-k/2} e_k(z^{(i)}).
inline RandomOperator multilinearize(const RandomOperator& r, int n1) {
  require(n1 >= 1, "multilinearize: n1 must be >= 1");
  RandomOperator out;
  out.op_dims = r.op_dims;
  out.n = r.n * n1;
  for (const auto& [beta, m] : r.terms) {
    bool vanishes = false;
    double scale = 1.0;
    for (int k : beta) {
      if (k > n1) vanishes = true;
      scale *= std::sqrt(std::tgamma(k + 1.0)) * std::pow(static_cast<double>(n1), -k / 2.0);
    }
    if (vanishes) continue;
    std::vector<std::vector<int>> keys{std::vector<int>(out.n, 0)};
    for (int i = 0; i < r.n; ++i) {
      const int k = beta[i];
      if (!k) continue;
      std::vector<std::vector<int>> next;
      std::vector<bool> pick(n1, false);
      std::fill(pick.begin(), pick.begin() + k, true);
      do {
        for (const auto& key : keys) {
          auto k2 = key;
          for (int j = 0; j < n1; ++j)
            if (pick[j]) k2[i * n1 + j] = 1;
          next.push_back(std::move(k2));
        }
      } while (std::prev_permutation(pick.begin(), pick.end()));
      keys.swap(next);
    }
    for (const auto& key : keys) out.add(key, scale * m);
  }
  out.prune();
  if (out.terms.empty()) out.add(std::vector<int>(out.n, 0), Mat::Zero(r.op_dim(), r.op_dim()));
  return out;
}

/// @brief Per coefficient polynomial m_τ (τ over the full operator basis): Inf_v(m_τ) for every variable.
inline std::vector<std::vector<double>> coefficient_influences(const RandomOperator& r,
                                                               const std::vector<StandardBasis>& bases) {
  std::vector<std::vector<double>> inf;  // [variable][τ]
  const long long len = dim_product(r.op_dims) * dim_product(r.op_dims);
  inf.assign(r.n, std::vector<double>(static_cast<size_t>(len), 0.0));
  for (const auto& [beta, m] : r.terms) {
    Vec f = fourier_vector(m, r.op_dims, bases);
    for (int v = 0; v < r.n; ++v)
      if (beta[v])
        for (long long t = 0; t < len; ++t) inf[v][t] += f(t) * f(t);
  }
  return inf;
}

struct MultilinearResult {
  JointRandomOperatorPair pair;
  StageReport report;
  McResult zeta_m, zeta_n;
};

inline MultilinearResult step_multilinearize(const SmoothRandomResult& sr, const PipelineContext& ctx,
                                             const CorrelationEvaluator& ev_h, int n1) {
  const auto& g = ctx.g;
  const auto& P = ctx.params;
  const auto& prof = ctx.profile;
  MultilinearResult out;
  out.pair.rho = sr.pair.rho;
  out.pair.m = multilinearize(sr.pair.m, n1);
  out.pair.n = multilinearize(sr.pair.n, n1);
  auto& rep = out.report;
  rep.stage = "multilinearize";
  rep.values["n1"] = n1;
  const bool cert = !P.desk_scale();
  const int h = static_cast<int>(sr.pair.m.op_dims.size()) - 2;

  // Influence splitting Inf_{(i,j)}(m⁵_τ) ≤ θ Inf_i(m⁴_τ).
  double worst_ratio = 0;
  auto split = [&](const RandomOperator& before, const RandomOperator& after, const StandardBasis& site, int in,
                   int outd) {
    auto bases = detail::op_bases(site, h, in, outd);
    auto ib = coefficient_influences(before, bases);
    auto ia = coefficient_influences(after, bases);
    for (int i = 0; i < before.n; ++i)
      for (int j = 0; j < n1; ++j)
        for (size_t t = 0; t < ib[i].size(); ++t) {
          const double num = ia[i * n1 + j][t];
          if (num <= 1e-14) continue;
          worst_ratio = std::max(worst_ratio, ib[i][t] > 0 ? num / ib[i][t] : INFINITY);
        }
  };
  split(sr.pair.m, out.pair.m, prof.s_basis, g.p, g.a);
  split(sr.pair.n, out.pair.n, prof.t_basis, g.q, g.b);
  // H_k(x_i) ↦ √(k!) n₁^{-k/2} e_k: each new variable carries at most a k/n₁ share of the old influence.
  const int deg = std::max(sr.pair.m.degree(), sr.pair.n.degree());
  const double factor = static_cast<double>(std::max(deg, 1)) / n1;
  rep.values["split_factor"] = factor;
  rep.check("influence_split_ratio", worst_ratio, factor, 1e-12);
  if (cert)
    rep.check("split_factor_vs_theta", factor, P.theta, 0, true);
  else
    rep.measured_only = true;

  auto bm = detail::random_a_norms_sq(sr.pair.m, g.a), am = detail::random_a_norms_sq(out.pair.m, g.a);
  auto bn = detail::random_a_norms_sq(sr.pair.n, g.b), an = detail::random_a_norms_sq(out.pair.n, g.b);
  double worst = 0;
  for (size_t e = 0; e < am.size(); ++e) worst = std::max(worst, am[e] - bm[e]);
  for (size_t e = 0; e < an.size(); ++e) worst = std::max(worst, an[e] - bn[e]);
  rep.check("norm_nonincrease", worst, 0.0, 1e-10);

  auto t5 = random_pair_table(sr.pair, ev_h);
  rep.table = random_pair_table(out.pair, ev_h);
  rep.check("correlation_deviation", rep.table.max_abs_diff(t5), P.delta, 1e-12, cert);
  const long long N = P.monte_carlo_N;
  out.zeta_m = random_operator_zeta(out.pair.m, ctx.sampler, N, kStreamMultilinear);
  out.zeta_n = random_operator_zeta(out.pair.n, ctx.sampler, N, kStreamMultilinear + kAttemptStride);
  const double shm = static_cast<double>(detail::ipow_ll(prof.s, h)), tht = static_cast<double>(detail::ipow_ll(prof.t, h));
  rep.values["zeta_m"] = out.zeta_m.mean;
  rep.values["zeta_n"] = out.zeta_n.mean;
  rep.check("zeta_deviation_m", std::abs(out.zeta_m.mean - sr.zeta_m.mean) / shm, P.delta,
            3 * (out.zeta_m.std_error + sr.zeta_m.std_error) / shm, cert);
  rep.check("zeta_deviation_n", std::abs(out.zeta_n.mean - sr.zeta_n.mean) / tht, P.delta,
            3 * (out.zeta_n.std_error + sr.zeta_n.std_error) / tht, cert);
  rep.check("multilinear", (out.pair.m.multilinear() && out.pair.n.multilinear()) ? 0.0 : 1.0, 0.0);
  const double r0 = std::max(detail::random_identity_slice_residual(out.pair.m, g.a),
                             detail::random_identity_slice_residual(out.pair.n, g.b));
  rep.check("identity_slice", r0, 1e-10);
  return out;
}

// ---------------------------------------------------------------------------
// Desk-scale copy truncation.

/// @brief Keeps the `keep` variables of largest joint influence and drops monomials touching the rest
/// (conditional expectation); pads with unused variables when fewer exist.
inline JointRandomOperatorPair truncate_copies(const JointRandomOperatorPair& pair, int keep,
                                               std::vector<int>* kept_out = nullptr) {
  const int n = pair.m.n;
  std::vector<double> inf(n, 0.0);
  for (const auto* r : {&pair.m, &pair.n})
    for (const auto& [k, m] : r->terms)
      for (int v = 0; v < n; ++v)
        if (k[v]) inf[v] += nnorm2_sq(m);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return inf[x] > inf[y]; });
  std::vector<int> kept(order.begin(), order.begin() + std::min(keep, n));
  std::sort(kept.begin(), kept.end());
  std::vector<int> newidx(n, -1);
  for (size_t i = 0; i < kept.size(); ++i) newidx[kept[i]] = static_cast<int>(i);
  auto apply = [&](const RandomOperator& r) {
    RandomOperator o;
    o.op_dims = r.op_dims;
    o.n = keep;
    for (const auto& [k, m] : r.terms) {
      std::vector<int> key(keep, 0);
      bool drop = false;
      for (int v = 0; v < n && !drop; ++v)
        if (k[v]) {
          if (newidx[v] < 0)
            drop = true;
          else
            key[newidx[v]] = k[v];
        }
      if (!drop) o.add(key, m);
    }
    if (o.terms.empty()) o.add(std::vector<int>(keep, 0), Mat::Zero(r.op_dim(), r.op_dim()));
    return o;
  };
  if (kept_out) *kept_out = kept;
  return {apply(pair.m), apply(pair.n), pair.rho};
}

// ---------------------------------------------------------------------------
// Stage 7: invariance back to operators.

/// @brief Π_{v∈σ} z_v ↦ ⊗_v (S₁ if v ∈ σ else I); output ordered [site^h, site^V, in, out].
inline Mat invariance_back(const RandomOperator& r, const Mat& s1, int site) {
  require(r.multilinear(), "invariance_back: input must be multilinear");
  const int h = static_cast<int>(r.op_dims.size()) - 2;
  const int in = r.op_dims[h], outd = r.op_dims[h + 1];
  const int V = r.n;
  const long long dv = detail::ipow_ll(site, V);
  const long long dtot = dv * r.op_dim();
  Mat acc = Mat::Zero(dtot, dtot);
  const Mat id = Mat::Identity(site, site);
  for (const auto& [k, m] : r.terms) {
    Mat f = Mat::Identity(1, 1);
    for (int v = 0; v < V; ++v) f = kron(f, k[v] ? s1 : id);
    acc += kron(f, m);
  }
  Dims tmp(V, site);
  for (int i = 0; i < h; ++i) tmp.push_back(site);
  tmp.push_back(in);
  tmp.push_back(outd);
  std::vector<int> perm;
  for (int i = 0; i < h; ++i) perm.push_back(V + i);
  for (int v = 0; v < V; ++v) perm.push_back(v);
  perm.push_back(V + h);
  perm.push_back(V + h + 1);
  return hermitian_part(permute_systems(acc, tmp, perm));
}

struct InvarianceBackResult {
  Mat m6, n6;
  int copies = 0;
  StageReport report;
};

inline InvarianceBackResult step_invariance_back(const JointRandomOperatorPair& pair, const PipelineContext& ctx,
                                                 const CorrelationEvaluator& ev_h, const McResult& zeta5_m,
                                                 const McResult& zeta5_n, int d, double theta0) {
  const auto& g = ctx.g;
  const auto& prof = ctx.profile;
  InvarianceBackResult out;
  const int h = static_cast<int>(pair.m.op_dims.size()) - 2;
  out.copies = h + pair.m.n;
  const long long dense = detail::ipow_ll(prof.s, out.copies) * g.p * g.a;
  const long long dense_b = detail::ipow_ll(prof.t, out.copies) * g.q * g.b;
  if (std::max(dense, dense_b) > kDenseCap) throw ResourceError("invariance_back: output exceeds the dense cap");
  out.m6 = invariance_back(pair.m, prof.s_basis.elements.size() > 1 ? prof.s_basis.elements[1] : Mat::Identity(1, 1),
                           prof.s);
  out.n6 = invariance_back(pair.n, prof.t_basis.elements.size() > 1 ? prof.t_basis.elements[1] : Mat::Identity(1, 1),
                           prof.t);
  auto& rep = out.report;
  rep.stage = "invariance_back";
  rep.values["copies"] = out.copies;
  const Dims sm(out.copies, prof.s), st(out.copies, prof.t);
  const double norm_res = std::max(
      detail::max_abs_diff(detail::pa_norms_sq(out.m6, sm, g.p, g.a), detail::random_pa_norms_sq(pair.m, g.p, g.a)),
      detail::max_abs_diff(detail::pa_norms_sq(out.n6, st, g.q, g.b), detail::random_pa_norms_sq(pair.n, g.q, g.b)));
  rep.check("slice_norm_identity", norm_res, 1e-12);
  CorrelationEvaluator ev_d(ctx.phi_in, g, prof.psi, prof.s, prof.t, out.copies);
  rep.table = ev_d.table(out.m6, out.n6);
  rep.check("correlation_identity", rep.table.max_abs_diff(random_pair_table(pair, ev_h)), 1e-10);

  const double sD = static_cast<double>(detail::ipow_ll(prof.s, out.copies));
  const double tD = static_cast<double>(detail::ipow_ll(prof.t, out.copies));
  const double sh = static_cast<double>(detail::ipow_ll(prof.s, h)), th = static_cast<double>(detail::ipow_ll(prof.t, h));
  auto ipb = [&](int pp, int aa, int site) {
    return std::pow(pp, 10.0 / 3.0) * std::pow(aa, 4.0) *
           std::pow(std::pow(3.0, d) * std::pow(site, d / 2.0) * std::sqrt(theta0) * d, 2.0 / 3.0);
  };
  const double zm = zeta_trace(out.m6) / sD, zn = zeta_trace(out.n6) / tD;
  rep.values["zeta_m"] = zm;
  rep.values["zeta_n"] = zn;
  rep.check("zeta_deviation_m", std::abs(zm - zeta5_m.mean / sh), ipb(g.p, g.a, prof.s), 3 * zeta5_m.std_error / sh,
            false);
  rep.check("zeta_deviation_n", std::abs(zn - zeta5_n.mean / th), ipb(g.q, g.b, prof.t), 3 * zeta5_n.std_error / th,
            false);
  const double r0 = std::max(detail::identity_slice_residual(out.m6, dim_product(sm) * g.p, g.a),
                             detail::identity_slice_residual(out.n6, dim_product(st) * g.q, g.b));
  rep.check("identity_slice", r0, 1e-10);
  return out;
}

// ---------------------------------------------------------------------------
// Stage 8 and the full run.

struct Ledger {
  std::vector<std::string> stages;
  std::vector<double> deviation;  // max_abr |t_k − t_{k+1}|
  std::vector<double> budget;
  std::vector<bool> measured_budget;
  double total_deviation = 0;
  double sum_deviation = 0;
  double sum_budget = 0;
  double mc_slack = 0;
  bool reconciled = false;     // total ≤ Σ stage deviations (+ MC slack)
  bool within_budget = false;  // total ≤ Σ budgets (+ MC slack)
};

struct PipelineResult {
  ChoiMatrix alice, bob;
  int copies = 0;
  std::vector<int> H;
  PipelineParams params;
  std::vector<StageReport> stages;
  Ledger ledger;
  CorrelationTable before, after;
  CptpReport alice_cptp, bob_cptp;
  RoundingReport alice_round, bob_round;
};

inline PipelineResult run_pipeline(const ChoiMatrix& M, const ChoiMatrix& N, const GameDims& g, const Mat& phi_in,
                                   const NoisyMesProfile& prof, PipelineParams params) {
  const int n = static_cast<int>(M.in.size()) - 1;
  require(n >= 0 && static_cast<int>(N.in.size()) - 1 == n, "run_pipeline: players must use the same number of copies");
  require(M.in.back() == g.p && N.in.back() == g.q && M.out == Dims{g.a} && N.out == Dims{g.b},
          "run_pipeline: strategy dimensions do not match the game");
  for (int i = 0; i < n; ++i)
    require(M.in[i] == prof.s && N.in[i] == prof.t, "run_pipeline: strategy dimensions do not match the state");
  require(phi_in.rows() == static_cast<long long>(g.p) * g.q * g.r, "run_pipeline: phi_in size mismatch");
  params.p = g.p;
  params.q = g.q;
  params.r = g.r;
  params.a = g.a;
  params.b = g.b;
  params.s = prof.s;
  params.t = prof.t;
  params.rho = prof.rho;
  params = compute_bound(params);

  PipelineContext ctx{g, phi_in, prof, params, GaussianSampler(params.seed)};
  PipelineResult res;
  res.params = params;

  const int d1 = static_cast<int>(std::min<long long>(params.eff_d1(), 1 << 20));
  CorrelationEvaluator ev_n(phi_in, g, prof.psi, prof.s, prof.t, n);
  res.before = ev_n.table(M.j, N.j);

  auto s1 = step_smooth(M, N, ctx, ev_n, d1, params.gamma);
  res.stages.push_back(s1.report);

  auto s2 = step_regularize(s1.m1, s1.n1, n, ctx, params.theta, d1);
  s2.report.table = s1.report.table;
  res.stages.push_back(s2.report);
  res.H = s2.H;
  const int h = static_cast<int>(s2.H.size());

  // Resolve D′ before the expensive stages.
  long long Dp;
  if (params.overrides.D) {
    Dp = *params.overrides.D;
  } else if (params.overrides.D_extra) {
    Dp = h + *params.overrides.D_extra;
  } else if (params.desk_scale()) {
    Dp = h + params.eff_n0() * params.eff_n1();
  } else {
    if (!params.D.small) throw ResourceError("theoretical D is too large to execute; supply overrides");
    Dp = *params.D.small;
  }
  if (Dp < h) throw DomainError("run_pipeline: D' must be at least h");
  if (detail::ipow_ll(std::max(prof.s, prof.t), static_cast<int>(std::min<long long>(Dp, 40))) *
          std::max(g.p * g.a, g.q * g.b) >
      kDenseCap)
    throw ResourceError("run_pipeline: D' copies exceed the dense cap");

  CorrelationEvaluator ev_h(phi_in, g, prof.psi, prof.s, prof.t, h);
  auto s3 = step_invariance(s1.m1, s1.n1, n, s2.H, ctx, s1.report.table, ev_h, d1);
  res.stages.push_back(s3.report);

  const int n0 = static_cast<int>(params.eff_n0());
  auto s4 = step_dimension_reduce(s3.pair, ctx, ev_h, s3.report.table, n0);
  res.stages.push_back(s4.report);

  const int d2 = static_cast<int>(std::min<long long>(params.eff_d2(), 1 << 20));
  auto s5 = step_smooth_random(s4, ctx, ev_h, s4.report.table, s4.report.table_se, params.nu, d2);
  res.stages.push_back(s5.report);

  const int n1 = static_cast<int>(params.eff_n1());
  auto s6 = step_multilinearize(s5, ctx, ev_h, n1);
  res.stages.push_back(s6.report);

  JointRandomOperatorPair final_pair = s6.pair;
  const int keep = static_cast<int>(Dp - h);
  if (keep != s6.pair.m.n) {
    StageReport tr;
    tr.stage = "copy_truncation";
    tr.measured_only = true;
    std::vector<int> kept;
    final_pair = truncate_copies(s6.pair, keep, &kept);
    tr.values["variables_before"] = s6.pair.m.n;
    tr.values["variables_kept"] = keep;
    tr.table = random_pair_table(final_pair, ev_h);
    tr.values["correlation_deviation"] = tr.table.max_abs_diff(s6.report.table);
    res.stages.push_back(tr);
  }

  const double theta0 = std::max(detail::max_variable_influence(final_pair.m), detail::max_variable_influence(final_pair.n));
  McResult z5m = s6.zeta_m, z5n = s6.zeta_n;
  if (keep != s6.pair.m.n) {
    z5m = random_operator_zeta(final_pair.m, ctx.sampler, params.monte_carlo_N, kStreamBack);
    z5n = random_operator_zeta(final_pair.n, ctx.sampler, params.monte_carlo_N, kStreamBack + kAttemptStride);
  }
  auto s7 = step_invariance_back(final_pair, ctx, ev_h, z5m, z5n, d2, theta0);
  res.stages.push_back(s7.report);
  res.copies = s7.copies;

  // Stage 8: rounding.
  Dims in_m(s7.copies, prof.s), in_n(s7.copies, prof.t);
  in_m.push_back(g.p);
  in_n.push_back(g.q);
  res.alice = step_round(s7.m6, in_m, {g.a}, &res.alice_round);
  res.bob = step_round(s7.n6, in_n, {g.b}, &res.bob_round);
  res.alice_cptp = is_cptp(res.alice);
  res.bob_cptp = is_cptp(res.bob);
  StageReport r8;
  r8.stage = "round";
  CorrelationEvaluator ev_d(phi_in, g, prof.psi, prof.s, prof.t, s7.copies);
  r8.table = ev_d.table(res.alice.j, res.bob.j);
  res.after = r8.table;
  r8.check("alice_negativity", std::max(0.0, -res.alice_cptp.min_choi_eig), 1e-9);
  r8.check("bob_negativity", std::max(0.0, -res.bob_cptp.min_choi_eig), 1e-9);
  r8.check("alice_marginal", res.alice_cptp.marginal_residual, 1e-9);
  r8.check("bob_marginal", res.bob_cptp.marginal_residual, 1e-9);
  r8.check("alice_rounding_distance", res.alice_round.distance_sq, 10 * res.alice_round.bound, 1e-12, false);
  r8.check("bob_rounding_distance", res.bob_round.distance_sq, 10 * res.bob_round.bound, 1e-12, false);
  r8.values["alice_measured_constant"] = res.alice_round.measured_constant;
  r8.values["bob_measured_constant"] = res.bob_round.measured_constant;
  // Entrywise bound √(pq)(|||M_a||| |||N_b − Ñ_b||| + |||M_a − M̃_a||| |||Ñ_b|||).
  {
    const double pq = std::sqrt(static_cast<double>(g.p) * g.q);
    auto ma = CorrelationEvaluator::a_slices(s7.m6, ev_d.alice_dim(), g.a);
    auto mt = CorrelationEvaluator::a_slices(res.alice.j, ev_d.alice_dim(), g.a);
    auto nb = CorrelationEvaluator::a_slices(s7.n6, ev_d.bob_dim(), g.b);
    auto nt = CorrelationEvaluator::a_slices(res.bob.j, ev_d.bob_dim(), g.b);
    double worst = -INFINITY, lhs = 0, rhs = 0, bmax = 0;
    for (int a = 0; a < r8.table.na; ++a)
      for (int b = 0; b < r8.table.nb; ++b) {
        const double bound = pq * (nnorm2(ma[a]) * nnorm2(nb[b] - nt[b]) + nnorm2(ma[a] - mt[a]) * nnorm2(nt[b]));
        bmax = std::max(bmax, bound);
        for (int r = 0; r < r8.table.nr; ++r) {
          const double l = std::abs(r8.table.at(a, b, r) - s7.report.table.at(a, b, r));
          if (l - bound > worst) {
            worst = l - bound;
            lhs = l;
            rhs = bound;
          }
        }
      }
    r8.check("rounding_correlation", lhs, rhs, 1e-12);
    r8.values["rounding_budget"] = bmax;
  }
  res.stages.push_back(r8);

  for (auto& st : res.stages)
    for (const auto& c : st.checks)
      if (!c.certified) st.measured_only = true;

  // Ledger over consecutive stage tables.
  Ledger& L = res.ledger;
  const CorrelationTable* prev = &res.before;
  double prev_se = 0;
  for (const auto& st : res.stages) {
    L.stages.push_back(st.stage);
    const double dev = st.table.max_abs_diff(*prev);
    L.deviation.push_back(dev);
    double budget = 0;
    bool measured = false;
    if (st.stage == "smooth" || st.stage == "dimension_reduce" || st.stage == "smooth_random" ||
        st.stage == "multilinearize") {
      budget = params.delta;
    } else if (st.stage == "copy_truncation") {
      budget = dev;
      measured = true;
    } else if (st.stage == "round") {
      budget = st.values.at("rounding_budget");
    }
    L.budget.push_back(budget);
    L.measured_budget.push_back(measured);
    L.mc_slack += 3 * (st.table_se + prev_se);
    prev = &st.table;
    prev_se = st.table_se;
  }
  L.total_deviation = res.after.max_abs_diff(res.before);
  L.sum_deviation = std::accumulate(L.deviation.begin(), L.deviation.end(), 0.0);
  L.sum_budget = std::accumulate(L.budget.begin(), L.budget.end(), 0.0);
  L.reconciled = L.total_deviation <= L.sum_deviation + L.mc_slack + 1e-12;
  L.within_budget = L.total_deviation <= L.sum_budget + L.mc_slack + 1e-12;
  return res;
}

}  // namespace mesc
