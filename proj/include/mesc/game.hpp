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
#include <cstdlib>
#include <functional>
#include <queue>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/SVD>

#include "mesc/pipeline.hpp"

namespace mesc {

inline constexpr long long kGameDimCap = 256;

/// @brief Worker count: MESC_THREADS if set, else the hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("MESC_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// @brief Runs f(0..count-1) on up to worker_count() threads. Results must be written per index.
inline void parallel_for(int count, const std::function<void(int)>& f) {
  const int w = std::min(worker_count(), count);
  if (w <= 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < w; ++t)
    pool.emplace_back([&, t]() {
      for (int i = t; i < count; i += w) f(i);
    });
  for (auto& th : pool) th.join();
}

/// @brief (φ_in on P⊗Q⊗R, winning operator on A⊗B⊗R).
struct FullyQuantumGame {
  GameDims dims;
  Mat phi_in;
  Mat m_win;

  void validate() const {
    const long long dpqr = static_cast<long long>(dims.p) * dims.q * dims.r;
    const long long dabr = static_cast<long long>(dims.a) * dims.b * dims.r;
    if (phi_in.rows() != dpqr || phi_in.cols() != dpqr) throw DomainError("game: phi_in has the wrong size");
    if (m_win.rows() != dabr || m_win.cols() != dabr) throw DomainError("game: m_win has the wrong size");
    if (!is_hermitian(phi_in, 1e-10) || min_eigenvalue(phi_in) < -1e-10 || std::abs(trace_real(phi_in) - 1) > 1e-10)
      throw DomainError("game: phi_in must be a density operator");
    if (!is_hermitian(m_win, 1e-10) || min_eigenvalue(m_win) < -1e-10 || max_eigenvalue(m_win) > 1 + 1e-10)
      throw DomainError("game: m_win must satisfy 0 <= m_win <= I");
  }
};

/// @brief Channels Alice: S^n⊗P → A and Bob: T^n⊗Q → B, stored as adjoint Choi matrices.
struct Strategy {
  int copies = 0;
  ChoiMatrix alice, bob;
};

struct ValueReport {
  double value = 0;
  double lower = 0, upper = 0, radius = 0;  // bracket (brute force)
  int iterations = 0;
  int restarts = 0;
  long long boxes = 0;
  std::vector<double> best_per_restart;
  std::vector<std::vector<double>> sweeps;  // value after every full sweep, per restart
  double max_sweep_drop = 0;
};

inline void check_strategy(const FullyQuantumGame& game, const Strategy& st, const NoisyMesProfile& prof) {
  const auto& g = game.dims;
  Dims ia(st.copies, prof.s), ib(st.copies, prof.t);
  ia.push_back(g.p);
  ib.push_back(g.q);
  if (st.alice.in != ia || st.alice.out != Dims{g.a} || st.bob.in != ib || st.bob.out != Dims{g.b})
    throw DomainError("strategy: channel dimensions do not match the game and copy count");
}

inline void check_dim_cap(const FullyQuantumGame& game, const NoisyMesProfile& prof, int n, long long cap) {
  long long d = static_cast<long long>(game.dims.p) * game.dims.q * game.dims.r;
  for (int k = 0; k < n; ++k) {
    d *= static_cast<long long>(prof.s) * prof.t;
    if (d > cap) break;
  }
  if (d > cap) throw ResourceError("game: total dimension exceeds the cap");
}

/// @brief Tr[P_win (Φ_A ⊗ Φ_B ⊗ id_R)(φ_in ⊗ ψ^{⊗n})], evaluated on the joint state.
inline double winning_probability(const FullyQuantumGame& game, const Strategy& st, const NoisyMesProfile& prof,
                                  long long cap = kGameDimCap) {
  check_strategy(game, st, prof);
  check_dim_cap(game, prof, st.copies, cap);
  const auto& g = game.dims;
  Mat omega = joint_input_state(game.phi_in, g, prof.psi, prof.s, prof.t, st.copies);
  Dims dims(st.copies, prof.s);
  dims.push_back(g.p);
  for (int k = 0; k < st.copies; ++k) dims.push_back(prof.t);
  dims.push_back(g.q);
  dims.push_back(g.r);
  auto [x1, d1] = apply_channel_on(map_from_choi(st.alice), omega, dims, 0);
  auto [x2, d2] = apply_channel_on(map_from_choi(st.bob), x1, d1, 1);
  return (game.m_win * x2).trace().real();
}

/// @brief w_abr = Tr[P_win (Ã_a ⊗ B̃_b ⊗ R̃_r)], so the value is Σ w_abr t_abr.
inline CorrelationTable value_weights(const FullyQuantumGame& game) {
  const auto& g = game.dims;
  auto at = trace_normalized(make_standard_basis(g.a));
  auto bt = trace_normalized(make_standard_basis(g.b));
  auto rt = trace_normalized(make_standard_basis(g.r));
  CorrelationTable w(g.a * g.a, g.b * g.b, g.r * g.r);
  for (int a = 0; a < w.na; ++a)
    for (int b = 0; b < w.nb; ++b)
      for (int r = 0; r < w.nr; ++r) w.at(a, b, r) = (game.m_win * kron_all({at[a], bt[b], rt[r]})).trace().real();
  return w;
}

inline double value_from_table(const CorrelationTable& w, const CorrelationTable& t) {
  double v = 0;
  for (size_t i = 0; i < w.v.size(); ++i) v += w.v[i] * t.v[i];
  return v;
}

inline CorrelationTable correlation_table(const FullyQuantumGame& game, const Strategy& st,
                                          const NoisyMesProfile& prof, long long cap = kGameDimCap) {
  check_strategy(game, st, prof);
  check_dim_cap(game, prof, st.copies, cap);
  CorrelationEvaluator ev(game.phi_in, game.dims, prof.psi, prof.s, prof.t, st.copies);
  return ev.table(st.alice.j, st.bob.j);
}

/// @brief Value and its gradients as a bilinear form in the two adjoint Choi matrices.
class GameObjective {
 public:
  GameObjective(const FullyQuantumGame& game, const NoisyMesProfile& prof, int n)
      : g_(game.dims), ev_(game.phi_in, game.dims, prof.psi, prof.s, prof.t, n), w_(value_weights(game)) {
    in_a_ = Dims(n, prof.s);
    in_a_.push_back(g_.p);
    in_b_ = Dims(n, prof.t);
    in_b_.push_back(g_.q);
    at_ = trace_normalized(make_standard_basis(g_.a));
    bt_ = trace_normalized(make_standard_basis(g_.b));
  }

  const Dims& alice_in() const { return in_a_; }
  const Dims& bob_in() const { return in_b_; }
  const GameDims& dims() const { return g_; }
  const CorrelationEvaluator& evaluator() const { return ev_; }

  double value(const Mat& ja, const Mat& jb) const { return value_from_table(w_, ev_.table(ja, jb)); }

  /// @brief G_A with value = Tr[J_A G_A]: Σ_a K_a ⊗ conj(Ã_a), K_a = Σ_{b,r} w_abr Tr_B[(I ⊗ N_b) Ω_r].
  Mat alice_gradient(const Mat& jb) const {
    auto nb = CorrelationEvaluator::a_slices(jb, ev_.bob_dim(), g_.b);
    const long long dx = ev_.alice_dim(), dy = ev_.bob_dim();
    Mat grad = Mat::Zero(dx * g_.a, dx * g_.a);
    std::vector<std::vector<Mat>> part(g_.r * g_.r);
    for (int r = 0; r < g_.r * g_.r; ++r)
      for (int b = 0; b < g_.b * g_.b; ++b) part[r].push_back(contract_last(ev_.omega_r(r), dx, dy, nb[b]));
    for (int a = 0; a < g_.a * g_.a; ++a) {
      Mat k = Mat::Zero(dx, dx);
      for (int b = 0; b < g_.b * g_.b; ++b)
        for (int r = 0; r < g_.r * g_.r; ++r)
          if (w_.at(a, b, r) != 0.0) k += w_.at(a, b, r) * part[r][b];
      grad += kron(k, at_[a].conjugate());
    }
    return hermitian_part(grad);
  }

  Mat bob_gradient(const Mat& ja) const {
    auto ma = CorrelationEvaluator::a_slices(ja, ev_.alice_dim(), g_.a);
    const long long dx = ev_.alice_dim(), dy = ev_.bob_dim();
    Mat grad = Mat::Zero(dy * g_.b, dy * g_.b);
    std::vector<std::vector<Mat>> part(g_.r * g_.r);
    for (int r = 0; r < g_.r * g_.r; ++r)
      for (int a = 0; a < g_.a * g_.a; ++a) part[r].push_back(contract_first(ev_.omega_r(r), dx, dy, ma[a]));
    for (int b = 0; b < g_.b * g_.b; ++b) {
      Mat k = Mat::Zero(dy, dy);
      for (int a = 0; a < g_.a * g_.a; ++a)
        for (int r = 0; r < g_.r * g_.r; ++r)
          if (w_.at(a, b, r) != 0.0) k += w_.at(a, b, r) * part[r][a];
      grad += kron(k, bt_[b].conjugate());
    }
    return hermitian_part(grad);
  }

 private:
  GameDims g_;
  CorrelationEvaluator ev_;
  CorrelationTable w_;
  Dims in_a_, in_b_;
  std::vector<Mat> at_, bt_;
};

struct SeesawOptions {
  int restarts = 8;
  int iterations = 100;  // full sweeps per restart
  int inner = 25;        // ascent steps per half-step
  double stall = 1e-7;
  std::uint64_t seed = 1;
  long long cap = kGameDimCap;
};

namespace detail {

/// @brief Maximizes Tr[J G] over adjoint Choi matrices by rounded gradient and exponentiated steps.
inline ChoiMatrix ascend_linear(ChoiMatrix j, const Mat& g, int steps, double stall) {
  auto e = eigh(g);
  const double top = e.values.maxCoeff();
  const double spread = std::max(top - e.values.minCoeff(), 1e-300);
  double cur = (j.j * g).trace().real();
  for (int it = 0; it < steps; ++it) {
    ChoiMatrix best = j;
    double best_v = cur;
    // Backtracking over a geometric range of step sizes; the largest improving step wins.
    for (int k = -4; k <= 12; ++k) {
      const double t = std::ldexp(1.0, k) / spread;
      ChoiMatrix c1 = step_round(j.j + t * g, j.in, j.out);
      const double v1 = (c1.j * g).trace().real();
      if (v1 > best_v) {
        best_v = v1;
        best = c1;
      }
      Vec ex = ((e.values.array() - top) * (t / 2)).exp().matrix();
      const Mat x = e.vectors * ex.cast<cd>().asDiagonal() * e.vectors.adjoint();
      ChoiMatrix c2 = step_round(x * j.j * x, j.in, j.out);
      const double v2 = (c2.j * g).trace().real();
      if (v2 > best_v) {
        best_v = v2;
        best = c2;
      }
    }
    const double gain = best_v - cur;
    if (gain <= 0) break;
    j = best;
    cur = best_v;
    if (gain < stall) break;
  }
  return j;
}

}  // namespace detail

/// @brief Alternating ascent over the two players' channels at fixed n; best over restarts.
inline std::pair<Strategy, ValueReport> optimize_value_seesaw(const FullyQuantumGame& game,
                                                              const NoisyMesProfile& prof, int n,
                                                              const SeesawOptions& opt = {}) {
  game.validate();
  check_dim_cap(game, prof, n, opt.cap);
  require(opt.restarts >= 1, "optimize_value_seesaw: restarts must be >= 1");
  GameObjective obj(game, prof, n);
  const auto& g = game.dims;
  GaussianSampler sampler(opt.seed);
  std::vector<Strategy> found(opt.restarts);
  std::vector<double> vals(opt.restarts);
  std::vector<std::vector<double>> sweeps(opt.restarts);
  std::vector<int> iters(opt.restarts);
  parallel_for(opt.restarts, [&](int rs) {
    Strategy st;
    st.copies = n;
    if (rs == 0) {
      const long long dx = dim_product(obj.alice_in()), dy = dim_product(obj.bob_in());
      st.alice = {obj.alice_in(), {g.a}, Mat::Identity(dx * g.a, dx * g.a) / static_cast<double>(g.a)};
      st.bob = {obj.bob_in(), {g.b}, Mat::Identity(dy * g.b, dy * g.b) / static_cast<double>(g.b)};
    } else {
      st.alice = random_adjoint_choi(obj.alice_in(), {g.a}, sampler, 2ULL * rs);
      st.bob = random_adjoint_choi(obj.bob_in(), {g.b}, sampler, 2ULL * rs + 1);
    }
    double v = obj.value(st.alice.j, st.bob.j);
    sweeps[rs].push_back(v);
    int it = 0;
    for (; it < opt.iterations; ++it) {
      if (v >= 1.0 - 1e-12) break;
      st.alice = detail::ascend_linear(st.alice, obj.alice_gradient(st.bob.j), opt.inner, opt.stall);
      st.bob = detail::ascend_linear(st.bob, obj.bob_gradient(st.alice.j), opt.inner, opt.stall);
      const double nv = obj.value(st.alice.j, st.bob.j);
      sweeps[rs].push_back(nv);
      const double gain = nv - v;
      v = nv;
      if (gain < opt.stall) {
        ++it;
        break;
      }
    }
    found[rs] = st;
    vals[rs] = v;
    iters[rs] = it;
  });
  ValueReport rep;
  rep.restarts = opt.restarts;
  int best = 0;
  for (int rs = 0; rs < opt.restarts; ++rs) {
    if (vals[rs] > vals[best]) best = rs;  // ties keep the lowest restart index
    rep.iterations += iters[rs];
    for (size_t k = 1; k < sweeps[rs].size(); ++k)
      rep.max_sweep_drop = std::max(rep.max_sweep_drop, sweeps[rs][k - 1] - sweeps[rs][k]);
  }
  rep.best_per_restart = vals;
  rep.sweeps = sweeps;
  rep.value = rep.lower = vals[best];
  return {found[best], rep};
}

struct BruteForceOptions {
  long long max_boxes = 2000000;
  int param_cap = 16;  // free real parameters over both players
};

/// @brief Branch and bound over the normalized Fourier coordinates of both adjoint Choi matrices.
///
/// The value is the bilinear form cᵀ K e in the coordinates. A box whose rounded centre (Â, B̂) sits at
/// distance d from the unrounded centre contains only valid strategies within ρ = r + d of (Â, B̂), so
/// val ≤ âᵀKê + ρ_A‖Kê‖ + ρ_B‖Kᵀâ‖ + ρ_Aρ_B‖K‖₂ on it. Boxes whose centre is provably farther than r
/// from every valid Choi matrix are discarded.
inline ValueReport brute_force_value(const FullyQuantumGame& game, const NoisyMesProfile& prof, int n,
                                     double net_step, const BruteForceOptions& opt = {}) {
  game.validate();
  require(net_step > 0, "brute_force_value: net_step must be positive");
  check_dim_cap(game, prof, n, kGameDimCap);
  GameObjective obj(game, prof, n);
  const auto& g = game.dims;
  Dims da = obj.alice_in(), db = obj.bob_in();
  da.push_back(g.a);
  db.push_back(g.b);
  const long long dimA = dim_product(da), dimB = dim_product(db);
  const int mA = static_cast<int>(dimA * dimA), mB = static_cast<int>(dimB * dimB);
  if (mA + mB - 2 > opt.param_cap) throw ResourceError("brute_force_value: parameter count exceeds the cap");
  const auto basesA = default_bases(da), basesB = default_bases(db);
  auto synth = [](const Vec& c, const Dims& d, const std::vector<StandardBasis>& b) {
    return hermitian_part(fourier_synthesize_vector(c, d, b));
  };
  RMat K(mA, mB);
  std::vector<Mat> ea(mA), eb(mB);
  for (int k = 0; k < mA; ++k) ea[k] = synth(Vec::Unit(mA, k), da, basesA);
  for (int l = 0; l < mB; ++l) eb[l] = synth(Vec::Unit(mB, l), db, basesB);
  for (int k = 0; k < mA; ++k)
    for (int l = 0; l < mB; ++l) K(k, l) = obj.value(ea[k], eb[l]);
  const double knorm = Eigen::JacobiSVD<RMat>(K).singularValues()(0);
  const double cap_value = std::max(0.0, max_eigenvalue(game.m_win));

  const int nfree = mA + mB - 2;
  struct Box {
    std::vector<double> lo, hi;
    double upper = 0;
    double value = 0;
  };
  // Lower bound on the distance from J' to the valid set: max(√(ζ/dim), |||Tr_A J' − I|||/a).
  auto valid_distance_lb = [](const Mat& j, const Dims& d, long long dim, int a) {
    const double z = std::sqrt(zeta_trace(j) / static_cast<double>(dim));
    Mat marg = partial_trace(j, d, {static_cast<int>(d.size()) - 1});
    return std::max(z, nnorm2(marg - Mat::Identity(marg.rows(), marg.cols())) / a);
  };
  long long evaluated = 0;
  double best_lower = -INFINITY;
  auto evaluate = [&](Box& bx) -> bool {
    ++evaluated;
    Vec ca = Vec::Zero(mA), cb = Vec::Zero(mB);
    ca(0) = 1.0 / g.a;
    cb(0) = 1.0 / g.b;
    double ra = 0, rb = 0;
    for (int i = 0; i < nfree; ++i) {
      const double mid = 0.5 * (bx.lo[i] + bx.hi[i]), half = 0.5 * (bx.hi[i] - bx.lo[i]);
      if (i < mA - 1) {
        ca(i + 1) = mid;
        ra += half * half;
      } else {
        cb(i - mA + 2) = mid;
        rb += half * half;
      }
    }
    ra = std::sqrt(ra);
    rb = std::sqrt(rb);
    Mat ja = synth(ca, da, basesA), jb = synth(cb, db, basesB);
    if (valid_distance_lb(ja, da, dimA, g.a) > ra || valid_distance_lb(jb, db, dimB, g.b) > rb) return false;
    ChoiMatrix ra_c = step_round(ja, obj.alice_in(), {g.a}), rb_c = step_round(jb, obj.bob_in(), {g.b});
    const double pa = ra + nnorm2(ra_c.j - ja), pb = rb + nnorm2(rb_c.j - jb);
    Vec ah = fourier_vector(ra_c.j, da, basesA), bh = fourier_vector(rb_c.j, db, basesB);
    bx.value = ah.dot(K * bh);
    bx.upper = bx.value + pa * (K * bh).norm() + pb * (K.transpose() * ah).norm() + pa * pb * knorm;
    best_lower = std::max(best_lower, bx.value);
    return true;
  };
  auto cmp = [](const Box& x, const Box& y) { return x.upper < y.upper; };
  std::priority_queue<Box, std::vector<Box>, decltype(cmp)> pq(cmp);
  Box root{std::vector<double>(nfree, -1.0), std::vector<double>(nfree, 1.0)};
  if (evaluate(root)) pq.push(root);
  double global_upper = cap_value;
  while (!pq.empty()) {
    const double top = std::min(pq.top().upper, cap_value);
    global_upper = top;
    if (top - best_lower <= net_step || evaluated >= opt.max_boxes) break;
    Box bx = pq.top();
    pq.pop();
    if (bx.upper < best_lower) continue;
    int axis = 0;
    for (int i = 1; i < nfree; ++i)
      if (bx.hi[i] - bx.lo[i] > bx.hi[axis] - bx.lo[axis]) axis = i;
    const double mid = 0.5 * (bx.lo[axis] + bx.hi[axis]);
    Box left = bx, right = bx;
    left.hi[axis] = mid;
    right.lo[axis] = mid;
    for (Box* c : {&left, &right})
      if (evaluate(*c) && c->upper >= best_lower) pq.push(*c);
  }
  if (pq.empty()) global_upper = std::min(cap_value, std::max(best_lower, 0.0));
  ValueReport rep;
  rep.lower = rep.value = best_lower;
  rep.upper = std::max(global_upper, best_lower);
  rep.radius = rep.upper - rep.lower;
  rep.boxes = evaluated;
  return rep;
}

struct CompressionComparison {
  PipelineResult pipeline;
  CorrelationTable before, after;
  double max_table_deviation = 0;
  double value_before = 0, value_after = 0;
  double value_drop = 0;          // |val_before − val_after|
  double aggregation_bound = 0;   // (abr)^{3/2} · max table deviation
  bool aggregation_holds = false;
};

inline CompressionComparison compare_compression(const FullyQuantumGame& game, const NoisyMesProfile& prof,
                                                 const Strategy& st, const PipelineParams& params) {
  game.validate();
  check_strategy(game, st, prof);
  if (!params.overrides.any()) throw DomainError("compare_compression: desk-scale overrides are required");
  CompressionComparison out;
  out.pipeline = run_pipeline(st.alice, st.bob, game.dims, game.phi_in, prof, params);
  Strategy after{out.pipeline.copies, out.pipeline.alice, out.pipeline.bob};
  out.before = correlation_table(game, st, prof);
  out.after = correlation_table(game, after, prof);
  out.max_table_deviation = out.after.max_abs_diff(out.before);
  out.value_before = winning_probability(game, st, prof);
  out.value_after = winning_probability(game, after, prof);
  out.value_drop = std::abs(out.value_before - out.value_after);
  const double abr = static_cast<double>(game.dims.a) * game.dims.b * game.dims.r;
  out.aggregation_bound = std::pow(abr, 1.5) * out.max_table_deviation;
  out.aggregation_holds = out.value_drop <= out.aggregation_bound + 1e-9;
  return out;
}

}  // namespace mesc
