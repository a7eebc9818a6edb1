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

#include <gtest/gtest.h>

#include <cmath>

#include "mesc/selftest.hpp"

using namespace mesc;

namespace {

Mat random_density(long long d, const GaussianSampler& s, std::uint64_t stream) {
  const Mat g = ginibre(d, d, s, stream);
  const Mat r = g * g.adjoint();
  return r / r.trace().real();
}

Mat random_effect(long long d, const GaussianSampler& s, std::uint64_t stream) {
  // 0 ≤ E ≤ I from a random unitary rotation of a random diagonal.
  Eigen::HouseholderQR<Mat> qr(ginibre(d, d, s, stream));
  const Mat u = qr.householderQ();
  Mat diag = Mat::Zero(d, d);
  for (long long i = 0; i < d; ++i) diag(i, i) = s.uniform(stream + 1, i);
  return u * diag * u.adjoint();
}

FullyQuantumGame random_game(GameDims g, const GaussianSampler& s, std::uint64_t stream) {
  FullyQuantumGame game;
  game.dims = g;
  game.phi_in = random_density(g.p * g.q * g.r, s, stream);
  game.m_win = random_effect(g.a * g.b * g.r, s, stream + 10);
  return game;
}

Strategy random_strategy(const FullyQuantumGame& game, const NoisyMesProfile& prof, int n, const GaussianSampler& s,
                         std::uint64_t stream) {
  Dims ia(n, prof.s), ib(n, prof.t);
  ia.push_back(game.dims.p);
  ib.push_back(game.dims.q);
  return {n, random_adjoint_choi(ia, {game.dims.a}, s, stream), random_adjoint_choi(ib, {game.dims.b}, s, stream + 1)};
}

}  // namespace

TEST(WinningProbability, TrivialPredicates) {
  GaussianSampler s(1);
  const auto prof = depolarized_mes(2, 0.25);
  auto game = random_game({2, 1, 2, 2, 2}, s, 1);
  const auto st = random_strategy(game, prof, 1, s, 50);
  game.m_win = Mat::Identity(8, 8);
  EXPECT_NEAR(winning_probability(game, st, prof), 1.0, 1e-12);
  game.m_win = Mat::Zero(8, 8);
  EXPECT_NEAR(winning_probability(game, st, prof), 0.0, 1e-15);
}

TEST(WinningProbability, ProductGameFactorizes) {
  GaussianSampler s(2);
  const auto prof = depolarized_mes(2, 0.5);
  FullyQuantumGame game;
  game.dims = {2, 2, 2, 2, 2};
  const Mat fp = random_density(2, s, 1), fq = random_density(2, s, 2), fr = random_density(2, s, 3);
  const Mat ma = random_effect(2, s, 4), mb = random_effect(2, s, 6), mr = random_effect(2, s, 8);
  game.phi_in = kron_all({fp, fq, fr});
  game.m_win = kron_all({ma, mb, mr});
  const auto st = random_strategy(game, prof, 0, s, 20);
  // Tr[M Φ(ρ)] = Tr[Φ*(M) ρ] factor by factor.
  const double va = (oracle::adjoint_apply(st.alice.j, 2, 2, ma) * fp).trace().real();
  const double vb = (oracle::adjoint_apply(st.bob.j, 2, 2, mb) * fq).trace().real();
  const double vr = (mr * fr).trace().real();
  EXPECT_NEAR(winning_probability(game, st, prof), va * vb * vr, 1e-10);
}

TEST(WinningProbability, DimensionCap) {
  GaussianSampler s(3);
  const auto prof = depolarized_mes(2, 0.25);
  const auto game = random_game({1, 1, 1, 2, 2}, s, 1);
  const auto st = random_strategy(game, prof, 2, s, 5);
  EXPECT_THROW(winning_probability(game, st, prof, 8), ResourceError);
  const auto wrong = random_strategy(game, prof, 1, s, 5);
  Strategy mixed{2, st.alice, wrong.bob};
  EXPECT_THROW(winning_probability(game, mixed, prof), DomainError);
}

TEST(CorrelationTable, IdentitySliceEntry) {
  GaussianSampler s(4);
  const auto prof = depolarized_mes(2, 0.25);
  const auto game = random_game({2, 2, 2, 2, 2}, s, 1);
  const auto st = random_strategy(game, prof, 1, s, 9);
  const auto t = correlation_table(game, st, prof);
  EXPECT_NEAR(t.at(0, 0, 0), 1.0 / std::sqrt(8.0), 1e-12);
}

TEST(CorrelationTable, IdentityChannelsGiveStateMoments) {
  // No copies, P = A and Q = B: the adjoint of the identity channel has Choi Σ E_ij ⊗ E_ij.
  const auto prof = depolarized_mes(2, 0.25);
  GaussianSampler s(5);
  FullyQuantumGame game;
  game.dims = {2, 2, 1, 2, 2};
  game.phi_in = random_density(4, s, 1);
  game.m_win = Mat::Identity(4, 4);
  Mat id_choi = Mat::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) id_choi(i * 2 + i, j * 2 + j) = 1;
  const ChoiMatrix c{{2}, {2}, id_choi};
  const Strategy st{0, c, c};
  const auto t = correlation_table(game, st, prof);
  const auto ba = trace_normalized(make_standard_basis(2));
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      EXPECT_NEAR(t.at(a, b, 0), (kron(ba[a], ba[b]) * game.phi_in).trace().real(), 1e-12);
}

TEST(CorrelationTable, ReconstructsValue) {
  GaussianSampler s(6);
  const auto prof = depolarized_mes(2, 0.3);
  for (int k = 0; k < 5; ++k) {
    const auto game = random_game({2, 1, 2, 2, 2}, s, 100 * k);
    const auto st = random_strategy(game, prof, 1, s, 100 * k + 50);
    const double direct = winning_probability(game, st, prof);
    const double via = value_from_table(value_weights(game), correlation_table(game, st, prof));
    EXPECT_NEAR(via, direct, 1e-10);
  }
}

TEST(Seesaw, TrivialGameConvergesImmediately) {
  GaussianSampler s(7);
  auto game = random_game({2, 2, 1, 2, 2}, s, 1);
  game.m_win = Mat::Identity(4, 4);
  SeesawOptions opt;
  opt.restarts = 2;
  const auto [st, rep] = optimize_value_seesaw(game, depolarized_mes(2, 0.25), 0, opt);
  EXPECT_NEAR(rep.value, 1.0, 1e-12);
  EXPECT_TRUE(is_cptp(st.alice).verdict);
}

TEST(Seesaw, ClassicalGameMatchesExhaustiveSearch) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ud(0.1, 1.0);
  std::vector<double> pi(4), v(16);
  double tot = 0;
  for (auto& x : pi) tot += (x = ud(rng));
  for (auto& x : pi) x /= tot;
  for (auto& x : v) x = static_cast<double>(rng() % 2);
  const auto game = selftest::classical_embedding(pi, v, 2, 2, 2, 2);
  SeesawOptions opt;
  opt.restarts = 32;
  const auto [st, rep] = optimize_value_seesaw(game, depolarized_mes(2, 0.25), 0, opt);
  EXPECT_NEAR(rep.value, oracle::classical_value(pi, v, 2, 2, 2, 2), 1e-6);
}

TEST(Seesaw, EntanglementDoesNotHurt) {
  GaussianSampler s(8);
  const auto game = random_game({2, 2, 1, 2, 2}, s, 1);
  const auto mes = depolarized_mes(2, 0.0);
  SeesawOptions opt;
  opt.restarts = 8;
  const auto product = optimize_value_seesaw(game, mes, 0, opt).second.value;
  const auto entangled = optimize_value_seesaw(game, mes, 1, opt).second.value;
  EXPECT_GE(entangled, product - 1e-6);
}

TEST(BruteForce, TrivialAndProductOptimum) {
  const auto prof = depolarized_mes(2, 0.25);
  FullyQuantumGame game;
  game.dims = {1, 1, 1, 2, 2};
  game.phi_in = Mat::Identity(1, 1);
  game.m_win = Mat::Identity(4, 4);
  auto rep = brute_force_value(game, prof, 0, 0.05);
  EXPECT_NEAR(rep.lower, 1.0, 1e-9);
  EXPECT_NEAR(rep.upper, 1.0, 1e-9);

  game.m_win = Mat::Zero(4, 4);
  game.m_win(0, 0) = 1;
  rep = brute_force_value(game, prof, 0, 1e-3);
  EXPECT_LE(rep.lower, 1.0 + 1e-9);
  EXPECT_GE(rep.upper, 1.0 - 1e-9);
  EXPECT_GE(rep.lower, 1.0 - 1e-3);

  SeesawOptions opt;
  opt.restarts = 4;
  const double see = optimize_value_seesaw(game, prof, 0, opt).second.value;
  EXPECT_LE(see, rep.upper + 1e-9);
  EXPECT_GE(see, rep.lower - 1e-9);
  EXPECT_THROW(brute_force_value(game, prof, 0, 0.0), DomainError);
}

TEST(CompareCompression, RandomStrategyStaysWithinBudget) {
  GaussianSampler s(9);
  const auto prof = depolarized_mes(2, 0.25);
  const auto game = random_game({1, 1, 1, 2, 2}, s, 1);
  const auto st = random_strategy(game, prof, 2, s, 30);
  PipelineParams P;
  P.delta = 0.3;
  P.theta = 0.1;
  P.seed = 9;
  P.monte_carlo_N = 20000;
  P.overrides.d1 = 4;
  P.overrides.n0 = 16;
  P.overrides.d2 = 4;
  P.overrides.n1 = 2;
  P.overrides.D_extra = 2;
  const auto cmp = compare_compression(game, prof, st, P);
  EXPECT_TRUE(cmp.pipeline.ledger.within_budget);
  EXPECT_TRUE(cmp.aggregation_holds);
  EXPECT_LE(cmp.value_drop, cmp.aggregation_bound + 1e-9);
  PipelineParams bare;
  EXPECT_THROW(compare_compression(game, prof, st, bare), DomainError);
}
