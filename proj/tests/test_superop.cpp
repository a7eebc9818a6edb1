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

#include "mesc/oracles.hpp"
#include "mesc/rounding.hpp"

using namespace mesc;

namespace {

double max_abs(const Mat& x) { return x.cwiseAbs().maxCoeff(); }

Mat swap2() {
  Mat s = Mat::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) s(i * 2 + j, j * 2 + i) = 1;
  return s;
}

}  // namespace

TEST(Choi, IdentityChannelIsMesProjector) {
  // J = Σ E_ij ⊗ E_ij; transposing the index system gives SWAP.
  const auto id = identity_channel({2});
  Mat mes = Mat::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) mes(i * 2 + i, j * 2 + j) = 1;
  EXPECT_LT(max_abs(id.choi_adjoint.j - mes), 1e-15);
  EXPECT_LT(max_abs(partial_transpose(id.choi_adjoint.j, {2, 2}, {1}) - swap2()), 1e-15);
  const Mat marg = partial_trace(id.choi_adjoint.j, {2, 2}, {1});
  EXPECT_LT(max_abs(marg - Mat::Identity(2, 2)), 1e-15);
}

TEST(Choi, CompletelyDepolarizing) {
  const auto c = completely_depolarizing({2}, {3});
  EXPECT_LT(max_abs(c.choi_adjoint.j - Mat::Identity(6, 6) / 3.0), 1e-15);
  GaussianSampler s(1);
  Mat rho = ginibre(2, 2, s, 3);
  rho = rho * rho.adjoint();
  rho /= rho.trace().real();
  EXPECT_LT(max_abs(apply_channel(c, rho) - Mat::Identity(3, 3) / 3.0), 1e-14);
}

TEST(Choi, ApplyIdentity) {
  GaussianSampler s(4);
  const Mat x = random_hermitian(3, s, 1);
  EXPECT_LT(max_abs(apply_channel(identity_channel({3}), x) - x), 1e-14);
}

TEST(Adjoint, IdentityAndUnitary) {
  const auto id = identity_channel({2});
  EXPECT_LT(max_abs(adjoint_map(id).choi_adjoint.j - id.choi_adjoint.j), 1e-15);
  GaussianSampler s(9);
  Eigen::HouseholderQR<Mat> qr(ginibre(3, 3, s, 2));
  const Mat u = qr.householderQ();
  const auto adj = adjoint_map(unitary_channel(u));
  const Mat x = random_hermitian(3, s, 5);
  EXPECT_LT(max_abs(apply_channel(adj, x) - u.adjoint() * x * u), 1e-13);
}

TEST(Adjoint, PartialTraceDefiningEquation) {
  // Φ = Tr_A on S⊗A; Φ*(X) = X⊗I. Check ⟨Φ(ρ), X⟩ = ⟨ρ, Φ*(X)⟩ on a random pair.
  const auto tr = channel_from_forward([](const Mat& x) { return partial_trace(x, {2, 3}, {1}); }, {2, 3}, {2});
  GaussianSampler s(12);
  const Mat rho = random_hermitian(6, s, 1), x = random_hermitian(2, s, 2);
  const Mat lifted = apply_channel(adjoint_map(tr), x);
  EXPECT_LT(max_abs(lifted - kron(x, Mat::Identity(3, 3))), 1e-13);
  const double lhs = (apply_channel(tr, rho) * x).trace().real();
  const double rhs = (rho * lifted).trace().real();
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Choi, RoundTripRandomChannel) {
  GaussianSampler s(21);
  const auto j = random_adjoint_choi({2}, {3}, s, 4);
  const auto c = map_from_choi(j);
  const auto again = channel_from_adjoint([&](const Mat& y) { return apply_adjoint(c, y); }, {2}, {3});
  EXPECT_LT(max_abs(again.choi_adjoint.j - j.j), 1e-12);
  const Mat jt = choi_of([&](const Mat& y) { return apply_adjoint(c, y); }, {3}, {2}).j;
  EXPECT_LT(max_abs(jt - j.j), 1e-12);
}

TEST(IsCptp, Verdicts) {
  EXPECT_TRUE(is_cptp(identity_channel({2})).verdict);
  const auto t = is_cptp(transpose_map(2));
  EXPECT_FALSE(t.verdict);
  EXPECT_LT(t.min_choi_eig, -0.1);
  for (double g : {0.0, 0.5, 1.0}) EXPECT_TRUE(is_cptp(depolarizing_channel(2, g)).verdict);
}

TEST(Slice, ReconstructsOperator) {
  GaussianSampler s(6);
  const Mat m = random_hermitian(2 * 2 * 2, s, 3);
  auto sl = slice(m, {2}, 2, 2);
  EXPECT_LT(max_abs(unslice(sl.m_pa, 2, 2) - m), 1e-13);
}

TEST(ApplyChannel, LocalChannelsPreserveTrace) {
  GaussianSampler s(31);
  const auto prof_psi = Mat::Identity(4, 4) / 4.0;
  Mat omega = kron(Mat::Identity(2, 2) / 2.0, prof_psi);  // [P, S, T]
  const auto a = map_from_choi(random_adjoint_choi({2, 2}, {2}, s, 1));
  const auto b = map_from_choi(random_adjoint_choi({2}, {3}, s, 2));
  auto [x1, d1] = apply_channel_on(a, omega, {2, 2, 2}, 0);
  auto [x2, d2] = apply_channel_on(b, x1, d1, 1);
  EXPECT_EQ(d2, (Dims{2, 3}));
  EXPECT_NEAR(x2.trace().real(), 1.0, 1e-12);
  EXPECT_GT(min_eigenvalue(x2), -1e-12);
}

TEST(Oracle, AdjointApplyMatchesLibrary) {
  GaussianSampler s(41);
  const auto j = random_adjoint_choi({3}, {2}, s, 1);
  const Mat y = random_hermitian(2, s, 2);
  EXPECT_LT(max_abs(oracle::adjoint_apply(j.j, 3, 2, y) - apply_adjoint(map_from_choi(j), y)), 1e-13);
}
