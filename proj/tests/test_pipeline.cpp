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

#include "mesc/io.hpp"
#include "mesc/pipeline.hpp"
#include "mesc/rounding.hpp"

using namespace mesc;

namespace {

Mat pauli_z() {
  Mat z = Mat::Zero(2, 2);
  z(0, 0) = 1;
  z(1, 1) = -1;
  return z;
}

PipelineParams dims2(double delta, double theta, double rho) {
  PipelineParams P;
  P.delta = delta;
  P.theta = theta;
  P.rho = rho;
  P.p = P.q = P.r = P.s = P.t = P.a = P.b = 2;
  return P;
}

PipelineContext qubit_context(int p = 1, int q = 1) {
  GameDims g{p, q, 1, 2, 2};
  Mat phi = Mat::Identity(p * q, p * q) / static_cast<double>(p * q);
  PipelineParams P = dims2(0.2, 0.1, 0.75);
  P.p = p;
  P.q = q;
  P.r = 1;
  return {g, phi, depolarized_mes(2, 0.25), compute_bound(P), GaussianSampler(1)};
}

}  // namespace

TEST(ComputeBound, ToyChainIsExact) {
  const auto P = compute_bound(toy_preset());
  EXPECT_EQ(*P.d1.exact, "512");
  EXPECT_EQ(*P.h_cap.exact, "8192");
  EXPECT_EQ(*P.d2.exact, "512");
  EXPECT_EQ(*P.n1.exact, "17179869184");
  ASSERT_TRUE(P.n0.exact.has_value());
  // n0 = 2^16 · 512^512 · 4^6
  EXPECT_NEAR(P.n0.log10, (16 + 512 * 9 + 12) * std::log10(2.0), 1e-9);
  EXPECT_NEAR(P.delta1_prime, 0.25 / 256, 1e-18);
  EXPECT_NEAR(P.delta2_prime, 0.25 / 1024, 1e-18);
  EXPECT_GT(P.gamma, 0.0);
  EXPECT_LT(P.gamma, 1.0);
  const auto Q = compute_bound(toy_preset());
  EXPECT_EQ(bound_to_json(P).dump(), bound_to_json(Q).dump());
}

TEST(ComputeBound, SmoothingDegreesAtDeltaTenth) {
  const auto P = compute_bound(dims2(0.1, 0.1, 0.5));
  EXPECT_EQ(*P.d1.exact, "1280");
  EXPECT_EQ(*P.d2.exact, "1280");
  // n1 = 64² · 1280² / θ²
  EXPECT_NEAR(P.n1.log10, std::log10(4096.0 * 1280 * 1280 / 0.01), 1e-9);
}

TEST(ComputeBound, Boundaries) {
  const auto P = compute_bound(dims2(0.25, 0.25, 0.0));
  EXPECT_TRUE(std::isfinite(P.gamma));
  EXPECT_TRUE(std::isfinite(P.D.log10));
  EXPECT_THROW(compute_bound(dims2(0.25, 0.25, 1.0)), DomainError);
  EXPECT_THROW(compute_bound(dims2(0.0, 0.25, 0.5)), DomainError);
}

TEST(ComputeBound, EpsilonPreset) {
  PipelineParams base = dims2(0.1, 0.1, 0.5);
  const auto P = preset_from_epsilon(base, 0.3);
  ASSERT_TRUE(P.theta_decimal.has_value());
  const double expo = 64 * std::log(2.0) * std::log(2.0) / (0.3 * 0.5);
  EXPECT_NEAR(P.theta_log10, 12 * std::log10(0.3) - expo / std::log(10.0), 1e-9);
  EXPECT_THROW(preset_from_epsilon(base, 1.5), DomainError);
}

TEST(StepRound, ValidChoiIsFixed) {
  GaussianSampler s(2);
  const auto c = random_adjoint_choi({2, 2}, {2}, s, 1);
  RoundingReport rep;
  const auto out = step_round(c.j, c.in, c.out, &rep);
  EXPECT_LT((out.j - c.j).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(rep.zeta, 0.0, 1e-12);
}

TEST(StepRound, PerturbedChoiIsRepaired) {
  GaussianSampler s(3);
  const auto c = random_adjoint_choi({2}, {2}, s, 1, 2);
  // Traceless on A so the marginal stays the identity.
  Mat y = kron(random_hermitian(2, s, 2), pauli_z());
  const Mat j = c.j - 0.01 * y / nnorm2(y);
  RoundingReport rep;
  const auto out = step_round(j, c.in, c.out, &rep);
  const auto v = is_cptp(out, 1e-9);
  EXPECT_TRUE(v.verdict);
  EXPECT_LE(rep.distance_sq, 10 * rep.bound + 1e-12);
}

TEST(StepRound, ComplementOfSupportIsFilled) {
  Mat p0 = Mat::Zero(2, 2);
  p0(0, 0) = 1;
  const Mat j = kron(p0, Mat::Identity(2, 2) / 2.0);
  const auto out = step_round(j, {2}, {2});
  const Mat expect = j + kron(Mat::Identity(2, 2) - p0, Mat::Identity(2, 2) / 2.0);
  EXPECT_LT((out.j - expect).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(is_cptp(out).marginal_residual, 1e-9);
}

TEST(StepSmooth, NoiselessIsIdentity) {
  auto ctx = qubit_context();
  GaussianSampler s(4);
  const auto M = random_adjoint_choi({2, 2, 1}, {2}, s, 1);
  const auto N = random_adjoint_choi({2, 2, 1}, {2}, s, 2);
  CorrelationEvaluator ev(ctx.phi_in, ctx.g, ctx.profile.psi, 2, 2, 2);
  const auto r = step_smooth(M, N, ctx, ev, 10, 1.0);
  EXPECT_LT((r.m1 - M.j).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((r.n1 - N.j).cwiseAbs().maxCoeff(), 1e-12);
  ChoiMatrix bad = M;
  bad.j = -bad.j;
  EXPECT_THROW(step_smooth(bad, N, ctx, ev, 10, 1.0), DomainError);
}

TEST(StepSmooth, RandomStrategyWithinDelta) {
  auto ctx = qubit_context();
  GaussianSampler s(5);
  const auto M = random_adjoint_choi({2, 2, 1}, {2}, s, 1);
  const auto N = random_adjoint_choi({2, 2, 1}, {2}, s, 2);
  CorrelationEvaluator ev(ctx.phi_in, ctx.g, ctx.profile.psi, 2, 2, 2);
  const auto r = step_smooth(M, N, ctx, ev, static_cast<int>(ctx.params.eff_d1()), ctx.params.gamma);
  EXPECT_TRUE(r.report.passed());
  EXPECT_LE(r.report.table.max_abs_diff(ev.table(M.j, N.j)), 0.2);
}

TEST(StepRegularize, InfluentialCoordinates) {
  auto ctx = qubit_context();
  const Mat id = Mat::Identity(8, 8) / 2.0;
  // Only the first copy carries a nontrivial slice.
  const Mat m = id + 0.25 * kron_all({pauli_z(), Mat::Identity(2, 2), pauli_z()});
  auto r = step_regularize(m, id, 2, ctx, 0.01, 4);  // influence of copy 0 is 0.25² = 0.0625
  EXPECT_EQ(r.H, std::vector<int>{0});
  r = step_regularize(id, id, 2, ctx, 0.01, 4);
  EXPECT_TRUE(r.H.empty());
}

TEST(Multilinearize, SquareLosesTwoOverN1) {
  // x² = √2 H₂(x) + 1; the multilinear part of (Σ z_j/√8)² drops the variable squares.
  RandomOperator r;
  r.op_dims = {1, 1};
  r.n = 1;
  r.add({2}, Mat::Constant(1, 1, std::sqrt(2.0)));
  r.add({0}, Mat::Constant(1, 1, 1.0));
  const auto ml = multilinearize(r, 8);
  EXPECT_TRUE(ml.multilinear());
  EXPECT_EQ(ml.n, 8);
  EXPECT_NEAR(r.l2_sq() - ml.l2_sq(), 0.25, 1e-12);
}

TEST(Multilinearize, DegreeOneSplitsEvenly) {
  RandomOperator r;
  r.op_dims = {2};
  r.n = 2;
  r.add({1, 0}, pauli_z());
  const auto ml = multilinearize(r, 4);
  EXPECT_EQ(ml.terms.size(), 4u);
  for (const auto& [k, m] : ml.terms) EXPECT_NEAR(m(0, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(ml.l2_sq(), r.l2_sq(), 1e-14);
}

TEST(InvarianceBack, ConstantAndLinearTerms) {
  const Mat z = pauli_z();
  Mat s1 = z;  // any traceless unit-norm site operator
  RandomOperator c;
  c.op_dims = {1, 2};
  c.n = 1;
  c.add({0}, z);
  EXPECT_LT((invariance_back(c, s1, 2) - kron(Mat::Identity(2, 2), z)).cwiseAbs().maxCoeff(), 1e-15);
  RandomOperator l;
  l.op_dims = {1, 2};
  l.n = 1;
  l.add({1}, z);
  EXPECT_LT((invariance_back(l, s1, 2) - kron(s1, z)).cwiseAbs().maxCoeff(), 1e-15);
  RandomOperator q = l;
  q.terms.clear();
  q.add({2}, z);
  EXPECT_THROW(invariance_back(q, s1, 2), DomainError);
}

TEST(RunPipeline, RandomTwoCopyQubitStrategy) {
  GameDims g{1, 1, 1, 2, 2};
  const Mat phi = Mat::Identity(1, 1);
  const auto prof = depolarized_mes(2, 0.25);
  GaussianSampler s(6);
  const auto M = random_adjoint_choi({2, 2, 1}, {2}, s, 1);
  const auto N = random_adjoint_choi({2, 2, 1}, {2}, s, 2);
  PipelineParams P;
  P.delta = 0.3;
  P.theta = 0.1;
  P.seed = 6;
  P.monte_carlo_N = 20000;
  P.overrides.d1 = 4;
  P.overrides.n0 = 16;
  P.overrides.d2 = 4;
  P.overrides.n1 = 4;
  P.overrides.D_extra = 2;
  const auto res = run_pipeline(M, N, g, phi, prof, P);
  EXPECT_TRUE(res.alice_cptp.verdict);
  EXPECT_TRUE(res.bob_cptp.verdict);
  EXPECT_EQ(res.copies, static_cast<int>(res.H.size()) + 2);
  ASSERT_GE(res.stages.size(), 8u);
  EXPECT_EQ(res.stages.front().stage, "smooth");
  EXPECT_EQ(res.stages.back().stage, "round");
  for (const auto& st : res.stages)
    for (const auto& c : st.checks) EXPECT_TRUE(std::isfinite(c.measured)) << st.stage << "/" << c.name;
  EXPECT_TRUE(res.ledger.reconciled);
  EXPECT_NEAR(res.ledger.total_deviation, res.after.max_abs_diff(res.before), 1e-12);
}

TEST(RunPipeline, RejectsMismatchedStrategy) {
  GameDims g{1, 1, 1, 2, 2};
  GaussianSampler s(7);
  const auto M = random_adjoint_choi({2, 1}, {2}, s, 1);
  const auto N = random_adjoint_choi({2, 2, 1}, {2}, s, 2);
  PipelineParams P;
  P.overrides.D_extra = 1;
  EXPECT_THROW(run_pipeline(M, N, g, Mat::Identity(1, 1), depolarized_mes(2, 0.25), P), DomainError);
}
