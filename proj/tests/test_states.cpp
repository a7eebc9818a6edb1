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
#include "mesc/states.hpp"
#include "mesc/rounding.hpp"

using namespace mesc;

TEST(DepolarizedMes, MaximalCorrelationIsOneMinusEps) {
  EXPECT_NEAR(depolarized_mes(2, 0.25).rho, 0.75, 1e-8);
  EXPECT_NEAR(depolarized_mes(2, 1.0).rho, 0.0, 1e-12);
  EXPECT_NEAR(depolarized_mes(3, 0.1).rho, 0.9, 1e-8);
  EXPECT_NEAR(maximal_correlation(depolarized_mes_state(2, 0.0), 2, 2), 1.0, 1e-12);
}

TEST(MaximalCorrelation, ProductStateAndRejection) {
  EXPECT_NEAR(maximal_correlation(Mat::Identity(4, 4) / 4.0, 2, 2), 0.0, 1e-14);
  Mat bad = Mat::Zero(4, 4);
  bad(0, 0) = 1;
  EXPECT_THROW(maximal_correlation(bad, 2, 2), DomainError);
}

TEST(MaximalCorrelation, MatchesOptimizationOracle) {
  GaussianSampler s(17);
  const Mat phi = mes_state(3);
  Mat psi = 0.3 * Mat::Identity(9, 9) / 9.0;
  for (int k = 0; k < 2; ++k) {
    Eigen::HouseholderQR<Mat> qu(ginibre(3, 3, s, 2 * k)), qv(ginibre(3, 3, s, 2 * k + 1));
    const Mat uv = kron(Mat(qu.householderQ()), Mat(qv.householderQ()));
    psi += 0.35 * uv * phi * uv.adjoint();
  }
  EXPECT_NEAR(maximal_correlation(psi, 3, 3), oracle::maximal_correlation(psi, 3, 3, 50, 5), 1e-6);
}

TEST(AlignBases, DepolarizedSpectrum) {
  const auto p = depolarized_mes(3, 0.2);
  ASSERT_EQ(p.spectrum.size(), 9u);
  EXPECT_NEAR(p.spectrum[0], 1.0, 1e-15);
  for (size_t i = 1; i < 9; ++i) EXPECT_NEAR(p.spectrum[i], 0.8, 1e-9);
  const auto prod = align_bases(Mat::Identity(4, 4) / 4.0, 2, 2);
  EXPECT_NEAR(prod.spectrum[0], 1.0, 1e-15);
  for (size_t i = 1; i < 4; ++i) EXPECT_NEAR(prod.spectrum[i], 0.0, 1e-12);
}

TEST(AlignBases, InvariantUnderLocalRotation) {
  GaussianSampler s(23);
  const Mat phi = mes_state(2);
  Eigen::HouseholderQR<Mat> q1(ginibre(2, 2, s, 1)), q2(ginibre(2, 2, s, 2));
  const Mat u1 = kron(Mat(q1.householderQ()), Mat::Identity(2, 2));
  Mat psi = 0.6 * u1 * phi * u1.adjoint() + 0.2 * Mat::Identity(4, 4) / 4.0;
  const Mat u2 = kron(Mat(q2.householderQ()), Mat(q1.householderQ()));
  psi += 0.2 * u2 * phi * u2.adjoint();
  const auto a = align_bases(psi, 2, 2);
  const Mat v = kron(Mat::Identity(2, 2), Mat(q2.householderQ()));
  const auto b = align_bases(v * psi * v.adjoint(), 2, 2);
  for (size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.spectrum[i], b.spectrum[i], 1e-9);
  // In the aligned bases the correlation matrix is diagonal.
  RMat c = correlation_matrix(psi, a.s_basis, a.t_basis);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (i != j) {
        EXPECT_NEAR(c(i, j), 0.0, 1e-9);
      }
    }
}

TEST(DiagonalizeInput, ProductInputHasOneNonzero) {
  GaussianSampler s(29);
  auto dens = [&](int d, std::uint64_t st) {
    Mat g = ginibre(d, d, s, st);
    Mat x = g * g.adjoint();
    return Mat(x / x.trace().real());
  };
  const Mat phi = kron(kron(dens(2, 1), dens(2, 2)), dens(2, 3));
  const auto d = diagonalize_input(phi, 2, 2, 2, make_standard_basis(2), 0);
  int nonzero = 0;
  for (double k : d.k) nonzero += std::abs(k) > 1e-9;
  EXPECT_EQ(nonzero, 1);
}

TEST(DiagonalizeInput, OrthogonalRegisterGivesZero) {
  // R marginal |0⟩⟨0|; the Z-like element shifted to vanish on it is not available, so use a Pauli X slice.
  Mat phi = Mat::Zero(8, 8);
  phi(0, 0) = 1;  // |000⟩
  const auto rb = make_standard_basis(2);
  int xi = -1;
  for (int k = 1; k < 4; ++k)
    if (std::abs(rb.elements[k](0, 0)) < 1e-12 && std::abs(rb.elements[k](0, 1).imag()) < 1e-12) xi = k;
  ASSERT_GT(xi, 0);
  const auto d = diagonalize_input(phi, 2, 2, 2, rb, xi);
  for (double k : d.k) EXPECT_NEAR(k, 0.0, 1e-12);
}

TEST(DiagonalizeInput, RandomPureStateOffDiagonalsVanish) {
  GaussianSampler s(37);
  Mat v = ginibre(8, 1, s, 1);
  v /= v.norm();
  const Mat phi = v * v.adjoint();
  const auto rb = make_standard_basis(2);
  const auto d = diagonalize_input(phi, 2, 2, 2, rb, 1);
  const Mat rt = rb.elements[1] / std::sqrt(2.0);
  for (size_t p = 0; p < d.p_tilde.size(); ++p)
    for (size_t q = 0; q < d.q_tilde.size(); ++q) {
      if (p == q) continue;
      const double t = (kron(kron(d.p_tilde[p], d.q_tilde[q]), rt) * phi).trace().real();
      EXPECT_NEAR(t, 0.0, 1e-9);
    }
}
