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

#include <limits>

#include <cmath>

#include "mesc/oracles.hpp"
#include "mesc/rounding.hpp"

using namespace mesc;

namespace {

Mat pauli(char c) {
  Mat m = Mat::Zero(2, 2);
  switch (c) {
    case 'I': m << 1, 0, 0, 1; break;
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, cd(0, -1), cd(0, 1), 0; break;
    default: m << 1, 0, 0, -1;
  }
  return m;
}

Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST(StandardBasis, TrivialDimension) {
  auto b = make_standard_basis(1);
  ASSERT_EQ(b.elements.size(), 1u);
  EXPECT_NEAR(std::abs(b.elements[0](0, 0) - 1.0), 0.0, 1e-15);
}

TEST(StandardBasis, QubitIsNormalizedPaulis) {
  auto b = make_standard_basis(2);
  ASSERT_EQ(b.elements.size(), 4u);
  EXPECT_LT((b.elements[0] - pauli('I')).cwiseAbs().maxCoeff(), 1e-15);
  for (const auto& e : b.elements) EXPECT_NEAR((e * e).trace().real() / 2, 1.0, 1e-14);
  // Every element is ±(one Pauli).
  for (size_t k = 1; k < 4; ++k) {
    double best = 0;
    for (char c : {'X', 'Y', 'Z'}) best = std::max(best, std::abs((b.elements[k] * pauli(c)).trace().real() / 2));
    EXPECT_NEAR(best, 1.0, 1e-14);
  }
}

TEST(StandardBasis, QutritGramIsIdentity) {
  auto b = make_standard_basis(3);
  ASSERT_EQ(b.elements.size(), 9u);
  for (size_t i = 0; i < 9; ++i)
    for (size_t j = 0; j < 9; ++j) {
      const cd g = (b.elements[i].adjoint() * b.elements[j]).trace() / 3.0;
      EXPECT_NEAR(std::abs(g - cd(i == j ? 1.0 : 0.0)), 0.0, 1e-12);
    }
}

TEST(InnerProduct, Examples) {
  auto id = HermitianTensorOperator::identity({2});
  auto z = HermitianTensorOperator::from_dims({2}, pauli('Z'));
  EXPECT_NEAR(inner_product(id, id), 1.0, 1e-15);
  EXPECT_NEAR(inner_product(id, z), 0.0, 1e-15);
}

TEST(InnerProduct, MatchesFourierSide) {
  GaussianSampler s(3);
  const Dims d{3, 3};
  auto p = HermitianTensorOperator::from_dims(d, random_hermitian(9, s, 1));
  auto q = HermitianTensorOperator::from_dims(d, random_hermitian(9, s, 2));
  auto fp = fourier_expand(p), fq = fourier_expand(q);
  double side = 0;
  for (const auto& [k, v] : fp.coeffs) side += v * fq.at(k);
  EXPECT_NEAR(inner_product(p, q), side, 1e-10);
}

TEST(Fourier, ProductOfPaulis) {
  auto zz = HermitianTensorOperator::from_dims({2, 2}, kron(pauli('Z'), pauli('Z')));
  auto f = fourier_expand(zz);
  const auto b = make_standard_basis(2);
  int zi = -1;
  for (int k = 1; k < 4; ++k)
    if (std::abs((b.elements[k] * pauli('Z')).trace().real()) > 1) zi = k;
  ASSERT_GT(zi, 0);
  for (const auto& [k, v] : f.coeffs) {
    const bool target = k == MultiIndex{zi, zi};
    EXPECT_NEAR(std::abs(v), target ? 1.0 : 0.0, 1e-14);
  }
  auto id = fourier_expand(HermitianTensorOperator::identity({2, 2}));
  EXPECT_NEAR(id.at({0, 0}), 1.0, 1e-15);
  EXPECT_NEAR(id.sum_squares(), 1.0, 1e-14);
}

TEST(Fourier, RoundTrip) {
  GaussianSampler s(5);
  auto h = HermitianTensorOperator::from_dims({2, 2}, random_hermitian(4, s, 9));
  auto back = fourier_synthesize(fourier_expand(h));
  EXPECT_LT(std::sqrt(nnorm2_sq(back.dense() - h.dense())), 1e-10);
}

TEST(Norms, Examples) {
  auto id = HermitianTensorOperator::identity({2});
  for (double p : {1.0, 2.0, 3.0, std::numeric_limits<double>::infinity()}) EXPECT_NEAR(normalized_p_norm(id, p), 1.0, 1e-14);
  EXPECT_NEAR(normalized_p_norm(diag2(2, 0), 2.0), std::sqrt(2.0), 1e-14);
}

TEST(Degree, TruncationExamples) {
  auto h = HermitianTensorOperator::from_dims({2, 2}, kron(pauli('I'), pauli('I')) + kron(pauli('Z'), pauli('Z')));
  EXPECT_EQ(degree(h), 2);
  auto [lo, hi] = truncate_degree(h, 1);
  EXPECT_LT((lo.dense() - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((hi.dense() - kron(pauli('Z'), pauli('Z'))).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(degree(HermitianTensorOperator::identity({3, 2})), 0);
  EXPECT_THROW(truncate_degree(h, -1), DomainError);
}

TEST(Influence, Examples) {
  auto zi = HermitianTensorOperator::from_dims({2, 2}, kron(pauli('Z'), pauli('I')));
  EXPECT_NEAR(influence(zi, 0), 1.0, 1e-14);
  EXPECT_NEAR(influence(zi, 1), 0.0, 1e-14);
  EXPECT_NEAR(total_influence(HermitianTensorOperator::identity({2, 3})), 0.0, 1e-14);
  EXPECT_THROW(influence(zi, 2), DomainError);
}

TEST(Influence, DefinitionMatchesOracleAndFourier) {
  GaussianSampler s(11);
  const Dims d{2, 3, 2};
  const Mat h = random_hermitian(12, s, 4);
  auto f = fourier_expand(HermitianTensorOperator::from_dims(d, h));
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(influence(h, d, i), oracle::influence(h, d, i), 1e-10);
    EXPECT_NEAR(influence(h, d, i), influence_fourier(f, i), 1e-10);
  }
}

TEST(Depolarize, Examples) {
  for (double g : {0.0, 0.4, 1.0})
    EXPECT_LT((depolarize(Mat::Identity(2, 2), {2}, g, {0}) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((depolarize(pauli('Z'), {2}, 0.5, {0}) - 0.5 * pauli('Z')).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(depolarize(pauli('Z'), {2}, 1.5, {0}), DomainError);
}

TEST(Spectral, ZetaPositivePartPseudoInverse) {
  EXPECT_NEAR(zeta_trace(diag2(1, -2)), 4.0, 1e-14);
  GaussianSampler s(2);
  const Mat g = ginibre(3, 3, s, 1);
  EXPECT_NEAR(zeta_trace(Mat(g * g.adjoint())), 0.0, 1e-12);
  EXPECT_LT((positive_part(diag2(1, -2)) - diag2(1, 0)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((pseudo_inverse(diag2(2, 0)) - diag2(0.5, 0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PartialTrace, Examples) {
  GaussianSampler s(8);
  const Mat ra = random_hermitian(2, s, 1), rb = random_hermitian(3, s, 2);
  const Mat pt = partial_trace(kron(ra, rb), {2, 3}, {1});
  EXPECT_LT((pt - rb.trace() * ra).cwiseAbs().maxCoeff(), 1e-13);
  Mat swap = Mat::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) swap(i * 2 + j, j * 2 + i) = 1;
  EXPECT_LT((partial_trace(swap, {2, 2}, {0}) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HermitianTensorOperator, RejectsNonHermitian) {
  Mat m = Mat::Zero(2, 2);
  m(0, 1) = 1;
  EXPECT_THROW(HermitianTensorOperator::from_dims({2}, m), DomainError);
  EXPECT_THROW(HermitianTensorOperator::from_dims({3}, Mat::Identity(2, 2)), DomainError);
}
