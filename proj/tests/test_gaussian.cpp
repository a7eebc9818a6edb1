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

#include "mesc/random_operator.hpp"
#include "mesc/rounding.hpp"

using namespace mesc;

namespace {

std::vector<int> idx(std::initializer_list<int> v) { return std::vector<int>(v); }

HermiteExpansion random_expansion(int n, int deg, const GaussianSampler& s, std::uint64_t stream) {
  HermiteExpansion f;
  f.n = n;
  int k = 0;
  std::vector<int> sigma(n, 0);
  // All σ with |σ| ≤ deg, enumerated odometer style.
  while (true) {
    if (abs_degree(sigma) <= deg) f.coeffs[sigma] = s.normal(stream, k++);
    int i = 0;
    while (i < n && ++sigma[i] > deg) sigma[i++] = 0;
    if (i == n) break;
  }
  return f;
}

}  // namespace

TEST(Hermite, SmallValues) {
  EXPECT_EQ(hermite(0, 3.7), 1.0);
  EXPECT_EQ(hermite(1, 0.5), 0.5);
  EXPECT_NEAR(hermite(2, 1.0), 0.0, 1e-15);
  EXPECT_NEAR(hermite(2, 2.0), 3.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(hermite(3, 2.0), (8.0 - 6.0) / std::sqrt(6.0), 1e-14);
  EXPECT_THROW(hermite(-1, 0.0), DomainError);
  EXPECT_NEAR(hermite_multi(idx({1, 2}), (Vec(2) << 0.5, 1.0).finished()), 0.0, 1e-15);
}

TEST(Hermite, TableMatchesRecurrence) {
  std::vector<double> t;
  hermite_table(0.37, 7, t);
  for (int r = 0; r <= 7; ++r) EXPECT_NEAR(t[r], hermite(r, 0.37), 1e-14);
}

TEST(Hermite, OrthonormalUnderGaussianMeasure) {
  GaussianSampler s(5);
  const long long N = 1000000;
  for (int r = 0; r <= 3; ++r)
    for (int q = r; q <= 3; ++q) {
      McAccumulator acc;
      for (long long k = 0; k < N; ++k) {
        const double x = s.normal(7, k);
        acc.add(hermite(r, x) * hermite(q, x));
      }
      const auto m = acc.result();
      EXPECT_NEAR(m.mean, r == q ? 1.0 : 0.0, 3 * m.std_error + 1e-12) << "r=" << r << " s=" << q;
    }
}

TEST(Hermite, MonomialConversionRoundTrip) {
  // x^k = Σ_j a_kj H_j and H_j = Σ_k h_jk x^k are inverse triangular systems.
  for (int k = 0; k <= 6; ++k)
    for (int m = 0; m <= 6; ++m) {
      double s = 0;
      for (int j = 0; j <= 6; ++j) s += monomial_to_hermite_coeff(k, j) * hermite_monomial_coeff(j, m);
      EXPECT_NEAR(s, k == m ? 1.0 : 0.0, 1e-12);
    }
  EXPECT_EQ(gaussian_moment(4), 3.0);
  EXPECT_EQ(gaussian_moment(3), 0.0);
  EXPECT_NEAR(chi_moment(3, 2), 3.0, 1e-12);
}

TEST(Sampler, DeterministicAndCorrelated) {
  GaussianSampler a(11), b(11), c(12);
  EXPECT_EQ(a.normal(3, 17), b.normal(3, 17));
  EXPECT_NE(a.normal(3, 17), c.normal(3, 17));
  const double rho = 0.6;
  McAccumulator xy, xx, yy;
  for (long long k = 0; k < 1000000; ++k) {
    auto [x, y] = a.correlated(k, 1, rho);
    xy.add(x(0) * y(0));
    xx.add(x(0) * x(0));
    yy.add(y(0) * y(0));
  }
  EXPECT_NEAR(xy.result().mean, rho, 3 * xy.result().std_error);
  EXPECT_NEAR(xx.result().mean, 1.0, 3 * xx.result().std_error);
  EXPECT_NEAR(yy.result().mean, 1.0, 3 * yy.result().std_error);
}

TEST(OuSmooth, Limits) {
  GaussianSampler s(3);
  const auto f = random_expansion(3, 3, s, 1);
  const auto u1 = ou_smooth(f, 1.0);
  EXPECT_EQ(u1.coeffs, f.coeffs);
  const auto u0 = ou_smooth(f, 0.0);
  ASSERT_EQ(u0.coeffs.size(), 1u);
  EXPECT_EQ(u0.coeffs.begin()->first, std::vector<int>(3, 0));
  EXPECT_EQ(u0.coeffs.begin()->second, f.coeffs.at(std::vector<int>(3, 0)));
  EXPECT_THROW(ou_smooth(f, 1.5), DomainError);
}

TEST(OuSmooth, SemigroupOnCoefficients) {
  GaussianSampler s(4);
  const auto f = random_expansion(3, 4, s, 2);
  const auto a = ou_smooth(ou_smooth(f, 0.7), 0.4);
  const auto b = ou_smooth(f, 0.28);
  ASSERT_EQ(a.coeffs.size(), b.coeffs.size());
  for (const auto& [k, c] : b.coeffs) EXPECT_NEAR(a.coeffs.at(k), c, 1e-15);
}

TEST(Influence, TrivialCases) {
  HermiteExpansion f;
  f.n = 2;
  f.coeffs[idx({1, 0})] = 1.0;
  EXPECT_EQ(gaussian_influence(f, 0), 1.0);
  EXPECT_EQ(gaussian_influence(f, 1), 0.0);
  EXPECT_EQ(gaussian_variance(f), 1.0);
  HermiteExpansion c;
  c.n = 2;
  c.coeffs[idx({0, 0})] = 2.5;
  EXPECT_EQ(gaussian_influence(c, 0), 0.0);
  EXPECT_EQ(gaussian_influence(c, 1), 0.0);
  EXPECT_EQ(gaussian_variance(c), 0.0);
}

TEST(Influence, MatchesNestedVarianceMonteCarlo) {
  // Inf_1 f = E_{x_{-1}} Var_{x_1} f = ½ E (f(x) − f(x'))² with x' resampled in coordinate 1 only.
  GaussianSampler s(8);
  const auto f = random_expansion(3, 3, s, 3);
  McAccumulator acc;
  for (long long k = 0; k < 1000000; ++k) {
    Vec x = s.normals(100 + k, 3);
    Vec x2 = x;
    x2(0) = s.normal(100 + k, 3);
    const double d = f.evaluate(x) - f.evaluate(x2);
    acc.add(0.5 * d * d);
  }
  const auto m = acc.result();
  EXPECT_NEAR(m.mean, gaussian_influence(f, 0), 3 * m.std_error);
}

TEST(MultilinearTruncate, Examples) {
  HermiteExpansion f;
  f.n = 2;
  f.coeffs[idx({1, 1})] = 1.0;
  auto m = multilinear_truncate(f);
  ASSERT_EQ(m.coeffs.size(), 1u);
  EXPECT_EQ(m.coeffs.at(idx({0, 1})), 1.0);

  // x₁² = √2 H₂(x₁) + 1.
  HermiteExpansion sq;
  sq.n = 1;
  sq.coeffs[idx({2})] = monomial_to_hermite_coeff(2, 2);
  sq.coeffs[idx({0})] = monomial_to_hermite_coeff(2, 0);
  EXPECT_NEAR(sq.coeffs[idx({2})], std::sqrt(2.0), 1e-14);
  m = multilinear_truncate(sq);
  ASSERT_EQ(m.coeffs.size(), 1u);
  EXPECT_NEAR(m.coeffs.at(idx({})), 1.0, 1e-14);

  HermiteExpansion h;
  h.n = 2;
  h.coeffs[idx({2, 1})] = 1.0;
  EXPECT_TRUE(multilinear_truncate(h).coeffs.empty());
}

TEST(CorrelatedInner, ClosedForms) {
  const double rho = 0.35;
  HermiteExpansion x1, x1x2;
  x1.n = x1x2.n = 2;
  x1.coeffs[idx({1, 0})] = 1.0;
  x1x2.coeffs[idx({1, 1})] = 1.0;
  EXPECT_NEAR(correlated_inner(x1, x1, rho), rho, 1e-15);
  EXPECT_NEAR(correlated_inner(x1x2, x1x2, rho), rho * rho, 1e-15);
  HermiteExpansion bad;
  bad.n = 2;
  bad.coeffs[idx({2, 0})] = 1.0;
  EXPECT_THROW(correlated_inner(bad, x1, rho), DomainError);
}

TEST(CorrelatedInner, ExactMatchesMonteCarlo) {
  GaussianSampler s(9);
  MultilinearPolynomial f, g;
  f.n = g.n = 4;
  int k = 0;
  for (int mask = 0; mask < 16; ++mask) {
    std::vector<int> sub;
    for (int i = 0; i < 4; ++i)
      if (mask >> i & 1) sub.push_back(i);
    if (sub.size() > 3) continue;
    f.coeffs[sub] = s.normal(1, k);
    g.coeffs[sub] = s.normal(2, k++);
  }
  const double rho = 0.55;
  const double exact = correlated_inner(f, g, rho);
  const auto mc = monte_carlo_functional([&](const Vec& x, const Vec& y) { return f.evaluate(x) * g.evaluate(y); }, s,
                                         4, rho, 1000000, 1000);
  EXPECT_NEAR(mc.mean, exact, 3 * mc.std_error);
}

TEST(RandomOperator, MomentsOfGaussianTimesZ) {
  Mat z = Mat::Zero(2, 2);
  z(0, 0) = 1;
  z(1, 1) = -1;
  RandomOperator p;
  p.op_dims = {2};
  p.n = 1;
  p.add(idx({1}), z);
  GaussianSampler s(10);
  const auto mom = random_operator_moments(p, s, 200000);
  EXPECT_NEAR(mom.l2_sq_exact, 1.0, 1e-15);
  // E g⁴ · Tr Z⁴ / 2 = 3.
  EXPECT_NEAR(mom.p4.mean, 3.0, 3 * mom.p4.std_error);
  EXPECT_THROW(random_operator_moments(p, s, 50), DomainError);
}

TEST(RandomOperator, DeterministicZetaIsExact) {
  GaussianSampler s(12);
  const Mat m = random_hermitian(4, s, 1);
  const auto p = RandomOperator::constant({2, 2}, 3, m);
  const auto z = random_operator_zeta(p, s, 100);
  EXPECT_EQ(z.mean, zeta_trace(m));
  EXPECT_EQ(z.std_error, 0.0);
  EXPECT_THROW(random_operator_zeta(p, s, 10), DomainError);
}

TEST(RandomOperator, EvaluatorMatchesDirectEvaluation) {
  GaussianSampler s(13);
  RandomOperator p;
  p.op_dims = {2};
  p.n = 3;
  p.add(idx({0, 0, 0}), random_hermitian(2, s, 1));
  p.add(idx({1, 0, 2}), random_hermitian(2, s, 2));
  p.add(idx({0, 3, 1}), random_hermitian(2, s, 3));
  RandomOperatorEvaluator ev(p);
  for (int k = 0; k < 20; ++k) {
    const Vec x = s.normals(50 + k, 3);
    EXPECT_LT((ev.evaluate(x) - p.evaluate(x)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(p.degree(), 4);
  EXPECT_FALSE(p.multilinear());
}
