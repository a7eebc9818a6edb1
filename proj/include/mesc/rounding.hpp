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

#include <cmath>

#include "mesc/gaussian.hpp"
#include "mesc/superop.hpp"

namespace mesc {

/// @brief Quantities logged by step_round.
struct RoundingReport {
  double zeta = 0;           // Tr ζ(J)
  double eps = 0;            // Tr ζ(J) / dim S
  double distance_sq = 0;    // |||J − J̃|||₂²
  double bound = 0;          // 𝖺^{5/2} √ε
  double measured_constant = 0;
  double marginal_dev = 0;   // |||(J₊)_S − I|||₂
  double term1 = 0, term1_bound = 0;
  double term2 = 0, term2_bound = 0;
  double min_eig_out = 0;
  double marginal_residual_out = 0;
  long long support_rank = 0;
};

/// @brief Projects a Hermitian J on S ⊗ A with Tr_A J ≈ I onto valid adjoint Choi matrices:
/// J̃ = (√((J₊)_S⁺) ⊗ I) J₊ (√((J₊)_S⁺) ⊗ I) + (I − Π_S) ⊗ I/𝖺.
inline ChoiMatrix step_round(const Mat& j, const Dims& in, const Dims& out, RoundingReport* rep = nullptr) {
  const long long ds = dim_product(in), da = dim_product(out);
  require(j.rows() == ds * da, "step_round: size mismatch");
  Dims all = in;
  all.insert(all.end(), out.begin(), out.end());
  std::vector<int> out_sys;
  for (size_t k = 0; k < out.size(); ++k) out_sys.push_back(static_cast<int>(in.size() + k));

  const Mat jh = hermitian_part(j);
  const Mat jp = positive_part(jh);
  const Mat js = partial_trace(jp, all, out_sys);
  auto e = eigh(js);
  const double scale = std::max(1.0, e.values.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  Vec isq = e.values.unaryExpr([&](double l) { return l > tol ? 1.0 / std::sqrt(l) : 0.0; });
  Vec proj = e.values.unaryExpr([&](double l) { return l > tol ? 1.0 : 0.0; });
  const Mat x = e.vectors * isq.cast<cd>().asDiagonal() * e.vectors.adjoint();
  const Mat pi = e.vectors * proj.cast<cd>().asDiagonal() * e.vectors.adjoint();
  const Mat xa = kron(x, Mat::Identity(da, da));
  const Mat id_a = Mat::Identity(da, da) / static_cast<double>(da);
  Mat jt = xa * jp * xa + kron(Mat::Identity(ds, ds) - pi, id_a);
  jt = hermitian_part(jt);

  if (rep) {
    rep->zeta = zeta_trace(jh);
    rep->eps = rep->zeta / static_cast<double>(ds);
    rep->distance_sq = nnorm2_sq(jh - jt);
    rep->bound = std::pow(static_cast<double>(da), 2.5) * std::sqrt(rep->eps);
    rep->measured_constant = rep->bound > 0 ? rep->distance_sq / rep->bound : 0.0;
    rep->marginal_dev = nnorm2(js - Mat::Identity(ds, ds));
    rep->term1 = nnorm2_sq(xa * jp * xa - xa * jp);
    rep->term1_bound = rep->marginal_dev;
    rep->term2 = nnorm2_sq(xa * jp - jp);
    rep->term2_bound = static_cast<double>(da * da) * rep->marginal_dev * (rep->marginal_dev + 1.0);
    rep->min_eig_out = min_eigenvalue(jt);
    Mat marg = partial_trace(jt, all, out_sys);
    rep->marginal_residual_out = spectral_norm(marg - Mat::Identity(ds, ds));
    rep->support_rank = static_cast<long long>(proj.sum());
  }
  return {in, out, jt};
}

/// @brief Complex Ginibre matrix with i.i.d. N(0,1) real and imaginary parts.
inline Mat ginibre(long long rows, long long cols, const GaussianSampler& s, std::uint64_t stream) {
  Vec re = s.normals(stream, static_cast<int>(2 * rows * cols));
  Mat g(rows, cols);
  for (long long i = 0; i < rows; ++i)
    for (long long j = 0; j < cols; ++j) g(i, j) = cd(re(2 * (i * cols + j)), re(2 * (i * cols + j) + 1));
  return g;
}

/// @brief (X + X†)/2 for Ginibre X.
inline Mat random_hermitian(long long d, const GaussianSampler& s, std::uint64_t stream) {
  return hermitian_part(ginibre(d, d, s, stream));
}

/// @brief A random valid adjoint Choi matrix on in ⊗ out: normalized W = K K†.
inline ChoiMatrix random_adjoint_choi(const Dims& in, const Dims& out, const GaussianSampler& s, std::uint64_t stream,
                                      long long rank = 0) {
  const long long d = dim_product(in) * dim_product(out);
  const Mat k = ginibre(d, rank > 0 ? rank : d, s, stream);
  return step_round(k * k.adjoint(), in, out);
}

}  // namespace mesc
