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

#include <vector>

#include "mesc/superop.hpp"

namespace mesc {

inline constexpr double kMarginalTol = 1e-8;

/// @brief Bipartite state with maximally mixed marginals and its aligned bases.
struct NoisyMesProfile {
  int s = 2, t = 2;
  Mat psi;
  double rho = 0;
  std::vector<double> spectrum;  // c_0 = 1 ≥ c_1 = rho ≥ ...
  StandardBasis s_basis, t_basis;
};

/// @brief |Ψ⟩⟨Ψ| with |Ψ⟩ = Σ_i |ii⟩/√m.
inline Mat mes_state(int m) {
  Mat v = Mat::Zero(m * m, 1);
  for (int i = 0; i < m; ++i) v(i * m + i, 0) = 1.0 / std::sqrt(static_cast<double>(m));
  return v * v.adjoint();
}

inline Mat depolarized_mes_state(int m, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("depolarized_mes: eps outside [0,1]");
  require(m >= 2, "depolarized_mes: m must be >= 2");
  return (1.0 - eps) * mes_state(m) + eps * Mat::Identity(m * m, m * m) / static_cast<double>(m * m);
}

inline void check_maximally_mixed(const Mat& psi, int s, int t, double tol = kMarginalTol) {
  require(psi.rows() == static_cast<long long>(s) * t, "state size does not match s*t");
  Mat ms = partial_trace(psi, {s, t}, {1});
  Mat mt = partial_trace(psi, {s, t}, {0});
  const double rs = spectral_norm(ms - Mat::Identity(s, s) / static_cast<double>(s));
  const double rt = spectral_norm(mt - Mat::Identity(t, t) / static_cast<double>(t));
  if (rs > tol || rt > tol) throw DomainError("state marginals are not maximally mixed");
}

/// @brief C_ij = Tr[(S_i ⊗ T_j) ψ] over full standard bases (index 0 = identity).
inline RMat correlation_matrix(const Mat& psi, const StandardBasis& sb, const StandardBasis& tb) {
  const int ns = static_cast<int>(sb.elements.size()), nt = static_cast<int>(tb.elements.size());
  RMat c(ns, nt);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nt; ++j) c(i, j) = (kron(sb.elements[i], tb.elements[j]) * psi).trace().real();
  return c;
}

/// @brief Top singular value of the traceless-sector correlation matrix.
inline double maximal_correlation(const Mat& psi, int s, int t) {
  check_maximally_mixed(psi, s, t);
  RMat c = correlation_matrix(psi, make_standard_basis(s), make_standard_basis(t));
  RMat core = c.bottomRightCorner(s * s - 1, t * t - 1);
  Eigen::JacobiSVD<RMat> svd(core);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

/// @brief Rotates the traceless sectors so that Tr[(S_i ⊗ T_j)ψ] = δ_ij c_i.
inline NoisyMesProfile align_bases(const Mat& psi, int s, int t) {
  check_maximally_mixed(psi, s, t);
  auto sb = make_standard_basis(s), tb = make_standard_basis(t);
  RMat c = correlation_matrix(psi, sb, tb);
  RMat core = c.bottomRightCorner(s * s - 1, t * t - 1);
  Eigen::JacobiSVD<RMat> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
  NoisyMesProfile p;
  p.s = s;
  p.t = t;
  p.psi = psi;
  p.s_basis = rotate_basis(sb, svd.matrixU());
  p.t_basis = rotate_basis(tb, svd.matrixV());
  p.spectrum.assign(s * s, 0.0);
  p.spectrum[0] = 1.0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) p.spectrum[i + 1] = svd.singularValues()(i);
  p.rho = s * s > 1 ? p.spectrum[1] : 0.0;
  return p;
}

inline NoisyMesProfile depolarized_mes(int m, double eps) { return align_bases(depolarized_mes_state(m, eps), m, m); }

/// @brief Bases {P̃_p}, {Q̃_q} (trace-normalized) with Tr[(P̃_p⊗Q̃_q⊗R̃_r)φ_in] = δ_pq k_p.
struct InputDiagonalization {
  int r = 0;
  std::vector<Mat> p_tilde, q_tilde;
  std::vector<double> k;
};

inline RMat input_moment_matrix(const Mat& phi_in, int p, int q, int r, const std::vector<Mat>& pt,
                                const std::vector<Mat>& qt, const Mat& rt) {
  require(phi_in.rows() == static_cast<long long>(p) * q * r, "phi_in size mismatch");
  Mat red = contract_last(phi_in, static_cast<long long>(p) * q, r, rt);
  RMat m(pt.size(), qt.size());
  for (size_t i = 0; i < pt.size(); ++i)
    for (size_t j = 0; j < qt.size(); ++j) m(i, j) = (kron(pt[i], qt[j]) * red).trace().real();
  return m;
}

inline InputDiagonalization diagonalize_input(const Mat& phi_in, int p, int q, int r, const StandardBasis& r_basis,
                                              int r_index) {
  require(r_index >= 0 && r_index < r * r, "diagonalize_input: r index out of range");
  auto pt0 = trace_normalized(make_standard_basis(p));
  auto qt0 = trace_normalized(make_standard_basis(q));
  Mat rt = r_basis.elements[r_index] / std::sqrt(static_cast<double>(r));
  RMat m = input_moment_matrix(phi_in, p, q, r, pt0, qt0, rt);
  Eigen::JacobiSVD<RMat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  InputDiagonalization d;
  d.r = r_index;
  const RMat& u = svd.matrixU();
  const RMat& v = svd.matrixV();
  for (int i = 0; i < p * p; ++i) {
    Mat e = Mat::Zero(p, p);
    for (int k = 0; k < p * p; ++k) e += u(k, i) * pt0[k];
    d.p_tilde.push_back(e);
  }
  for (int j = 0; j < q * q; ++j) {
    Mat e = Mat::Zero(q, q);
    for (int k = 0; k < q * q; ++k) e += v(k, j) * qt0[k];
    d.q_tilde.push_back(e);
  }
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) d.k.push_back(svd.singularValues()(i));
  return d;
}

}  // namespace mesc
