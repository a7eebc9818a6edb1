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

#include "mesc/random_operator.hpp"
#include "mesc/states.hpp"

namespace mesc {

/// @brief Question/answer dimensions of a game: φ_in on P⊗Q⊗R, answers A, B.
struct GameDims {
  int p = 1, q = 1, r = 1, a = 2, b = 2;
};

/// @brief Tr over the first factor of (X ⊗ I) Ω, with Ω on (dx) ⊗ (rest).
inline Mat contract_first(const Mat& omega, long long dx, long long rest, const Mat& x) {
  Mat out = Mat::Zero(rest, rest);
  for (long long i = 0; i < dx; ++i)
    for (long long j = 0; j < dx; ++j) {
      const cd w = x(i, j);
      if (w == cd(0)) continue;
      out += w * omega.block(j * rest, i * rest, rest, rest);
    }
  return out;
}

/// @brief Ω = φ_in ⊗ ψ^{⊗n} reordered to [S^n, P, T^n, Q, R].
inline Mat joint_input_state(const Mat& phi_in, const GameDims& g, const Mat& psi, int s, int t, int n) {
  Mat x = phi_in;
  Dims dims{g.p, g.q, g.r};
  for (int k = 0; k < n; ++k) {
    x = kron(x, psi);
    dims.push_back(s);
    dims.push_back(t);
  }
  // current order: P, Q, R, S1, T1, S2, T2, ...
  std::vector<int> perm;
  for (int k = 0; k < n; ++k) perm.push_back(3 + 2 * k);
  perm.push_back(0);
  for (int k = 0; k < n; ++k) perm.push_back(4 + 2 * k);
  perm.push_back(1);
  perm.push_back(2);
  return permute_systems(x, dims, perm);
}

/// @brief Values t_{abr} indexed (a, b, r) over the normalized game bases.
struct CorrelationTable {
  int na = 0, nb = 0, nr = 0;  // a², b², r²
  std::vector<double> v;

  CorrelationTable() = default;
  CorrelationTable(int a2, int b2, int r2) : na(a2), nb(b2), nr(r2), v(static_cast<size_t>(a2) * b2 * r2, 0.0) {}
  double& at(int a, int b, int r) { return v[(static_cast<size_t>(a) * nb + b) * nr + r]; }
  double at(int a, int b, int r) const { return v[(static_cast<size_t>(a) * nb + b) * nr + r]; }
  double max_abs_diff(const CorrelationTable& o) const {
    double m = 0;
    for (size_t i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[i] - o.v[i]));
    return m;
  }
  double l2_diff(const CorrelationTable& o) const {
    double m = 0;
    for (size_t i = 0; i < v.size(); ++i) m += (v[i] - o.v[i]) * (v[i] - o.v[i]);
    return std::sqrt(m);
  }
  CorrelationTable& operator+=(const CorrelationTable& o) {
    for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
    return *this;
  }
  CorrelationTable scaled(double c) const {
    CorrelationTable t = *this;
    for (auto& x : t.v) x *= c;
    return t;
  }
};

/// @brief Evaluates Tr[(M_a ⊗ N_b ⊗ R̃_r)(φ_in ⊗ ψ^{⊗n})] for operators on [S^n,P,A] and [T^n,Q,B].
class CorrelationEvaluator {
 public:
  CorrelationEvaluator(const Mat& phi_in, const GameDims& g, const Mat& psi, int s, int t, int n) : g_(g), n_(n) {
    ds_ = 1;
    dt_ = 1;
    for (int k = 0; k < n; ++k) {
      ds_ *= s;
      dt_ *= t;
    }
    Mat omega = joint_input_state(phi_in, g, psi, s, t, n);
    auto rt = trace_normalized(make_standard_basis(g.r));
    const long long left = ds_ * g.p * dt_ * g.q;
    for (int ri = 0; ri < g.r * g.r; ++ri) omega_r_.push_back(contract_last(omega, left, g.r, rt[ri]));
  }

  long long alice_dim() const { return ds_ * g_.p; }
  long long bob_dim() const { return dt_ * g_.q; }
  const GameDims& dims() const { return g_; }
  const Mat& omega_r(int r) const { return omega_r_[r]; }

  CorrelationTable table_from_slices(const std::vector<Mat>& m_a, const std::vector<Mat>& n_b) const {
    CorrelationTable t(static_cast<int>(m_a.size()), static_cast<int>(n_b.size()), g_.r * g_.r);
    for (int ri = 0; ri < t.nr; ++ri)
      for (int ai = 0; ai < t.na; ++ai) {
        Mat x = contract_first(omega_r_[ri], alice_dim(), bob_dim(), m_a[ai]);
        for (int bi = 0; bi < t.nb; ++bi) t.at(ai, bi, ri) = (n_b[bi] * x).trace().real();
      }
    return t;
  }

  CorrelationTable table(const Mat& m, const Mat& n) const {
    return table_from_slices(a_slices(m, alice_dim(), g_.a), a_slices(n, bob_dim(), g_.b));
  }

  /// @brief M_a = Tr_A[(I ⊗ conj(Ã_a)) M] for M on [X, A].
  static std::vector<Mat> a_slices(const Mat& m, long long dx, int a) {
    require(m.rows() == dx * a, "a_slices: size mismatch");
    auto at = trace_normalized(make_standard_basis(a));
    std::vector<Mat> out;
    for (int ai = 0; ai < a * a; ++ai) out.push_back(contract_last(m, dx, a, at[ai].conjugate()));
    return out;
  }

 private:
  GameDims g_;
  int n_;
  long long ds_, dt_;
  std::vector<Mat> omega_r_;
};

/// @brief Analytic E Tr[(𝐌_a ⊗ 𝐍_b ⊗ R̃_r)(φ_in ⊗ ψ^{⊗h})] = Σ_σ ρ^{|σ|₁} t(M_σ, N_σ).
inline CorrelationTable random_pair_table(const JointRandomOperatorPair& pair, const CorrelationEvaluator& ev) {
  const auto& g = ev.dims();
  CorrelationTable total(g.a * g.a, g.b * g.b, g.r * g.r);
  for (const auto& [s, mm] : pair.m.terms) {
    auto it = pair.n.terms.find(s);
    if (it == pair.n.terms.end()) continue;
    const int d = abs_degree(s);
    const double w = d == 0 ? 1.0 : std::pow(pair.rho, d);
    if (w == 0.0) continue;
    total += ev.table(mm, it->second).scaled(w);
  }
  return total;
}

}  // namespace mesc
