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

// Reference computations used to cross-check the library. Everything here is written with
// explicit index arithmetic and avoids the library's own tensor, Fourier and channel routines.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace mesc::oracle {

using cd = std::complex<double>;
using OMat = Eigen::MatrixXcd;
using ODims = std::vector<int>;

inline long long prod(const ODims& d) {
  long long p = 1;
  for (int x : d) p *= x;
  return p;
}

inline std::vector<int> digits(long long idx, const ODims& d) {
  std::vector<int> out(d.size());
  for (int k = static_cast<int>(d.size()) - 1; k >= 0; --k) {
    out[k] = static_cast<int>(idx % d[k]);
    idx /= d[k];
  }
  return out;
}

inline long long undigits(const std::vector<int>& v, const ODims& d) {
  long long idx = 0;
  for (size_t k = 0; k < d.size(); ++k) idx = idx * d[k] + v[k];
  return idx;
}

inline OMat kron(const OMat& a, const OMat& b) {
  OMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (long long i = 0; i < a.rows(); ++i)
    for (long long j = 0; j < a.cols(); ++j)
      for (long long k = 0; k < b.rows(); ++k)
        for (long long l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

/// @brief Output system k is input system order[k].
inline OMat reorder(const OMat& x, const ODims& d, const std::vector<int>& order) {
  ODims nd;
  for (int k : order) nd.push_back(d[k]);
  const long long n = prod(d);
  std::vector<long long> map(n);
  for (long long i = 0; i < n; ++i) {
    auto di = digits(i, d);
    std::vector<int> ndig;
    for (int k : order) ndig.push_back(di[k]);
    map[i] = undigits(ndig, nd);
  }
  OMat y(n, n);
  for (long long i = 0; i < n; ++i)
    for (long long j = 0; j < n; ++j) y(map[i], map[j]) = x(i, j);
  return y;
}

/// @brief (Tr_i X) ⊗ I_i / d_i with the identity put back in slot i.
inline OMat average_out(const OMat& x, const ODims& d, int i) {
  const long long n = prod(d);
  OMat y = OMat::Zero(n, n);
  for (long long r = 0; r < n; ++r)
    for (long long c = 0; c < n; ++c) {
      auto dr = digits(r, d), dc = digits(c, d);
      if (dr[i] != dc[i]) continue;
      cd acc = 0;
      for (int k = 0; k < d[i]; ++k) {
        dr[i] = dc[i] = k;
        acc += x(undigits(dr, d), undigits(dc, d));
      }
      y(r, c) = acc / static_cast<double>(d[i]);
    }
  return y;
}

inline double nsq(const OMat& x) { return x.squaredNorm() / static_cast<double>(x.rows()); }

inline double influence(const OMat& x, const ODims& d, int i) { return nsq(x - average_out(x, d, i)); }

/// @brief Applies X ↦ γX + (1−γ) avg_i X on every target.
inline OMat depolarize(OMat x, const ODims& d, double gamma, const std::vector<int>& targets) {
  for (int i : targets) x = gamma * x + (1.0 - gamma) * average_out(x, d, i);
  return x;
}

/// @brief Partial trace over the last system of dimension `dl`.
inline OMat trace_last(const OMat& x, long long dl) {
  const long long r = x.rows() / dl;
  OMat y = OMat::Zero(r, r);
  for (long long i = 0; i < r; ++i)
    for (long long j = 0; j < r; ++j)
      for (long long k = 0; k < dl; ++k) y(i, j) += x(i * dl + k, j * dl + k);
  return y;
}

/// @brief Φ*(Y) from the adjoint Choi matrix J = Σ Φ*(E_ij) ⊗ E_ij on [X, A].
inline OMat adjoint_apply(const OMat& j, long long dx, long long da, const OMat& y) {
  OMat out = OMat::Zero(dx, dx);
  for (long long a = 0; a < da; ++a)
    for (long long b = 0; b < da; ++b) {
      if (y(a, b) == cd(0)) continue;
      for (long long x = 0; x < dx; ++x)
        for (long long x2 = 0; x2 < dx; ++x2) out(x, x2) += y(a, b) * j(x * da + a, x2 * da + b);
    }
  return out;
}

/// @brief Tr[(A ⊗ B ⊗ C) W] for W on dA·dB·dC, contracting one factor at a time.
inline cd trace_triple(const OMat& A, const OMat& B, const OMat& C, const OMat& W) {
  const long long da = A.rows(), db = B.rows(), dc = C.rows();
  // First C: V[(i,k),(j,l)] = Σ_mn C_nm W[(i,k,m),(j,l,n)].
  OMat v = OMat::Zero(da * db, da * db);
  for (long long r = 0; r < da * db; ++r)
    for (long long c = 0; c < da * db; ++c) {
      cd acc = 0;
      for (long long m = 0; m < dc; ++m)
        for (long long n = 0; n < dc; ++n) acc += C(n, m) * W(r * dc + m, c * dc + n);
      v(r, c) = acc;
    }
  OMat u = OMat::Zero(da, da);
  for (long long i = 0; i < da; ++i)
    for (long long j = 0; j < da; ++j) {
      cd acc = 0;
      for (long long k = 0; k < db; ++k)
        for (long long l = 0; l < db; ++l) acc += B(l, k) * v(i * db + k, j * db + l);
      u(i, j) = acc;
    }
  cd t = 0;
  for (long long i = 0; i < da; ++i)
    for (long long j = 0; j < da; ++j) t += A(j, i) * u(i, j);
  return t;
}

/// @brief φ_in ⊗ ψ^{⊗n} on [S^n, P, T^n, Q, R].
inline OMat joint_state(const OMat& phi_in, int p, int q, int r, const OMat& psi, int s, int t, int n) {
  OMat x = phi_in;
  ODims d{p, q, r};
  for (int k = 0; k < n; ++k) {
    x = kron(x, psi);
    d.push_back(s);
    d.push_back(t);
  }
  std::vector<int> order;
  for (int k = 0; k < n; ++k) order.push_back(3 + 2 * k);
  order.push_back(0);
  for (int k = 0; k < n; ++k) order.push_back(4 + 2 * k);
  order.push_back(1);
  order.push_back(2);
  return reorder(x, d, order);
}

/// @brief t_abr = Tr[(Φ_A*(Ã_a) ⊗ Φ_B*(B̃_b) ⊗ R̃_r) ω] for given normalized bases.
inline std::vector<double> correlation_table(const OMat& omega, const OMat& ja, long long dx, const OMat& jb,
                                             long long dy, const std::vector<OMat>& at, const std::vector<OMat>& bt,
                                             const std::vector<OMat>& rt) {
  const long long da = static_cast<long long>(std::llround(std::sqrt(static_cast<double>(at.size()))));
  const long long db = static_cast<long long>(std::llround(std::sqrt(static_cast<double>(bt.size()))));
  std::vector<OMat> ma, nb;
  for (const auto& x : at) ma.push_back(adjoint_apply(ja, dx, da, x));
  for (const auto& x : bt) nb.push_back(adjoint_apply(jb, dy, db, x));
  std::vector<double> out;
  for (size_t a = 0; a < ma.size(); ++a)
    for (size_t b = 0; b < nb.size(); ++b)
      for (size_t r = 0; r < rt.size(); ++r) out.push_back(trace_triple(ma[a], nb[b], rt[r], omega).real());
  return out;
}

/// @brief Tr[P_win (Φ_A* ⊗ Φ_B* ⊗ id)(…) ω] via matrix units of A ⊗ B ⊗ R.
inline double winning_probability(const OMat& omega, const OMat& ja, long long dx, long long da, const OMat& jb,
                                  long long dy, long long db, long long dr, const OMat& m_win) {
  std::vector<OMat> fa, fb;
  for (long long i = 0; i < da; ++i)
    for (long long j = 0; j < da; ++j) {
      OMat e = OMat::Zero(da, da);
      e(i, j) = 1;
      fa.push_back(adjoint_apply(ja, dx, da, e));
    }
  for (long long i = 0; i < db; ++i)
    for (long long j = 0; j < db; ++j) {
      OMat e = OMat::Zero(db, db);
      e(i, j) = 1;
      fb.push_back(adjoint_apply(jb, dy, db, e));
    }
  cd total = 0;
  for (long long a = 0; a < da; ++a)
    for (long long a2 = 0; a2 < da; ++a2)
      for (long long b = 0; b < db; ++b)
        for (long long b2 = 0; b2 < db; ++b2)
          for (long long r = 0; r < dr; ++r)
            for (long long r2 = 0; r2 < dr; ++r2) {
              const cd w = m_win((a * db + b) * dr + r, (a2 * db + b2) * dr + r2);
              if (w == cd(0)) continue;
              OMat er = OMat::Zero(dr, dr);
              er(r, r2) = 1;  // P = Σ P_{(abr),(a'b'r')} E_aa' ⊗ E_bb' ⊗ E_rr'
              total += w * trace_triple(fa[a * da + a2], fb[b * db + b2], er, omega);
            }
  return total.real();
}

/// @brief Best deterministic value Σ π(x,y) V(f(x), g(y), x, y) by exhaustive search.
inline double classical_value(const std::vector<double>& pi, const std::vector<double>& v, int p, int q, int a, int b) {
  // pi[x*q+y], v[((ans_a*b+ans_b)*p + x)*q + y]
  long long fa = 1, fb = 1;
  for (int i = 0; i < p; ++i) fa *= a;
  for (int i = 0; i < q; ++i) fb *= b;
  double best = -1;
  for (long long f = 0; f < fa; ++f)
    for (long long g = 0; g < fb; ++g) {
      double val = 0;
      long long ff = f;
      for (int x = 0; x < p; ++x, ff /= a) {
        long long gg = g;
        for (int y = 0; y < q; ++y, gg /= b)
          val += pi[x * q + y] * v[((static_cast<int>(ff % a) * b + static_cast<int>(gg % b)) * p + x) * q + y];
      }
      best = std::max(best, val);
    }
  return best;
}

/// @brief sup Tr[(P ⊗ Q) ψ] over traceless P, Q with Tr P²/s = Tr Q²/t = 1, by alternating best response
/// from random starts.
inline double maximal_correlation(const OMat& psi, int s, int t, int restarts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  auto traceless_unit = [](OMat x, int d) -> OMat {
    x = (x + x.adjoint()) / 2.0;
    x -= (x.trace() / static_cast<double>(d)) * OMat::Identity(d, d);
    const double nrm = std::sqrt(x.squaredNorm() / d);
    return nrm > 0 ? OMat(x / nrm) : x;
  };
  // Tr_A[(P ⊗ I) ψ] and Tr_B[(I ⊗ Q) ψ] by index loops.
  auto bob_side = [&](const OMat& p) {
    OMat out = OMat::Zero(t, t);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j)
        for (int k = 0; k < t; ++k)
          for (int l = 0; l < t; ++l) out(k, l) += p(j, i) * psi(i * t + k, j * t + l);
    return out;
  };
  auto alice_side = [&](const OMat& q) {
    OMat out = OMat::Zero(s, s);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j)
        for (int k = 0; k < t; ++k)
          for (int l = 0; l < t; ++l) out(i, j) += q(l, k) * psi(i * t + k, j * t + l);
    return out;
  };
  double best = 0;
  for (int rs = 0; rs < restarts; ++rs) {
    OMat p(s, s);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) p(i, j) = cd(nd(rng), nd(rng));
    p = traceless_unit(p, s);
    double val = 0;
    for (int it = 0; it < 5000; ++it) {
      // The objective Tr[(P⊗Q)ψ] = ⟨Q, X⟩ with X = Tr_A[(P⊗I)ψ]; the best unit traceless Q is X's
      // traceless direction (the adjoint appears because Tr[Q X] = ⟨Q†, X⟩).
      OMat q = traceless_unit(bob_side(p).adjoint(), t);
      p = traceless_unit(alice_side(q).adjoint(), s);
      double nv = 0;
      OMat x = bob_side(p);
      for (int k = 0; k < t; ++k)
        for (int l = 0; l < t; ++l) nv += (q(l, k) * x(k, l)).real();
      if (std::abs(nv - val) < 1e-15) {
        val = nv;
        break;
      }
      val = nv;
    }
    best = std::max(best, val);
  }
  return best;
}

}  // namespace mesc::oracle
