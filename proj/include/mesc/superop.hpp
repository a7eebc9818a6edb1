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

#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "mesc/operator_core.hpp"

namespace mesc {

/// @brief Choi representation J(Ψ) = Σ_ij Ψ(E_ij) ⊗ E_ij of a map Ψ: L(X) → L(Y),
/// stored on Y ⊗ X. For Ψ = Φ* with Φ: S → A this lives on S ⊗ A.
struct ChoiMatrix {
  Dims in;   // systems of Ψ's image (Φ's input)
  Dims out;  // index systems (Φ's output)
  Mat j;

  Dims all_dims() const {
    Dims d = in;
    d.insert(d.end(), out.begin(), out.end());
    return d;
  }
  long long in_dim() const { return dim_product(in); }
  long long out_dim() const { return dim_product(out); }
  std::vector<int> out_systems() const {
    std::vector<int> s;
    for (size_t k = 0; k < out.size(); ++k) s.push_back(static_cast<int>(in.size() + k));
    return s;
  }
  HermitianTensorOperator as_operator() const { return HermitianTensorOperator::from_dims(all_dims(), j); }
};

/// @brief A linear map Φ: L(in) → L(out), stored as the Choi matrix of its adjoint.
struct ChannelMap {
  ChoiMatrix choi_adjoint;

  const Dims& in() const { return choi_adjoint.in; }
  const Dims& out() const { return choi_adjoint.out; }
};

using LinearFn = std::function<Mat(const Mat&)>;

inline Mat unit_matrix(long long d, long long i, long long j) {
  Mat e = Mat::Zero(d, d);
  e(i, j) = 1.0;
  return e;
}

/// @brief J(Ψ) for Ψ: L(X) → L(Y) given as a function; output lives on Y ⊗ X.
inline ChoiMatrix choi_of(const LinearFn& psi, const Dims& x_dims, const Dims& y_dims) {
  const long long dx = dim_product(x_dims), dy = dim_product(y_dims);
  Mat j = Mat::Zero(dy * dx, dy * dx);
  for (long long a = 0; a < dx; ++a)
    for (long long b = 0; b < dx; ++b) {
      Mat img = psi(unit_matrix(dx, a, b));
      require(img.rows() == dy && img.cols() == dy, "choi_of: image dimension mismatch");
      for (long long r = 0; r < dy; ++r)
        for (long long c = 0; c < dy; ++c) j(r * dx + a, c * dx + b) = img(r, c);
    }
  return {y_dims, x_dims, j};
}

/// @brief Ψ(P) = Tr_X(J (I_Y ⊗ Pᵀ)).
inline Mat apply_choi(const ChoiMatrix& c, const Mat& p) {
  const long long dy = c.in_dim(), dx = c.out_dim();
  require(p.rows() == dx && p.cols() == dx, "apply_choi: dimension mismatch");
  Mat out = Mat::Zero(dy, dy);
  for (long long r = 0; r < dy; ++r)
    for (long long s = 0; s < dy; ++s) {
      cd acc = 0;
      for (long long a = 0; a < dx; ++a)
        for (long long b = 0; b < dx; ++b) acc += c.j(r * dx + a, s * dx + b) * p(a, b);
      out(r, s) = acc;
    }
  return out;
}

/// @brief Channel from its forward action Φ: L(in) → L(out).
inline ChannelMap channel_from_forward(const LinearFn& phi, const Dims& in, const Dims& out) {
  // J(Φ*) = conj of the forward Choi Σ E_kl ⊗ Φ(E_kl).
  const long long di = dim_product(in), dout = dim_product(out);
  Mat j = Mat::Zero(di * dout, di * dout);
  for (long long k = 0; k < di; ++k)
    for (long long l = 0; l < di; ++l) {
      Mat img = phi(unit_matrix(di, k, l));
      require(img.rows() == dout && img.cols() == dout, "channel_from_forward: image dimension mismatch");
      for (long long a = 0; a < dout; ++a)
        for (long long b = 0; b < dout; ++b) j(k * dout + a, l * dout + b) = std::conj(img(a, b));
    }
  return {{in, out, j}};
}

/// @brief Channel from the action of its adjoint Φ*: L(out) → L(in).
inline ChannelMap channel_from_adjoint(const LinearFn& phi_star, const Dims& in, const Dims& out) {
  return {choi_of(phi_star, out, in)};
}

inline ChannelMap map_from_choi(const ChoiMatrix& c) { return {c}; }

/// @brief Φ*(Y) for Y on the output systems.
inline Mat apply_adjoint(const ChannelMap& phi, const Mat& y) { return apply_choi(phi.choi_adjoint, y); }

/// @brief Φ(ρ)_{ab} = Σ_kl ρ_kl conj(J_{(k,a),(l,b)}).
inline Mat apply_channel(const ChannelMap& phi, const Mat& rho) {
  const auto& c = phi.choi_adjoint;
  const long long di = c.in_dim(), dout = c.out_dim();
  require(rho.rows() == di && rho.cols() == di, "apply_channel: dimension mismatch");
  Mat out = Mat::Zero(dout, dout);
  for (long long a = 0; a < dout; ++a)
    for (long long b = 0; b < dout; ++b) {
      cd acc = 0;
      for (long long k = 0; k < di; ++k)
        for (long long l = 0; l < di; ++l) acc += rho(k, l) * std::conj(c.j(k * dout + a, l * dout + b));
      out(a, b) = acc;
    }
  return out;
}

/// @brief Applies Φ to the contiguous block of systems [first, first+len) of a state on `dims`.
/// The block is replaced in place by Φ's output systems.
inline std::pair<Mat, Dims> apply_channel_on(const ChannelMap& phi, const Mat& x, const Dims& dims, int first) {
  const int nin = static_cast<int>(phi.in().size());
  require(first >= 0 && first + nin <= static_cast<int>(dims.size()), "apply_channel_on: block out of range");
  for (int k = 0; k < nin; ++k) require(dims[first + k] == phi.in()[k], "apply_channel_on: dimension mismatch");
  // Move the block to the front.
  std::vector<int> perm;
  for (int k = 0; k < nin; ++k) perm.push_back(first + k);
  for (int k = 0; k < static_cast<int>(dims.size()); ++k)
    if (k < first || k >= first + nin) perm.push_back(k);
  Mat y = permute_systems(x, dims, perm);
  const long long di = phi.choi_adjoint.in_dim(), dout = phi.choi_adjoint.out_dim();
  const long long rest = y.rows() / di;
  // Realigned contraction: out[(a,a'),(r,r')] = Σ K[(a,a'),(s,s')] W[(s,s'),(r,r')].
  Mat w(di * di, rest * rest);
  for (long long s = 0; s < di; ++s)
    for (long long s2 = 0; s2 < di; ++s2)
      for (long long r = 0; r < rest; ++r)
        for (long long r2 = 0; r2 < rest; ++r2) w(s * di + s2, r * rest + r2) = y(s * rest + r, s2 * rest + r2);
  Mat k(dout * dout, di * di);
  const Mat& j = phi.choi_adjoint.j;
  for (long long a = 0; a < dout; ++a)
    for (long long a2 = 0; a2 < dout; ++a2)
      for (long long s = 0; s < di; ++s)
        for (long long s2 = 0; s2 < di; ++s2) k(a * dout + a2, s * di + s2) = std::conj(j(s * dout + a, s2 * dout + a2));
  Mat prod = k * w;
  Mat z(dout * rest, dout * rest);
  for (long long a = 0; a < dout; ++a)
    for (long long a2 = 0; a2 < dout; ++a2)
      for (long long r = 0; r < rest; ++r)
        for (long long r2 = 0; r2 < rest; ++r2) z(a * rest + r, a2 * rest + r2) = prod(a * dout + a2, r * rest + r2);
  // Put the output block back at position `first`.
  Dims zdims = phi.out();
  for (int kk = 0; kk < static_cast<int>(dims.size()); ++kk)
    if (kk < first || kk >= first + nin) zdims.push_back(dims[kk]);
  const int nout = static_cast<int>(phi.out().size());
  std::vector<int> back;
  for (int kk = 0; kk < first; ++kk) back.push_back(nout + kk);
  for (int kk = 0; kk < nout; ++kk) back.push_back(kk);
  for (int kk = first; kk < static_cast<int>(zdims.size()) - nout; ++kk) back.push_back(nout + kk);
  Mat res = permute_systems(z, zdims, back);
  return {res, permute_dims(zdims, back)};
}

/// @brief Adjoint map: J(Φ) = conj(swap(J(Φ*))).
inline ChannelMap adjoint_map(const ChannelMap& phi) {
  const auto& c = phi.choi_adjoint;
  const int ni = static_cast<int>(c.in.size()), no = static_cast<int>(c.out.size());
  std::vector<int> perm;
  for (int k = 0; k < no; ++k) perm.push_back(ni + k);
  for (int k = 0; k < ni; ++k) perm.push_back(k);
  Mat j = permute_systems(c.j, c.all_dims(), perm).conjugate();
  return {{c.out, c.in, j}};
}

struct CptpReport {
  double min_choi_eig = 0;
  double marginal_residual = 0;
  bool verdict = false;
};

/// @brief Checks J(Φ*) ⪰ 0 and Tr_out J(Φ*) = I.
inline CptpReport is_cptp(const ChoiMatrix& c, double tol = 1e-9) {
  CptpReport r;
  r.min_choi_eig = min_eigenvalue(c.j);
  Mat marg = partial_trace(c.j, c.all_dims(), c.out_systems());
  r.marginal_residual = spectral_norm(marg - Mat::Identity(marg.rows(), marg.cols()));
  r.verdict = r.min_choi_eig >= -tol && r.marginal_residual <= tol;
  return r;
}

inline CptpReport is_cptp(const ChannelMap& phi, double tol = 1e-9) { return is_cptp(phi.choi_adjoint, tol); }

/// @brief Normalized basis Ã_a = A_a/√dim, orthonormal under the plain trace.
inline std::vector<Mat> trace_normalized(const StandardBasis& b) {
  std::vector<Mat> out;
  for (const auto& e : b.elements) out.push_back(e / std::sqrt(static_cast<double>(b.dim)));
  return out;
}

inline void check_orthonormal(const std::vector<Mat>& tilde, double tol = 1e-10) {
  for (size_t i = 0; i < tilde.size(); ++i)
    for (size_t k = i; k < tilde.size(); ++k) {
      const cd g = (tilde[i] * tilde[k]).trace();
      require(std::abs(g - (i == k ? 1.0 : 0.0)) <= tol, "slice: basis is not orthonormal");
    }
}

/// @brief M = Σ_a M_a ⊗ conj(Ã_a) and M_a = Σ_p M_{p,a} ⊗ P̃_p for M on [S..., P, A].
struct SlicedOperator {
  Dims s_dims;
  int p = 1, a = 1;
  std::vector<Mat> m_a;                // indexed by a, on [S..., P]
  std::vector<std::vector<Mat>> m_pa;  // [a][p], on [S...]
};

/// @brief Tr over the last system of (I ⊗ Y) X.
inline Mat contract_last(const Mat& x, long long d_rest, long long d_last, const Mat& y) {
  Mat out = Mat::Zero(d_rest, d_rest);
  for (long long r = 0; r < d_rest; ++r)
    for (long long s = 0; s < d_rest; ++s) {
      cd acc = 0;
      for (long long u = 0; u < d_last; ++u)
        for (long long v = 0; v < d_last; ++v) acc += y(u, v) * x(r * d_last + v, s * d_last + u);
      out(r, s) = acc;
    }
  return out;
}

inline SlicedOperator slice(const Mat& m, const Dims& s_dims, int p, int a, const StandardBasis& p_basis,
                            const StandardBasis& a_basis) {
  require(p_basis.dim == p && a_basis.dim == a, "slice: basis dimension mismatch");
  auto pt = trace_normalized(p_basis);
  auto at = trace_normalized(a_basis);
  check_orthonormal(pt);
  check_orthonormal(at);
  const long long ds = dim_product(s_dims);
  require(m.rows() == ds * p * a, "slice: operator size mismatch");
  SlicedOperator so;
  so.s_dims = s_dims;
  so.p = p;
  so.a = a;
  for (int ai = 0; ai < a * a; ++ai) {
    Mat ma = contract_last(m, ds * p, a, at[ai].conjugate());
    std::vector<Mat> row;
    for (int pi = 0; pi < p * p; ++pi) row.push_back(contract_last(ma, ds, p, pt[pi]));
    so.m_a.push_back(ma);
    so.m_pa.push_back(row);
  }
  return so;
}

inline SlicedOperator slice(const Mat& m, const Dims& s_dims, int p, int a) {
  return slice(m, s_dims, p, a, make_standard_basis(p), make_standard_basis(a));
}

/// @brief Rebuilds M from its M_{p,a} slices.
inline Mat unslice(const std::vector<std::vector<Mat>>& m_pa, int p, int a, const StandardBasis& p_basis,
                   const StandardBasis& a_basis) {
  auto pt = trace_normalized(p_basis);
  auto at = trace_normalized(a_basis);
  Mat out;
  for (int ai = 0; ai < a * a; ++ai) {
    Mat ma;
    for (int pi = 0; pi < p * p; ++pi) {
      Mat t = kron(m_pa[ai][pi], pt[pi]);
      ma = (pi == 0) ? t : Mat(ma + t);
    }
    Mat t = kron(ma, at[ai].conjugate());
    out = (ai == 0) ? t : Mat(out + t);
  }
  return out;
}

inline Mat unslice(const std::vector<std::vector<Mat>>& m_pa, int p, int a) {
  return unslice(m_pa, p, a, make_standard_basis(p), make_standard_basis(a));
}

inline Mat unslice_a(const std::vector<Mat>& m_a, int a) {
  auto at = trace_normalized(make_standard_basis(a));
  Mat out;
  for (int ai = 0; ai < a * a; ++ai) {
    Mat t = kron(m_a[ai], at[ai].conjugate());
    out = (ai == 0) ? t : Mat(out + t);
  }
  return out;
}

// A few standard maps used by tests and the CLI.

inline ChannelMap identity_channel(const Dims& dims) {
  return channel_from_forward([](const Mat& x) { return x; }, dims, dims);
}

inline ChannelMap transpose_map(int d) {
  return channel_from_forward([](const Mat& x) { return Mat(x.transpose()); }, {d}, {d});
}

inline ChannelMap completely_depolarizing(const Dims& in, const Dims& out) {
  const long long dout = dim_product(out);
  return channel_from_forward(
      [dout](const Mat& x) { return Mat(x.trace() * Mat::Identity(dout, dout) / static_cast<double>(dout)); }, in, out);
}

inline ChannelMap depolarizing_channel(int d, double gamma) {
  return channel_from_forward([d, gamma](const Mat& x) { return depolarize(x, {d}, gamma, {0}); }, {d}, {d});
}

inline ChannelMap unitary_channel(const Mat& u) {
  const int d = static_cast<int>(u.rows());
  return channel_from_forward([u](const Mat& x) { return Mat(u * x * u.adjoint()); }, {d}, {d});
}

/// @brief Classical channel Σ P(a|p) |p⟩⟨p| ⊗ |a⟩⟨a| with `table(p, a)` = P(a|p).
inline ChannelMap classical_channel(const RMat& table) {
  const int di = static_cast<int>(table.rows()), dout = static_cast<int>(table.cols());
  Mat j = Mat::Zero(di * dout, di * dout);
  for (int p = 0; p < di; ++p)
    for (int a = 0; a < dout; ++a) j(p * dout + a, p * dout + a) = table(p, a);
  return {{{di}, {dout}, j}};
}

}  // namespace mesc
