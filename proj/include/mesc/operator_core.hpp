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

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mesc/linalg.hpp"

namespace mesc {

inline constexpr double kStructuralZero = 1e-14;
inline constexpr long long kDenseCap = 4096;

struct SystemLabel {
  std::string name;
  int dim = 1;
};

/// @brief Orthonormal Hermitian basis under ⟨P,Q⟩ = Tr(P†Q)/dim, element 0 = I.
struct StandardBasis {
  int dim = 1;
  std::vector<Mat> elements;
};

/// @brief Generalized Gell-Mann family rescaled by sqrt(dim/2), identity first.
inline StandardBasis make_standard_basis(int dim) {
  require(dim >= 1, "make_standard_basis: dim must be >= 1");
  StandardBasis b;
  b.dim = dim;
  b.elements.push_back(Mat::Identity(dim, dim));
  const double s = std::sqrt(dim / 2.0);
  for (int j = 0; j < dim; ++j)
    for (int k = j + 1; k < dim; ++k) {
      Mat sym = Mat::Zero(dim, dim), asym = Mat::Zero(dim, dim);
      sym(j, k) = sym(k, j) = s;
      asym(j, k) = cd(0, -s);
      asym(k, j) = cd(0, s);
      b.elements.push_back(sym);
      b.elements.push_back(asym);
    }
  for (int l = 1; l < dim; ++l) {
    Mat diag = Mat::Zero(dim, dim);
    const double c = s * std::sqrt(2.0 / (l * (l + 1.0)));
    for (int j = 0; j < l; ++j) diag(j, j) = c;
    diag(l, l) = -c * l;
    b.elements.push_back(diag);
  }
  return b;
}

/// @brief New traceless elements B'_i = Σ_k O(k-1,i-1) B_k for an orthogonal O.
inline StandardBasis rotate_basis(const StandardBasis& b, const RMat& o) {
  const int m = b.dim * b.dim - 1;
  require(o.rows() == m && o.cols() == m, "rotate_basis: rotation size mismatch");
  StandardBasis r;
  r.dim = b.dim;
  r.elements.push_back(b.elements[0]);
  for (int i = 0; i < m; ++i) {
    Mat e = Mat::Zero(b.dim, b.dim);
    for (int k = 0; k < m; ++k) e += o(k, i) * b.elements[k + 1];
    r.elements.push_back(e);
  }
  return r;
}

using MultiIndex = std::vector<int>;

inline int support_size(const MultiIndex& sigma) {
  int c = 0;
  for (int s : sigma) c += (s != 0);
  return c;
}

class HermitianTensorOperator {
 public:
  HermitianTensorOperator() = default;
  HermitianTensorOperator(std::vector<SystemLabel> systems, Mat dense)
      : systems_(std::move(systems)), dense_(std::move(dense)) {
    long long d = 1;
    for (const auto& s : systems_) {
      require(s.dim >= 1, "system dimension must be >= 1");
      d *= s.dim;
    }
    require(dense_.rows() == d && dense_.cols() == d, "operator size does not match systems");
    require(is_hermitian(dense_, 1e-10), "operator is not Hermitian");
    dense_ = hermitian_part(dense_);
  }
  static HermitianTensorOperator from_dims(const Dims& dims, Mat dense) {
    std::vector<SystemLabel> s;
    for (size_t i = 0; i < dims.size(); ++i) s.push_back({"q" + std::to_string(i), dims[i]});
    return HermitianTensorOperator(std::move(s), std::move(dense));
  }
  static HermitianTensorOperator identity(const Dims& dims) {
    const auto d = dim_product(dims);
    return from_dims(dims, Mat::Identity(d, d));
  }

  const std::vector<SystemLabel>& systems() const { return systems_; }
  Dims dims() const {
    Dims d;
    for (const auto& s : systems_) d.push_back(s.dim);
    return d;
  }
  int num_systems() const { return static_cast<int>(systems_.size()); }
  long long dim() const { return dense_.rows(); }
  const Mat& dense() const { return dense_; }

 private:
  std::vector<SystemLabel> systems_;
  Mat dense_;
};

struct FourierCoefficients {
  Dims dims;
  std::vector<StandardBasis> bases;
  std::map<MultiIndex, double> coeffs;

  double sum_squares() const {
    double s = 0;
    for (const auto& [k, v] : coeffs) s += v * v;
    return s;
  }
  double at(const MultiIndex& sigma) const {
    auto it = coeffs.find(sigma);
    return it == coeffs.end() ? 0.0 : it->second;
  }
};

inline std::vector<StandardBasis> default_bases(const Dims& dims) {
  std::vector<StandardBasis> b;
  for (int d : dims) b.push_back(make_standard_basis(d));
  return b;
}

namespace detail {

// Contracts mode k of a row-major tensor with extents `ext` by T (new × old).
inline std::vector<cd> mode_apply(const std::vector<cd>& v, Dims& ext, int k, const Mat& t) {
  long long left = 1, right = 1;
  for (int i = 0; i < k; ++i) left *= ext[i];
  for (size_t i = k + 1; i < ext.size(); ++i) right *= ext[i];
  const int old_n = ext[k], new_n = static_cast<int>(t.rows());
  std::vector<cd> out(static_cast<size_t>(left * new_n * right), cd(0));
  for (long long l = 0; l < left; ++l)
    for (int p = 0; p < old_n; ++p) {
      const cd* src = &v[(l * old_n + p) * right];
      for (int s = 0; s < new_n; ++s) {
        const cd w = t(s, p);
        if (w == cd(0)) continue;
        cd* dst = &out[(l * new_n + s) * right];
        for (long long r = 0; r < right; ++r) dst[r] += w * src[r];
      }
    }
  ext[k] = new_n;
  return out;
}

// Index maps between (row, col) of the dense matrix and the interleaved pair tensor.
inline void pair_offsets(const Dims& dims, std::vector<long long>& row_off, std::vector<long long>& col_off) {
  const int n = static_cast<int>(dims.size());
  std::vector<long long> pst(n, 1);
  for (int k = n - 2; k >= 0; --k) pst[k] = pst[k + 1] * dims[k + 1] * dims[k + 1];
  const long long total = dim_product(dims);
  row_off.assign(total, 0);
  col_off.assign(total, 0);
  auto st = strides(dims);
  for (long long i = 0; i < total; ++i)
    for (int k = 0; k < n; ++k) {
      const long long digit = (i / st[k]) % dims[k];
      row_off[i] += digit * dims[k] * pst[k];
      col_off[i] += digit * pst[k];
    }
}

inline void check_bases(const Dims& dims, const std::vector<StandardBasis>& bases) {
  require(bases.size() == dims.size(), "basis count does not match system count");
  for (size_t k = 0; k < dims.size(); ++k)
    require(bases[k].dim == dims[k] && static_cast<int>(bases[k].elements.size()) == dims[k] * dims[k],
            "basis dimension does not match system dimension");
}

}  // namespace detail

/// @brief Dense coefficient vector Ĥ(σ) = ⟨B_σ,H⟩, σ flattened row-major.
inline Vec fourier_vector(const Mat& h, const Dims& dims, const std::vector<StandardBasis>& bases) {
  detail::check_bases(dims, bases);
  require(h.rows() == dim_product(dims), "fourier_vector: dimension mismatch");
  std::vector<long long> ro, co;
  detail::pair_offsets(dims, ro, co);
  const long long total = h.rows();
  Dims ext;
  long long len = 1;
  for (int d : dims) {
    ext.push_back(d * d);
    len *= d * d;
  }
  std::vector<cd> v(static_cast<size_t>(len));
  for (long long i = 0; i < total; ++i)
    for (long long j = 0; j < total; ++j) v[ro[i] + co[j]] = h(i, j);
  for (size_t k = 0; k < dims.size(); ++k) {
    const int d = dims[k];
    Mat t(d * d, d * d);
    for (int s = 0; s < d * d; ++s)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) t(s, i * d + j) = std::conj(bases[k].elements[s](i, j)) / static_cast<double>(d);
    v = detail::mode_apply(v, ext, static_cast<int>(k), t);
  }
  Vec out(len);
  for (long long i = 0; i < len; ++i) out(i) = v[i].real();
  return out;
}

inline Mat fourier_synthesize_vector(const Vec& c, const Dims& dims, const std::vector<StandardBasis>& bases) {
  detail::check_bases(dims, bases);
  Dims ext;
  for (int d : dims) ext.push_back(d * d);
  std::vector<cd> v(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) v[i] = c(i);
  for (size_t k = 0; k < dims.size(); ++k) {
    const int d = dims[k];
    Mat t(d * d, d * d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int s = 0; s < d * d; ++s) t(i * d + j, s) = bases[k].elements[s](i, j);
    v = detail::mode_apply(v, ext, static_cast<int>(k), t);
  }
  std::vector<long long> ro, co;
  detail::pair_offsets(dims, ro, co);
  const long long total = dim_product(dims);
  Mat h(total, total);
  for (long long i = 0; i < total; ++i)
    for (long long j = 0; j < total; ++j) h(i, j) = v[ro[i] + co[j]];
  return hermitian_part(h);
}

inline MultiIndex unflatten_sigma(long long idx, const Dims& dims) {
  MultiIndex s(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    const int b = dims[k] * dims[k];
    s[k] = static_cast<int>(idx % b);
    idx /= b;
  }
  return s;
}

inline long long flatten_sigma(const MultiIndex& s, const Dims& dims) {
  long long idx = 0;
  for (size_t k = 0; k < dims.size(); ++k) idx = idx * dims[k] * dims[k] + s[k];
  return idx;
}

inline FourierCoefficients fourier_expand(const HermitianTensorOperator& h, const std::vector<StandardBasis>& bases) {
  FourierCoefficients f;
  f.dims = h.dims();
  f.bases = bases;
  Vec v = fourier_vector(h.dense(), f.dims, bases);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) != 0.0) f.coeffs.emplace(unflatten_sigma(i, f.dims), v(i));
  return f;
}

inline FourierCoefficients fourier_expand(const HermitianTensorOperator& h) {
  return fourier_expand(h, default_bases(h.dims()));
}

inline HermitianTensorOperator fourier_synthesize(const FourierCoefficients& c) {
  long long len = 1;
  for (int d : c.dims) len *= d * d;
  Vec v = Vec::Zero(len);
  for (const auto& [s, x] : c.coeffs) {
    require(s.size() == c.dims.size(), "multi-index length mismatch");
    for (size_t k = 0; k < s.size(); ++k) require(s[k] >= 0 && s[k] < c.dims[k] * c.dims[k], "multi-index entry out of range");
    v(flatten_sigma(s, c.dims)) = x;
  }
  return HermitianTensorOperator::from_dims(c.dims, fourier_synthesize_vector(v, c.dims, c.bases));
}

inline void require_same_systems(const HermitianTensorOperator& p, const HermitianTensorOperator& q) {
  require(p.dims() == q.dims(), "operators act on different systems");
}

inline double inner_product(const HermitianTensorOperator& p, const HermitianTensorOperator& q) {
  require_same_systems(p, q);
  return (p.dense().adjoint() * q.dense()).trace().real() / static_cast<double>(p.dim());
}

inline double normalized_p_norm(const HermitianTensorOperator& h, double p) { return normalized_p_norm(h.dense(), p); }

// Counts nonzero entries of σ on systems flagged in `mask` (empty mask = all).
inline int masked_support(long long flat, const Dims& dims, const std::vector<bool>& mask) {
  int c = 0;
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    const int b = dims[k] * dims[k];
    if ((flat % b) != 0 && (mask.empty() || mask[k])) ++c;
    flat /= b;
  }
  return c;
}

/// @brief Largest |σ| (restricted to `mask`) with |Ĥ(σ)| >= 1e-14.
inline int degree(const Mat& h, const Dims& dims, const std::vector<bool>& mask = {}) {
  Vec v = fourier_vector(h, dims, default_bases(dims));
  int deg = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) >= kStructuralZero) deg = std::max(deg, masked_support(i, dims, mask));
  return deg;
}

inline int degree(const HermitianTensorOperator& h) { return degree(h.dense(), h.dims()); }

/// @brief Splits H = H^{≤t} + H^{>t}, counting only systems flagged in `mask`.
inline std::pair<Mat, Mat> truncate_degree(const Mat& h, const Dims& dims, int t, const std::vector<bool>& mask,
                                           const std::vector<StandardBasis>& bases) {
  if (t < 0) throw DomainError("truncate_degree: t must be >= 0");
  Vec v = fourier_vector(h, dims, bases);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (masked_support(i, dims, mask) > t) v(i) = 0;
  Mat low = fourier_synthesize_vector(v, dims, bases);
  return {low, h - low};
}

inline std::pair<HermitianTensorOperator, HermitianTensorOperator> truncate_degree(
    const HermitianTensorOperator& h, int t, const std::vector<StandardBasis>& bases) {
  auto [lo, hi] = truncate_degree(h.dense(), h.dims(), t, {}, bases);
  return {HermitianTensorOperator(h.systems(), lo), HermitianTensorOperator(h.systems(), hi)};
}

inline std::pair<HermitianTensorOperator, HermitianTensorOperator> truncate_degree(const HermitianTensorOperator& h,
                                                                                   int t) {
  return truncate_degree(h, t, default_bases(h.dims()));
}

/// @brief Inf_i(H) = |||H − I_i/d_i ⊗ Tr_i H|||₂², i is 0-based.
inline double influence(const Mat& h, const Dims& dims, int i) {
  if (i < 0 || i >= static_cast<int>(dims.size())) throw DomainError("influence: index out of range");
  return nnorm2_sq(h - average_system(h, dims, i));
}

inline double influence(const HermitianTensorOperator& h, int i) { return influence(h.dense(), h.dims(), i); }

/// @brief Fourier-side influence Σ_{σ_i≠0} Ĥ(σ)².
inline double influence_fourier(const FourierCoefficients& f, int i) {
  if (i < 0 || i >= static_cast<int>(f.dims.size())) throw DomainError("influence: index out of range");
  double s = 0;
  for (const auto& [sig, c] : f.coeffs)
    if (sig[i] != 0) s += c * c;
  return s;
}

inline double total_influence(const HermitianTensorOperator& h) {
  double s = 0;
  for (int i = 0; i < h.num_systems(); ++i) s += influence(h, i);
  return s;
}

/// @brief Δ_γ on each target system: P ↦ γP + (1−γ) I/d ⊗ Tr P.
inline Mat depolarize(const Mat& h, const Dims& dims, double gamma, const std::vector<int>& targets) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("depolarize: gamma outside [0,1]");
  Mat out = h;
  for (int t : targets) {
    require(t >= 0 && t < static_cast<int>(dims.size()), "depolarize: target out of range");
    if (gamma == 1.0) continue;
    out = gamma * out + (1.0 - gamma) * average_system(out, dims, t);
  }
  return out;
}

inline HermitianTensorOperator depolarize(const HermitianTensorOperator& h, double gamma,
                                          const std::vector<int>& targets) {
  return HermitianTensorOperator(h.systems(), depolarize(h.dense(), h.dims(), gamma, targets));
}

inline double zeta_trace(const HermitianTensorOperator& h) { return zeta_trace(h.dense()); }

inline HermitianTensorOperator positive_part(const HermitianTensorOperator& h) {
  return HermitianTensorOperator(h.systems(), positive_part(h.dense()));
}

inline HermitianTensorOperator pseudo_inverse(const HermitianTensorOperator& h) {
  return HermitianTensorOperator(h.systems(), pseudo_inverse(h.dense()));
}

/// @brief Marginal on the remaining systems; tracing everything yields a 1×1 operator.
inline HermitianTensorOperator partial_trace(const HermitianTensorOperator& h, const std::vector<int>& traced) {
  Mat r = partial_trace(h.dense(), h.dims(), traced);
  std::vector<SystemLabel> keep;
  for (int i : detail::complement(h.num_systems(), traced)) keep.push_back(h.systems()[i]);
  return HermitianTensorOperator(keep, r);
}

}  // namespace mesc
