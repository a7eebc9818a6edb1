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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mesc {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Dims = std::vector<int>;

/// @brief Input violates a mathematical precondition (exit code 2).
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
/// @brief Requested size exceeds a configured cap (exit code 3).
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// @brief Malformed input document (exit code 1).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

inline long long dim_product(const Dims& dims) {
  long long p = 1;
  for (int d : dims) p *= d;
  return p;
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Mat kron_all(const std::vector<Mat>& factors) {
  Mat out = Mat::Identity(1, 1);
  for (const auto& f : factors) out = kron(out, f);
  return out;
}

inline Mat hermitian_part(const Mat& x) { return (x + x.adjoint()) / 2.0; }

namespace detail {

// Row-major strides; system 0 is the most significant factor.
inline std::vector<long long> strides(const Dims& dims) {
  std::vector<long long> s(dims.size(), 1);
  for (int k = static_cast<int>(dims.size()) - 2; k >= 0; --k) s[k] = s[k + 1] * dims[k + 1];
  return s;
}

// Offsets into the full index for every configuration of the listed systems.
inline std::vector<long long> offsets(const Dims& dims, const std::vector<int>& systems) {
  auto st = strides(dims);
  std::vector<long long> out{0};
  for (int sys : systems) {
    std::vector<long long> next;
    next.reserve(out.size() * dims[sys]);
    for (long long base : out)
      for (int v = 0; v < dims[sys]; ++v) next.push_back(base + v * st[sys]);
    out.swap(next);
  }
  return out;
}

inline std::vector<int> complement(int n, const std::vector<int>& systems) {
  std::vector<bool> in(n, false);
  for (int s : systems) {
    require(s >= 0 && s < n, "system index out of range");
    in[s] = true;
  }
  std::vector<int> rest;
  for (int i = 0; i < n; ++i)
    if (!in[i]) rest.push_back(i);
  return rest;
}

}  // namespace detail

/// @brief Partial trace over `traced`; remaining systems keep their order.
inline Mat partial_trace(const Mat& x, const Dims& dims, const std::vector<int>& traced) {
  require(x.rows() == dim_product(dims) && x.cols() == x.rows(), "partial_trace: dimension mismatch");
  auto keep = detail::complement(static_cast<int>(dims.size()), traced);
  auto ko = detail::offsets(dims, keep);
  std::vector<int> tr_sorted = traced;
  std::sort(tr_sorted.begin(), tr_sorted.end());
  auto to = detail::offsets(dims, tr_sorted);
  const auto m = static_cast<Eigen::Index>(ko.size());
  Mat out = Mat::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      cd acc = 0;
      for (long long t : to) acc += x(ko[i] + t, ko[j] + t);
      out(i, j) = acc;
    }
  return out;
}

/// @brief Reorders tensor factors: output factor k is input factor perm[k].
inline Mat permute_systems(const Mat& x, const Dims& dims, const std::vector<int>& perm) {
  require(perm.size() == dims.size(), "permute_systems: bad permutation");
  auto off = detail::offsets(dims, perm);
  const auto m = static_cast<Eigen::Index>(off.size());
  Mat out(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = x(off[i], off[j]);
  return out;
}

inline Dims permute_dims(const Dims& dims, const std::vector<int>& perm) {
  Dims out;
  for (int p : perm) out.push_back(dims[p]);
  return out;
}

/// @brief Partial transpose on the listed systems.
inline Mat partial_transpose(const Mat& x, const Dims& dims, const std::vector<int>& systems) {
  const long long total = dim_product(dims);
  auto st = detail::strides(dims);
  std::vector<long long> tp(total, 0);
  for (long long i = 0; i < total; ++i)
    for (int s : systems) tp[i] += ((i / st[s]) % dims[s]) * st[s];
  Mat out(total, total);
  for (long long i = 0; i < total; ++i)
    for (long long j = 0; j < total; ++j) out(i, j) = x(i - tp[i] + tp[j], j - tp[j] + tp[i]);
  return out;
}

/// @brief Replaces system `i` by its normalized average: I_i/d_i (x) Tr_i X.
inline Mat average_system(const Mat& x, const Dims& dims, int i) {
  Mat red = partial_trace(x, dims, {i}) / static_cast<double>(dims[i]);
  std::vector<int> keep = detail::complement(static_cast<int>(dims.size()), {i});
  auto ko = detail::offsets(dims, keep);
  auto st = detail::strides(dims);
  Mat out = Mat::Zero(x.rows(), x.cols());
  const auto m = static_cast<Eigen::Index>(ko.size());
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < m; ++c)
      for (int v = 0; v < dims[i]; ++v) out(ko[r] + v * st[i], ko[c] + v * st[i]) = red(r, c);
  return out;
}

/// @brief Embeds a local operator acting on `sys` into the full space.
inline Mat embed_local(const Mat& op, const Dims& dims, int sys) {
  std::vector<Mat> f;
  for (int k = 0; k < static_cast<int>(dims.size()); ++k)
    f.push_back(k == sys ? op : Mat::Identity(dims[k], dims[k]));
  return kron_all(f);
}

struct Eigh {
  Vec values;
  Mat vectors;
};

inline Eigh eigh(const Mat& x) {
  Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(x));
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

template <class F>
Mat spectral_map(const Mat& x, F f) {
  auto e = eigh(x);
  Vec v = e.values.unaryExpr(f);
  return e.vectors * v.cast<cd>().asDiagonal() * e.vectors.adjoint();
}

inline double min_eigenvalue(const Mat& x) { return eigh(x).values.minCoeff(); }
inline double max_eigenvalue(const Mat& x) { return eigh(x).values.maxCoeff(); }

inline double spectral_norm(const Mat& x) {
  auto v = eigh(x).values;
  return std::max(std::abs(v.minCoeff()), std::abs(v.maxCoeff()));
}

inline Mat positive_part(const Mat& x) {
  return spectral_map(x, [](double l) { return l > 0 ? l : 0.0; });
}

/// @brief Moore-Penrose inverse; eigenvalues below `tol`·‖X‖ count as zero.
inline Mat pseudo_inverse(const Mat& x, double tol = 1e-12) {
  auto e = eigh(x);
  double scale = std::max(1.0, e.values.cwiseAbs().maxCoeff());
  Vec v = e.values.unaryExpr([&](double l) { return std::abs(l) > tol * scale ? 1.0 / l : 0.0; });
  return e.vectors * v.cast<cd>().asDiagonal() * e.vectors.adjoint();
}

inline Mat support_projector(const Mat& x, double tol = 1e-12) {
  auto e = eigh(x);
  double scale = std::max(1.0, e.values.cwiseAbs().maxCoeff());
  Vec v = e.values.unaryExpr([&](double l) { return std::abs(l) > tol * scale ? 1.0 : 0.0; });
  return e.vectors * v.cast<cd>().asDiagonal() * e.vectors.adjoint();
}

inline Mat psd_sqrt(const Mat& x) {
  return spectral_map(x, [](double l) { return l > 0 ? std::sqrt(l) : 0.0; });
}

inline Mat matrix_exp_hermitian(const Mat& x) {
  return spectral_map(x, [](double l) { return std::exp(l); });
}

/// @brief Tr ζ(H): sum of squared negative eigenvalues.
inline double zeta_trace(const Mat& x) {
  auto v = eigh(x).values;
  double s = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) < 0) s += v(i) * v(i);
  return s;
}

inline double hs_norm_sq(const Mat& x) { return x.squaredNorm(); }

/// @brief Normalized 2-norm squared: Tr(X†X)/dim.
inline double nnorm2_sq(const Mat& x) { return x.squaredNorm() / static_cast<double>(x.rows()); }
inline double nnorm2(const Mat& x) { return std::sqrt(nnorm2_sq(x)); }

/// @brief ((1/dim) Tr|H|^p)^{1/p}; p = +inf gives the spectral norm.
inline double normalized_p_norm(const Mat& x, double p) {
  if (!(p >= 1)) throw DomainError("normalized_p_norm: p must be >= 1");
  const Eigen::VectorXd v = eigh(x).values.cwiseAbs();
  if (std::isinf(p)) return v.maxCoeff();
  double s = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(v(i), p);
  return std::pow(s / static_cast<double>(v.size()), 1.0 / p);
}

inline double trace_real(const Mat& x) { return x.trace().real(); }

inline bool is_hermitian(const Mat& x, double tol) {
  if (x.rows() != x.cols()) return false;
  double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  return (x - x.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

}  // namespace mesc
