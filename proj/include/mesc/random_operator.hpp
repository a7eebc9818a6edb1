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
#include <utility>
#include <vector>

#include "mesc/gaussian.hpp"
#include "mesc/operator_core.hpp"

namespace mesc {

/// @brief Operator-valued polynomial Σ_σ H_σ(g) M_σ in n Gaussian variables.
/// Stored by Hermite multi-index σ; the per-basis-element polynomial view is
/// available through coefficient_polynomial().
struct RandomOperator {
  Dims op_dims;
  int n = 0;
  std::map<std::vector<int>, Mat> terms;

  long long op_dim() const { return dim_product(op_dims); }

  static RandomOperator constant(const Dims& dims, int n, const Mat& m) {
    RandomOperator r;
    r.op_dims = dims;
    r.n = n;
    r.terms[std::vector<int>(n, 0)] = m;
    return r;
  }

  void add(const std::vector<int>& sigma, const Mat& m) {
    require(static_cast<int>(sigma.size()) == n, "random operator: index length mismatch");
    auto it = terms.find(sigma);
    if (it == terms.end())
      terms.emplace(sigma, m);
    else
      it->second += m;
  }

  int degree() const {
    int d = 0;
    for (const auto& [s, m] : terms)
      if (m.cwiseAbs().maxCoeff() >= 1e-14) d = std::max(d, abs_degree(s));
    return d;
  }

  bool multilinear() const {
    for (const auto& [s, m] : terms)
      if (!is_multilinear_index(s)) return false;
    return true;
  }

  /// @brief E|||𝐏|||₂² = Σ_σ |||M_σ|||₂².
  double l2_sq() const {
    double s = 0;
    for (const auto& [k, m] : terms) s += nnorm2_sq(m);
    return s;
  }

  Mat evaluate(const Vec& x) const {
    const long long d = op_dim();
    Mat out = Mat::Zero(d, d);
    for (const auto& [s, m] : terms) out += hermite_multi(s, x) * m;
    return out;
  }

  /// @brief Removes coefficients whose entries are all below `tol`.
  void prune(double tol = 1e-14) {
    for (auto it = terms.begin(); it != terms.end();)
      if (it->second.cwiseAbs().maxCoeff() < tol)
        it = terms.erase(it);
      else
        ++it;
  }
};

/// @brief Packed evaluator: rows of C are vectorized coefficients, so 𝐏(x) = Σ_k h_k(x) C_k.
class RandomOperatorEvaluator {
 public:
  explicit RandomOperatorEvaluator(const RandomOperator& p) : dim_(p.op_dim()), n_(p.n) {
    const auto k = static_cast<Eigen::Index>(p.terms.size());
    coeffs_.resize(k, dim_ * dim_);
    Eigen::Index row = 0;
    for (const auto& [s, m] : p.terms) {
      std::vector<std::pair<int, int>> f;
      for (int i = 0; i < n_; ++i)
        if (s[i]) {
          f.emplace_back(i, s[i]);
          max_deg_ = std::max(max_deg_, s[i]);
        }
      factors_.push_back(std::move(f));
      coeffs_.row(row++) = Eigen::Map<const Eigen::RowVectorXcd>(m.data(), dim_ * dim_);
    }
  }

  Mat evaluate(const Vec& x) const {
    std::vector<std::vector<double>> tab(n_);
    for (int i = 0; i < n_; ++i) hermite_table(x(i), max_deg_, tab[i]);
    Eigen::RowVectorXcd w(static_cast<Eigen::Index>(factors_.size()));
    for (size_t k = 0; k < factors_.size(); ++k) {
      double v = 1.0;
      for (const auto& [i, e] : factors_[k]) v *= tab[i][e];
      w(static_cast<Eigen::Index>(k)) = v;
    }
    Eigen::RowVectorXcd flat = w * coeffs_;
    return Eigen::Map<const Mat>(flat.data(), dim_, dim_);
  }

 private:
  long long dim_;
  int n_;
  int max_deg_ = 1;
  std::vector<std::vector<std::pair<int, int>>> factors_;
  Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> coeffs_;
};

/// @brief The scalar polynomial multiplying basis element B_τ: p_τ(g) = Σ_σ ⟨B_τ, M_σ⟩ H_σ(g).
inline HermiteExpansion coefficient_polynomial(const RandomOperator& p, const MultiIndex& tau,
                                               const std::vector<StandardBasis>& bases) {
  HermiteExpansion h;
  h.n = p.n;
  const long long flat = flatten_sigma(tau, p.op_dims);
  for (const auto& [s, m] : p.terms) {
    const double c = fourier_vector(m, p.op_dims, bases)(flat);
    if (c != 0.0) h.coeffs[s] = c;
  }
  return h;
}

struct RandomOperatorMoments {
  double l2_sq_exact = 0;
  McResult p4;  // E |||𝐏|||₄⁴
};

inline RandomOperatorMoments random_operator_moments(const RandomOperator& p, const GaussianSampler& sampler,
                                                     long long samples, std::uint64_t stream_base = 0) {
  if (samples < 100) throw DomainError("random_operator_moments: need at least 100 samples");
  RandomOperatorMoments r;
  r.l2_sq_exact = p.l2_sq();
  RandomOperatorEvaluator ev(p);
  McAccumulator acc;
  for (long long k = 0; k < samples; ++k) {
    Mat m = ev.evaluate(sampler.normals(stream_base + static_cast<std::uint64_t>(k), p.n));
    const Mat m2 = m * m;  // Tr M⁴ = ‖M²‖_F² for Hermitian M
    acc.add(m2.squaredNorm() / static_cast<double>(m.rows()));
  }
  r.p4 = acc.result();
  return r;
}

/// @brief Monte Carlo E Tr ζ(𝐏); exact when 𝐏 carries no Gaussian dependence.
inline McResult random_operator_zeta(const RandomOperator& p, const GaussianSampler& sampler, long long samples,
                                     std::uint64_t stream_base = 0) {
  if (samples < 100) throw DomainError("random_operator_zeta: need at least 100 samples");
  if (p.degree() == 0) {
    auto it = p.terms.find(std::vector<int>(p.n, 0));
    McResult r;
    r.mean = it == p.terms.end() ? 0.0 : zeta_trace(it->second);
    r.samples = samples;
    return r;
  }
  RandomOperatorEvaluator ev(p);
  McAccumulator acc;
  for (long long k = 0; k < samples; ++k)
    acc.add(zeta_trace(ev.evaluate(sampler.normals(stream_base + static_cast<std::uint64_t>(k), p.n))));
  return acc.result();
}

/// @brief Random operators (𝐌, 𝐍) sharing (x, y) ~ G_ρ^{⊗n}.
struct JointRandomOperatorPair {
  RandomOperator m, n;
  double rho = 0;
};

}  // namespace mesc
