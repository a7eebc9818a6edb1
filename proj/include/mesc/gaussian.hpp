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

#include <cstdint>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "mesc/linalg.hpp"

namespace mesc {

inline constexpr double kPi = 3.14159265358979323846;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// @brief Counter-based normal generator keyed by (seed, stream, index).
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed = 0) : seed_(seed), key_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const {
    return splitmix64(splitmix64(key_ ^ splitmix64(stream + 0x632be59bd9b4e019ULL)) + counter);
  }
  // Uniform on (0, 1].
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return (static_cast<double>(bits(stream, counter) >> 11) + 1.0) * 0x1.0p-53;
  }
  double normal(std::uint64_t stream, std::uint64_t index) const {
    const std::uint64_t pair = index >> 1;
    const double r = std::sqrt(-2.0 * std::log(uniform(stream, 2 * pair)));
    const double a = 2.0 * kPi * uniform(stream, 2 * pair + 1);
    return (index & 1) ? r * std::sin(a) : r * std::cos(a);
  }
  Vec normals(std::uint64_t stream, int n, std::uint64_t offset = 0) const {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(stream, offset + i);
    return v;
  }
  /// @brief (x, y) ~ G_ρ^{⊗n}: y = ρx + √(1−ρ²) z.
  std::pair<Vec, Vec> correlated(std::uint64_t stream, int n, double rho) const {
    Vec x = normals(stream, n, 0);
    Vec z = normals(stream, n, static_cast<std::uint64_t>(n) + (n & 1));
    Vec y = rho * x + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * z;
    return {x, y};
  }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
};

/// @brief Normalized (probabilists') Hermite polynomial H_r, orthonormal under γ₁.
inline double hermite(int r, double x) {
  if (r < 0) throw DomainError("hermite: r must be >= 0");
  if (r == 0) return 1.0;
  double h0 = 1.0, h1 = x;
  for (int k = 1; k < r; ++k) {
    const double h2 = (x * h1 - std::sqrt(static_cast<double>(k)) * h0) / std::sqrt(k + 1.0);
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

inline void hermite_table(double x, int max_deg, std::vector<double>& out) {
  out.assign(max_deg + 1, 0.0);
  out[0] = 1.0;
  if (max_deg >= 1) out[1] = x;
  for (int k = 1; k < max_deg; ++k) out[k + 1] = (x * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) / std::sqrt(k + 1.0);
}

inline double hermite_multi(const std::vector<int>& sigma, const Vec& x) {
  double v = 1.0;
  for (size_t i = 0; i < sigma.size(); ++i)
    if (sigma[i]) v *= hermite(sigma[i], x(static_cast<Eigen::Index>(i)));
  return v;
}

inline int abs_degree(const std::vector<int>& sigma) {
  int s = 0;
  for (int v : sigma) s += v;
  return s;
}

inline bool is_multilinear_index(const std::vector<int>& sigma) {
  for (int v : sigma)
    if (v > 1) return false;
  return true;
}

/// @brief f = Σ f̂(σ) H_σ over n variables.
struct HermiteExpansion {
  int n = 0;
  std::map<std::vector<int>, double> coeffs;

  double norm_sq() const {
    double s = 0;
    for (const auto& [k, v] : coeffs) s += v * v;
    return s;
  }
  int degree() const {
    int d = 0;
    for (const auto& [k, v] : coeffs)
      if (std::abs(v) >= 1e-14) d = std::max(d, abs_degree(k));
    return d;
  }
  double evaluate(const Vec& x) const {
    double s = 0;
    for (const auto& [k, v] : coeffs) s += v * hermite_multi(k, x);
    return s;
  }
  void add(const std::vector<int>& sigma, double c) {
    require(static_cast<int>(sigma.size()) == n, "hermite expansion: index length mismatch");
    auto& slot = coeffs[sigma];
    slot += c;
  }
};

/// @brief Multilinear f = Σ_S f̂(S) Π_{i∈S} x_i with S a sorted subset of [n].
struct MultilinearPolynomial {
  int n = 0;
  std::map<std::vector<int>, double> coeffs;

  HermiteExpansion to_hermite() const {
    HermiteExpansion h;
    h.n = n;
    for (const auto& [s, c] : coeffs) {
      std::vector<int> sigma(n, 0);
      for (int i : s) sigma[i] = 1;
      h.coeffs[sigma] += c;
    }
    return h;
  }
  double evaluate(const Vec& x) const {
    double s = 0;
    for (const auto& [sub, c] : coeffs) {
      double t = c;
      for (int i : sub) t *= x(i);
      s += t;
    }
    return s;
  }
  double norm_sq() const {
    double s = 0;
    for (const auto& [k, v] : coeffs) s += v * v;
    return s;
  }
};

/// @brief U_ν f: coefficient σ scaled by ν^{Σσ_i}.
inline HermiteExpansion ou_smooth(const HermiteExpansion& f, double nu) {
  if (!(nu >= 0.0 && nu <= 1.0)) throw DomainError("ou_smooth: nu outside [0,1]");
  HermiteExpansion g;
  g.n = f.n;
  for (const auto& [s, c] : f.coeffs) {
    const int k = abs_degree(s);
    const double w = (k == 0) ? 1.0 : std::pow(nu, k);
    if (w != 0.0) g.coeffs[s] = c * w;
  }
  return g;
}

inline HermiteExpansion truncate_hermite_degree(const HermiteExpansion& f, int d) {
  HermiteExpansion g;
  g.n = f.n;
  for (const auto& [s, c] : f.coeffs)
    if (abs_degree(s) <= d) g.coeffs[s] = c;
  return g;
}

inline double gaussian_influence(const HermiteExpansion& f, int i) {
  require(i >= 0 && i < f.n, "gaussian_influence: index out of range");
  double s = 0;
  for (const auto& [k, c] : f.coeffs)
    if (k[i] != 0) s += c * c;
  return s;
}

inline double gaussian_variance(const HermiteExpansion& f) {
  double s = 0;
  for (const auto& [k, c] : f.coeffs)
    if (abs_degree(k) != 0) s += c * c;
  return s;
}

inline MultilinearPolynomial multilinear_truncate(const HermiteExpansion& f) {
  MultilinearPolynomial m;
  m.n = f.n;
  for (const auto& [s, c] : f.coeffs) {
    if (!is_multilinear_index(s)) continue;
    std::vector<int> sub;
    for (int i = 0; i < f.n; ++i)
      if (s[i]) sub.push_back(i);
    m.coeffs[sub] += c;
  }
  return m;
}

/// @brief E f(x) g(y) under G_ρ^{⊗n} for arbitrary Hermite expansions.
inline double correlated_inner_hermite(const HermiteExpansion& f, const HermiteExpansion& g, double rho) {
  require(f.n == g.n, "correlated_inner: variable count mismatch");
  double s = 0;
  for (const auto& [k, c] : f.coeffs) {
    auto it = g.coeffs.find(k);
    if (it == g.coeffs.end()) continue;
    const int d = abs_degree(k);
    s += c * it->second * (d == 0 ? 1.0 : std::pow(rho, d));
  }
  return s;
}

/// @brief Exact ⟨f,g⟩_{G_ρ} = Σ_S f̂(S)ĝ(S)ρ^{|S|}; rejects non-multilinear inputs.
inline double correlated_inner(const HermiteExpansion& f, const HermiteExpansion& g, double rho) {
  for (const auto& [k, c] : f.coeffs)
    if (!is_multilinear_index(k) && c != 0.0) throw DomainError("correlated_inner: input is not multilinear");
  for (const auto& [k, c] : g.coeffs)
    if (!is_multilinear_index(k) && c != 0.0) throw DomainError("correlated_inner: input is not multilinear");
  return correlated_inner_hermite(f, g, rho);
}

inline double correlated_inner(const MultilinearPolynomial& f, const MultilinearPolynomial& g, double rho) {
  return correlated_inner_hermite(f.to_hermite(), g.to_hermite(), rho);
}

struct McResult {
  double mean = 0;
  double std_error = 0;
  long long samples = 0;
};

/// @brief Streaming mean / standard error accumulator (Welford).
class McAccumulator {
 public:
  void add(double v) {
    ++n_;
    const double d = v - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (v - mean_);
  }
  McResult result() const {
    McResult r;
    r.mean = mean_;
    r.samples = n_;
    r.std_error = n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1) / static_cast<double>(n_)) : 0.0;
    return r;
  }

 private:
  long long n_ = 0;
  double mean_ = 0, m2_ = 0;
};

/// @brief Monte Carlo estimate of E F(x, y) with (x, y) ~ G_ρ^{⊗n}; sample k uses stream base+k.
inline McResult monte_carlo_functional(const std::function<double(const Vec&, const Vec&)>& f,
                                       const GaussianSampler& sampler, int n, double rho, long long samples,
                                       std::uint64_t stream_base = 0) {
  require(samples >= 2, "monte_carlo_functional: need at least 2 samples");
  McAccumulator acc;
  for (long long k = 0; k < samples; ++k) {
    auto [x, y] = sampler.correlated(stream_base + static_cast<std::uint64_t>(k), n, rho);
    acc.add(f(x, y));
  }
  return acc.result();
}

// Monomial ↔ Hermite conversion in one variable: x^k = Σ_j a_{k,j} H_j(x).
inline double monomial_to_hermite_coeff(int k, int j) {
  if (j > k || ((k - j) & 1)) return 0.0;
  const int m = (k - j) / 2;
  // k! / (m! j! 2^m) · √(j!)
  double v = std::lgamma(k + 1.0) - std::lgamma(m + 1.0) - std::lgamma(j + 1.0) - m * std::log(2.0) +
             0.5 * std::lgamma(j + 1.0);
  return std::exp(v);
}

// H_j(x) = Σ_k h_{j,k} x^k.
inline double hermite_monomial_coeff(int j, int k) {
  if (k > j || ((j - k) & 1)) return 0.0;
  const int m = (j - k) / 2;
  // He_j = Σ_m (−1)^m j!/(m! k! 2^m) x^k, H_j = He_j / √(j!)
  double v = std::lgamma(j + 1.0) - std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - m * std::log(2.0) -
             0.5 * std::lgamma(j + 1.0);
  return ((m & 1) ? -1.0 : 1.0) * std::exp(v);
}

/// @brief E x^k for x ~ N(0,1).
inline double gaussian_moment(int k) {
  if (k & 1) return 0.0;
  double v = 1.0;
  for (int i = k - 1; i > 1; i -= 2) v *= i;
  return v;
}

/// @brief E r^j for r ~ χ_n: 2^{j/2} Γ((n+j)/2) / Γ(n/2).
inline double chi_moment(int n, int j) {
  return std::exp(0.5 * j * std::log(2.0) + std::lgamma((n + j) / 2.0) - std::lgamma(n / 2.0));
}

}  // namespace mesc
