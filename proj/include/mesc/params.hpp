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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "mesc/linalg.hpp"

namespace mesc {

using BigInt = boost::multiprecision::cpp_int;

/// @brief Exact non-negative rational n/d on big integers.
struct BigRational {
  BigInt n = 0, d = 1;

  static BigRational from_int(const BigInt& v) { return {v, 1}; }

  /// @brief Exact value of a finite double.
  static BigRational from_double(double x) {
    require(std::isfinite(x), "non-finite parameter");
    int e = 0;
    const double m = std::frexp(std::abs(x), &e);
    BigInt num = static_cast<long long>(std::ldexp(m, 53));
    BigRational r;
    e -= 53;
    if (e >= 0) {
      r.n = num << e;
      r.d = 1;
    } else {
      r.n = num;
      r.d = BigInt(1) << (-e);
    }
    if (x < 0) r.n = -r.n;
    r.reduce();
    return r;
  }

  /// @brief Parses "[-]digits[.digits][e[+-]digits]".
  static BigRational from_decimal(const std::string& s) {
    std::string mant;
    long long exp10 = 0;
    size_t i = 0;
    bool neg = false;
    if (i < s.size() && (s[i] == '-' || s[i] == '+')) neg = s[i++] == '-';
    bool after_point = false;
    for (; i < s.size(); ++i) {
      const char c = s[i];
      if (c >= '0' && c <= '9') {
        mant.push_back(c);
        if (after_point) --exp10;
      } else if (c == '.') {
        after_point = true;
      } else if (c == 'e' || c == 'E') {
        exp10 += std::stoll(s.substr(i + 1));
        break;
      } else {
        throw ParseError("bad decimal literal: " + s);
      }
    }
    if (mant.empty()) throw ParseError("bad decimal literal: " + s);
    BigRational r;
    r.n = BigInt(mant);
    if (neg) r.n = -r.n;
    BigInt p = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(std::llabs(exp10)));
    if (exp10 >= 0)
      r.n *= p;
    else
      r.d = p;
    r.reduce();
    return r;
  }

  void reduce() {
    BigInt g = boost::multiprecision::gcd(n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
  }

  friend BigRational operator*(const BigRational& a, const BigRational& b) {
    BigRational r{a.n * b.n, a.d * b.d};
    r.reduce();
    return r;
  }
  friend BigRational operator/(const BigRational& a, const BigRational& b) {
    require(b.n != 0, "division by zero in parameter chain");
    BigRational r{a.n * b.d, a.d * b.n};
    if (r.d < 0) {
      r.n = -r.n;
      r.d = -r.d;
    }
    r.reduce();
    return r;
  }
  friend BigRational operator-(const BigRational& a, const BigRational& b) {
    BigRational r{a.n * b.d - b.n * a.d, a.d * b.d};
    r.reduce();
    return r;
  }
  BigInt ceil() const {
    BigInt q = n / d;
    if (q * d < n) q += 1;
    return q;
  }
  BigInt floor() const {
    BigInt q = n / d;
    if (q * d > n) q -= 1;
    return q;
  }
};

/// @brief log10 of a positive big integer from its leading digits.
inline double big_log10(const BigInt& v) {
  require(v > 0, "big_log10: non-positive value");
  std::string s = v.str();
  const size_t keep = std::min<size_t>(17, s.size());
  const double lead = std::stod(s.substr(0, keep));
  return std::log10(lead) + static_cast<double>(s.size() - keep);
}

/// @brief An integer chain value: exact decimal digits when they fit the budget, always log10.
struct ChainValue {
  std::optional<std::string> exact;
  double log10 = 0;
  std::optional<long long> small;  // set when it fits in 62 bits

  static ChainValue of(const BigInt& v) {
    ChainValue c;
    c.exact = v.str();
    c.log10 = v > 0 ? big_log10(v) : -INFINITY;
    if (v >= 0 && v < (BigInt(1) << 62)) c.small = static_cast<long long>(v);
    return c;
  }
  static ChainValue log_only(double l10) {
    ChainValue c;
    c.log10 = l10;
    return c;
  }
};

inline constexpr double kMaxExactDigits = 1e5;

struct Constants {
  double C_smooth = 1, C_d1 = 1, C_n0 = 1, c_n0_exp = 1, C_d2 = 1, C_n1 = 1, C_delta = 1;
};

/// @brief Desk-scale overrides of the theoretical chain.
struct Overrides {
  std::optional<long long> d1, n0, d2, n1, D;
  std::optional<long long> D_extra;  // D′ = h + D_extra
  bool any() const { return d1 || n0 || d2 || n1 || D || D_extra; }
};

struct PipelineParams {
  // inputs
  double delta = 0.1, theta = 0.1, rho = 0.5;
  std::optional<std::string> theta_decimal;  // exact decimal form when theta comes from the preset
  int p = 1, q = 1, r = 1, s = 2, t = 2, a = 2, b = 2;
  Constants constants;
  std::uint64_t seed = 0;
  long long monte_carlo_N = 100000;
  double alpha = 0.125;
  int max_retries = 8;
  Overrides overrides;

  // derived
  double delta1_prime = 0, gamma = 1, gamma_threshold = 1, tsmooth_eps = 0;
  double delta2_prime = 0, nu = 1;
  double theta_log10 = 0;
  ChainValue d1, h_cap, n0, d2, n1, D;
  std::vector<std::string> chain;

  long long eff_d1() const { return pick(overrides.d1, d1, "d1"); }
  long long eff_n0() const { return pick(overrides.n0, n0, "n0"); }
  long long eff_d2() const { return pick(overrides.d2, d2, "d2"); }
  long long eff_n1() const { return pick(overrides.n1, n1, "n1"); }
  bool desk_scale() const { return overrides.any(); }

 private:
  static long long pick(const std::optional<long long>& o, const ChainValue& v, const char* name) {
    if (o) return *o;
    if (!v.small) throw ResourceError(std::string("theoretical ") + name + " is too large to execute; supply an override");
    return *v.small;
  }
};

/// @brief sup_{d ≥ 1} ρ^d (1 − γ^{2d}): the smallest ε for which γ is admissible in the smoothing bound.
inline double tsmooth_epsilon(double gamma, double rho) {
  if (rho <= 0.0 || gamma >= 1.0) return 0.0;
  double best = 0.0, rd = 1.0, g2d = 1.0;
  for (int d = 1; d < 100000; ++d) {
    rd *= rho;
    g2d *= gamma * gamma;
    best = std::max(best, rd * (1.0 - g2d));
    if (rd < best * 1e-3) break;
  }
  return best;
}

/// @brief Smoothing noise rate γ = 1 − C (1−ρ) δ′ / ln(1/(1−δ′)), clamped to [0,1].
inline double smoothing_gamma(double delta_prime, double rho, double c_smooth) {
  const double g = 1.0 - c_smooth * (1.0 - rho) * delta_prime / std::log(1.0 / (1.0 - delta_prime));
  return std::clamp(g, 0.0, 1.0);
}

/// @brief (1−ε)^{ln ρ/(ln ε + ln ρ)}; tends to 1−ε as ρ → 0.
inline double noise_threshold(double eps, double rho) {
  if (rho <= 0.0) return 1.0 - eps;
  return std::pow(1.0 - eps, std::log(rho) / (std::log(eps) + std::log(rho)));
}

namespace detail {

inline BigInt ipow(long long base, long long e) {
  return boost::multiprecision::pow(BigInt(base), static_cast<unsigned>(e));
}

inline BigRational rat(double x) { return BigRational::from_double(x); }

}  // namespace detail

/// @brief Evaluates the full parameter chain d₁ → h → n₀ → d₂ → n₁ → D.
inline PipelineParams compute_bound(PipelineParams P) {
  using detail::ipow;
  using detail::rat;
  if (!(P.delta > 0.0 && P.delta < 1.0)) throw DomainError("delta must lie in (0,1)");
  if (!P.theta_decimal && !(P.theta > 0.0 && P.theta < 1.0)) throw DomainError("theta must lie in (0,1)");
  if (!(P.rho >= 0.0 && P.rho <= 1.0)) throw DomainError("rho must lie in [0,1)");
  if (P.rho >= 1.0) throw DomainError("rho = 1: no finite bound exists");
  for (int d : {P.p, P.q, P.r, P.s, P.t, P.a, P.b})
    if (d < 1) throw DomainError("dimensions must be positive");
  const auto& C = P.constants;
  const long long abpq = 1LL * P.a * P.a * P.b * P.b * P.p * P.q;

  P.delta1_prime = P.delta / (4.0 * abpq);
  P.gamma = smoothing_gamma(P.delta1_prime, P.rho, C.C_smooth);
  P.gamma_threshold = noise_threshold(P.delta1_prime, P.rho);
  P.tsmooth_eps = tsmooth_epsilon(P.gamma, P.rho);
  P.delta2_prime = P.delta / (16.0 * abpq);
  P.nu = noise_threshold(P.delta2_prime, P.rho);

  const BigRational delta = rat(P.delta);
  const BigRational one_minus_rho = BigRational::from_int(1) - rat(P.rho);
  const BigRational theta = P.theta_decimal ? BigRational::from_decimal(*P.theta_decimal) : rat(P.theta);
  P.theta_log10 = P.theta_decimal ? big_log10(theta.n) - big_log10(theta.d) : std::log10(P.theta);

  // d1 = ceil(C_d1 a²b²pq / (δ(1−ρ)))
  const BigInt d1 = (rat(C.C_d1) * BigRational::from_int(abpq) / (delta * one_minus_rho)).ceil();
  P.d1 = ChainValue::of(d1);
  // h_cap = floor(d1 (a+b) / θ)
  const BigInt h = (BigRational::from_int(d1 * (P.a + P.b)) / theta).floor();
  P.h_cap = ChainValue::of(h);
  // d2 = ceil(C_d2 a²b²pq / (δ(1−ρ)))
  const BigInt d2 = (rat(C.C_d2) * BigRational::from_int(abpq) / (delta * one_minus_rho)).ceil();
  P.d2 = ChainValue::of(d2);
  // n1 = ceil(C_n1 a⁴b⁴p²q² d2² / θ²)
  const BigInt n1 = (rat(C.C_n1) * BigRational::from_int(BigInt(abpq) * abpq * d2 * d2) / (theta * theta)).ceil();
  P.n1 = ChainValue::of(n1);

  // n0 = ceil(C_n0 p⁸q⁸ d1^{c·d1} / δ⁶)
  const double d1d = static_cast<double>(d1);
  const double cd = C.c_n0_exp * d1d;
  const double n0_log10 = std::log10(C.C_n0) + 8 * std::log10(P.p) + 8 * std::log10(P.q) + cd * std::log10(d1d) -
                          6 * std::log10(P.delta);
  const bool exact_exponent = std::floor(cd) == cd && d1 < (BigInt(1) << 62);
  std::optional<BigInt> n0;
  if (exact_exponent && n0_log10 <= kMaxExactDigits) {
    BigRational x = rat(C.C_n0) * BigRational::from_int(ipow(P.p, 8) * ipow(P.q, 8) *
                                                        ipow(static_cast<long long>(d1), static_cast<long long>(cd)));
    BigRational d6 = delta * delta * delta * delta * delta * delta;
    n0 = (x / d6).ceil();
    P.n0 = ChainValue::of(*n0);
  } else {
    P.n0 = ChainValue::log_only(n0_log10);
  }
  // D = h + n0 n1
  if (n0) {
    P.D = ChainValue::of(h + *n0 * n1);
  } else {
    const double l = n0_log10 + P.n1.log10;
    P.D = ChainValue::log_only(l);
  }

  P.chain = {
      "delta1' = delta / (4 a^2 b^2 p q)",
      "gamma = clamp(1 - C_smooth (1 - rho) delta1' / ln(1 / (1 - delta1')), 0, 1)",
      "d1 = ceil(C_d1 a^2 b^2 p q / (delta (1 - rho)))",
      "h_cap = floor(d1 (a + b) / theta)",
      "n0 = ceil(C_n0 p^8 q^8 d1^(c_n0_exp d1) / delta^6)",
      "delta2' = delta / (16 a^2 b^2 p q)",
      "nu = (1 - delta2')^(ln rho / (ln delta2' + ln rho))",
      "d2 = ceil(C_d2 a^2 b^2 p q / (delta (1 - rho)))",
      "n1 = ceil(C_n1 a^4 b^4 p^2 q^2 d2^2 / theta^2)",
      "D = h_cap + n0 n1",
  };
  return P;
}

/// @brief δ = θ = 1/4, ρ = 1/2, every dimension 2, every constant 1.
inline PipelineParams toy_preset() {
  PipelineParams P;
  P.delta = 0.25;
  P.theta = 0.25;
  P.rho = 0.5;
  P.p = P.q = P.r = P.s = P.t = P.a = P.b = 2;
  P.constants = Constants{};
  return P;
}

/// @brief ε-driven preset: δ = C_delta ε, θ = ε¹² / exp(a²b²pq ln s ln t / (ε(1−ρ))).
inline PipelineParams preset_from_epsilon(PipelineParams P, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("epsilon must lie in (0,1)");
  if (P.rho >= 1.0) throw DomainError("rho = 1: no finite bound exists");
  using F = boost::multiprecision::cpp_dec_float_100;
  const F e(eps);
  const F expo = F(1LL * P.a * P.a * P.b * P.b * P.p * P.q) * boost::multiprecision::log(F(P.s)) *
                 boost::multiprecision::log(F(P.t)) / (e * (F(1) - F(P.rho)));
  F theta = boost::multiprecision::pow(e, 12) / boost::multiprecision::exp(expo);
  P.theta_decimal = theta.str(40, std::ios_base::scientific);
  P.theta = static_cast<double>(theta);
  P.delta = P.constants.C_delta * eps;
  return compute_bound(P);
}

}  // namespace mesc
