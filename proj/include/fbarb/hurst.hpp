#pragma once

// Hurst-parameter constants and the fBm increment autocovariance rho_h(k).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "fbarb/errors.hpp"

namespace fbarb {

/// c_H = sqrt(2H Gamma(3/2-H) / (Gamma(H+1/2) Gamma(2-2H))), H in (1/2, 1).
inline double normalizing_constant(double H) {
  if (!(H > 0.5 && H < 1.0)) {
    throw DomainError("normalizing_constant: H must lie in (1/2, 1), got " + std::to_string(H));
  }
  const double num = 2.0 * H * std::tgamma(1.5 - H);
  const double den = std::tgamma(H + 0.5) * std::tgamma(2.0 - 2.0 * H);
  return std::sqrt(num / den);
}

/// Validated Hurst/volatility inputs plus every constant derived from them.
struct HurstParams {
  double H = 0.75;
  double sigma = 1.0;
  double h = 0.625;      // H/2 + 1/4, exponent of rho_h
  double alpha = 0.25;   // H - 1/2
  double beta = 0.75;    // 2 - 2h, decay rate of rho_h
  double c_H = 0.0;
  double C_H = 0.0;      // c_H (H - 1/2)
  double g_H = 0.0;      // sigma c_H / (H + 1/2)

  static HurstParams make(double H, double sigma = 1.0) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw DomainError("HurstParams: sigma must be positive");
    }
    HurstParams p;
    p.H = H;
    p.sigma = sigma;
    p.c_H = normalizing_constant(H);
    p.h = H / 2.0 + 0.25;
    p.alpha = H - 0.5;
    p.beta = 2.0 - 2.0 * p.h;
    p.C_H = p.c_H * p.alpha;
    p.g_H = sigma * p.c_H / (H + 0.5);
    return p;
  }
};

/// Below this lag rho is evaluated from its definition; at and above it from
/// the binomial series, where the direct form loses digits to cancellation.
inline constexpr std::int64_t kRhoSeriesSwitch = 16;

namespace detail {

inline double rho_direct(double h, double k) {
  const double e = 2.0 * h;
  const double km1 = k - 1.0;
  const double lower = km1 > 0.0 ? std::pow(km1, e) : 0.0;
  return 0.5 * (std::pow(k + 1.0, e) + lower - 2.0 * std::pow(k, e));
}

// rho_h(k) = k^{2h} sum_{m>=1} binom(2h, 2m) k^{-2m}. Every binomial
// coefficient here is nonnegative for 2h in [1, 2].
inline double rho_series(double h, double k) {
  const double e = 2.0 * h;
  const double x2 = 1.0 / (k * k);
  double coef = 1.0;
  double pw = 1.0;
  double sum = 0.0;
  for (int m = 1; m < 200; ++m) {
    coef *= (e - 2.0 * m + 2.0) * (e - 2.0 * m + 1.0) / ((2.0 * m - 1.0) * (2.0 * m));
    pw *= x2;
    const double term = coef * pw;
    sum += term;
    if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
  }
  return std::pow(k, e) * sum;
}

}  // namespace detail

enum class RhoDomain {
  strict,    // h in (1/2, 3/4)
  boundary,  // h in [1/2, 3/4]; used by boundary tests
};

/// Autocovariance of unit-lag fBm increments with Hurst index h:
/// rho_h(k) = ((k+1)^{2h} + (k-1)^{2h} - 2k^{2h}) / 2.
inline double rho(double h, std::int64_t k, RhoDomain domain = RhoDomain::strict) {
  const bool ok = domain == RhoDomain::strict ? (h > 0.5 && h < 0.75) : (h >= 0.5 && h <= 0.75);
  if (!ok) throw DomainError("rho: h out of range: " + std::to_string(h));
  if (k < 1) throw DomainError("rho: lag must be >= 1");
  const auto kd = static_cast<double>(k);
  return k < kRhoSeriesSwitch ? detail::rho_direct(h, kd) : detail::rho_series(h, kd);
}

/// Hurwitz zeta sum_{k>=0} (k+q)^{-s} for s > 1, q > 0 (Euler-Maclaurin).
inline double hurwitz_zeta(double s, double q) {
  if (!(s > 1.0) || !(q > 0.0)) throw DomainError("hurwitz_zeta: need s > 1 and q > 0");
  // B_{2j} / (2j)!
  static constexpr std::array<double, 8> kB2jOverFact = {
      1.0 / 12.0,
      -1.0 / 720.0,
      1.0 / 30240.0,
      -1.0 / 1209600.0,
      1.0 / 47900160.0,
      -691.0 / 1307674368000.0,
      7.0 / 523069747200.0,
      -3617.0 / 10670622842880000.0};
  double head = 0.0;
  double a = q;
  while (a < 40.0) {
    head += std::pow(a, -s);
    a += 1.0;
  }
  double tail = std::pow(a, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(a, -s);
  double rising = s;                    // s (s+1) ... (s+2j-2)
  double pw = std::pow(a, -s - 1.0);    // a^{-s-2j+1}
  const double inv_a2 = 1.0 / (a * a);
  for (std::size_t j = 0; j < kB2jOverFact.size(); ++j) {
    const double term = kB2jOverFact[j] * rising * pw;
    tail += term;
    if (std::abs(term) < 1e-18 * std::abs(tail)) break;
    rising *= (s + 2.0 * j + 1.0) * (s + 2.0 * j + 2.0);
    pw *= inv_a2;
  }
  return head + tail;
}

/// sum_{k>K} rho_h(k)^2 from the asymptotic expansion
/// rho_h(k)^2 = sum_{p>=2} e_p k^{4h-2p}, resummed with Hurwitz zeta.
/// Accurate to ~1e-16 relative once K >= 64.
inline double rho_sq_tail(double h, std::int64_t K) {
  if (K < 64) throw DomainError("rho_sq_tail: expansion needs K >= 64");
  constexpr int kTerms = 8;
  std::array<double, kTerms + 1> c{};  // c[m] = binom(2h, 2m)
  const double e = 2.0 * h;
  double coef = 1.0;
  for (int m = 1; m <= kTerms; ++m) {
    coef *= (e - 2.0 * m + 2.0) * (e - 2.0 * m + 1.0) / ((2.0 * m - 1.0) * (2.0 * m));
    c[static_cast<std::size_t>(m)] = coef;
  }
  const double q = static_cast<double>(K) + 1.0;
  double total = 0.0;
  for (int p = 2; p <= kTerms + 1; ++p) {
    double ep = 0.0;
    for (int m = 1; m <= p - 1; ++m) ep += c[static_cast<std::size_t>(m)] * c[static_cast<std::size_t>(p - m)];
    const double term = ep * hurwitz_zeta(2.0 * p - 2.0 * e, q);
    total += term;
    if (std::abs(term) < 1e-18 * std::abs(total)) break;
  }
  return total;
}

/// Envelope constant b such that rho_h(k) <= b k^{-beta} for every k >= k_from.
/// rho_h(k) k^beta = sum_m binom(2h,2m) k^{2-2m} has nonnegative terms, so it is
/// nonincreasing in k and its value at k_from bounds the whole range beyond.
inline double rho_envelope(double h, std::int64_t k_from) {
  const double beta = 2.0 - 2.0 * h;
  return rho(h, k_from) * std::pow(static_cast<double>(k_from), beta);
}

/// Certified bound on sum_{k>K} rho_h(k)^2 from the envelope b k^{-beta}:
/// b^2 K^{1-2beta} / (2 beta - 1).
inline double rho_sq_tail_bound(double h, std::int64_t K) {
  const double beta = 2.0 - 2.0 * h;
  const double b = rho_envelope(h, K + 1);
  return b * b * std::pow(static_cast<double>(K), 1.0 - 2.0 * beta) / (2.0 * beta - 1.0);
}

/// Truncated sum of squared autocovariances with its certified tail.
struct RhoTailSum {
  double h = 0.0;
  std::int64_t K = 0;
  double partial_sum_sq = 0.0;  // sum_{k<=K} rho_h(k)^2
  double tail_bound = 0.0;      // >= sum_{k>K} rho_h(k)^2
  double tail_estimate = 0.0;   // asymptotic value of sum_{k>K} rho_h(k)^2

  double total_estimate() const { return partial_sum_sq + tail_estimate; }
};

inline constexpr std::int64_t kDefaultRhoCap = 100'000'000;

namespace detail {

// Direct terms are summed up to this lag; beyond it partial sums are differenced
// from the tail expansion.
inline constexpr std::int64_t kDirectSumLimit = 1 << 20;

inline double rho_sq_partial(double h, std::int64_t K) {
  const std::int64_t direct = std::min(K, kDirectSumLimit);
  double sum = 0.0;
  double comp = 0.0;
  for (std::int64_t k = 1; k <= direct; ++k) {
    const double r = rho(h, k);
    const double t = r * r;
    const double s = sum + t;
    comp += std::abs(sum) >= std::abs(t) ? (sum - s) + t : (t - s) + sum;
    sum = s;
  }
  sum += comp;
  if (K > direct) sum += rho_sq_tail(h, direct) - rho_sq_tail(h, K);
  return sum;
}

}  // namespace detail

/// Smallest K whose certified tail bound is at most target_tail, together with
/// the partial sum up to K. Throws CapExceeded when no K <= cap qualifies.
inline RhoTailSum rho_sq_sum(double h, double target_tail, std::int64_t cap = kDefaultRhoCap) {
  if (!(h > 0.5 && h < 0.75)) throw DomainError("rho_sq_sum: h must lie in (1/2, 3/4)");
  if (!(target_tail > 0.0)) throw DomainError("rho_sq_sum: target_tail must be positive");
  if (rho_sq_tail_bound(h, cap) > target_tail) {
    throw CapExceeded("rho_sq_sum: tail bound " + std::to_string(rho_sq_tail_bound(h, cap)) +
                      " at the cap K=" + std::to_string(cap) + " exceeds target " +
                      std::to_string(target_tail));
  }
  std::int64_t lo = 0;  // tail_bound(lo) > target, or lo == 0
  std::int64_t hi = 1;
  while (hi < cap && rho_sq_tail_bound(h, hi) > target_tail) {
    lo = hi;
    hi = std::min(cap, hi * 2);
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (rho_sq_tail_bound(h, mid) > target_tail) lo = mid; else hi = mid;
  }
  RhoTailSum out;
  out.h = h;
  out.K = hi;
  out.partial_sum_sq = detail::rho_sq_partial(h, hi);
  out.tail_bound = rho_sq_tail_bound(h, hi);
  out.tail_estimate = hi >= 64 ? rho_sq_tail(h, hi) : rho_sq_tail(h, 64) + (detail::rho_sq_partial(h, 64) - out.partial_sum_sq);
  return out;
}

/// Full series sum_{k>=1} rho_h(k)^2 (direct head plus tail expansion).
inline double rho_sq_total(double h, RhoDomain domain = RhoDomain::strict) {
  if (domain == RhoDomain::boundary && h == 0.5) return 0.0;
  if (!(h > 0.5 && h < 0.75)) throw DomainError("rho_sq_total: h must lie in (1/2, 3/4)");
  constexpr std::int64_t kHead = 4096;
  return detail::rho_sq_partial(h, kHead) + rho_sq_tail(h, kHead);
}

/// h^2 (2h-1)^2 zeta(4-4h) / 4, the lower bound implied by rho_h(k) >= h(2h-1)/(2k^{2-2h}).
inline double rho_sq_lower_bound(double h) {
  return h * h * (2.0 * h - 1.0) * (2.0 * h - 1.0) * std::riemann_zeta(4.0 - 4.0 * h) / 4.0;
}

/// Critical exponents: sum_k rho_{h_c}(k)^2 = 1/4 and H_c = 2 h_c - 1/2.
struct CriticalHurst {
  double h_c = 0.0;
  double H_c = 0.0;
  double sum_at_root = 0.0;
  double residual = 0.0;  // |sum - 1/4|
  int iterations = 0;
};

/// Bisection on h -> sum_k rho_h(k)^2 - 1/4, which is strictly increasing since
/// each rho_h(k) increases with h.
inline CriticalHurst solve_critical_hurst(double tol = 1e-8, double width = 1e-10) {
  if (!(tol > 0.0) || !(width > 0.0)) throw DomainError("solve_critical_hurst: tolerances must be positive");
  auto f = [](double h) { return rho_sq_total(h) - 0.25; };
  double lo = 0.5 + 1e-6;
  double hi = 0.75 - 1e-6;
  if (!(f(lo) < 0.0 && f(hi) > 0.0)) {
    throw NonConvergence("solve_critical_hurst: bracket does not straddle 1/4", 0.5 * (lo + hi), hi - lo);
  }
  CriticalHurst out;
  while (hi - lo > width) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
    ++out.iterations;
  }
  out.h_c = 0.5 * (lo + hi);
  out.H_c = 2.0 * out.h_c - 0.5;
  out.sum_at_root = rho_sq_total(out.h_c);
  out.residual = std::abs(out.sum_at_root - 0.25);
  if (out.residual > tol) {
    throw NonConvergence("solve_critical_hurst: residual above tolerance", out.h_c, out.residual);
  }
  return out;
}

}  // namespace fbarb
