#pragma once

// Market coefficients of the N-period fractional binary market.
//
// Scaled coefficients (independent of the horizon N):
//   j_n(i) = sigma C_H int_{i-1}^{i} x^{-alpha} F_n(x) dx,
//   F_n(x) = int_0^1 (v+n-1)^alpha (v+n-1-x)^{alpha-1} dv,
//   g_n    = sigma C_H int_{n-1}^{n} x^{-alpha} (n-x)^alpha G_n(x) dx,
//   G_n(x) = int_0^1 (y(n-x)+x)^alpha y^{alpha-1} dy,
// with alpha = H - 1/2. The unscaled J_n^{(N)}(i), g_n^{(N)} integrate the
// kernel k_H directly and satisfy N^H J = j, N^H g = g_n.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "fbarb/errors.hpp"
#include "fbarb/hurst.hpp"
#include "fbarb/quadrature.hpp"

namespace fbarb {

/// A computed quantity with its estimated absolute error.
struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

enum class CoefficientRoute {
  nested,      // fully numeric nested quadrature
  beta_inner,  // order swapped; inner x-integral via the regularized incomplete beta
};

namespace detail {

inline QuadratureConfig inner_config(const QuadratureConfig& cfg) {
  QuadratureConfig inner = cfg;
  inner.abs_tol = std::max(cfg.abs_tol * 1e-2, 1e-15);
  inner.rel_tol = std::max(cfg.rel_tol * 1e-2, 1e-13);  // GK21 rounding floor is ~1e-14
  return inner;
}

// int_{lo}^{lo+len} (w + shift)^alpha w^{alpha-1} dw with w = tau^{1/alpha}; the
// integrand in tau is (tau^{1/alpha} + shift)^alpha / alpha, free of the w^{alpha-1}
// endpoint singularity.
inline QuadResult shifted_power_integral(double alpha, double lo, double len, double shift,
                                         const QuadratureConfig& inner) {
  lo = std::max(lo, 0.0);
  const double t0 = std::pow(lo, alpha);
  const double t1 = std::pow(lo + len, alpha);
  const double p = 1.0 / alpha;
  auto f = [&](double tau) { return std::pow(std::pow(tau, p) + shift, alpha) / alpha; };
  return integrate(f, t0, t1, inner, "shifted_power_integral");
}

// Same integral with (w + shift) replaced by (w * scale + shift): used by G_n.
inline QuadResult scaled_power_integral(double alpha, double scale, double shift,
                                        const QuadratureConfig& inner) {
  const double p = 1.0 / alpha;
  auto f = [&](double tau) { return std::pow(std::pow(tau, p) * scale + shift, alpha) / alpha; };
  return integrate(f, 0.0, 1.0, inner, "scaled_power_integral");
}

// int_{lo}^{hi} x^{-alpha} dx
inline double weight_mass(double alpha, double lo, double hi) {
  return (std::pow(hi, 1.0 - alpha) - std::pow(lo, 1.0 - alpha)) / (1.0 - alpha);
}

inline void check_H(double H) {
  if (!(H > 0.5 && H < 1.0)) throw DomainError("coefficients: H must lie in (1/2, 1)");
}

// Sum of j_n(i) for i in [first, last] via one outer integral over [first-1, last].
inline Estimate j_range_nested(const HurstParams& p, std::int64_t n, std::int64_t first, std::int64_t last,
                               const QuadratureConfig& cfg) {
  const double alpha = p.alpha;
  const double nd = static_cast<double>(n);
  const auto inner = inner_config(cfg);
  double worst_inner = 0.0;
  auto f = [&](double x) {
    const auto r = shifted_power_integral(alpha, nd - 1.0 - x, 1.0, x, inner);
    worst_inner = std::max(worst_inner, r.error);
    return std::pow(x, -alpha) * r.value;
  };
  const double a = static_cast<double>(first - 1);
  const double b = static_cast<double>(last);
  const EndpointExponent left = first == 1 ? EndpointExponent{-alpha} : EndpointExponent::smooth();
  const EndpointExponent right = last == n - 1 ? EndpointExponent{alpha} : EndpointExponent::smooth();
  QuadratureConfig outer = cfg;
  outer.abs_tol = cfg.abs_tol / (p.sigma * p.C_H);
  const auto r = integrate_algebraic(f, a, b, left, right, outer, "j_coeff");
  const double scale = p.sigma * p.C_H;
  return {scale * r.value, scale * (r.error + worst_inner * weight_mass(alpha, a, b))};
}

// Difference of regularized incomplete betas I_y1 - I_y0 for parameters (a, b),
// taken on the complementary side when both arguments are in the upper half.
inline double ibeta_diff(double a, double b, double y0, double y1) {
  y1 = std::min(y1, 1.0);
  if (y0 >= 0.5) return boost::math::ibetac(a, b, y0) - boost::math::ibetac(a, b, y1);
  return boost::math::ibeta(a, b, y1) - boost::math::ibeta(a, b, y0);
}

inline Estimate j_range_beta(const HurstParams& p, std::int64_t n, std::int64_t first, std::int64_t last,
                             const QuadratureConfig& cfg) {
  const double alpha = p.alpha;
  const double nd = static_cast<double>(n);
  const double lo = static_cast<double>(first - 1);
  const double hi = static_cast<double>(last);
  const double B = boost::math::beta(1.0 - alpha, alpha);
  auto f = [&](double v) {
    const double c = v + nd - 1.0;
    return std::pow(c, alpha) * ibeta_diff(1.0 - alpha, alpha, lo / c, hi / c);
  };
  const double scale = p.sigma * p.C_H * B;
  QuadratureConfig outer = cfg;
  outer.abs_tol = cfg.abs_tol / scale;
  const EndpointExponent left = last == n - 1 ? EndpointExponent{alpha} : EndpointExponent::smooth();
  const auto r = integrate_algebraic(f, 0.0, 1.0, left, EndpointExponent::smooth(), outer, "j_coeff");
  return {scale * r.value, scale * r.error + 1e-15 * std::abs(scale * r.value)};
}

}  // namespace detail

/// The singular kernel k_H(t, s) = C_H s^{1/2-H} int_s^t u^{H-1/2} (u-s)^{H-3/2} du.
inline Estimate kernel(double H, double t, double s, const QuadratureConfig& cfg = {}) {
  detail::check_H(H);
  if (!(s > 0.0) || !(t > s)) throw DomainError("kernel: need 0 < s < t");
  const auto p = HurstParams::make(H);
  const auto r = detail::shifted_power_integral(p.alpha, 0.0, t - s, s, detail::inner_config(cfg));
  const double scale = p.C_H * std::pow(s, -p.alpha);
  return {scale * r.value, scale * r.error};
}

/// Scaled past-dependence coefficient j_n^H(i), 1 <= i <= n-1.
inline Estimate j_coeff(const HurstParams& p, std::int64_t n, std::int64_t i, const QuadratureConfig& cfg = {},
                        CoefficientRoute route = CoefficientRoute::nested) {
  if (n < 2 || i < 1 || i > n - 1) throw DomainError("j_coeff: need n >= 2 and 1 <= i <= n-1");
  cfg.validate();
  return route == CoefficientRoute::nested ? detail::j_range_nested(p, n, i, i, cfg)
                                           : detail::j_range_beta(p, n, i, i, cfg);
}

/// sum_{i=first}^{last} j_n^H(i) as a single integral.
inline Estimate j_block_sum(const HurstParams& p, std::int64_t n, std::int64_t first, std::int64_t last,
                            const QuadratureConfig& cfg = {}, CoefficientRoute route = CoefficientRoute::nested) {
  if (n < 2 || first < 1 || last > n - 1 || first > last) throw DomainError("j_block_sum: bad index range");
  return route == CoefficientRoute::nested ? detail::j_range_nested(p, n, first, last, cfg)
                                           : detail::j_range_beta(p, n, first, last, cfg);
}

/// Scaled present-dependence coefficient g_n^H, n >= 1.
inline Estimate g_coeff(const HurstParams& p, std::int64_t n, const QuadratureConfig& cfg = {},
                        CoefficientRoute route = CoefficientRoute::nested) {
  if (n < 1) throw DomainError("g_coeff: need n >= 1");
  cfg.validate();
  const double alpha = p.alpha;
  const double nd = static_cast<double>(n);
  if (route == CoefficientRoute::beta_inner) {
    // g_n = sigma C_H B(1-alpha, alpha) int_{n-1}^{n} s^alpha Ic_{(n-1)/s}(1-alpha, alpha) ds
    const double B = boost::math::beta(1.0 - alpha, alpha);
    auto f = [&](double s) {
      return std::pow(s, alpha) * boost::math::ibetac(1.0 - alpha, alpha, (nd - 1.0) / s);
    };
    const double scale = p.sigma * p.C_H * B;
    QuadratureConfig outer = cfg;
    outer.abs_tol = cfg.abs_tol / scale;
    const EndpointExponent left = n == 1 ? EndpointExponent::smooth() : EndpointExponent{alpha};
    const auto r = integrate_algebraic(f, nd - 1.0, nd, left, EndpointExponent::smooth(), outer, "g_coeff");
    return {scale * r.value, scale * r.error + 1e-15 * std::abs(scale * r.value)};
  }
  const auto inner = detail::inner_config(cfg);
  double worst_inner = 0.0;
  auto f = [&](double x) {
    const double gap = nd - x;
    const auto r = detail::scaled_power_integral(alpha, gap, x, inner);
    worst_inner = std::max(worst_inner, r.error);
    return std::pow(x, -alpha) * std::pow(gap, alpha) * r.value;
  };
  const EndpointExponent left = n == 1 ? EndpointExponent{-alpha} : EndpointExponent::smooth();
  QuadratureConfig outer = cfg;
  outer.abs_tol = cfg.abs_tol / (p.sigma * p.C_H);
  const auto r = integrate_algebraic(f, nd - 1.0, nd, left, EndpointExponent{alpha}, outer, "g_coeff");
  const double scale = p.sigma * p.C_H;
  return {scale * r.value, scale * (r.error + worst_inner * detail::weight_mass(alpha, nd - 1.0, nd))};
}

namespace detail {

// sigma sqrt(N) int_{lo}^{hi} integrand(u) du with integrand built from kernel values.
template <class F>
Estimate unscaled_integral(const HurstParams& p, double N, double lo, double hi, EndpointExponent left,
                           EndpointExponent right, F&& integrand, const QuadratureConfig& cfg, const char* what) {
  const double scale = p.sigma * std::sqrt(N);
  QuadratureConfig outer = cfg;
  outer.abs_tol = cfg.abs_tol / scale;
  const auto r = integrate_algebraic(integrand, lo, hi, left, right, outer, what);
  return {scale * r.value, scale * r.error};
}

}  // namespace detail

/// J_n^{(N,H)}(i) = sigma sqrt(N) int_{(i-1)/N}^{i/N} (k_H(n/N,u) - k_H((n-1)/N,u)) du.
/// Evaluated from the kernel definition only.
inline Estimate J_unscaled(const HurstParams& p, std::int64_t N, std::int64_t n, std::int64_t i,
                           const QuadratureConfig& cfg = {}) {
  if (!(1 <= i && i < n && n <= N)) throw DomainError("J_unscaled: need 1 <= i < n <= N");
  cfg.validate();
  const double Nd = static_cast<double>(N);
  const double t1 = static_cast<double>(n) / Nd;
  const double t0 = static_cast<double>(n - 1) / Nd;
  const auto inner = detail::inner_config(cfg);
  double worst_inner = 0.0;
  auto k = [&](double t, double s) {
    const auto r = detail::shifted_power_integral(p.alpha, 0.0, t - s, s, inner);
    worst_inner = std::max(worst_inner, r.error);
    return p.C_H * std::pow(s, -p.alpha) * r.value;
  };
  auto f = [&](double u) {
    const double upper = k(t1, u);
    const double lower = u < t0 ? k(t0, u) : 0.0;
    return upper - lower;
  };
  const double lo = static_cast<double>(i - 1) / Nd;
  const double hi = static_cast<double>(i) / Nd;
  const EndpointExponent left = i == 1 ? EndpointExponent{-p.alpha} : EndpointExponent::smooth();
  const EndpointExponent right = i == n - 1 ? EndpointExponent{p.alpha} : EndpointExponent::smooth();
  auto r = detail::unscaled_integral(p, Nd, lo, hi, left, right, f, cfg, "J_unscaled");
  r.error += p.sigma * std::sqrt(Nd) * 2.0 * p.C_H * worst_inner * detail::weight_mass(p.alpha, lo, hi);
  return r;
}

/// g_n^{(N,H)} = sigma sqrt(N) int_{(n-1)/N}^{n/N} k_H(n/N, u) du.
inline Estimate g_unscaled(const HurstParams& p, std::int64_t N, std::int64_t n, const QuadratureConfig& cfg = {}) {
  if (!(1 <= n && n <= N)) throw DomainError("g_unscaled: need 1 <= n <= N");
  cfg.validate();
  const double Nd = static_cast<double>(N);
  const double t1 = static_cast<double>(n) / Nd;
  const auto inner = detail::inner_config(cfg);
  double worst_inner = 0.0;
  auto f = [&](double u) {
    const auto r = detail::shifted_power_integral(p.alpha, 0.0, t1 - u, u, inner);
    worst_inner = std::max(worst_inner, r.error);
    return p.C_H * std::pow(u, -p.alpha) * r.value;
  };
  const double lo = static_cast<double>(n - 1) / Nd;
  const EndpointExponent left = n == 1 ? EndpointExponent{-p.alpha} : EndpointExponent::smooth();
  auto r = detail::unscaled_integral(p, Nd, lo, t1, left, EndpointExponent{p.alpha}, f, cfg, "g_unscaled");
  r.error += p.sigma * std::sqrt(Nd) * p.C_H * worst_inner * detail::weight_mass(p.alpha, lo, t1);
  return r;
}

/// phi_n(x) = (n-x)^alpha - (n-1-x)^alpha, written to avoid cancellation for large n.
inline double phi(double alpha, double n, double x) {
  const double gap = n - x;
  return -std::pow(gap, alpha) * std::expm1(alpha * std::log1p(-1.0 / gap));
}

/// I_n(i) = int_{i-1}^{i} x^{-alpha} phi_n(x) dx, the bracket integral for j_n(i).
inline Estimate bracket_integral(double H, std::int64_t n, std::int64_t i, const QuadratureConfig& cfg = {}) {
  detail::check_H(H);
  if (n < 2 || i < 1 || i > n - 1) throw DomainError("bracket_integral: need 1 <= i <= n-1");
  const double alpha = H - 0.5;
  const double nd = static_cast<double>(n);
  auto f = [&](double x) { return std::pow(x, -alpha) * phi(alpha, nd, x); };
  const EndpointExponent left = i == 1 ? EndpointExponent{-alpha} : EndpointExponent::smooth();
  const EndpointExponent right = i == n - 1 ? EndpointExponent{alpha} : EndpointExponent::smooth();
  const auto r = integrate_algebraic(f, static_cast<double>(i - 1), static_cast<double>(i), left, right,
                                     detail::inner_config(cfg), "bracket_integral");
  return {r.value, r.error};
}

/// Minimiser x_n of x^{-alpha} phi_n(x) on (0, n-1) and the split index
/// i_n = floor(x_n) + 1 clamped into [1, n-1].
struct TurningPoint {
  double x_n = 0.0;
  std::int64_t i_n = 1;
};

inline TurningPoint turning_point(double H, std::int64_t n) {
  detail::check_H(H);
  if (n < 2) throw DomainError("turning_point: need n >= 2");
  const double m = static_cast<double>(n - 1);
  const double power = 2.0 / (3.0 - 2.0 * H);
  // (1 + 1/(n-1))^power - 1 without cancellation
  const double grow = std::expm1(power * std::log1p(1.0 / m));
  TurningPoint tp;
  tp.x_n = m - 1.0 / grow;
  tp.i_n = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(tp.x_n)) + 1, 1, n - 1);
  return tp;
}

/// Per-level coefficient row: j_n(1..n-1), g_n and the split data.
struct CoefficientTable {
  double H = 0.0;
  double sigma = 1.0;
  std::int64_t n = 1;
  std::vector<double> j;       // j[i-1] = j_n(i)
  std::vector<double> j_err;
  double g = 0.0;
  double g_err = 0.0;
  std::int64_t split_index = 1;
  double turning_point = 0.0;

  double j_at(std::int64_t i) const { return j.at(static_cast<std::size_t>(i - 1)); }
  /// Sum of all j errors: bounds the error of any +-1 combination of the row.
  double total_j_error() const {
    double s = 0.0;
    for (double e : j_err) s += e;
    return s;
  }
};

inline CoefficientTable build_table(const HurstParams& p, std::int64_t n, const QuadratureConfig& cfg = {},
                                    CoefficientRoute route = CoefficientRoute::nested) {
  if (n < 1) throw DomainError("build_table: need n >= 1");
  CoefficientTable t;
  t.H = p.H;
  t.sigma = p.sigma;
  t.n = n;
  t.j.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n - 1, 0)));
  for (std::int64_t i = 1; i < n; ++i) {
    const auto e = j_coeff(p, n, i, cfg, route);
    t.j.push_back(e.value);
    t.j_err.push_back(e.error);
  }
  const auto g = g_coeff(p, n, cfg, route);
  t.g = g.value;
  t.g_err = g.error;
  if (n >= 2) {
    const auto tp = turning_point(p.H, n);
    t.split_index = tp.i_n;
    t.turning_point = tp.x_n;
  }
  return t;
}

/// Memoised tables keyed by (H, sigma, n, quadrature digest). Safe for concurrent
/// get-or-build; a duplicate build of the same key keeps the first inserted table,
/// which is bitwise identical to any other build of that key.
class CoefficientCache {
 public:
  explicit CoefficientCache(QuadratureConfig cfg = {}) : cfg_(cfg) {}

  std::shared_ptr<const CoefficientTable> get(const HurstParams& p, std::int64_t n) {
    const Key key{std::bit_cast<std::uint64_t>(p.H), std::bit_cast<std::uint64_t>(p.sigma), n, cfg_.digest()};
    {
      std::lock_guard lock(mu_);
      if (auto it = tables_.find(key); it != tables_.end()) return it->second;
    }
    auto built = std::make_shared<const CoefficientTable>(build_table(p, n, cfg_));
    std::lock_guard lock(mu_);
    auto [it, inserted] = tables_.emplace(key, std::move(built));
    return it->second;
  }

  const QuadratureConfig& config() const { return cfg_; }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return tables_.size();
  }

  /// Tables in key order; used for content hashing in reports.
  std::vector<std::shared_ptr<const CoefficientTable>> snapshot() const {
    std::lock_guard lock(mu_);
    std::vector<std::shared_ptr<const CoefficientTable>> out;
    out.reserve(tables_.size());
    for (const auto& [k, v] : tables_) out.push_back(v);
    return out;
  }

 private:
  using Key = std::tuple<std::uint64_t, std::uint64_t, std::int64_t, std::uint64_t>;
  QuadratureConfig cfg_;
  mutable std::mutex mu_;
  std::map<Key, std::shared_ptr<const CoefficientTable>> tables_;
};

}  // namespace fbarb
