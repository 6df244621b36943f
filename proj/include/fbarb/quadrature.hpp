#pragma once

// Globally adaptive 21-point Gauss-Kronrod integration (QUADPACK qag strategy)
// plus a power substitution that absorbs algebraic endpoint behaviour
// (x-a)^lambda before the adaptive rule sees it.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "fbarb/errors.hpp"

namespace fbarb {

struct QuadratureConfig {
  double abs_tol = 1e-10;
  double rel_tol = 1e-9;
  int max_subdivisions = 2000;

  /// Stable 64-bit digest used as part of cache keys.
  std::uint64_t digest() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xffU;
        h *= 1099511628211ULL;
      }
    };
    mix(std::bit_cast<std::uint64_t>(abs_tol));
    mix(std::bit_cast<std::uint64_t>(rel_tol));
    mix(static_cast<std::uint64_t>(max_subdivisions));
    return h;
  }

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_subdivisions < 1) {
      throw DomainError("QuadratureConfig: tolerances must be positive and max_subdivisions >= 1");
    }
  }
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;     // estimated absolute error
  int subdivisions = 0;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

// QUADPACK qk21 abscissae and weights on [-1, 1].
inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gauss_kronrod21(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kWgk[10];
  double gauss = 0.0;
  double abs_sum = std::abs(kronrod);
  for (int j = 0; j < 10; ++j) {
    const double dx = half * kXgk[static_cast<std::size_t>(j)];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    kronrod += kWgk[static_cast<std::size_t>(j)] * (f1 + f2);
    abs_sum += kWgk[static_cast<std::size_t>(j)] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) gauss += kWg[static_cast<std::size_t>(j / 2)] * (f1 + f2);
  }
  const double value = kronrod * half;
  // |K21 - G10| without QUADPACK's optimistic rescaling, floored at rounding level.
  const double err = std::max(std::abs((kronrod - gauss) * half),
                              50.0 * std::numeric_limits<double>::epsilon() * abs_sum * std::abs(half));
  return {a, b, value, err};
}

}  // namespace detail

/// Adaptive integral of f over [a, b]. Never throws; check `converged`.
template <class F>
QuadResult try_integrate(F&& f, double a, double b, const QuadratureConfig& cfg) {
  QuadResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  std::priority_queue<detail::Segment> heap;
  auto first = detail::gauss_kronrod21(f, a, b);
  double total = first.value;
  double total_err = first.error;
  heap.push(first);
  out.evaluations = 21;
  auto done = [&] { return total_err <= std::max(cfg.abs_tol, cfg.rel_tol * std::abs(total)); };
  while (!done() && out.subdivisions < cfg.max_subdivisions) {
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {  // interval exhausted at machine precision
      heap.push(worst);
      break;
    }
    const auto left = detail::gauss_kronrod21(f, worst.a, mid);
    const auto right = detail::gauss_kronrod21(f, mid, worst.b);
    out.evaluations += 42;
    ++out.subdivisions;
    heap.push(left);
    heap.push(right);
    // Recompute sums from scratch now and then so long runs do not drift.
    if (out.subdivisions % 64 == 0) {
      auto copy = heap;
      total = 0.0;
      total_err = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        total_err += copy.top().error;
        copy.pop();
      }
    } else {
      total += left.value + right.value - worst.value;
      total_err += left.error + right.error - worst.error;
    }
  }
  // Final sum in a fixed (sorted-by-position) order keeps results reproducible.
  std::vector<detail::Segment> segs;
  segs.reserve(heap.size());
  while (!heap.empty()) {
    segs.push_back(heap.top());
    heap.pop();
  }
  std::sort(segs.begin(), segs.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
  out.value = 0.0;
  out.error = 0.0;
  for (const auto& s : segs) {
    out.value += s.value;
    out.error += s.error;
  }
  out.converged = out.error <= std::max(cfg.abs_tol, cfg.rel_tol * std::abs(out.value));
  return out;
}

/// Adaptive integral; throws NonConvergence carrying the best estimate.
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadratureConfig& cfg, const char* what = "integrate") {
  auto r = try_integrate(std::forward<F>(f), a, b, cfg);
  if (!r.converged) {
    throw NonConvergence(std::string(what) + ": quadrature did not reach tolerance (error " +
                             std::to_string(r.error) + ")",
                         r.value, r.error);
  }
  return r;
}

/// Exponent of the leading algebraic term at an endpoint: f(x) ~ |x - c|^lambda.
/// Nonnegative integers (and `smooth`) mean no treatment is needed.
struct EndpointExponent {
  double lambda = 0.0;
  static constexpr EndpointExponent smooth() { return {0.0}; }
  bool is_smooth() const { return lambda >= 0.0 && std::floor(lambda) == lambda; }
};

namespace detail {

// Substitution power q for x - c = (half-width) t^q: q (lambda + 1) is the smallest
// integer r with q >= 3, so the Jacobian cancels the singular factor into t^{r-1}.
inline double substitution_power(EndpointExponent e) {
  const double lp1 = e.lambda + 1.0;
  const double r = std::ceil(3.0 * lp1 - 1e-12);
  return r / lp1;
}

}  // namespace detail

/// Integral of f over [a, b] where f carries algebraic endpoint behaviour with the
/// given exponents. Singular halves are mapped through x = a + (m-a) t^q (or the
/// mirror image at b) so the adaptive rule integrates a smooth function.
/// f receives x, not the distance to the endpoint, so a negative exponent at b
/// overflows once b - x rounds to zero; callers only use lambda > 0 there.
template <class F>
QuadResult integrate_algebraic(F&& f, double a, double b, EndpointExponent left, EndpointExponent right,
                               const QuadratureConfig& cfg, const char* what = "integrate") {
  if (!(b > a)) {
    if (a == b) return QuadResult{0.0, 0.0, 0, 0, true};
    throw DomainError(std::string(what) + ": empty or reversed interval");
  }
  const bool ls = !left.is_smooth();
  const bool rs = !right.is_smooth();
  if (!ls && !rs) return integrate(f, a, b, cfg, what);

  const double mid = ls && rs ? 0.5 * (a + b) : (ls ? b : a);
  QuadResult total{0.0, 0.0, 0, 0, true};
  auto accumulate = [&total](const QuadResult& r) {
    total.value += r.value;
    total.error += r.error;
    total.subdivisions += r.subdivisions;
    total.evaluations += r.evaluations;
  };
  // Each piece gets half the absolute budget; relative budget is shared.
  QuadratureConfig piece = cfg;
  piece.abs_tol = 0.5 * cfg.abs_tol;

  if (ls) {
    const double q = detail::substitution_power(left);
    const double w = mid - a;
    auto g = [&](double t) {
      const double tq1 = std::pow(t, q - 1.0);
      return f(a + w * tq1 * t) * w * q * tq1;
    };
    accumulate(integrate(g, 0.0, 1.0, piece, what));
  }
  if (rs) {
    const double q = detail::substitution_power(right);
    const double w = b - mid;
    auto g = [&](double t) {
      const double tq1 = std::pow(t, q - 1.0);
      return f(b - w * tq1 * t) * w * q * tq1;
    };
    accumulate(integrate(g, 0.0, 1.0, piece, what));
  }
  return total;
}

}  // namespace fbarb
