#pragma once

// Property suite behind `fbarb verify`: a fast subset of the test suite that
// can run from an installed binary and reports measured values per property.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fbarb/asymptotics.hpp"
#include "fbarb/coefficients.hpp"
#include "fbarb/hurst.hpp"
#include "fbarb/market.hpp"
#include "fbarb/report.hpp"
#include "fbarb/rng.hpp"

namespace fbarb {

/// Stored reference values, computed once with independent extended-precision oracles.
namespace golden {
inline constexpr double j_075_5_2 = 0.15646983056012062374;  // j_5(2), H = 0.75, sigma = 1
inline constexpr double g_075_5 = 0.86106918882164826326;    // g_5, H = 0.75
inline constexpr double h_c = 0.676570;                      // 6 digits
inline constexpr double H_c = 0.853140;                      // 6 digits
}  // namespace golden

struct PropertyResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct VerifyOptions {
  /// Relative perturbation applied to the stored golden coefficient (sensitivity smoke test).
  double perturb = 0.0;
  int threads = 1;
  std::uint64_t seed = 0;
  QuadratureConfig quad{};
};

namespace detail {

/// Coefficient bracket check for one table; returns the worst signed slack (negative = violation).
inline double bracket_slack(const HurstParams& p, const CoefficientTable& t, const QuadratureConfig& cfg) {
  double worst = std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(t.n);
  for (std::int64_t i = 1; i < t.n; ++i) {
    const auto I = bracket_integral(p.H, t.n, i, cfg);
    const double j = t.j_at(i);
    const double err = t.j_err[static_cast<std::size_t>(i - 1)] + p.sigma * p.c_H * std::pow(n, p.alpha) * I.error;
    const double lo = p.sigma * p.c_H * std::pow(n - 1.0, p.alpha) * I.value;
    const double hi = p.sigma * p.c_H * std::pow(n, p.alpha) * I.value;
    worst = std::min({worst, (j + err - lo) / j, (hi + err - j) / j});
  }
  worst = std::min(worst, (t.g + t.g_err - p.g_H) / p.g_H);
  if (t.n > 1) {
    const double cap = p.g_H * std::pow(1.0 + 1.0 / (n - 1.0), p.alpha);
    worst = std::min(worst, (cap - (t.g - t.g_err)) / p.g_H);
  }
  return worst;
}

}  // namespace detail

inline std::vector<PropertyResult> run_verify(const VerifyOptions& opt = {}) {
  std::vector<PropertyResult> out;
  auto add = [&out](std::string name, bool pass, double measured, double threshold, std::string detail = {}) {
    out.push_back({std::move(name), pass, measured, threshold, std::move(detail)});
  };

  {  // Scaling law on pseudo-random tuples.
    const auto key = Philox4x32::key_from_seed(opt.seed);
    double worst = 0.0;
    bool ok = true;
    for (std::uint64_t s = 0; s < 24; ++s) {
      const auto r = Philox4x32::block(Philox4x32::counter(0, s, 7), key);
      const double H = 0.51 + 0.48 * (r[0] / 4294967296.0);
      const std::int64_t N = 2 + r[1] % 127;
      const std::int64_t n = 2 + static_cast<std::int64_t>(r[2] % static_cast<std::uint32_t>(N - 1));
      const std::int64_t i = 1 + static_cast<std::int64_t>(r[3] % static_cast<std::uint32_t>(n - 1));
      const auto p = HurstParams::make(H);
      const auto J = J_unscaled(p, N, n, i, opt.quad);
      const auto j = j_coeff(p, n, i, opt.quad);
      const double scale = std::pow(static_cast<double>(N), H);
      const double diff = std::abs(scale * J.value - j.value);
      const double allowed = 1e-8 + scale * J.error + j.error;
      worst = std::max(worst, diff);
      ok = ok && diff <= allowed;
    }
    add("scaling_law", ok, worst, 1e-8, "max |N^H J - j| over 24 tuples");
  }

  {  // Coefficient brackets for every table up to n = 100.
    double worst = std::numeric_limits<double>::infinity();
    for (double H : {0.6, 0.75, 0.9}) {
      const auto p = HurstParams::make(H);
      CoefficientCache cache(opt.quad);
      for (std::int64_t n = 2; n <= 100; ++n) worst = std::min(worst, detail::bracket_slack(p, *cache.get(p, n), opt.quad));
    }
    add("coefficient_brackets", worst >= 0.0, worst, 0.0, "worst relative slack, n <= 100, H in {0.6, 0.75, 0.9}");
  }

  {  // Stored golden coefficient against a fresh computation.
    const auto p = HurstParams::make(0.75);
    const auto j = j_coeff(p, 5, 2, opt.quad);
    const double stored = golden::j_075_5_2 * (1.0 + opt.perturb);
    const double diff = std::abs(j.value - stored);
    add("golden_coefficient", diff <= 1e-9 + j.error, diff, 1e-9, "j_5(2) at H = 0.75 vs stored reference");
  }

  {  // Census: Gray code vs naive, parity and sign-flip symmetry.
    const auto spec = MarketSpec::make(16, 0.75);
    CoefficientCache cache(opt.quad);
    bool ok = true;
    for (std::int64_t n = 1; n <= 16; ++n) {
      const auto t = cache.get(spec.params, n);
      LevelFlags flags;
      const auto gray = level_census(*t, 0.0, opt.threads, &flags);
      const auto naive = level_census_naive(*t, 0.0);
      ok = ok && gray.count == naive.count && gray.count % 2 == 0;
      const std::uint64_t words = std::uint64_t{1} << (n - 1);
      for (std::uint64_t w = 0; w < words; ++w) ok = ok && flags.test(w) == flags.test(~w & (words - 1));
    }
    add("census_consistency", ok, ok ? 1.0 : 0.0, 1.0, "Gray code = naive, even counts, sign-flip symmetry (H=0.75, N=16)");
  }

  {  // Variance limit of the split walk.
    const auto p = HurstParams::make(0.7);
    const auto big = split_variances(build_table(p, 10000, opt.quad));
    const auto small = split_variances(build_table(p, 100, opt.quad));
    const double lim = limit_variance(p);
    const double rel = std::abs(big.var_hat - lim) / lim;
    add("variance_limit", rel <= 0.02 && big.var_bar < small.var_bar, rel, 0.02,
        "|var_hat(1e4) - 4 g^2 sum rho^2| / limit at H = 0.7, and var_bar(1e4) < var_bar(1e2)");
  }

  McConfig mc;
  mc.samples = 200'000;
  mc.seed = opt.seed;
  mc.threads = opt.threads;
  {  // Tchebysheff ceiling and Paley-Zygmund floor of the limit proportion.
    const auto lo = HurstParams::make(0.55);
    const auto elo = limit_proportion(lo, mc);
    const auto rlo = regime_bound(lo);
    add("tchebysheff_ceiling_H055", elo.p_hat <= rlo.tchebysheff_ceiling + 3.0 * elo.stderr_, elo.p_hat,
        rlo.tchebysheff_ceiling, "p_hat <= 4 sum rho^2 + 3 stderr");
    const auto hi = HurstParams::make(0.95);
    const auto ehi = limit_proportion(hi, mc);
    const auto rhi = regime_bound(hi);
    add("paley_zygmund_floor_H095", ehi.p_hat >= rhi.paley_zygmund_floor - 3.0 * ehi.stderr_ && ehi.ci_low > 0.0,
        ehi.p_hat, rhi.paley_zygmund_floor, "p_hat >= (1/3)(1 - 1/(4 sum rho^2))^2 - 3 stderr");
  }

  {  // Both regimes of the exceedance thresholds.
    McConfig lvl = mc;
    lvl.samples = 100'000;
    const std::vector<std::int64_t> levels{16, 64, 256};
    for (double H : {0.55, 0.95}) {
      const auto p = HurstParams::make(H);
      const auto rb = regime_bound(p);
      CoefficientCache cache(opt.quad);
      const auto est = exceedance_frequency(p, levels, lvl, cache);
      bool ok = true;
      double extreme = rb.supercritical ? 1.0 : 0.0;
      for (const auto& e : est) {
        if (rb.supercritical) {
          ok = ok && e.p_hat >= rb.bound - 3.0 * e.stderr_;
          extreme = std::min(extreme, e.p_hat);
        } else {
          ok = ok && e.p_hat <= rb.bound + 3.0 * e.stderr_ && rb.bound + 3.0 * e.stderr_ < 1.0;
          extreme = std::max(extreme, e.p_hat);
        }
      }
      add(H < 0.8 ? "exceedance_subcritical_H055" : "exceedance_supercritical_H095", ok, extreme, rb.bound,
          rb.supercritical ? "min over n of P(|Y_n| > g_n) vs floor" : "max over n of P(|Y_n| > g_n) vs ceiling");
    }
  }

  {  // Critical exponent.
    const auto c = solve_critical_hurst();
    const double diff = std::abs(c.h_c - golden::h_c);
    add("critical_hurst", diff <= 5e-7 && c.h_c > 0.5 && c.h_c < 0.75, c.h_c, golden::h_c, "h_c to 6 digits");
  }

  {  // Characteristic function identities.
    const auto p = HurstParams::make(0.75);
    const bool ok = characteristic_function(p, 0.0).value == 1.0 &&
                    characteristic_function(p, 1.7).value == characteristic_function(p, -1.7).value;
    add("charfn_identities", ok, characteristic_function(p, 1.7).value, 1.0, "F(0) = 1 and F(v) = F(-v)");
  }

  {  // Arbitrage reachable by monotone moves from short prefixes.
    ReachContext ctx(HurstParams::make(0.75), DriftSpec::zero(), 4, opt.quad);
    std::int64_t worst = 0;
    bool ok = true;
    for (std::int64_t L = 0; L <= 4; ++L) {
      for (std::uint64_t w = 0; w < (std::uint64_t{1} << L); ++w) {
        for (int d : {1, -1}) {
          const auto r = monotone_reach(ctx, w, L, d, 10000);
          ok = ok && r.has_value();
          if (r) worst = std::max(worst, *r);
        }
      }
    }
    add("monotone_reach_totality", ok, static_cast<double>(worst), 10000.0, "prefixes of length <= 4 at H = 0.75");
  }
  return out;
}

inline Json to_json(const std::vector<PropertyResult>& results) {
  auto arr = Json::array();
  bool all = true;
  for (const auto& r : results) {
    auto j = Json::object();
    j.set("name", r.name);
    j.set("pass", r.pass);
    j.set("measured", r.measured);
    j.set("threshold", r.threshold);
    j.set("detail", r.detail);
    arr.push(j);
    all = all && r.pass;
  }
  auto doc = Json::object();
  doc.set("properties", arr);
  doc.set("all_pass", all);
  return doc;
}

}  // namespace fbarb
