// Acceptance run: one PASS/FAIL line per criterion with the measured values.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fbarb/asymptotics.hpp"
#include "fbarb/coefficients.hpp"
#include "fbarb/hurst.hpp"
#include "fbarb/market.hpp"
#include "fbarb/report.hpp"
#include "golden_values.hpp"

namespace fb = fbarb;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fb::McConfig mc(std::uint64_t samples, std::uint64_t seed, int threads = 1) {
  fb::McConfig c;
  c.samples = samples;
  c.seed = seed;
  c.threads = threads;
  return c;
}

// 1. N^H J_unscaled = j_coeff over random tuples.
Outcome scaling_law() {
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> uh(0.51, 0.99);
  double worst = 0.0, worst_excess = -1.0;
  const int tuples = 120;
  for (int k = 0; k < tuples; ++k) {
    const double H = uh(gen);
    const std::int64_t N = 2 + static_cast<std::int64_t>(gen() % 127);
    const std::int64_t n = 2 + static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(N - 1));
    const std::int64_t i = 1 + static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(n - 1));
    const auto p = fb::HurstParams::make(H, 0.5 + static_cast<double>(gen() % 100) / 50.0);
    const auto J = fb::J_unscaled(p, N, n, i);
    const auto j = fb::j_coeff(p, n, i);
    const double scale = std::pow(static_cast<double>(N), H);
    const double diff = std::abs(scale * J.value - j.value);
    worst = std::max(worst, diff);
    worst_excess = std::max(worst_excess, diff - (1e-8 + scale * J.error + j.error));
  }
  return {worst_excess <= 0.0, fmt("max |N^H J - j| = %.3g over %d tuples (allowed 1e-8 + quadrature error)", worst, tuples)};
}

// 2. Coefficient brackets for all tables n <= 200.
Outcome brackets() {
  std::uint64_t violations = 0, checks = 0;
  double worst = INFINITY;
  for (double H : {0.6, 0.75, 0.9}) {
    const auto p = fb::HurstParams::make(H);
    for (std::int64_t n = 2; n <= 200; ++n) {
      const auto t = fb::build_table(p, n);
      const double nd = static_cast<double>(n);
      for (std::int64_t i = 1; i < n; ++i) {
        const auto I = fb::bracket_integral(H, n, i);
        const double j = t.j_at(i);
        const double err = t.j_err[static_cast<std::size_t>(i - 1)] + p.c_H * std::pow(nd, p.alpha) * I.error;
        const double lo = p.c_H * std::pow(nd - 1.0, p.alpha) * I.value;
        const double hi = p.c_H * std::pow(nd, p.alpha) * I.value;
        const double slack = std::min(j + err - lo, hi + err - j) / j;
        worst = std::min(worst, slack);
        violations += slack < 0.0;
        ++checks;
      }
      const double gs = std::min(t.g + t.g_err - p.g_H, p.g_H * std::pow(1.0 + 1.0 / (nd - 1.0), p.alpha) - (t.g - t.g_err));
      worst = std::min(worst, gs / p.g_H);
      violations += gs < 0.0;
      ++checks;
    }
  }
  return {violations == 0, fmt("%" PRIu64 " violations in %" PRIu64 " bracket checks, worst relative slack %.3g", violations,
                               checks, worst)};
}

// 3. j_n(n-1) -> g_H (2^{H+1/2} - 2).
Outcome last_coefficient() {
  double worst = 0.0;
  for (double H : {0.6, 0.75, 0.9}) {
    const auto p = fb::HurstParams::make(H);
    const double target = p.g_H * (std::pow(2.0, H + 0.5) - 2.0);
    const auto j = fb::j_coeff(p, 10000, 9999);
    worst = std::max(worst, std::abs(j.value - target) / target);
  }
  return {worst <= 1e-2, fmt("max relative gap at n = 1e4: %.3g (limit 1e-2)", worst)};
}

// 4. Turning point ratio and discrete monotonicity of I_n.
Outcome turning_point() {
  double worst = 0.0;
  for (double H : {0.6, 0.75, 0.9}) {
    const auto tp = fb::turning_point(H, 100000);
    worst = std::max(worst, std::abs(tp.x_n / 99999.0 - (H - 0.5)));
  }
  std::uint64_t violations = 0, checks = 0;
  for (double H : {0.6, 0.75, 0.9}) {
    for (std::int64_t n = 3; n <= 40; ++n) {
      const auto tp = fb::turning_point(H, n);
      std::vector<fb::Estimate> I;
      for (std::int64_t i = 1; i < n; ++i) I.push_back(fb::bracket_integral(H, n, i));
      auto at = [&](std::int64_t i) { return I[static_cast<std::size_t>(i - 1)]; };
      for (std::int64_t i = 1; i + 1 <= tp.i_n - 1; ++i, ++checks) {
        violations += !(at(i).value - at(i).error > at(i + 1).value + at(i + 1).error);
      }
      for (std::int64_t i = tp.i_n + 1; i + 1 <= n - 1; ++i, ++checks) {
        violations += !(at(i).value + at(i).error < at(i + 1).value - at(i + 1).error);
      }
    }
  }
  return {worst <= 1e-3 && violations == 0,
          fmt("max |x_n/(n-1) - (H-1/2)| = %.3g at n = 1e5 (limit 1e-3); I_n monotonicity: %" PRIu64
              " violations in %" PRIu64 " comparisons, n <= 40",
              worst, violations, checks)};
}

// 5. Census: Gray code = naive, symmetry, N = 24 runtime.
Outcome census() {
  std::uint64_t mismatches = 0, asym = 0;
  for (double H : {0.6, 0.75, 0.9}) {
    const auto p = fb::HurstParams::make(H);
    fb::CoefficientCache cache;
    for (std::int64_t n = 1; n <= 20; ++n) {
      const auto t = cache.get(p, n);
      fb::LevelFlags flags;
      const auto g = fb::level_census(*t, 0.0, 1, &flags);
      const auto v = fb::level_census_naive(*t, 0.0);
      mismatches += g.count != v.count || g.uncertain != v.uncertain;
      const std::uint64_t mask = (std::uint64_t{1} << (n - 1)) - 1;
      for (std::uint64_t w = 0; w <= mask; ++w) asym += flags.test(w) != flags.test(~w & mask);
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  fb::CoefficientCache cache;
  const auto c = fb::census(fb::MarketSpec::make(24, 0.75), cache);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mismatches == 0 && asym == 0 && secs <= 60.0,
          fmt("Gray/naive mismatches %" PRIu64 ", sign-flip asymmetries %" PRIu64
              " (n <= 20, 3 H values); N = 24 census %.2f s single-threaded (limit 60 s), path proportion %.6g",
              mismatches, asym, secs, c.path_proportion())};
}

// 6. Monotone reach totality, first level at H = 0.9, path lower bound.
Outcome existence() {
  std::uint64_t missing = 0, prefixes = 0;
  std::int64_t longest = 0;
  for (double H : {0.6, 0.75, 0.9}) {
    fb::ReachContext ctx(fb::HurstParams::make(H), fb::DriftSpec::zero(), 8);
    for (std::int64_t L = 0; L <= 8; ++L) {
      for (std::uint64_t w = 0; w < (std::uint64_t{1} << L); ++w) {
        for (int d : {1, -1}) {
          const auto r = fb::monotone_reach(ctx, w, L, d, 10000);
          ++prefixes;
          if (r) longest = std::max(longest, *r);
          else ++missing;
        }
      }
    }
  }
  const auto p = fb::HurstParams::make(0.9);
  fb::CoefficientCache cache;
  std::int64_t first = 0;
  for (std::int64_t n = 1; n <= 30 && first == 0; ++n) {
    if (fb::level_census(*cache.get(p, n), 0.0).count > 0) first = n;
  }
  const auto c = fb::census(fb::MarketSpec::make(24, 0.9), cache);
  const double floor = std::ldexp(0.9, 2 - static_cast<int>(first));
  return {missing == 0 && first == golden::first_level_090 && c.path_proportion() >= floor,
          fmt("%" PRIu64 " of %" PRIu64 " (prefix, direction) pairs without arbitrage within 1e4 (longest %" PRId64
              "); first level at H = 0.9: %" PRId64 " (golden %" PRId64 "); N = 24 path proportion %.6g >= %.6g",
              missing, prefixes, longest, first, golden::first_level_090, c.path_proportion(), floor)};
}

// 7. Variance of the split walk.
Outcome variance_limit() {
  const auto p = fb::HurstParams::make(0.7);
  const auto big = fb::split_variances(fb::build_table(p, 10000));
  const auto small = fb::split_variances(fb::build_table(p, 100));
  const double lim = fb::limit_variance(p);
  const double rel = std::abs(big.var_hat - lim) / lim;
  return {rel <= 0.02 && big.var_bar < small.var_bar,
          fmt("|var_hat(1e4) - 4 g^2 sum rho^2| / limit = %.4g (limit 0.02); var_bar(1e4) = %.4g < var_bar(1e2) = %.4g", rel,
              big.var_bar, small.var_bar)};
}

// 8. Limit proportion across H.
Outcome limit_proportion(std::vector<double>* p_at_08) {
  std::vector<double> Hs{0.55, 0.65, 0.75, 0.85, 0.95};
  std::vector<fb::McEstimate> est;
  for (double H : Hs) est.push_back(fb::limit_proportion(fb::HurstParams::make(H), mc(1'000'000, 2024)));
  const auto lo = fb::regime_bound(fb::HurstParams::make(0.55));
  const auto hi = fb::regime_bound(fb::HurstParams::make(0.95));
  const bool ceiling = est[0].p_hat <= lo.tchebysheff_ceiling + 3 * est[0].stderr_ && est[0].p_hat <= 0.2;
  const bool floor = est[4].p_hat >= hi.paley_zygmund_floor - 3 * est[4].stderr_ && est[4].ci_low > 0.0;
  bool monotone = true;
  for (std::size_t k = 1; k < est.size(); ++k) {
    monotone = monotone && est[k].p_hat >= est[k - 1].p_hat - 3 * std::hypot(est[k].stderr_, est[k - 1].stderr_);
  }
  p_at_08->push_back(fb::limit_proportion(fb::HurstParams::make(0.8), mc(1'000'000, 2024)).p_hat);
  std::string ps;
  for (std::size_t k = 0; k < est.size(); ++k) ps += fmt("%s%.5g", k ? ", " : "", est[k].p_hat);
  return {ceiling && floor && monotone,
          fmt("p_hat(H = 0.55..0.95) = [%s]; H=0.55 ceiling %.4g; H=0.95 floor %.4g, ci_low %.4g; monotone %s",
              ps.c_str(), lo.tchebysheff_ceiling, hi.paley_zygmund_floor, est[4].ci_low, monotone ? "yes" : "no")};
}

// 9. Exact finite level against the limit at H = 0.8.
Outcome finite_vs_limit(double limit) {
  const auto t = fb::build_table(fb::HurstParams::make(0.8), 20);
  const auto e = fb::finite_level_proportion(t, 0.0, mc(1, 0), fb::LevelMode::exact);
  return {e.exact && std::abs(e.p_hat - limit) <= 0.05,
          fmt("exact P(n = 20) = %.6g, limit p_hat = %.6g, gap %.4g (limit 0.05)", e.p_hat, limit, std::abs(e.p_hat - limit))};
}

// 10. Critical exponent.
Outcome critical() {
  const auto c = fb::solve_critical_hurst(1e-8);
  const double tail = fb::rho_sq_tail_bound(c.h_c, 1 << 20);
  const bool six = std::llround(c.h_c * 1e6) == std::llround(golden::h_c * 1e6);
  const bool ok = c.h_c > 0.5 && c.h_c < 0.75 && c.residual <= 1e-8 + tail && c.H_c > 0.5 && c.H_c < 1.0 &&
                  c.H_c == 2 * c.h_c - 0.5 && six;
  return {ok, fmt("h_c = %.10f (golden %.6f), H_c = %.10f, residual %.3g", c.h_c, golden::h_c, c.H_c, c.residual)};
}

// 11. Characteristic function.
Outcome charfn() {
  const auto p = fb::HurstParams::make(0.75);
  bool identities = fb::characteristic_function(p, 0.0).value == 1.0;
  for (double v : {0.1, 0.7, 2.0, 5.5, 13.0}) {
    identities = identities && fb::characteristic_function(p, v).value == fb::characteristic_function(p, -v).value;
  }
  std::vector<double> vs;
  for (int k = 1; k <= 20; ++k) vs.push_back(0.2 * k);
  const std::uint64_t n = 1'000'000;
  const auto emp = fb::empirical_characteristic_function(p, mc(n, 77), vs);
  double worst = 0.0;
  for (std::size_t k = 0; k < vs.size(); ++k) worst = std::max(worst, std::abs(emp[k] - fb::characteristic_function(p, vs[k]).value));
  const double tol = 4.0 / std::sqrt(static_cast<double>(n));
  const auto fit = fb::fit_decay(p);
  const double rel = std::abs(fit.exponent - fit.expected_exponent) / fit.expected_exponent;
  return {identities && worst <= tol && rel <= 0.15,
          fmt("F(0) = 1 and evenness %s; max |empirical - F| = %.3g at 20 points (limit %.3g); decay exponent %.4f vs %.4f "
              "(%.1f%%, limit 15%%)",
              identities ? "exact" : "FAILED", worst, tol, fit.exponent, fit.expected_exponent, 100 * rel)};
}

// 12. Monte Carlo outputs are byte-identical across runs and thread counts.
Outcome determinism() {
  auto run = [](int threads) {
    std::string out;
    const auto p = fb::HurstParams::make(0.8);
    out += fb::to_json(fb::limit_proportion(p, mc(300'000, 5, threads))).dump();
    out += fb::to_json(fb::finite_level_proportion(fb::build_table(p, 30), 0.05, mc(200'000, 5, threads))).dump();
    fb::CoefficientCache cache;
    for (const auto& e : fb::exceedance_frequency(p, {22, 64}, mc(100'000, 6, threads), cache)) out += fb::to_json(e).dump();
    for (double v : fb::empirical_characteristic_function(p, mc(100'000, 7, threads), {0.5, 1.5})) out += fb::format_double(v);
    const auto m = fb::limit_moments(p, mc(100'000, 8, threads));
    out += fb::format_double(m.mean) + fb::format_double(m.variance);
    return out;
  };
  const auto a = run(1);
  const auto b = run(1);
  const auto c = run(8);
  return {a == b && a == c, fmt("two single-thread runs %s; --threads 1 vs 8 %s (%zu bytes compared)",
                                a == b ? "identical" : "DIFFER", a == c ? "identical" : "DIFFER", a.size())};
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  std::vector<double> limit08;
  struct Criterion {
    const char* name;
    double max_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"scaling law", 120.0, scaling_law},
      {"coefficient brackets", 60.0, brackets},
      {"last-coefficient limit", 0.0, last_coefficient},
      {"turning point", 0.0, turning_point},
      {"census correctness", 0.0, census},
      {"arbitrage existence", 0.0, existence},
      {"variance limit", 0.0, variance_limit},
      {"limit proportion", 180.0, [&] { return limit_proportion(&limit08); }},
      {"finite-n vs limit", 0.0, [&] { return finite_vs_limit(limit08.at(0)); }},
      {"critical parameter", 0.0, critical},
      {"characteristic function", 0.0, charfn},
      {"determinism", 0.0, determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto& c = criteria[k];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.max_seconds > 0.0 && secs > c.max_seconds) {
      o.pass = false;
      o.detail += fmt("; runtime %.1f s exceeds %.0f s", secs, c.max_seconds);
    }
    failed += !o.pass;
    std::printf("%s AC%zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", k + 1, c.name, o.detail.c_str(), secs);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed;
}
