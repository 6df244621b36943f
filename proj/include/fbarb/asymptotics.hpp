#pragma once

// Limit objects of the arbitrage proportion: the random variable
//   Y_H = 2 g_H sum_k rho_h(k) xi_k,
// Monte Carlo estimates of P(|Y_H| > g_H) and of the finite-level proportions,
// the split variances of the disturbance, and the characteristic function
// F_H(v) = prod_k cos(2 v g_H rho_h(k)).
//
// Sampling: the first K terms of Y_H are drawn exactly from Rademacher signs;
// the remainder sum_{k>K} is replaced by a centred Gaussian of the same
// variance. A pure truncation cannot reach a useful tail standard deviation
// (the tail variance decays only like K^{1-2beta}), so the Gaussian surrogate is
// used and its Kolmogorov distance to the true remainder is bounded by
// Berry-Esseen and reported with every estimate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "fbarb/coefficients.hpp"
#include "fbarb/errors.hpp"
#include "fbarb/hurst.hpp"
#include "fbarb/market.hpp"
#include "fbarb/parallel.hpp"
#include "fbarb/rng.hpp"

namespace fbarb {

inline constexpr std::int64_t kDefaultHeadTerms = 4096;
inline constexpr std::uint64_t kDefaultChunk = 1 << 16;

struct McConfig {
  std::uint64_t samples = 1'000'000;
  std::uint64_t seed = 0;
  double tail_sd_tol = 0.0;  // 0 means 1e-4 g_H
  double confidence = 0.99;
  int threads = 1;
  std::int64_t head_terms = kDefaultHeadTerms;  // exact Rademacher terms, multiple of 128
  std::uint64_t chunk = kDefaultChunk;           // samples per RNG substream block; fixes the reduction order

  void validate() const {
    if (samples == 0) throw DomainError("McConfig: samples must be positive");
    if (!(tail_sd_tol >= 0.0)) throw DomainError("McConfig: tail_sd_tol must be nonnegative");
    if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("McConfig: confidence must lie in (0, 1)");
    if (head_terms < 128 || head_terms % 128 != 0) throw DomainError("McConfig: head_terms must be a positive multiple of 128");
    if (chunk == 0) throw DomainError("McConfig: chunk must be positive");
  }

  double resolved_tail_sd_tol(const HurstParams& p) const { return tail_sd_tol > 0.0 ? tail_sd_tol : 1e-4 * p.g_H; }
};

struct McEstimate {
  double p_hat = 0.0;
  double stderr_ = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double confidence = 0.99;
  std::string interval = "normal";  // normal | wilson | exact
  std::uint64_t samples = 0;
  std::int64_t K = 0;
  std::uint64_t seed = 0;
  std::string generator = Philox4x32::name;
  bool exact = false;
  // Limit estimates only: P(|Y^K| > g + delta), P(|Y^K| > g - delta), delta = 6 tail_sd_tol.
  double bias_low = 0.0;
  double bias_high = 0.0;
  double delta = 0.0;
  double tail_sd = 0.0;          // standard deviation of the Gaussian remainder
  double surrogate_bound = 0.0;  // bound on |P(|Y_H|>g) - P(|Y^K + Z|>g)| from Berry-Esseen
};

/// Interval at the given confidence: normal approximation, or Wilson's score
/// interval when fewer than 30 expected hits.
inline McEstimate proportion_estimate(std::uint64_t hits, std::uint64_t n, double confidence) {
  McEstimate e;
  e.samples = n;
  e.confidence = confidence;
  const double nd = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nd;
  const double z = std::sqrt(2.0) * boost::math::erf_inv(confidence);
  e.p_hat = p;
  e.stderr_ = std::sqrt(p * (1.0 - p) / nd);
  if (p * nd < 30.0) {
    const double z2n = z * z / nd;
    const double center = (p + 0.5 * z2n) / (1.0 + z2n);
    const double half = z * std::sqrt(p * (1.0 - p) / nd + 0.25 * z2n / nd) / (1.0 + z2n);
    e.interval = "wilson";
    e.ci_low = center - half;
    e.ci_high = center + half;
  } else {
    e.ci_low = p - z * e.stderr_;
    e.ci_high = p + z * e.stderr_;
  }
  e.ci_low = std::clamp(std::min(e.ci_low, p), 0.0, 1.0);
  e.ci_high = std::clamp(std::max(e.ci_high, p), 0.0, 1.0);
  return e;
}

/// Draws of Y_H with K exact terms and a Gaussian remainder. Sample i is a pure
/// function of (seed, i).
class LimitSampler {
 public:
  LimitSampler(const HurstParams& p, std::uint64_t seed, std::int64_t head_terms = kDefaultHeadTerms)
      : params_(p), key_(Philox4x32::key_from_seed(seed)), seed_(seed), K_(head_terms) {
    if (head_terms < 128 || head_terms % 128 != 0) throw DomainError("LimitSampler: head_terms must be a multiple of 128");
    const double h = p.H / 2.0 + 0.25;
    tables_.resize(static_cast<std::size_t>(K_ / 8));
    for (std::size_t b = 0; b < tables_.size(); ++b) {
      std::array<double, 8> w{};
      for (int t = 0; t < 8; ++t) {
        const double r = rho(h, static_cast<std::int64_t>(8 * b) + t + 1);
        w[static_cast<std::size_t>(t)] = 2.0 * p.g_H * r;
      }
      for (int byte = 0; byte < 256; ++byte) {
        double s = 0.0;
        for (int t = 0; t < 8; ++t) s += (byte >> t) & 1 ? w[static_cast<std::size_t>(t)] : -w[static_cast<std::size_t>(t)];
        tables_[b][static_cast<std::size_t>(byte)] = s;
      }
    }
    head_sum_sq_ = detail::rho_sq_partial(h, K_);
    tail_sum_sq_ = rho_sq_tail(h, K_);
    tail_sd_ = 2.0 * p.g_H * std::sqrt(tail_sum_sq_);
    // Berry-Esseen (constant 0.56 for independent, non-identical summands):
    //   sup |F - Phi| <= 0.56 sum |c_k|^3 / (sum c_k^2)^{3/2},
    // with rho_k <= b k^{-beta} above K for the cubes and the tail expansion for
    // the squares. The two-sided event doubles the distance.
    const double beta = p.beta;
    const double b = rho_envelope(h, K_ + 1);
    const double cube = b * b * b * std::pow(static_cast<double>(K_), 1.0 - 3.0 * beta) / (3.0 * beta - 1.0);
    const double square = tail_sum_sq_;
    surrogate_bound_ = 2.0 * 0.56 * cube / std::pow(square, 1.5);
  }

  double operator()(std::uint64_t index) const {
    double y = 0.0;
    const auto blocks = static_cast<std::uint32_t>(K_ / 128);
    std::size_t t = 0;
    for (std::uint32_t blk = 0; blk < blocks; ++blk) {
      const auto r = Philox4x32::block(Philox4x32::counter(blk, index, kStream), key_);
      for (std::uint32_t word : r) {
        for (int byte = 0; byte < 4; ++byte) y += tables_[t++][(word >> (8 * byte)) & 0xFFU];
      }
    }
    const auto g = Philox4x32::block(Philox4x32::counter(blocks, index, kStream), key_);
    return y + tail_sd_ * standard_normal(g);
  }

  const HurstParams& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }
  std::int64_t head_terms() const { return K_; }
  double tail_sd() const { return tail_sd_; }
  double surrogate_bound() const { return surrogate_bound_; }
  /// 4 g^2 sum_{k<=K} rho^2, the variance of the exact head.
  double head_variance() const { return 4.0 * params_.g_H * params_.g_H * head_sum_sq_; }
  double variance() const { return head_variance() + tail_sd_ * tail_sd_; }

  static constexpr std::uint32_t kStream = 0;

 private:
  HurstParams params_;
  Philox4x32::Key key_;
  std::uint64_t seed_;
  std::int64_t K_;
  std::vector<std::array<double, 256>> tables_;
  double head_sum_sq_ = 0.0;
  double tail_sum_sq_ = 0.0;
  double tail_sd_ = 0.0;
  double surrogate_bound_ = 0.0;
};

/// Samples first .. first+count-1 of Y_H under cfg.
inline std::vector<double> sample_limit_variable(const HurstParams& p, const McConfig& cfg, std::uint64_t first,
                                                 std::uint64_t count) {
  cfg.validate();
  const LimitSampler s(p, cfg.seed, cfg.head_terms);
  std::vector<double> out(count);
  const std::uint64_t chunks = (count + cfg.chunk - 1) / cfg.chunk;
  parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    const std::uint64_t lo = c * cfg.chunk;
    const std::uint64_t hi = std::min(count, lo + cfg.chunk);
    for (std::uint64_t i = lo; i < hi; ++i) out[i] = s(first + i);
  });
  return out;
}

namespace detail {

// Neumaier compensated accumulator.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

struct ChunkStats {
  std::uint64_t n = 0;
  std::uint64_t hits = 0;    // |y| > g
  std::uint64_t narrow = 0;  // |y| > g + delta
  std::uint64_t wide = 0;    // |y| > g - delta
  KahanSum sum;
  KahanSum sum_sq;
};

// Chunks are fixed by cfg.chunk and reduced in chunk order, so results do not
// depend on the thread count.
inline ChunkStats run_limit(const LimitSampler& s, const McConfig& cfg, double threshold, double delta) {
  const std::uint64_t chunks = (cfg.samples + cfg.chunk - 1) / cfg.chunk;
  std::vector<ChunkStats> part(chunks);
  parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    ChunkStats st;
    const std::uint64_t lo = c * cfg.chunk;
    const std::uint64_t hi = std::min(cfg.samples, lo + cfg.chunk);
    for (std::uint64_t i = lo; i < hi; ++i) {
      const double y = s(i);
      const double a = std::abs(y);
      ++st.n;
      st.hits += a > threshold;
      st.narrow += a > threshold + delta;
      st.wide += a > threshold - delta;
      st.sum.add(y);
      st.sum_sq.add(y * y);
    }
    part[c] = st;
  });
  ChunkStats total;
  for (const auto& st : part) {
    total.n += st.n;
    total.hits += st.hits;
    total.narrow += st.narrow;
    total.wide += st.wide;
    total.sum.add(st.sum.value());
    total.sum_sq.add(st.sum_sq.value());
  }
  return total;
}

}  // namespace detail

struct SampleMoments {
  std::uint64_t samples = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double analytic_variance = 0.0;
};

inline SampleMoments limit_moments(const HurstParams& p, const McConfig& cfg) {
  cfg.validate();
  const LimitSampler s(p, cfg.seed, cfg.head_terms);
  const auto st = detail::run_limit(s, cfg, p.g_H, 0.0);
  SampleMoments m;
  m.samples = st.n;
  const double n = static_cast<double>(st.n);
  m.mean = st.sum.value() / n;
  m.variance = (st.sum_sq.value() - n * m.mean * m.mean) / (n - 1.0);
  m.analytic_variance = s.variance();
  return m;
}

/// Estimate of P(|Y_H| > g_H).
inline McEstimate limit_proportion(const HurstParams& p, const McConfig& cfg) {
  cfg.validate();
  const LimitSampler s(p, cfg.seed, cfg.head_terms);
  const double delta = 6.0 * cfg.resolved_tail_sd_tol(p);
  const auto st = detail::run_limit(s, cfg, p.g_H, delta);
  auto e = proportion_estimate(st.hits, st.n, cfg.confidence);
  e.K = s.head_terms();
  e.seed = cfg.seed;
  e.delta = delta;
  e.bias_low = static_cast<double>(st.narrow) / static_cast<double>(st.n);
  e.bias_high = static_cast<double>(st.wide) / static_cast<double>(st.n);
  e.tail_sd = s.tail_sd();
  e.surrogate_bound = s.surrogate_bound();
  return e;
}

enum class LevelMode { automatic, exact, sample };
inline constexpr std::int64_t kExactLevelLimit = 20;

/// P(|Y_n + offset| >= g_n) over uniform sign words of length n-1 (or > g_n when
/// strict). Exact enumeration uses the census arithmetic, so it agrees with the
/// census proportion bit for bit.
inline McEstimate finite_level_proportion(const CoefficientTable& table, double offset, const McConfig& cfg,
                                          LevelMode mode = LevelMode::automatic, bool strict = false) {
  cfg.validate();
  const std::int64_t n = table.n;
  const bool exact = mode == LevelMode::exact || (mode == LevelMode::automatic && n <= kExactLevelLimit);
  if (exact) {
    if (n > 40) throw CapExceeded("finite_level_proportion: exact mode limited to n <= 40");
    const auto c = level_census(table, offset, cfg.threads, nullptr, strict);
    McEstimate e;
    e.samples = std::uint64_t{1} << (n - 1);
    e.p_hat = std::ldexp(static_cast<double>(c.count), -static_cast<int>(n - 1));
    e.ci_low = e.ci_high = e.p_hat;
    e.interval = "exact";
    e.exact = true;
    e.confidence = cfg.confidence;
    e.seed = cfg.seed;
    e.generator = "enumeration";
    return e;
  }
  const auto key = Philox4x32::key_from_seed(cfg.seed);
  const std::size_t m = table.j.size();
  const std::uint64_t chunks = (cfg.samples + cfg.chunk - 1) / cfg.chunk;
  std::vector<std::uint64_t> hits(chunks, 0);
  parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    const std::uint64_t lo = c * cfg.chunk;
    const std::uint64_t hi = std::min(cfg.samples, lo + cfg.chunk);
    std::uint64_t count = 0;
    for (std::uint64_t s = lo; s < hi; ++s) {
      double y = offset;
      Philox4x32::Counter r{};
      for (std::size_t i = 0; i < m; ++i) {
        if (i % 128 == 0) r = Philox4x32::block(Philox4x32::counter(static_cast<std::uint32_t>(i / 128), s, 1), key);
        const bool up = (r[(i % 128) / 32] >> (i % 32)) & 1U;
        y += up ? table.j[i] : -table.j[i];
      }
      const double a = std::abs(y);
      count += strict ? a > table.g : a >= table.g;
    }
    hits[c] = count;
  });
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  auto e = proportion_estimate(total, cfg.samples, cfg.confidence);
  e.seed = cfg.seed;
  return e;
}

/// Estimates of P(|Y_n| > g_n) for each n (zero drift).
inline std::vector<McEstimate> exceedance_frequency(const HurstParams& p, const std::vector<std::int64_t>& n_list,
                                                    const McConfig& cfg, CoefficientCache& cache) {
  std::vector<McEstimate> out;
  out.reserve(n_list.size());
  for (auto n : n_list) {
    if (n < 1) throw DomainError("exceedance_frequency: levels must be >= 1");
    out.push_back(finite_level_proportion(*cache.get(p, n), 0.0, cfg, LevelMode::automatic, true));
  }
  return out;
}

/// Variances of the two parts of Y_n split at i_n: indices below i_n and the rest.
struct SplitVariances {
  std::int64_t n = 0;
  std::int64_t split_index = 1;
  double var_bar = 0.0;
  double var_hat = 0.0;
  double total = 0.0;  // sum_i j_n(i)^2, summed independently
};

inline SplitVariances split_variances(const CoefficientTable& t) {
  SplitVariances s;
  s.n = t.n;
  s.split_index = t.split_index;
  detail::KahanSum bar, hat, all;
  for (std::size_t k = 0; k < t.j.size(); ++k) {
    const double sq = t.j[k] * t.j[k];
    (static_cast<std::int64_t>(k) + 1 < t.split_index ? bar : hat).add(sq);
    all.add(sq);
  }
  s.var_bar = bar.value();
  s.var_hat = hat.value();
  s.total = all.value();
  return s;
}

/// 4 g_H^2 sum_k rho_h(k)^2, the limit of var_hat.
inline double limit_variance(const HurstParams& p) {
  return 4.0 * p.g_H * p.g_H * rho_sq_total(p.H / 2.0 + 0.25);
}

struct CharFnValue {
  double value = 1.0;
  double log_abs = 0.0;  // log |F_H(v)|
  int sign = 1;
  std::int64_t K = 0;    // factors multiplied exactly
  double remainder_bound = 0.0;  // bound on |log F - computed log F|
};

/// F_H(v) = prod_k cos(2 v g_H rho_h(k)). The first K factors are multiplied
/// exactly; the remaining ones contribute exp(-x^2/2) each, using
/// -x^4/8 <= log cos x + x^2/2 <= 0 for |x| <= 1, so the log error is at most
/// sum_{k>K} x_k^4 / 8 <= (2vg)^4 b^4 K^{1-4beta} / (8 (4beta - 1)).
inline CharFnValue characteristic_function(const HurstParams& p, double v, double tol = 1e-12,
                                           std::int64_t cap = kDefaultRhoCap) {
  if (!(tol > 0.0)) throw DomainError("characteristic_function: tol must be positive");
  if (!std::isfinite(v)) throw DomainError("characteristic_function: v must be finite");
  CharFnValue out;
  if (v == 0.0) return out;
  const double h = p.H / 2.0 + 0.25;
  const double beta = p.beta;
  const double scale = 2.0 * std::abs(v) * p.g_H;
  auto remainder = [&](std::int64_t K) {
    const double b = rho_envelope(h, K + 1);
    const double x_next = scale * b * std::pow(static_cast<double>(K + 1), -beta);
    if (x_next > 1.0) return std::numeric_limits<double>::infinity();
    return std::pow(scale * b, 4) * std::pow(static_cast<double>(K), 1.0 - 4.0 * beta) / (8.0 * (4.0 * beta - 1.0));
  };
  std::int64_t K = 64;
  while (remainder(K) > tol) {
    if (K >= cap) throw CapExceeded("characteristic_function: tolerance not reachable below the K cap");
    K = std::min(cap, 2 * K);
  }
  detail::KahanSum log_abs;
  int sign = 1;
  for (std::int64_t k = 1; k <= K; ++k) {
    const double c = std::cos(scale * rho(h, k));
    if (c < 0.0) sign = -sign;
    log_abs.add(std::log(std::abs(c)));
  }
  log_abs.add(-0.5 * scale * scale * rho_sq_tail(h, K));
  out.K = K;
  out.sign = sign;
  out.log_abs = log_abs.value();
  out.value = sign * std::exp(out.log_abs);
  out.remainder_bound = remainder(K);
  return out;
}

/// (1/n) sum_i cos(v y_i) over the sampler's first cfg.samples draws.
inline std::vector<double> empirical_characteristic_function(const HurstParams& p, const McConfig& cfg,
                                                             const std::vector<double>& vs) {
  cfg.validate();
  const LimitSampler s(p, cfg.seed, cfg.head_terms);
  const std::uint64_t chunks = (cfg.samples + cfg.chunk - 1) / cfg.chunk;
  std::vector<std::vector<detail::KahanSum>> part(chunks, std::vector<detail::KahanSum>(vs.size()));
  parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    const std::uint64_t lo = c * cfg.chunk;
    const std::uint64_t hi = std::min(cfg.samples, lo + cfg.chunk);
    for (std::uint64_t i = lo; i < hi; ++i) {
      const double y = s(i);
      for (std::size_t q = 0; q < vs.size(); ++q) part[c][q].add(std::cos(vs[q] * y));
    }
  });
  std::vector<double> out(vs.size());
  for (std::size_t q = 0; q < vs.size(); ++q) {
    detail::KahanSum t;
    for (const auto& pc : part) t.add(pc[q].value());
    out[q] = t.value() / static_cast<double>(cfg.samples);
  }
  return out;
}

/// Least-squares fit of log(-log|F_H(v)|) = log(theta) + e log(v) over a
/// geometric grid on [v0, 10 v0]. The decay proof predicts e = 1/beta.
struct DecayFit {
  double exponent = 0.0;
  double theta = 0.0;
  double expected_exponent = 0.0;
  std::vector<double> v;
  std::vector<double> log_abs;
};

inline DecayFit fit_decay(const HurstParams& p, double v0 = 10.0, int points = 16, double tol = 1e-6) {
  if (!(v0 > 0.0) || points < 2) throw DomainError("fit_decay: need v0 > 0 and at least two points");
  DecayFit fit;
  fit.expected_exponent = 1.0 / p.beta;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < points; ++i) {
    const double v = v0 * std::pow(10.0, static_cast<double>(i) / (points - 1));
    const auto f = characteristic_function(p, v, tol);
    if (!(f.log_abs < 0.0)) throw DomainError("fit_decay: |F| not below 1 on the grid; raise v0");
    const double x = std::log(v);
    const double y = std::log(-f.log_abs);
    fit.v.push_back(v);
    fit.log_abs.push_back(f.log_abs);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = points;
  fit.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.theta = std::exp((sy - fit.exponent * sx) / n);
  return fit;
}

/// Thresholds around the critical exponent. With S = sum rho^2:
///   S > 1/4: delta = (2 sqrt S - 1)/2 and floor (1/3)(1 - (1+delta)^2/(4S))^2;
///   S < 1/4: eps = (1 - 2 sqrt S)/2 and ceiling 4S/(1-eps)^2.
/// The midpoints satisfy the strict inequalities 0 < delta < 2 sqrt S - 1 and
/// 0 < eps < 1 - 2 sqrt S.
struct RegimeBound {
  double sum_rho_sq = 0.0;
  bool supercritical = false;
  double parameter = 0.0;  // delta or eps
  double bound = 0.0;      // floor or ceiling
  double tchebysheff_ceiling = 0.0;  // 4S
  double paley_zygmund_floor = 0.0;  // (1/3)(1 - 1/(4S))^2 when 4S > 1, else 0
};

inline RegimeBound regime_bound(const HurstParams& p) {
  RegimeBound r;
  const double S = rho_sq_total(p.H / 2.0 + 0.25);
  r.sum_rho_sq = S;
  r.tchebysheff_ceiling = 4.0 * S;
  r.paley_zygmund_floor = 4.0 * S > 1.0 ? std::pow(1.0 - 1.0 / (4.0 * S), 2) / 3.0 : 0.0;
  const double root = 2.0 * std::sqrt(S);
  if (S > 0.25) {
    r.supercritical = true;
    r.parameter = (root - 1.0) / 2.0;
    r.bound = std::pow(1.0 - (1.0 + r.parameter) * (1.0 + r.parameter) / (4.0 * S), 2) / 3.0;
  } else {
    r.parameter = (1.0 - root) / 2.0;
    r.bound = 4.0 * S / ((1.0 - r.parameter) * (1.0 - r.parameter));
  }
  return r;
}

}  // namespace fbarb
