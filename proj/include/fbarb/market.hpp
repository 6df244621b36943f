#pragma once

// N-period fractional binary market on the binary tree.
//
// Node (n, word): level n in [1, N], word holds xi_1..xi_{n-1} with bit i-1 set
// iff xi_i = +1. At such a node the one-step return is
//   X_n = N^{-H} (Y_n + g_n xi_n),  Y_n = sum_{i<n} j_n(i) xi_i,
// and the node is an arbitrage point iff u_n <= -a_n or d_n >= -a_n, i.e.
// |Y_n + a_n N^H| >= g_n in scaled units.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fbarb/coefficients.hpp"
#include "fbarb/errors.hpp"
#include "fbarb/hurst.hpp"
#include "fbarb/parallel.hpp"

namespace fbarb {

/// Deterministic drift a(t) on [0, 1]; a_n^{(N)} = a(n/N) / N.
struct DriftSpec {
  enum class Kind { zero, constant, polynomial };
  Kind kind = Kind::zero;
  std::vector<double> coefficients;  // a(t) = sum_m c_m t^m

  static DriftSpec zero() { return {}; }
  static DriftSpec constant(double c) { return {Kind::constant, {c}}; }
  static DriftSpec polynomial(std::vector<double> c) {
    if (c.empty()) throw DomainError("DriftSpec: polynomial needs at least one coefficient");
    return {Kind::polynomial, std::move(c)};
  }

  /// Text form: `zero`, `const:c` or `poly:c0,c1,...`.
  static DriftSpec parse(std::string_view text) {
    auto number = [&](std::string_view s) {
      double v = 0.0;
      const auto* end = s.data() + s.size();
      auto [ptr, ec] = std::from_chars(s.data(), end, v);
      if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
        throw DomainError("DriftSpec: bad number '" + std::string(s) + "' in '" + std::string(text) + "'");
      }
      return v;
    };
    if (text == "zero") return zero();
    if (text.starts_with("const:")) return constant(number(text.substr(6)));
    if (text.starts_with("poly:")) {
      std::vector<double> c;
      std::string_view rest = text.substr(5);
      while (true) {
        const auto comma = rest.find(',');
        c.push_back(number(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
      }
      return polynomial(std::move(c));
    }
    throw DomainError("DriftSpec: expected zero, const:c or poly:c0,c1,... but got '" + std::string(text) + "'");
  }

  std::string to_string() const {
    auto fmt = [](double v) {
      char buf[32];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, ptr);
    };
    switch (kind) {
      case Kind::zero: return "zero";
      case Kind::constant: return "const:" + fmt(coefficients.at(0));
      case Kind::polynomial: {
        std::string s = "poly:";
        for (std::size_t m = 0; m < coefficients.size(); ++m) s += (m ? "," : "") + fmt(coefficients[m]);
        return s;
      }
    }
    return "zero";
  }

  bool is_zero() const {
    return kind == Kind::zero || std::all_of(coefficients.begin(), coefficients.end(), [](double c) { return c == 0.0; });
  }

  double operator()(double t) const {
    if (kind == Kind::zero) return 0.0;
    double v = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) v = v * t + *it;
    return v;
  }

  /// max_{[0,1]} |a| from a 10^4-point grid plus the endpoints, capped by the
  /// monomial bound sum |c_m| (exact for one-signed coefficients).
  double sup_norm() const {
    if (kind == Kind::zero) return 0.0;
    double grid = 0.0;
    constexpr int kGrid = 10000;
    for (int k = 0; k <= kGrid; ++k) grid = std::max(grid, std::abs((*this)(static_cast<double>(k) / kGrid)));
    double monomial = 0.0;
    for (double c : coefficients) monomial += std::abs(c);
    return std::min(std::max(grid, std::abs((*this)(1.0))), monomial);
  }

  /// a_n^{(N)} = a(n/N) / N.
  double step(std::int64_t n, std::int64_t N) const {
    return (*this)(static_cast<double>(n) / static_cast<double>(N)) / static_cast<double>(N);
  }
};

struct MarketSpec {
  std::int64_t N = 1;
  HurstParams params;
  DriftSpec drift;
  double s0 = 1.0;

  static MarketSpec make(std::int64_t N, double H, double sigma = 1.0, DriftSpec drift = {}, double s0 = 1.0) {
    if (N < 1) throw DomainError("MarketSpec: N must be >= 1");
    if (!(s0 > 0.0)) throw DomainError("MarketSpec: s0 must be positive");
    if (!(sigma > 0.0)) throw DomainError("MarketSpec: sigma must be positive");
    return {N, HurstParams::make(H, sigma), std::move(drift), s0};
  }

  /// Scaled drift offset a_n^{(N)} N^H at level n.
  double drift_offset(std::int64_t n) const {
    return drift.step(n, N) * std::pow(static_cast<double>(N), params.H);
  }
};

/// Binary-tree node: level n and the sign word of xi_1..xi_{n-1}.
struct NodeId {
  std::int64_t level = 1;
  std::uint64_t word = 0;

  static NodeId make(std::int64_t level, std::uint64_t word) {
    if (level < 1 || level > 64) throw DomainError("NodeId: level must be in [1, 64]");
    if (level <= 63 && word >> (level - 1) != 0) throw DomainError("NodeId: word longer than level - 1 signs");
    return {level, word};
  }

  /// xi_i for 1 <= i < level.
  int sign(std::int64_t i) const { return (word >> (i - 1)) & 1U ? 1 : -1; }

  /// Global sign flip of the history.
  NodeId complement() const {
    const std::uint64_t mask = level - 1 >= 64 ? ~0ULL : ((1ULL << (level - 1)) - 1);
    return {level, ~word & mask};
  }
};

struct NodeValues {
  double y = 0.0;  // Y_n^{(N)}
  double u = 0.0;  // Y_n + g_n^{(N)}
  double d = 0.0;  // Y_n - g_n^{(N)}
  double a = 0.0;  // a_n^{(N)}
};

inline void check_table(const MarketSpec& spec, const NodeId& node, const CoefficientTable& table) {
  if (table.n != node.level) throw ShapeMismatch("node level does not match coefficient table level");
  if (node.level > spec.N) throw ShapeMismatch("node level exceeds N");
  if (table.H != spec.params.H || table.sigma != spec.params.sigma) {
    throw ShapeMismatch("coefficient table was built for different (H, sigma)");
  }
}

/// Scaled disturbance sum_{i<n} j_n(i) xi_i.
inline double scaled_disturbance(const CoefficientTable& table, std::uint64_t word) {
  double y = 0.0;
  for (std::size_t i = 0; i < table.j.size(); ++i) y += (word >> i) & 1U ? table.j[i] : -table.j[i];
  return y;
}

inline NodeValues node_values(const MarketSpec& spec, const NodeId& node, const CoefficientTable& table) {
  check_table(spec, node, table);
  const double scale = std::pow(static_cast<double>(spec.N), -spec.params.H);
  NodeValues v;
  v.y = scale * scaled_disturbance(table, node.word);
  v.u = v.y + scale * table.g;
  v.d = v.y - scale * table.g;
  v.a = spec.drift.step(node.level, spec.N);
  return v;
}

inline bool is_arbitrage(const MarketSpec& spec, const NodeId& node, const CoefficientTable& table) {
  const auto v = node_values(spec, node, table);
  return v.u <= -v.a || v.d >= -v.a;
}

// ---------------------------------------------------------------------------
// Level census in fixed point.
//
// Coefficients are rounded to integers at a common power-of-two scale, so every
// word's Y_n is an exact integer sum. Gray-code, naive and path enumerations
// then agree bit for bit, and the sign-flip symmetry is exact. Nodes whose
// margin |Y + o| - g lies within the combined quadrature and rounding error are
// also counted as boundary-uncertain.

struct QuantizedLevel {
  std::vector<std::int64_t> q;  // q[i-1] ~ j_n(i) * scale
  std::int64_t g = 0;
  std::int64_t offset = 0;
  std::int64_t margin = 0;      // uncertainty half-width in integer units
  double scale = 1.0;
  bool strict = false;          // count |Y + o| > g instead of >= g

  static QuantizedLevel make(const CoefficientTable& t, double offset, bool strict = false) {
    QuantizedLevel out;
    out.strict = strict;
    double mass = t.g + std::abs(offset);
    for (double j : t.j) mass += std::abs(j);
    // Keep every partial sum below 2^61 in magnitude.
    const int e = 60 - std::ilogb(std::max(mass, 1e-300)) - 1;
    out.scale = std::ldexp(1.0, e);
    out.q.reserve(t.j.size());
    for (double j : t.j) out.q.push_back(std::llround(j * out.scale));
    out.g = std::llround(t.g * out.scale);
    out.offset = std::llround(offset * out.scale);
    const double err = t.total_j_error() + t.g_err;
    out.margin = static_cast<std::int64_t>(std::ceil(err * out.scale)) + static_cast<std::int64_t>(t.j.size()) + 2;
    return out;
  }

  std::int64_t all_down() const {
    std::int64_t s = 0;
    for (auto v : q) s -= v;
    return s;
  }

  bool arbitrage(std::int64_t y) const {
    const std::int64_t v = y + offset;
    return strict ? (v > g || v < -g) : (v >= g || v <= -g);
  }

  bool uncertain(std::int64_t y) const {
    const std::int64_t v = y + offset;
    const std::int64_t gap = (v < 0 ? -v : v) - g;
    return (gap < 0 ? -gap : gap) <= margin;
  }
};

struct LevelCount {
  std::uint64_t count = 0;
  std::uint64_t uncertain = 0;
};

/// Packed per-word arbitrage flags of one level.
class LevelFlags {
 public:
  LevelFlags() = default;
  explicit LevelFlags(std::int64_t bits)
      : bits_(bits), words_(static_cast<std::size_t>((bits + 63) / 64), 0ULL) {}
  bool test(std::uint64_t w) const { return (words_[w >> 6] >> (w & 63)) & 1ULL; }
  void set(std::uint64_t w) { words_[w >> 6] |= 1ULL << (w & 63); }
  std::int64_t size() const { return bits_; }
  std::uint64_t popcount() const {
    std::uint64_t c = 0;
    for (auto w : words_) c += static_cast<std::uint64_t>(std::popcount(w));
    return c;
  }

 private:
  std::int64_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Counts arbitrage words of a level by a Gray-code walk: consecutive words
/// differ in one sign, so each step updates Y by +-2 q_b. The word space is split
/// into prefix-fixed segments for threads; counts combine by integer addition.
inline LevelCount level_census(const CoefficientTable& table, double offset, int threads = 1,
                               LevelFlags* flags = nullptr, bool strict = false) {
  const auto ql = QuantizedLevel::make(table, offset, strict);
  const int m = static_cast<int>(table.j.size());
  if (m > 62) throw CapExceeded("level_census: level too large to enumerate");
  if (flags) *flags = LevelFlags(std::int64_t{1} << m);
  // Segments must span whole 64-bit flag words so that writers never share one.
  const int p = m >= 10 ? std::min(6, m - 6) : 0;
  const int low = m - p;
  const std::size_t segments = std::size_t{1} << p;
  std::vector<LevelCount> partial(segments);

  parallel_for(segments, threads, [&](std::size_t s) {
    const std::uint64_t top = static_cast<std::uint64_t>(s) << low;
    std::int64_t y = ql.all_down();
    for (int b = 0; b < p; ++b) {
      if ((top >> (low + b)) & 1U) y += 2 * ql.q[static_cast<std::size_t>(low + b)];
    }
    LevelCount c;
    std::uint64_t gray = 0;
    auto visit = [&] {
      if (ql.arbitrage(y)) {
        ++c.count;
        if (flags) flags->set(top | gray);
      }
      if (ql.uncertain(y)) ++c.uncertain;
    };
    visit();
    const std::uint64_t steps = std::uint64_t{1} << low;
    for (std::uint64_t t = 1; t < steps; ++t) {
      const int b = std::countr_zero(t);
      gray ^= std::uint64_t{1} << b;
      const std::int64_t step = 2 * ql.q[static_cast<std::size_t>(b)];
      y += (gray >> b) & 1U ? step : -step;
      visit();
    }
    partial[s] = c;
  });

  LevelCount total;
  for (const auto& c : partial) {
    total.count += c.count;
    total.uncertain += c.uncertain;
  }
  return total;
}

/// Reference enumeration: recompute every word's Y from scratch, O(2^{n-1} n).
inline LevelCount level_census_naive(const CoefficientTable& table, double offset, bool strict = false) {
  const auto ql = QuantizedLevel::make(table, offset, strict);
  const int m = static_cast<int>(table.j.size());
  if (m > 40) throw CapExceeded("level_census_naive: level too large");
  LevelCount c;
  for (std::uint64_t w = 0; w < (std::uint64_t{1} << m); ++w) {
    std::int64_t y = 0;
    for (int i = 0; i < m; ++i) y += (w >> i) & 1U ? ql.q[static_cast<std::size_t>(i)] : -ql.q[static_cast<std::size_t>(i)];
    if (ql.arbitrage(y)) ++c.count;
    if (ql.uncertain(y)) ++c.uncertain;
  }
  return c;
}

inline constexpr std::int64_t kDefaultCensusCap = 26;

struct CensusOptions {
  int threads = 1;
  std::int64_t cap = kDefaultCensusCap;
  bool paths = true;
};

struct ArbitrageCensus {
  std::int64_t N = 0;
  std::vector<std::uint64_t> per_level_counts;     // index n-1
  std::vector<std::uint64_t> per_level_uncertain;  // index n-1
  std::vector<double> per_level_proportions;       // count / 2^{n-1}
  std::uint64_t total = 0;
  std::uint64_t path_count = 0;
  std::uint64_t boundary_uncertain = 0;
  bool paths_counted = false;

  double path_proportion() const { return std::ldexp(static_cast<double>(path_count), -static_cast<int>(N - 1)); }
};

/// Number of root-to-leaf paths (words of length N-1) through at least one
/// flagged node. An arbitrage node at level n accounts for all 2^{N-n} paths
/// below it, so its subtree is not descended.
inline std::uint64_t count_arbitrage_paths(const std::vector<LevelFlags>& flags) {
  const auto N = static_cast<std::int64_t>(flags.size());
  if (N == 0) return 0;
  struct Frame {
    std::int64_t level;
    std::uint64_t word;
  };
  std::vector<Frame> stack{{1, 0}};
  std::uint64_t paths = 0;
  while (!stack.empty()) {
    const auto [n, w] = stack.back();
    stack.pop_back();
    if (flags[static_cast<std::size_t>(n - 1)].test(w)) {
      paths += std::uint64_t{1} << (N - n);
      continue;
    }
    if (n == N) continue;
    stack.push_back({n + 1, w | (std::uint64_t{1} << (n - 1))});
    stack.push_back({n + 1, w});
  }
  return paths;
}

/// Exact arbitrage census of the N-period market. Tables come from `cache`.
inline ArbitrageCensus census(const MarketSpec& spec, CoefficientCache& cache, const CensusOptions& opt = {}) {
  if (spec.N > opt.cap) {
    throw CapExceeded("census: N = " + std::to_string(spec.N) + " exceeds the enumeration cap " +
                      std::to_string(opt.cap));
  }
  if (spec.N > 62) throw CapExceeded("census: N above 62 cannot be enumerated");
  ArbitrageCensus out;
  out.N = spec.N;
  std::vector<LevelFlags> flags(opt.paths ? static_cast<std::size_t>(spec.N) : 0);
  for (std::int64_t n = 1; n <= spec.N; ++n) {
    const auto table = cache.get(spec.params, n);
    const auto c = level_census(*table, spec.drift_offset(n), opt.threads,
                                opt.paths ? &flags[static_cast<std::size_t>(n - 1)] : nullptr);
    out.per_level_counts.push_back(c.count);
    out.per_level_uncertain.push_back(c.uncertain);
    out.per_level_proportions.push_back(std::ldexp(static_cast<double>(c.count), -static_cast<int>(n - 1)));
    out.total += c.count;
    out.boundary_uncertain += c.uncertain;
  }
  if (opt.paths) {
    out.path_count = count_arbitrage_paths(flags);
    out.paths_counted = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monotone reach: from a node at level k, go always up (or always down) and find
// the first level k+n that is an arbitrage point. Following the existence proof,
// the horizon moves with the level (N = k+n), so the drift offset at level m is
// a(1) m^{H-1}.

/// Per-level data shared by all prefixes up to a fixed maximal length.
class ReachContext {
 public:
  ReachContext(HurstParams params, DriftSpec drift, std::int64_t max_prefix = 8, QuadratureConfig cfg = {})
      : params_(params), drift_(std::move(drift)), max_prefix_(max_prefix), cfg_(cfg) {
    if (max_prefix < 0 || max_prefix > 62) throw DomainError("ReachContext: max_prefix must be in [0, 62]");
  }

  struct Level {
    std::vector<double> head;   // head[i-1] = j_m(i), i <= min(max_prefix, m-1)
    std::vector<double> block;  // block[k-1] = sum_{i=k}^{m-1} j_m(i), k <= min(max_prefix+1, m-1)
    double g = 0.0;
    double offset = 0.0;
  };

  const Level& level(std::int64_t m) {
    if (m < 2) throw DomainError("ReachContext: level must be >= 2");
    std::lock_guard lock(mu_);
    auto it = levels_.find(m);
    if (it != levels_.end()) return *it->second;
    auto lv = std::make_unique<Level>();
    const std::int64_t heads = std::min(max_prefix_, m - 1);
    for (std::int64_t i = 1; i <= heads; ++i) lv->head.push_back(j_coeff(params_, m, i, cfg_).value);
    const std::int64_t blocks = std::min(max_prefix_ + 1, m - 1);
    lv->block.assign(static_cast<std::size_t>(blocks), 0.0);
    lv->block[static_cast<std::size_t>(blocks - 1)] = j_block_sum(params_, m, blocks, m - 1, cfg_).value;
    for (std::int64_t k = blocks - 1; k >= 1; --k) {
      lv->block[static_cast<std::size_t>(k - 1)] = lv->block[static_cast<std::size_t>(k)] + lv->head[static_cast<std::size_t>(k - 1)];
    }
    lv->g = g_coeff(params_, m, cfg_).value;
    lv->offset = drift_(1.0) * std::pow(static_cast<double>(m), params_.H - 1.0);
    return *levels_.emplace(m, std::move(lv)).first->second;
  }

  const HurstParams& params() const { return params_; }
  const DriftSpec& drift() const { return drift_; }
  std::int64_t max_prefix() const { return max_prefix_; }

 private:
  HurstParams params_;
  DriftSpec drift_;
  std::int64_t max_prefix_;
  QuadratureConfig cfg_;
  std::mutex mu_;
  std::map<std::int64_t, std::unique_ptr<Level>> levels_;
};

/// Smallest n in [1, n_max] such that the node (prefix, direction x n) at level
/// k+n is an arbitrage point of the (k+n)-period market; k-1 = prefix_length.
inline std::optional<std::int64_t> monotone_reach(ReachContext& ctx, std::uint64_t prefix, std::int64_t prefix_length,
                                                  int direction, std::int64_t n_max) {
  if (direction != 1 && direction != -1) throw DomainError("monotone_reach: direction must be +1 or -1");
  if (prefix_length < 0 || prefix_length > ctx.max_prefix()) {
    throw DomainError("monotone_reach: prefix longer than the context supports");
  }
  if (prefix_length < 64 && (prefix >> prefix_length) != 0) throw DomainError("monotone_reach: prefix has extra bits");
  const std::int64_t k = prefix_length + 1;
  for (std::int64_t n = 1; n <= n_max; ++n) {
    const auto& lv = ctx.level(k + n);
    double y = 0.0;
    for (std::int64_t i = 1; i <= prefix_length; ++i) {
      const double j = lv.head[static_cast<std::size_t>(i - 1)];
      y += (prefix >> (i - 1)) & 1U ? j : -j;
    }
    y += direction * lv.block[static_cast<std::size_t>(k - 1)] + lv.offset;
    if (std::abs(y) >= lv.g) return n;
  }
  return std::nullopt;
}

/// Word of the node reached by appending n copies of `direction` to `prefix`.
inline NodeId reach_node(std::uint64_t prefix, std::int64_t prefix_length, int direction, std::int64_t n) {
  const std::int64_t len = prefix_length + n;
  if (len > 63) throw DomainError("reach_node: word does not fit 64 bits");
  std::uint64_t w = prefix;
  if (direction == 1) {
    for (std::int64_t i = prefix_length; i < len; ++i) w |= std::uint64_t{1} << i;
  }
  return NodeId{len + 1, w};
}

// ---------------------------------------------------------------------------

struct StockPath {
  std::vector<double> prices;                 // S_0..S_len
  std::vector<std::int64_t> positivity_violations;  // steps n with 1 + a_n + X_n <= 0
};

/// Price trajectory S_n = (1 + a_n + X_n) S_{n-1} along xi_1..xi_len (len = N or
/// N-1; the word uses the NodeId bit convention). With len = N-1 the trajectory
/// stops at S_{N-1} because xi_N is not given.
inline StockPath stock_path(const MarketSpec& spec, CoefficientCache& cache, std::uint64_t word, std::int64_t len) {
  if (len != spec.N && len != spec.N - 1) throw ShapeMismatch("stock_path: word length must be N or N-1");
  if (len > 63) throw DomainError("stock_path: word does not fit 64 bits");
  const double scale = std::pow(static_cast<double>(spec.N), -spec.params.H);
  StockPath out;
  out.prices.push_back(spec.s0);
  for (std::int64_t n = 1; n <= len; ++n) {
    const auto table = cache.get(spec.params, n);
    const std::uint64_t history = n - 1 >= 64 ? word : word & ((std::uint64_t{1} << (n - 1)) - 1);
    const double xi = (word >> (n - 1)) & 1U ? 1.0 : -1.0;
    const double x = scale * (scaled_disturbance(*table, history) + table->g * xi);
    const double factor = 1.0 + spec.drift.step(n, spec.N) + x;
    if (factor <= 0.0) out.positivity_violations.push_back(n);
    out.prices.push_back(out.prices.back() * factor);
  }
  return out;
}

}  // namespace fbarb
