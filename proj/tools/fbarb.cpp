// fbarb: command-line front end for the fractional binary market laboratory.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fbarb/fbarb.hpp"

namespace {

using namespace fbarb;

enum Exit : int {
  kOk = 0,
  kVerifyFailed = 1,
  kInvalid = 2,
  kNonConvergence = 3,
  kCapExceeded = 4,
  kUnwritable = 5,
};

constexpr const char* kExitHelp =
    "Exit status: 0 success, 1 verify found a failing property, 2 invalid arguments,\n"
    "3 numerical nonconvergence, 4 enumeration or truncation cap exceeded, 5 output not writable.\n"
    "Every option can also be set through FBARB_<NAME> (e.g. FBARB_H=0.8, FBARB_QUAD_ABS_TOL=1e-11).";

struct Settings {
  std::string command;
  // shared
  double H = 0.75;
  double sigma = 1.0;
  std::int64_t N = 20;
  std::string drift = "zero";
  double s0 = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t samples = 1'000'000;
  double quad_abs_tol = 1e-10;
  double quad_rel_tol = 1e-9;
  int max_subdivisions = 2000;
  double tail_sd_tol = 0.0;
  double confidence = 0.99;
  std::int64_t head_terms = kDefaultHeadTerms;
  std::string format = "json";
  std::string output = "-";
  int threads = 1;
  // per command
  std::int64_t cap = kDefaultCensusCap;
  std::string word;
  std::int64_t n = 20;
  double offset = 0.0;
  std::string mode = "auto";
  bool strict = false;
  double tol = 1e-8;
  double cf_tol = 1e-12;
  std::vector<double> v;
  bool fit = false;
  double v0 = 10.0;
  std::string prefix;
  std::string direction = "up";
  std::int64_t n_max = 10000;
  std::vector<std::int64_t> levels{10, 100, 1000, 10000};
  double perturb = 0.0;

  QuadratureConfig quad() const {
    QuadratureConfig q{quad_abs_tol, quad_rel_tol, max_subdivisions};
    q.validate();
    return q;
  }

  McConfig mc() const {
    McConfig c;
    c.samples = samples;
    c.seed = seed;
    c.tail_sd_tol = tail_sd_tol;
    c.confidence = confidence;
    c.threads = threads;
    c.head_terms = head_terms;
    c.validate();
    return c;
  }
};

/// The resolved configuration recorded in every report. The thread count is an
/// execution setting that never changes results, so it is left out to keep
/// outputs byte-identical across --threads values.
Json resolved_config(const Settings& s) {
  auto c = Json::object();
  c.set("command", s.command);
  c.set("H", s.H);
  c.set("sigma", s.sigma);
  c.set("N", s.N);
  c.set("drift", DriftSpec::parse(s.drift).to_string());
  c.set("s0", s.s0);
  c.set("seed", s.seed);
  c.set("samples", s.samples);
  c.set("quad_abs_tol", s.quad_abs_tol);
  c.set("quad_rel_tol", s.quad_rel_tol);
  c.set("max_subdivisions", s.max_subdivisions);
  c.set("tail_sd_tol", s.tail_sd_tol > 0.0 ? s.tail_sd_tol : 1e-4 * HurstParams::make(s.H, s.sigma).g_H);
  c.set("confidence", s.confidence);
  c.set("head_terms", s.head_terms);
  c.set("format", s.format);
  const auto& cmd = s.command;
  if (cmd == "census") c.set("cap", s.cap);
  if (cmd == "paths") c.set("word", s.word);
  if (cmd == "mc-level") {
    c.set("n", s.n);
    c.set("offset", s.offset);
    c.set("mode", s.mode);
    c.set("strict", s.strict);
  }
  if (cmd == "hc") c.set("tol", s.tol);
  if (cmd == "charfn") {
    c.set("v", Json::array_of(s.v));
    c.set("tol", s.cf_tol);
    c.set("fit", s.fit);
    c.set("v0", s.v0);
  }
  if (cmd == "reach") {
    c.set("prefix", s.prefix);
    c.set("direction", s.direction);
    c.set("n_max", s.n_max);
  }
  if (cmd == "convergence") c.set("levels", Json::array_of(s.levels));
  if (cmd == "verify") c.set("perturb", s.perturb);
  return c;
}

struct OutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw OutputError("cannot open output file '" + path + "'");
  f << text;
  f.close();
  if (!f) throw OutputError("failed writing output file '" + path + "'");
}

void emit(const Settings& s, const Json& result, const CsvTable* csv, std::uint64_t cache_hash) {
  const auto config = resolved_config(s);
  if (s.format == "csv" && csv != nullptr) {
    CsvTable t = *csv;
    std::vector<std::pair<std::string, std::string>> header;
    for (const char* key : {"command", "H", "sigma", "N", "drift", "s0", "seed", "samples", "quad_abs_tol",
                            "quad_rel_tol", "max_subdivisions", "tail_sd_tol", "confidence", "head_terms", "format",
                            "cap", "word", "n", "offset", "mode", "strict", "tol", "v", "fit", "v0", "prefix",
                            "direction", "n_max", "levels", "perturb"}) {
      if (const auto* v = config.find(key)) header.emplace_back(key, v->scalar_text());
    }
    header.emplace_back("coefficient_cache_hash", hex64(cache_hash));
    t.header = std::move(header);
    write_text(s.output, t.dump());
    return;
  }
  auto doc = Json::object();
  doc.set("config", config);
  doc.set("coefficient_cache_hash", hex64(cache_hash));
  doc.set("result", result);
  write_text(s.output, doc.dump() + "\n");
}

std::uint64_t parse_word(const std::string& text) {
  if (text.size() > 63) throw DomainError("sign words are limited to 63 signs");
  std::uint64_t w = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '+' || c == 'u' || c == '1') {
      w |= std::uint64_t{1} << i;
    } else if (!(c == '-' || c == 'd' || c == '0')) {
      throw DomainError(std::string("sign word characters must be +/- (or u/d, 1/0), got '") + c + "'");
    }
  }
  return w;
}

std::string word_text(std::uint64_t w, std::int64_t len) {
  std::string s;
  for (std::int64_t i = 0; i < len; ++i) s += (w >> i) & 1U ? '+' : '-';
  return s;
}

int run_command(const Settings& s) {
  const auto params = HurstParams::make(s.H, s.sigma);
  const auto drift = DriftSpec::parse(s.drift);
  const auto cfg = s.quad();
  CoefficientCache cache(cfg);
  const auto& cmd = s.command;

  if (cmd == "coeffs") {
    auto tables = Json::array();
    for (std::int64_t n = 1; n <= s.N; ++n) tables.push(to_json(*cache.get(params, n)));
    const auto snap = cache.snapshot();
    const auto csv = coefficient_csv(snap);
    emit(s, tables, &csv, content_hash(snap));
    return kOk;
  }
  if (cmd == "census") {
    const auto spec = MarketSpec::make(s.N, s.H, s.sigma, drift, s.s0);
    const auto c = census(spec, cache, {s.threads, s.cap, true});
    auto r = Json::object();
    auto sp = Json::object();
    sp.set("N", spec.N);
    sp.set("H", spec.params.H);
    sp.set("sigma", spec.params.sigma);
    sp.set("drift", spec.drift.to_string());
    sp.set("s0", spec.s0);
    r.set("spec", sp);
    const auto body = to_json(c);
    for (const char* key : {"per_level_counts", "per_level_proportions", "total", "path_count", "path_proportion",
                            "boundary_uncertain", "per_level_uncertain"}) {
      r.set(key, *body.find(key));
    }
    const auto csv = census_csv(c);
    emit(s, r, &csv, content_hash(cache.snapshot()));
    return kOk;
  }
  if (cmd == "paths") {
    const auto spec = MarketSpec::make(s.N, s.H, s.sigma, drift, s.s0);
    const std::string w = s.word.empty() ? std::string(static_cast<std::size_t>(s.N), '+') : s.word;
    const auto path = stock_path(spec, cache, parse_word(w), static_cast<std::int64_t>(w.size()));
    auto r = Json::object();
    r.set("word", w);
    r.set("prices", Json::array_of(path.prices));
    r.set("positivity_violations", Json::array_of(path.positivity_violations));
    CsvTable csv;
    csv.columns = {"n", "S"};
    for (std::size_t i = 0; i < path.prices.size(); ++i) csv.add_row({cell(static_cast<std::int64_t>(i)), cell(path.prices[i])});
    emit(s, r, &csv, content_hash(cache.snapshot()));
    return kOk;
  }
  if (cmd == "mc-limit") {
    const auto e = limit_proportion(params, s.mc());
    const auto rb = regime_bound(params);
    auto r = to_json(e);
    r.set("sum_rho_sq", rb.sum_rho_sq);
    r.set("tchebysheff_ceiling", rb.tchebysheff_ceiling);
    r.set("paley_zygmund_floor", rb.paley_zygmund_floor);
    CsvTable csv;
    csv.columns = {"p_hat", "stderr", "ci_low", "ci_high", "samples", "K", "seed", "bias_low", "bias_high", "surrogate_bound"};
    csv.add_row({cell(e.p_hat), cell(e.stderr_), cell(e.ci_low), cell(e.ci_high), cell(e.samples), cell(e.K), cell(e.seed),
                 cell(e.bias_low), cell(e.bias_high), cell(e.surrogate_bound)});
    emit(s, r, &csv, content_hash(cache.snapshot()));
    return kOk;
  }
  if (cmd == "mc-level") {
    const LevelMode mode = s.mode == "exact" ? LevelMode::exact : s.mode == "sample" ? LevelMode::sample : LevelMode::automatic;
    const auto e = finite_level_proportion(*cache.get(params, s.n), s.offset, s.mc(), mode, s.strict);
    auto r = to_json(e);
    r.set("n", s.n);
    CsvTable csv;
    csv.columns = {"n", "p_hat", "stderr", "ci_low", "ci_high", "samples", "interval"};
    csv.add_row({cell(s.n), cell(e.p_hat), cell(e.stderr_), cell(e.ci_low), cell(e.ci_high), cell(e.samples), e.interval});
    emit(s, r, &csv, content_hash(cache.snapshot()));
    return kOk;
  }
  if (cmd == "hc") {
    const auto c = solve_critical_hurst(s.tol);
    auto r = Json::object();
    r.set("h_c", c.h_c);
    r.set("H_c", c.H_c);
    r.set("sum_at_root", c.sum_at_root);
    r.set("residual", c.residual);
    r.set("iterations", c.iterations);
    CsvTable csv;
    csv.columns = {"h_c", "H_c", "residual", "iterations"};
    csv.add_row({cell(c.h_c), cell(c.H_c), cell(c.residual), cell(static_cast<std::int64_t>(c.iterations))});
    emit(s, r, &csv, content_hash(cache.snapshot()));
    return kOk;
  }
  if (cmd == "charfn") {
    std::vector<double> vs = s.v;
    if (vs.empty()) {
      for (int i = 0; i <= 20; ++i) vs.push_back(0.25 * i);
    }
    auto rows = Json::array();
    CsvTable csv;
    csv.columns = {"v", "F", "log_abs", "K", "remainder_bound"};
    for (double v : vs) {
      const auto f = characteristic_function(params, v, s.cf_tol);
      auto row = Json::object();
      row.set("v", v);
      row.set("F", f.value);
      row.set("log_abs", f.log_abs);
      row.set("K", f.K);
      row.set("remainder_bound", f.remainder_bound);
      rows.push(row);
      csv.add_row({cell(v), cell(f.value), cell(f.log_abs), cell(f.K), cell(f.remainder_bound)});
    }
    auto r = Json::object();
    r.set("values", rows);
    if (s.fit) {
      const auto fit = fit_decay(params, s.v0);
      auto jf = Json::object();
      jf.set("exponent", fit.exponent);
      jf.set("expected_exponent", fit.expected_exponent);
      jf.set("theta", fit.theta);
      r.set("decay_fit", jf);
    }
    emit(s, r, &csv, content_hash(cache.snapshot()));
    return kOk;
  }
  if (cmd == "reach") {
    const auto len = static_cast<std::int64_t>(s.prefix.size());
    const int dir = s.direction == "up" ? 1 : -1;
    ReachContext ctx(params, drift, std::max<std::int64_t>(len, 1), cfg);
    const auto n = monotone_reach(ctx, parse_word(s.prefix), len, dir, s.n_max);
    auto r = Json::object();
    r.set("prefix", s.prefix);
    r.set("direction", s.direction);
    CsvTable csv;
    csv.columns = {"prefix", "direction", "n", "level", "node_word"};
    if (n) {
      const auto node = reach_node(parse_word(s.prefix), len, dir, *n);
      r.set("n", *n);
      r.set("level", node.level);
      r.set("node_word", word_text(node.word, node.level - 1));
      csv.add_row({s.prefix, s.direction, cell(*n), cell(node.level), word_text(node.word, node.level - 1)});
    } else {
      r.set("n", nullptr);
      csv.add_row({s.prefix, s.direction, "", "", ""});
    }
    emit(s, r, &csv, content_hash(cache.snapshot()));
    return kOk;
  }
  if (cmd == "convergence") {
    const double lim = limit_variance(params);
    const auto mc = s.mc();
    auto rows = Json::array();
    CsvTable csv;
    csv.columns = {"n", "split_index", "var_bar", "var_hat", "var_total", "var_limit", "var_hat_rel_err",
                   "exceedance", "exceedance_stderr"};
    for (auto n : s.levels) {
      const auto t = cache.get(params, n);
      const auto sv = split_variances(*t);
      const auto e = finite_level_proportion(*t, 0.0, mc, LevelMode::automatic, true);
      auto row = Json::object();
      row.set("n", n);
      row.set("split_index", sv.split_index);
      row.set("var_bar", sv.var_bar);
      row.set("var_hat", sv.var_hat);
      row.set("var_total", sv.total);
      row.set("var_limit", lim);
      row.set("exceedance", to_json(e));
      rows.push(row);
      csv.add_row({cell(n), cell(sv.split_index), cell(sv.var_bar), cell(sv.var_hat), cell(sv.total), cell(lim),
                   cell(std::abs(sv.var_hat - lim) / lim), cell(e.p_hat), cell(e.stderr_)});
    }
    emit(s, rows, &csv, content_hash(cache.snapshot()));
    return kOk;
  }
  if (cmd == "verify") {
    VerifyOptions opt;
    opt.perturb = s.perturb;
    opt.threads = s.threads;
    opt.seed = s.seed;
    opt.quad = cfg;
    const auto results = run_verify(opt);
    CsvTable csv;
    csv.columns = {"name", "pass", "measured", "threshold"};
    bool all = true;
    for (const auto& r : results) {
      csv.add_row({r.name, r.pass ? "true" : "false", cell(r.measured), cell(r.threshold)});
      all = all && r.pass;
    }
    emit(s, to_json(results), &csv, content_hash(cache.snapshot()));
    return all ? kOk : kVerifyFailed;
  }
  throw DomainError("unknown command '" + cmd + "'");
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  CLI::App app{"Fractional binary market laboratory: coefficients, arbitrage censuses and limit diagnostics."};
  app.footer(kExitHelp);
  app.require_subcommand(1);
  app.fallthrough();

  auto env = [](const std::string& name) {
    std::string e = "FBARB_";
    for (char c : name) e += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return e;
  };
  auto opt = [&](CLI::App* a, const std::string& name, auto& var, const std::string& help) {
    return a->add_option("--" + name, var, help)->envname(env(name))->capture_default_str();
  };

  opt(&app, "H", s.H, "Hurst parameter in (1/2, 1)")->check(CLI::Range(0.5, 1.0));
  opt(&app, "sigma", s.sigma, "volatility > 0")->check(CLI::PositiveNumber);
  opt(&app, "N", s.N, "number of periods")->check(CLI::Range(std::int64_t{1}, std::int64_t{1} << 40));
  opt(&app, "drift", s.drift, "drift a(t): zero | const:c | poly:c0,c1,...");
  opt(&app, "s0", s.s0, "initial price > 0")->check(CLI::PositiveNumber);
  opt(&app, "seed", s.seed, "Monte Carlo seed");
  opt(&app, "samples", s.samples, "Monte Carlo sample count")->check(CLI::PositiveNumber);
  opt(&app, "quad-abs-tol", s.quad_abs_tol, "quadrature absolute tolerance")->check(CLI::PositiveNumber);
  opt(&app, "quad-rel-tol", s.quad_rel_tol, "quadrature relative tolerance")->check(CLI::PositiveNumber);
  opt(&app, "max-subdivisions", s.max_subdivisions, "quadrature subdivision limit")->check(CLI::PositiveNumber);
  opt(&app, "tail-sd-tol", s.tail_sd_tol, "tail width allowance for the bias window (0: 1e-4 g_H)")->check(CLI::NonNegativeNumber);
  opt(&app, "confidence", s.confidence, "confidence level of intervals")->check(CLI::Range(0.0, 1.0));
  opt(&app, "head-terms", s.head_terms, "exact Rademacher terms of the limit sampler (multiple of 128)");
  opt(&app, "format", s.format, "output format")->check(CLI::IsMember({"json", "csv"}));
  opt(&app, "output", s.output, "output file ('-' for stdout)");
  opt(&app, "threads", s.threads, "worker threads (never changes results)")->check(CLI::PositiveNumber);

  auto* coeffs = app.add_subcommand("coeffs", "coefficient tables j_n(i), g_n for n = 1..N");
  auto* cen = app.add_subcommand("census", "exact arbitrage census of the N-period market");
  opt(cen, "cap", s.cap, "maximal N for enumeration");
  auto* paths = app.add_subcommand("paths", "stock price trajectory along a sign word");
  opt(paths, "word", s.word, "signs xi_1..xi_len as +/- (length N or N-1; default all +)");
  auto* mcl = app.add_subcommand("mc-limit", "Monte Carlo estimate of P(|Y_H| > g_H)");
  auto* mcv = app.add_subcommand("mc-level", "proportion P(|Y_n + offset| >= g_n) at one level");
  opt(mcv, "n", s.n, "level")->check(CLI::PositiveNumber);
  opt(mcv, "offset", s.offset, "scaled drift offset a_n N^H");
  opt(mcv, "mode", s.mode, "auto | exact | sample")->check(CLI::IsMember({"auto", "exact", "sample"}));
  mcv->add_flag("--strict", s.strict, "count |Y + offset| > g_n instead of >=");
  auto* hc = app.add_subcommand("hc", "critical Hurst parameter");
  opt(hc, "tol", s.tol, "residual tolerance")->check(CLI::PositiveNumber);
  auto* cf = app.add_subcommand("charfn", "characteristic function of Y_H");
  opt(cf, "v", s.v, "evaluation points (default 0, 0.25, ..., 5)")->delimiter(',');
  opt(cf, "tol", s.cf_tol, "log remainder tolerance")->check(CLI::PositiveNumber);
  cf->add_flag("--fit", s.fit, "fit the decay exponent on [v0, 10 v0]");
  opt(cf, "v0", s.v0, "left end of the decay fit window")->check(CLI::PositiveNumber);
  auto* reach = app.add_subcommand("reach", "first arbitrage point reached by monotone moves");
  opt(reach, "prefix", s.prefix, "sign prefix xi_1..xi_{k-1} as +/-");
  opt(reach, "direction", s.direction, "up | down")->check(CLI::IsMember({"up", "down"}));
  opt(reach, "n-max", s.n_max, "search limit")->check(CLI::PositiveNumber);
  auto* conv = app.add_subcommand("convergence", "split variances and exceedance frequencies over levels");
  opt(conv, "levels", s.levels, "levels n")->delimiter(',');
  auto* ver = app.add_subcommand("verify", "run the property suite");
  opt(ver, "perturb", s.perturb, "relative perturbation of the stored golden coefficient");
  (void)coeffs;
  (void)mcl;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }
  s.command = app.get_subcommands().front()->get_name();

  try {
    return run_command(s);
  } catch (const OutputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnwritable;
  } catch (const CapExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCapExceeded;
  } catch (const NonConvergence& e) {
    std::cerr << "error: " << e.what() << " (best estimate " << format_double(e.best_estimate()) << ", error "
              << format_double(e.achieved_error()) << ")\n";
    return kNonConvergence;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
}
