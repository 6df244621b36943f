#pragma once

// Deterministic report output: an insertion-ordered JSON value with shortest
// round-trip float formatting, a CSV table with a commented header block, and a
// content hash of the coefficient tables a run used.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fbarb/asymptotics.hpp"
#include "fbarb/coefficients.hpp"
#include "fbarb/market.hpp"

namespace fbarb {

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Minimal JSON value with insertion-ordered objects and shortest-form doubles.
/// Copies share their containers; build a document before handing it out.
class Json {
 public:
  using Array = std::vector<Json>;
  using Object = std::vector<std::pair<std::string, Json>>;

  Json() : v_(nullptr) {}
  Json(std::nullptr_t) : v_(nullptr) {}
  Json(bool b) : v_(b) {}
  Json(int i) : v_(static_cast<std::int64_t>(i)) {}
  Json(long i) : v_(static_cast<std::int64_t>(i)) {}
  Json(long long i) : v_(static_cast<std::int64_t>(i)) {}
  Json(unsigned i) : v_(static_cast<std::uint64_t>(i)) {}
  Json(unsigned long i) : v_(static_cast<std::uint64_t>(i)) {}
  Json(unsigned long long i) : v_(static_cast<std::uint64_t>(i)) {}
  Json(double d) : v_(d) {}
  Json(const char* s) : v_(std::string(s)) {}
  Json(std::string s) : v_(std::move(s)) {}
  Json(Array a) : v_(std::make_shared<Array>(std::move(a))) {}
  Json(Object o) : v_(std::make_shared<Object>(std::move(o))) {}

  static Json object() { return Json(Object{}); }
  static Json array() { return Json(Array{}); }

  template <class T>
  static Json array_of(const std::vector<T>& xs) {
    Array a;
    a.reserve(xs.size());
    for (const auto& x : xs) a.emplace_back(x);
    return Json(std::move(a));
  }

  /// Appends a key to an object (keys keep insertion order).
  Json& set(std::string key, Json value) {
    auto& o = *std::get<std::shared_ptr<Object>>(v_);
    for (auto& [k, v] : o) {
      if (k == key) {
        v = std::move(value);
        return *this;
      }
    }
    o.emplace_back(std::move(key), std::move(value));
    return *this;
  }

  Json& push(Json value) {
    std::get<std::shared_ptr<Array>>(v_)->push_back(std::move(value));
    return *this;
  }

  const Json* find(const std::string& key) const {
    if (auto* o = std::get_if<std::shared_ptr<Object>>(&v_)) {
      for (const auto& [k, v] : **o) {
        if (k == key) return &v;
      }
    }
    return nullptr;
  }

  std::string dump(int indent = 2) const {
    std::string out;
    write(out, indent, 0);
    return out;
  }

  /// Scalar text used in CSV header comments.
  std::string scalar_text() const {
    if (const auto* s = std::get_if<std::string>(&v_)) return *s;
    return dump(0);
  }

 private:
  std::variant<std::nullptr_t, bool, std::int64_t, std::uint64_t, double, std::string, std::shared_ptr<Array>,
               std::shared_ptr<Object>>
      v_;

  static void write_string(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out += buf;
          } else {
            out += c;
          }
      }
    }
    out += '"';
  }

  static void newline(std::string& out, int indent, int depth) {
    if (indent <= 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * depth), ' ');
  }

  void write(std::string& out, int indent, int depth) const {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, std::nullptr_t>) {
            out += "null";
          } else if constexpr (std::is_same_v<T, bool>) {
            out += x ? "true" : "false";
          } else if constexpr (std::is_same_v<T, std::int64_t> || std::is_same_v<T, std::uint64_t>) {
            out += std::to_string(x);
          } else if constexpr (std::is_same_v<T, double>) {
            out += std::isfinite(x) ? format_double(x) : "null";
          } else if constexpr (std::is_same_v<T, std::string>) {
            write_string(out, x);
          } else if constexpr (std::is_same_v<T, std::shared_ptr<Array>>) {
            if (x->empty()) {
              out += "[]";
              return;
            }
            // Arrays of scalars stay on one line.
            bool flat = true;
            for (const auto& e : *x) flat = flat && !e.is_container();
            out += '[';
            for (std::size_t i = 0; i < x->size(); ++i) {
              if (i) out += indent > 0 && flat ? ", " : ",";
              if (!flat) newline(out, indent, depth + 1);
              (*x)[i].write(out, indent, depth + 1);
            }
            if (!flat) newline(out, indent, depth);
            out += ']';
          } else {
            if (x->empty()) {
              out += "{}";
              return;
            }
            out += '{';
            for (std::size_t i = 0; i < x->size(); ++i) {
              if (i) out += ',';
              newline(out, indent, depth + 1);
              write_string(out, (*x)[i].first);
              out += indent > 0 ? ": " : ":";
              (*x)[i].second.write(out, indent, depth + 1);
            }
            newline(out, indent, depth);
            out += '}';
          }
        },
        v_);
  }

  bool is_container() const {
    return std::holds_alternative<std::shared_ptr<Array>>(v_) || std::holds_alternative<std::shared_ptr<Object>>(v_);
  }
};

/// Comma-separated table with `# key=value` header lines, LF endings and no
/// locale-dependent formatting.
struct CsvTable {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> r) {
    if (r.size() != columns.size()) throw ShapeMismatch("CsvTable: row width does not match the columns");
    rows.push_back(std::move(r));
  }

  std::string dump() const {
    std::string out;
    for (const auto& [k, v] : header) out += "# " + k + "=" + v + "\n";
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(columns);
    for (const auto& r : rows) line(r);
    return out;
  }
};

inline std::string cell(double v) { return format_double(v); }
inline std::string cell(std::int64_t v) { return std::to_string(v); }
inline std::string cell(std::uint64_t v) { return std::to_string(v); }

/// FNV-1a over every table in key order: (H, sigma, n, j..., j_err..., g, g_err).
inline std::uint64_t content_hash(const std::vector<std::shared_ptr<const CoefficientTable>>& tables) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFFU;
      h *= 1099511628211ULL;
    }
  };
  auto mixd = [&mix](double d) { mix(std::bit_cast<std::uint64_t>(d)); };
  for (const auto& t : tables) {
    mixd(t->H);
    mixd(t->sigma);
    mix(static_cast<std::uint64_t>(t->n));
    for (double v : t->j) mixd(v);
    for (double v : t->j_err) mixd(v);
    mixd(t->g);
    mixd(t->g_err);
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// --- domain objects to JSON / CSV -------------------------------------------

inline Json to_json(const McEstimate& e) {
  auto j = Json::object();
  j.set("p_hat", e.p_hat);
  j.set("stderr", e.stderr_);
  j.set("ci", Json::array_of(std::vector<double>{e.ci_low, e.ci_high}));
  j.set("confidence", e.confidence);
  j.set("interval", e.interval);
  j.set("samples", e.samples);
  j.set("K", e.K);
  j.set("seed", e.seed);
  j.set("generator", e.generator);
  if (!e.exact) {
    auto bw = Json::object();
    bw.set("delta", e.delta);
    bw.set("low", e.bias_low);
    bw.set("high", e.bias_high);
    j.set("bias_window", bw);
    j.set("tail_sd", e.tail_sd);
    j.set("surrogate_bound", e.surrogate_bound);
  }
  return j;
}

inline Json to_json(const ArbitrageCensus& c) {
  auto j = Json::object();
  j.set("per_level_counts", Json::array_of(c.per_level_counts));
  j.set("per_level_proportions", Json::array_of(c.per_level_proportions));
  j.set("total", c.total);
  j.set("path_count", c.path_count);
  j.set("path_proportion", c.path_proportion());
  j.set("boundary_uncertain", c.boundary_uncertain);
  j.set("per_level_uncertain", Json::array_of(c.per_level_uncertain));
  return j;
}

inline CsvTable census_csv(const ArbitrageCensus& c) {
  CsvTable t;
  t.columns = {"n", "count", "proportion", "uncertain"};
  for (std::size_t i = 0; i < c.per_level_counts.size(); ++i) {
    t.add_row({cell(static_cast<std::int64_t>(i + 1)), cell(c.per_level_counts[i]), cell(c.per_level_proportions[i]),
               cell(c.per_level_uncertain[i])});
  }
  return t;
}

/// Coefficient dump ordered by (n, i); g rows carry an empty i.
inline CsvTable coefficient_csv(const std::vector<std::shared_ptr<const CoefficientTable>>& tables) {
  CsvTable t;
  t.columns = {"kind", "n", "i", "value", "err"};
  for (const auto& tab : tables) {
    for (std::size_t i = 0; i < tab->j.size(); ++i) {
      t.add_row({"j", cell(tab->n), cell(static_cast<std::int64_t>(i + 1)), cell(tab->j[i]), cell(tab->j_err[i])});
    }
    t.add_row({"g", cell(tab->n), "", cell(tab->g), cell(tab->g_err)});
  }
  return t;
}

inline Json to_json(const CoefficientTable& t) {
  auto j = Json::object();
  j.set("n", t.n);
  j.set("j", Json::array_of(t.j));
  j.set("j_err", Json::array_of(t.j_err));
  j.set("g", t.g);
  j.set("g_err", t.g_err);
  j.set("split_index", t.split_index);
  j.set("turning_point", t.turning_point);
  return j;
}

}  // namespace fbarb
