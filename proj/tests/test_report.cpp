#include <charconv>
#include <random>

#include "catch_amalgamated.hpp"
#include "fbarb/report.hpp"

using namespace fbarb;

TEST_CASE("doubles print in shortest round-trip form", "[report]") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  CHECK(format_double(std::nan("")) == "nan");
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 10000; ++k) {
    const double v = u(gen) * std::pow(10.0, static_cast<int>(gen() % 40) - 20);
    const auto s = format_double(v);
    double back = 0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    REQUIRE(back == v);
  }
}

TEST_CASE("JSON objects keep insertion order and escape strings", "[report]") {
  auto j = Json::object();
  j.set("b", 1);
  j.set("a", "x\"y\n");
  j.set("c", Json::array_of(std::vector<double>{0.5, 2}));
  j.set("b", 3);
  CHECK(j.dump(0) == R"({"b":3,"a":"x\"y\n","c":[0.5,2]})");
  CHECK(j.dump() == "{\n  \"b\": 3,\n  \"a\": \"x\\\"y\\n\",\n  \"c\": [0.5, 2]\n}");
  REQUIRE(j.find("c") != nullptr);
  CHECK(j.find("zz") == nullptr);
  auto nested = Json::array();
  nested.push(Json::object().set("k", true));
  nested.push(nullptr);
  CHECK(nested.dump(0) == R"([{"k":true},null])");
  CHECK(Json(std::numeric_limits<double>::infinity()).dump() == "null");
  CHECK(Json(std::uint64_t{18446744073709551615ULL}).dump() == "18446744073709551615");
  CHECK(Json("text").scalar_text() == "text");
  CHECK(Json(0.25).scalar_text() == "0.25");
}

TEST_CASE("CSV tables use a fixed dialect", "[report]") {
  CsvTable t;
  t.header = {{"command", "census"}, {"H", "0.75"}};
  t.columns = {"n", "v"};
  t.add_row({cell(std::int64_t{1}), cell(0.5)});
  t.add_row({cell(std::uint64_t{2}), cell(1e-20)});
  CHECK(t.dump() == "# command=census\n# H=0.75\nn,v\n1,0.5\n2,1e-20\n");
  CHECK_THROWS_AS(t.add_row({"1"}), ShapeMismatch);
}

TEST_CASE("census and coefficient reports", "[report]") {
  CoefficientCache cache;
  const auto spec = MarketSpec::make(6, 0.9);
  const auto c = census(spec, cache);
  const auto csv = census_csv(c).dump();
  CHECK(csv.starts_with("n,count,proportion,uncertain\n1,0,0,0\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  const auto j = to_json(c);
  CHECK(j.find("path_count")->dump() == std::to_string(c.path_count));
  CHECK(j.dump(0).starts_with(R"({"per_level_counts":[0,)"));

  const auto coeffs = coefficient_csv(cache.snapshot()).dump();
  // 6 g rows plus 0+1+...+5 j rows, and the header line
  CHECK(std::count(coeffs.begin(), coeffs.end(), '\n') == 1 + 6 + 15);
  CHECK(coeffs.find("\ng,1,,") != std::string::npos);
  CHECK(to_json(*cache.get(spec.params, 3)).find("j")->dump(0).starts_with("["));
}

TEST_CASE("estimate JSON carries the bias window only for sampled estimates", "[report]") {
  McEstimate e = proportion_estimate(40, 1000, 0.99);
  e.delta = 1e-3;
  CHECK(to_json(e).find("bias_window") != nullptr);
  CHECK(to_json(e).find("generator")->scalar_text() == "philox4x32-10");
  e.exact = true;
  CHECK(to_json(e).find("bias_window") == nullptr);
}

TEST_CASE("content hash tracks table contents", "[report]") {
  CoefficientCache a, b;
  const auto p = HurstParams::make(0.75);
  for (std::int64_t n = 1; n <= 5; ++n) {
    a.get(p, n);
    b.get(p, 6 - n);
  }
  CHECK(content_hash(a.snapshot()) == content_hash(b.snapshot()));
  b.get(p, 6);
  CHECK(content_hash(a.snapshot()) != content_hash(b.snapshot()));
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}
