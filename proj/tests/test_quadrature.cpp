#include <cmath>
#include <numbers>

#include "catch_amalgamated.hpp"
#include "fbarb/quadrature.hpp"

using namespace fbarb;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("polynomials are exact", "[quadrature]") {
  const auto r = integrate([](double x) { return 3 * x * x + 2 * x + 1; }, 0.0, 2.0, {});
  CHECK_THAT(r.value, WithinRel(14.0, 1e-15));
  CHECK(r.converged);
  CHECK(r.subdivisions <= 1);
}

TEST_CASE("smooth integrands meet the requested tolerance", "[quadrature]") {
  QuadratureConfig cfg;
  cfg.abs_tol = 1e-13;
  cfg.rel_tol = 1e-13;
  const auto r = integrate([](double x) { return std::exp(-x * x); }, -3.0, 3.0, cfg);
  CHECK_THAT(r.value, WithinAbs(std::sqrt(std::numbers::pi) * std::erf(3.0), 1e-13));
  const auto s = integrate([](double x) { return std::sin(20 * x); }, 0.0, std::numbers::pi / 20, cfg);
  CHECK_THAT(s.value, WithinAbs(0.1, 1e-13));
}

TEST_CASE("reported error covers the true error", "[quadrature]") {
  QuadratureConfig cfg;
  cfg.abs_tol = 1e-6;
  cfg.rel_tol = 1e-6;
  const auto r = integrate([](double x) { return 1.0 / (1e-3 + x * x); }, -1.0, 1.0, cfg);
  const double exact = 2.0 * std::atan(1.0 / std::sqrt(1e-3)) / std::sqrt(1e-3);
  CHECK(std::abs(r.value - exact) <= r.error);
}

TEST_CASE("algebraic endpoint singularities", "[quadrature]") {
  QuadratureConfig cfg;
  cfg.abs_tol = 1e-12;
  cfg.rel_tol = 1e-12;
  for (double lam : {-0.45, -0.25, 0.1, 0.3}) {
    const auto left = integrate_algebraic([lam](double x) { return std::pow(x, lam); }, 0.0, 1.0, {lam},
                                          EndpointExponent::smooth(), cfg);
    CHECK_THAT(left.value, WithinRel(1.0 / (lam + 1.0), 1e-11));
    // Beta integral with nonsmooth behaviour at both ends.
    const double mu = 0.35;
    const auto both = integrate_algebraic([lam, mu](double x) { return std::pow(x, lam) * std::pow(1 - x, mu); },
                                          0.0, 1.0, {lam}, {mu}, cfg);
    const double beta = std::tgamma(lam + 1) * std::tgamma(mu + 1) / std::tgamma(lam + mu + 2);
    CHECK_THAT(both.value, WithinRel(beta, 1e-11));
  }
}

TEST_CASE("singular integrand without substitution converges more slowly", "[quadrature]") {
  QuadratureConfig cfg;
  cfg.abs_tol = 1e-10;
  cfg.rel_tol = 1e-10;
  auto f = [](double x) { return std::pow(x, -0.4); };
  const auto plain = try_integrate(f, 0.0, 1.0, cfg);
  const auto mapped = integrate_algebraic(f, 0.0, 1.0, {-0.4}, EndpointExponent::smooth(), cfg);
  CHECK(mapped.evaluations < plain.evaluations);
  CHECK_THAT(mapped.value, WithinRel(1.0 / 0.6, 1e-10));
}

TEST_CASE("nonconvergence carries the best estimate", "[quadrature]") {
  QuadratureConfig cfg;
  cfg.abs_tol = 1e-15;
  cfg.rel_tol = 1e-15;
  cfg.max_subdivisions = 3;
  auto f = [](double x) { return std::sin(1.0 / (x + 1e-3)); };
  const auto r = try_integrate(f, 0.0, 1.0, cfg);
  CHECK_FALSE(r.converged);
  try {
    integrate(f, 0.0, 1.0, cfg, "oscillatory");
    FAIL("expected NonConvergence");
  } catch (const NonConvergence& e) {
    CHECK(e.best_estimate() == r.value);
    CHECK(e.achieved_error() == r.error);
    CHECK(std::string(e.what()).find("oscillatory") != std::string::npos);
  }
}

TEST_CASE("degenerate intervals and invalid configurations", "[quadrature]") {
  CHECK(integrate_algebraic([](double) { return 1.0; }, 1.0, 1.0, {-0.3}, {-0.3}, {}).value == 0.0);
  CHECK_THROWS_AS(integrate_algebraic([](double) { return 1.0; }, 1.0, 0.0, {-0.3}, {-0.3}, {}), DomainError);
  QuadratureConfig bad;
  bad.abs_tol = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = {};
  bad.max_subdivisions = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("config digest distinguishes tolerances", "[quadrature]") {
  QuadratureConfig a, b;
  CHECK(a.digest() == b.digest());
  b.rel_tol = 1e-10;
  CHECK(a.digest() != b.digest());
  b = {};
  b.max_subdivisions = 100;
  CHECK(a.digest() != b.digest());
}
