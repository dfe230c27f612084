// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>

#include "corrtrans/ode.hpp"
#include "corrtrans/specfun.hpp"
#include "oracles.hpp"

using namespace corrtrans;
using Catch::Approx;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("normal_pdf values and symmetry", "[specfun]") {
  CHECK_THAT(normal_pdf(0.0), WithinAbs(0.3989422804014327, 1e-15));
  CHECK_THAT(normal_pdf(1.6449), WithinAbs(0.1031, 1e-4));
  const double z = GENERATE(take(50, random(-10.0, 10.0)));
  CHECK(normal_pdf(z) == normal_pdf(-z));
  CHECK(normal_pdf(z) > 0.0);
  CHECK_THROWS_AS(normal_pdf(std::numeric_limits<double>::infinity()), DomainError);
  CHECK_THROWS_AS(normal_pdf(std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST_CASE("normal_cdf against an erfc oracle", "[specfun]") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK_THAT(1.0 - normal_cdf(1.0), WithinAbs(0.158655253931457, 1e-14));
  CHECK_THAT(1.0 - normal_cdf(1.0 / std::sqrt(2.0)), WithinAbs(0.239750061093477, 1e-14));
  CHECK(normal_cdf(-std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(normal_cdf(std::numeric_limits<double>::infinity()) == 1.0);
  CHECK_THROWS_AS(normal_cdf(std::numeric_limits<double>::quiet_NaN()), DomainError);

  for (int i = -800; i <= 800; ++i) {
    const double z = 0.01 * i;
    INFO("z = " << z);
    REQUIRE_THAT(normal_cdf(z), WithinAbs(oracle::normal_cdf(z), 1e-12));
  }
}

TEST_CASE("normal_cdf tails are relatively accurate", "[specfun]") {
  const double z = GENERATE(-30.0, -20.0, -12.0, -8.0, -5.0, -3.0, -2.5);
  CHECK_THAT(normal_cdf(z), WithinRel(oracle::normal_cdf(z), 1e-12));
  CHECK_THAT(normal_sf(-z), WithinRel(oracle::normal_sf(-z), 1e-12));
}

TEST_CASE("normal_cdf symmetry and monotonicity", "[specfun][property]") {
  const double z = GENERATE(take(200, random(-8.0, 8.0)));
  CHECK_THAT(normal_cdf(z) + normal_cdf(-z), WithinAbs(1.0, 1e-12));
  CHECK(normal_cdf(z + 1e-3) >= normal_cdf(z));
  CHECK_THAT(normal_sf(z), WithinAbs(1.0 - normal_cdf(z), 1e-15));
}

TEST_CASE("normal_quantile", "[specfun]") {
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK_THAT(normal_quantile(0.95), WithinAbs(oracle::bisection_quantile(0.95), 1e-12));
  CHECK_THAT(normal_quantile(0.99), WithinAbs(oracle::bisection_quantile(0.99), 1e-12));
  CHECK_THAT(normal_quantile(0.95), WithinAbs(1.64485, 1e-4));
  CHECK_THAT(normal_quantile(0.99), WithinAbs(2.32635, 1e-4));
  CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
  CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
  CHECK_THROWS_AS(normal_quantile(-0.1), DomainError);
  CHECK_THROWS_AS(normal_quantile(std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST_CASE("normal_quantile inverts normal_cdf", "[specfun][property]") {
  const double z = GENERATE(take(200, random(-6.0, 6.0)));
  CHECK_THAT(normal_quantile(normal_cdf(z)), WithinAbs(z, 1e-8));
  const double p = GENERATE(take(50, random(1e-10, 1.0 - 1e-10)));
  CHECK_THAT(normal_cdf(normal_quantile(p)), WithinAbs(p, 1e-12));
}

TEST_CASE("log_gamma matches the standard library", "[specfun]") {
  const double x = GENERATE(0.1, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 55.5, 170.0);
  CHECK_THAT(log_gamma(x), WithinAbs(std::lgamma(x), 1e-12 * std::max(1.0, std::abs(std::lgamma(x)))));
}

TEST_CASE("integrate_adaptive", "[specfun]") {
  CHECK_THAT(integrate_adaptive([](double r) { return r; }, 0.0, 1.0), WithinAbs(0.5, 1e-14));
  CHECK_THAT(integrate_adaptive([](double r) { return 2.0 * r / (1.0 - r * r); }, 0.0, 0.9),
             WithinAbs(-std::log(1.0 - 0.81), 1e-11));
  CHECK(integrate_adaptive([](double r) { return r; }, 0.3, 0.3) == 0.0);
  CHECK_THAT(integrate_adaptive([](double r) { return r; }, 1.0, 0.0), WithinAbs(-0.5, 1e-14));
  CHECK_THAT(integrate_adaptive([](double r) { return std::exp(-r * r); }, -3.0, 3.0),
             WithinAbs(std::sqrt(std::numbers::pi) * std::erf(3.0), 1e-12));

  SECTION("non-convergence is reported") {
    auto wild = [](double r) { return std::sin(1.0 / (r + 1e-9)); };
    CHECK_THROWS_AS(integrate_adaptive(wild, 0.0, 1.0, Tolerance{1e-15, 1e-15, 5}), NumericError);
  }
  SECTION("non-finite integrand is rejected") {
    CHECK_THROWS_AS(integrate_adaptive([](double r) { return 1.0 / r; }, 0.0, 1.0), NumericError);
  }
  SECTION("invalid tolerance") {
    CHECK_THROWS_AS(integrate_adaptive([](double r) { return r; }, 0.0, 1.0, Tolerance{0.0, 1e-10, 10}),
                    DomainError);
  }
}

TEST_CASE("gamma_ratio_endpoint", "[specfun]") {
  CHECK_THAT(gamma_ratio_endpoint(0.0), WithinAbs(1.0, 1e-14));
  CHECK_THAT(gamma_ratio_endpoint(1.0), WithinAbs(2.0 / 3.0, 1e-14));
  CHECK_THAT(gamma_ratio_endpoint(-0.5), WithinAbs(std::numbers::pi / 2.0, 1e-13));
  CHECK_THAT(gamma_ratio_endpoint(1.0),
             WithinAbs(oracle::quad([](double r) { return 1.0 - r * r; }, 0.0, 1.0), 1e-13));
  const double p = GENERATE(-0.9, -0.8152, -0.3, 0.25, 2.0, 7.5);
  CHECK_THAT(gamma_ratio_endpoint(p), WithinRel(oracle::endpoint(p), 1e-12));
  CHECK_THROWS_AS(gamma_ratio_endpoint(-1.0), DomainError);
}

TEST_CASE("gauss_2f1_half examples", "[specfun]") {
  CHECK(gauss_2f1_half(0.0, 0.3) == 1.0);
  CHECK_THAT(gauss_2f1_half(1.0, 0.25), WithinAbs(1.0 - 0.25 / 3.0, 1e-15));
  CHECK_THAT(gauss_2f1_half(1.0, 0.25),
             WithinAbs(oracle::quad([](double r) { return 1.0 - r * r; }, 0.0, 0.5) / 0.5, 1e-14));
  CHECK(gauss_2f1_half(-0.7, 0.0) == 1.0);
  CHECK_THROWS_AS(gauss_2f1_half(0.5, 1.0), DomainError);
  CHECK_THROWS_AS(gauss_2f1_half(0.5, -0.1), DomainError);
  CHECK_THROWS_AS(gauss_2f1_half(-1.0, 0.5), DomainError);
}

TEST_CASE("gauss_2f1_half: series and quadrature agree", "[specfun][property]") {
  const double p = GENERATE(-0.9, -0.5, 0.0, 0.5, 1.0, 3.0);
  const double x = GENERATE(0.01, 0.25, 0.81, 0.98);
  const double root = std::sqrt(x);
  const double integral = oracle::quad([p](double r) { return std::pow((1.0 - r) * (1.0 + r), p); }, 0.0, root);
  INFO("p = " << p << ", x = " << x);
  CHECK_THAT(gauss_2f1_half(p, x) * root, WithinAbs(integral, 1e-10));
  CHECK_THAT(gauss_2f1_half(p, x), WithinRel(oracle::hyp_2f1_half(p, x), 1e-10));
}

TEST_CASE("gauss_2f1_half approaches the endpoint value", "[specfun][property]") {
  const double p = GENERATE(0.5, 1.0, 2.0);
  const double x = 1.0 - 1e-12;
  CHECK_THAT(std::sqrt(x) * gauss_2f1_half(p, x), WithinAbs(gamma_ratio_endpoint(p), 1e-6));
}

TEST_CASE("Dormand-Prince integrator", "[specfun][ode]") {
  SECTION("exponential growth") {
    auto f = [](double, const ode::State<1>& y) { return ode::State<1>{y[0]}; };
    int calls = 0;
    const auto y = ode::integrate<1>(f, 0.0, ode::State<1>{1.0}, 2.0, Tolerance{1e-14, 1e-13, 10000},
                                     [&](double, const ode::State<1>&, double) { ++calls; });
    CHECK_THAT(y[0], WithinRel(std::exp(2.0), 1e-11));
    CHECK(calls >= 2);
  }
  SECTION("harmonic oscillator backwards in time") {
    auto f = [](double, const ode::State<2>& y) { return ode::State<2>{y[1], -y[0]}; };
    const auto y = ode::integrate<2>(f, 0.0, ode::State<2>{0.0, 1.0}, -3.0, Tolerance{1e-13, 1e-13, 10000},
                                     [](double, const ode::State<2>&, double) {});
    CHECK_THAT(y[0], WithinAbs(std::sin(-3.0), 1e-11));
    CHECK_THAT(y[1], WithinAbs(std::cos(-3.0), 1e-11));
  }
  SECTION("single step is fifth order") {
    auto f = [](double t, const ode::State<1>&) { return ode::State<1>{5.0 * std::pow(t, 4)}; };
    const auto y = ode::dopri_step<1>(f, 0.0, ode::State<1>{0.0}, 1.0);
    CHECK_THAT(y[0], WithinAbs(1.0, 1e-14));
  }
  SECTION("exhausted step budget is reported") {
    auto f = [](double, const ode::State<1>& y) { return ode::State<1>{y[0]}; };
    CHECK_THROWS_AS(ode::integrate<1>(f, 0.0, ode::State<1>{1.0}, 50.0, Tolerance{1e-15, 1e-15, 3},
                                      [](double, const ode::State<1>&, double) {}),
                    NumericError);
  }
}
