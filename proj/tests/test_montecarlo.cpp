// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "corrtrans/montecarlo.hpp"
#include "corrtrans/rng.hpp"
#include "oracles.hpp"

using namespace corrtrans;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

const double kZ05 = oracle::bisection_quantile(0.95);

bool same_table(const GridTable& a, const GridTable& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& x = a.rows[i];
    const auto& y = b.rows[i];
    if (x.transform != y.transform || x.cell.alpha != y.cell.alpha || x.cell.rho != y.cell.rho ||
        x.cell.n != y.cell.n || x.result.alpha_hats != y.result.alpha_hats || x.result.eps_mean != y.result.eps_mean ||
        x.result.eps_sd != y.result.eps_sd || x.result.eps_se != y.result.eps_se)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("splitmix64 and xoshiro256++ reference streams", "[rng]") {
  std::uint64_t state = 1234567;
  CHECK(splitmix64_next(state) == 6457827717110365317ULL);
  CHECK(splitmix64_next(state) == 3203168211198807973ULL);
  CHECK(splitmix64_next(state) == 9817491932198370423ULL);

  Xoshiro256pp g(42);
  CHECK(g() == 0xd0764d4f4476689fULL);
  CHECK(g() == 0x519e4174576f3791ULL);
  CHECK(g() == 0xfbe07cfb0c24ed8cULL);
  CHECK(g() == 0xb37d9f600cd835b8ULL);

  Xoshiro256pp g0(0);
  CHECK(g0() == 0x53175d61490b23dfULL);
  CHECK(g0() == 0x61da6f3dc380d507ULL);
}

TEST_CASE("derive_seed", "[rng]") {
  CHECK(derive_seed(0, 0, 0) == 0xe3158b3861932a9aULL);
  CHECK(derive_seed(20240601, 3, 7) == 0x2a2371d0fab7a503ULL);
  CHECK(derive_seed(1, 0, 1) != derive_seed(1, 1, 0));
  CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
}

TEST_CASE("uniform01 and normal pairs", "[rng][property]") {
  Xoshiro256pp g(derive_seed(3, 1, 4));
  double sum = 0.0;
  double sum2 = 0.0;
  constexpr int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const auto [a, b] = normal_pair(g);
    sum += a + b;
    sum2 += a * a + b * b;
  }
  CHECK(std::abs(sum / (2 * n)) <= 5.0 / std::sqrt(2.0 * n));
  CHECK(std::abs(sum2 / (2 * n) - 1.0) <= 5.0 * std::sqrt(2.0 / (2.0 * n)));
}

TEST_CASE("aggregate", "[montecarlo]") {
  const std::vector<double> two{0.05, 0.06};
  const CellResult r = aggregate(two, 0.05);
  CHECK_THAT(r.eps_mean, WithinAbs(0.1, 1e-12));
  REQUIRE(r.eps_sd.has_value());
  CHECK_THAT(*r.eps_sd, WithinAbs(0.141421, 1e-6));
  CHECK_THAT(*r.eps_se, WithinAbs(0.1, 1e-12));
  CHECK_THAT(r.alpha_hat_mean, WithinAbs(0.055, 1e-15));
  CHECK(r.alpha_hats == two);

  const std::vector<double> flat(5, 0.04);
  CHECK(*aggregate(flat, 0.05).eps_sd == 0.0);

  const CellResult one = aggregate(std::vector<double>{0.07}, 0.05);
  CHECK_THAT(one.eps_mean, WithinAbs(0.4, 1e-12));
  CHECK_FALSE(one.eps_sd.has_value());
  CHECK_FALSE(one.eps_se.has_value());

  CHECK_THROWS_AS(aggregate(std::vector<double>{}, 0.05), DomainError);
  CHECK_THROWS_AS(aggregate(std::vector<double>{1.2}, 0.05), DomainError);
}

TEST_CASE("aggregate statistics", "[montecarlo][property]") {
  const auto K = GENERATE(2, 3, 12);
  const double alpha = GENERATE(0.01, 0.05);
  Xoshiro256pp g(static_cast<std::uint64_t>(K) * 977 + static_cast<std::uint64_t>(alpha * 1000));
  std::vector<double> hats(static_cast<std::size_t>(K));
  for (auto& h : hats) h = 2.0 * alpha * g.uniform01();
  const CellResult r = aggregate(hats, alpha);
  double mean = 0.0;
  for (double h : hats) mean += h / alpha - 1.0;
  mean /= K;
  double ss = 0.0;
  for (double h : hats) ss += (h / alpha - 1.0 - mean) * (h / alpha - 1.0 - mean);
  CHECK_THAT(r.eps_mean, WithinAbs(mean, 1e-13));
  CHECK(*r.eps_sd >= 0.0);
  CHECK_THAT(*r.eps_sd, WithinAbs(std::sqrt(ss / (K - 1)), 1e-13));
  CHECK_THAT(*r.eps_se, WithinAbs(*r.eps_sd / std::sqrt(static_cast<double>(K)), 1e-15));
}

TEST_CASE("run_cell", "[montecarlo]") {
  const DependenceModel bvn = bvn_model();
  const DependenceModel sq = squarev_model();

  SECTION("N = 0 is rejected") {
    Xoshiro256pp g(1);
    CHECK_THROWS_AS(run_cell(bvn, identity_transform(), 0.05, 0.0, 10, 0, g), DomainError);
  }
  SECTION("no SquareV outcome rejects at rho = 0.9, n = 10") {
    Xoshiro256pp g(2);
    CHECK(run_cell(sq, identity_transform(), 0.05, 0.9, 10, 50000, g) == 0.0);
    CHECK(squarev_exact_rejection(0.9, 10, identity_transform(), 0.05) == 0.0);
  }
  SECTION("same seed, same cell") {
    Xoshiro256pp a(derive_seed(9, 4, 2));
    Xoshiro256pp b(derive_seed(9, 4, 2));
    const Transform t = make_transform(bvn, TransformKind::optimal, kZ05);
    CHECK(run_cell(bvn, t, 0.05, 0.5, 30, 5000, a) == run_cell(bvn, t, 0.05, 0.5, 30, 5000, b));
  }
  SECTION("shared samples across transforms") {
    const std::vector<Transform> ts{identity_transform(), fisher_transform()};
    Xoshiro256pp a(5);
    Xoshiro256pp b(5);
    const auto both = run_cell_multi(sq, ts, 0.05, 0.5, 40, 3000, a);
    CHECK(both[0] == run_cell(sq, ts[0], 0.05, 0.5, 40, 3000, b));
  }
}

TEST_CASE("run_cell under independence at large n", "[montecarlo][slow]") {
  Xoshiro256pp g(derive_seed(20240601, 0, 0));
  const double hat = run_cell(bvn_model(), identity_transform(), 0.05, 0.0, 10000, 100000, g);
  CHECK(std::abs(hat - 0.05007) <= 4.0 * std::sqrt(0.05 * 0.95 / 100000));
}

TEST_CASE("binomial sanity at rho = 0", "[montecarlo][slow]") {
  ExperimentGrid grid;
  grid.model = ModelKind::bvn;
  grid.alphas = {0.05};
  grid.rhos = {0.0};
  grid.ns = {10000};
  grid.N = 10000;
  grid.K = 3;
  grid.master_seed = 314159;
  grid.transforms = {TransformKind::identity};
  const GridTable table = run_grid(grid, 1);
  REQUIRE(table.rows.size() == 1);
  for (double hat : table.rows[0].result.alpha_hats)
    CHECK(std::abs(hat - 0.05) <= 6.0 * std::sqrt(0.05 * 0.95 / grid.N));
}

TEST_CASE("predicted_relative_error", "[montecarlo]") {
  CHECK_THAT(predicted_relative_error(ModelKind::bvn, TransformKind::fisher, 0.05, 0.9, 10000), WithinAbs(0.00928, 5e-6));
  // -Delta / (alpha sqrt(n)) with Delta = -c (2 z^2 + 1) phi(z), c = rho / (3 sqrt(1 - rho^2)).
  const double c = 0.5 / (3.0 * std::sqrt(0.75));
  const double phi = std::exp(-0.5 * kZ05 * kZ05) / std::sqrt(2.0 * std::numbers::pi);
  const double expected = c * (2.0 * kZ05 * kZ05 + 1.0) * phi / (0.05 * 100.0);
  CHECK_THAT(predicted_relative_error(ModelKind::squarev, TransformKind::fisher, 0.05, 0.5, 10000),
             WithinAbs(expected, 1e-12));
  CHECK_THAT(expected, WithinAbs(0.02545, 1e-5));
  for (ModelKind m : {ModelKind::bvn, ModelKind::squarev}) {
    CHECK(predicted_relative_error(m, TransformKind::optimal, 0.05, 0.5, 100) == 0.0);
    CHECK(predicted_relative_error(m, TransformKind::optimal, 0.01, 0.9, 10) == 0.0);
  }
  CHECK_THROWS_AS(predicted_relative_error(ModelKind::bvn, TransformKind::identity, 0.0, 0.5, 10), DomainError);
}

TEST_CASE("grid validation and enumeration", "[montecarlo]") {
  ExperimentGrid g;
  g.alphas = {0.01, 0.05};
  g.rhos = {0.0, 0.5, 0.9};
  g.ns = {10, 100};
  CHECK(g.cell_count() == 12);
  const auto cells = enumerate_cells(g);
  REQUIRE(cells.size() == 12);
  CHECK(cells[0].alpha == 0.01);
  CHECK(cells[1].n == 100);
  CHECK(cells[2].rho == 0.5);
  CHECK(cells[6].alpha == 0.05);
  CHECK_NOTHROW(g.validate());

  auto bad = g;
  bad.N = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = g;
  bad.K = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = g;
  bad.alphas = {0.5};
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = g;
  bad.rhos = {1.0};
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = g;
  bad.ns = {1};
  CHECK_THROWS_AS(bad.validate(), DomainError);
  CHECK_THROWS_AS(run_grid(bad, 1), DomainError);
}

TEST_CASE("empty grid gives an empty table", "[montecarlo]") {
  ExperimentGrid g;
  g.K = 4;
  const GridTable t = run_grid(g, 3);
  CHECK(t.rows.empty());
  CHECK(t.K == 4);
}

TEST_CASE("run_grid is independent of the thread count", "[montecarlo][property]") {
  ExperimentGrid g;
  g.model = GENERATE(ModelKind::bvn, ModelKind::squarev);
  g.alphas = {0.01, 0.05};
  g.rhos = {0.0, 0.5};
  g.ns = {10, 60};
  g.N = 500;
  g.K = 3;
  g.master_seed = 77;
  const GridTable one = run_grid(g, 1);
  const unsigned threads = GENERATE(2u, 4u, 7u);
  CHECK(same_table(one, run_grid(g, threads)));
  REQUIRE(one.rows.size() == g.cell_count() * 3);
  CHECK(one.rows[0].transform == TransformKind::identity);
  CHECK(one.rows[1].transform == TransformKind::fisher);
  CHECK(one.rows[2].transform == TransformKind::optimal);

  auto other = g;
  other.master_seed = 78;
  CHECK_FALSE(same_table(one, run_grid(other, 1)));
}

TEST_CASE("run_grid identifies the failing cell", "[montecarlo]") {
  // The numeric normal-model transform stops converging just short of
  // |rho| = 1, so a cell there fails inside its worker.
  ExperimentGrid g;
  g.model = ModelKind::bvn;
  g.alphas = {0.05};
  g.rhos = {0.0, 0.99995};
  g.ns = {10};
  g.N = 10;
  g.K = 2;
  g.transforms = {TransformKind::numeric};
  try {
    (void)run_grid(g, 2);
    FAIL("expected a NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK_THAT(msg, ContainsSubstring("rho=0.99995"));
    CHECK_THAT(msg, ContainsSubstring("n=10"));
    CHECK_THAT(msg, ContainsSubstring("worker="));
  }
}

TEST_CASE("Monte Carlo agrees with the exact SquareV oracle", "[montecarlo]") {
  ExperimentGrid g;
  g.model = ModelKind::squarev;
  g.alphas = {0.01, 0.05};
  g.rhos = {0.0, 0.5, 0.9};
  g.ns = {10, 50, 100};
  g.N = 20000;
  g.K = 4;
  g.master_seed = 2718;
  const GridTable table = run_grid(g, default_thread_count());
  const DependenceModel sq = squarev_model();
  for (const auto& row : table.rows) {
    const double z = oracle::bisection_quantile(1.0 - row.cell.alpha);
    const Transform t = make_transform(sq, row.transform, z);
    const double exact = squarev_exact_rejection(row.cell.rho, row.cell.n, t, row.cell.alpha);
    const double tol = 5.0 * std::sqrt(exact * (1.0 - exact) / static_cast<double>(g.N * g.K));
    INFO(to_string(row.transform) << " alpha = " << row.cell.alpha << " rho = " << row.cell.rho
                                  << " n = " << row.cell.n << " exact = " << exact);
    CHECK(std::abs(row.result.alpha_hat_mean - exact) <= tol);
  }
}
