#include "doctest.h"

#include "mpclab/alpha.hpp"
#include "mpclab/errors.hpp"
#include "mpclab/growth_bound.hpp"

#include <cmath>
#include <random>

using namespace mpclab;

namespace {

// Independent evaluation of the index: midpoint sum of 1/B on a fine grid, then the formula
// written out without expm1.
double oracle_integral(const std::vector<double>& b, double dt, double lo, double hi) {
  const int steps = 200000;
  const double h = (hi - lo) / steps;
  double sum = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double t = lo + (i + 0.5) * h;
    const auto n = static_cast<std::size_t>(std::ceil(t / dt));
    sum += h / b[std::max<std::size_t>(n, 1) - 1];
  }
  return sum;
}

double oracle_alpha(double i1, double i2) {
  return 1.0 - std::exp(-i1) * std::exp(-i2) / ((1.0 - std::exp(-i1)) * (1.0 - std::exp(-i2)));
}

GrowthBound random_bound(std::mt19937& rng, std::size_t n_star, double dt) {
  std::uniform_real_distribution<double> step(0.0, 0.3);
  std::vector<double> v(n_star);
  double acc = 0.05 + step(rng);
  for (auto& x : v) x = (acc += step(rng));
  return GrowthBound::from_values(dt, v);
}

}  // namespace

TEST_CASE("growth bound construction and lookup") {
  CHECK_THROWS_AS(GrowthBound(0.1, {}), ContractViolation);
  CHECK_THROWS_AS(GrowthBound(0.1, {{2.0, 0, true}, {1.0, 0, true}}), ContractViolation);
  CHECK_THROWS_AS(GrowthBound(0.1, {{0.0, 0, true}}), ContractViolation);
  const GrowthBound env = GrowthBound::from_values(1.0, {1.0, 3.0, 2.0, 4.0});
  CHECK(env.values() == std::vector<double>{1.0, 3.0, 3.0, 4.0});

  const GrowthBound b = GrowthBound::from_values(1.0, {1.0, 2.0, 3.0});
  CHECK(b(0.0) == 1.0);
  CHECK(b(0.5) == 1.0);
  CHECK(b(1.0) == 1.0);
  CHECK(b(1.0 + 1e-6) == 2.0);
  CHECK(b(3.0) == 3.0);
  try {
    (void)b(3.5);
    FAIL("expected CoverageExceeded");
  } catch (const CoverageExceeded& e) {
    CHECK(e.required_n_star() == 4);
  }
  CHECK(monotone_envelope({3.0, 1.0, 5.0}) == std::vector<double>{3.0, 3.0, 5.0});
}

TEST_CASE("integral of 1/B over plateaus") {
  const GrowthBound two = GrowthBound::constant(1.0, 10, 2.0);
  CHECK(inv_B_integral(two, 1.0, 4.0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(inv_B_integral(two, 2.5, 2.5) == 0.0);
  const GrowthBound ramp = GrowthBound::from_values(1.0, {1.0, 2.0, 3.0});
  CHECK(std::abs(inv_B_integral(ramp, 0.0, 3.0) - (1.0 + 0.5 + 1.0 / 3.0)) <= 1e-15);
  CHECK(std::abs(inv_B_integral(ramp, 0.5, 2.25) - (0.5 + 0.5 + 0.25 / 3.0)) <= 1e-15);
  CHECK_THROWS_AS(inv_B_integral(ramp, 0.0, 3.5), CoverageExceeded);
  CHECK_THROWS_AS(inv_B_integral(ramp, 2.0, 1.0), ContractViolation);

  std::mt19937 rng(2);
  const GrowthBound r = random_bound(rng, 30, 0.1);
  std::uniform_real_distribution<double> t(0.0, 3.0);
  for (int i = 0; i < 10; ++i) {
    double a = t(rng), c = t(rng);
    if (a > c) std::swap(a, c);
    CHECK(inv_B_integral(r, a, c) == doctest::Approx(oracle_integral(r.values(), 0.1, a, c)).epsilon(1e-6));
  }
}

TEST_CASE("constant-B closed forms") {
  const GrowthBound one = GrowthBound::constant(0.5, 40, 1.0);
  const double e = std::exp(1.0);
  const double closed = 1.0 - std::exp(-2.0) / ((1.0 - 1.0 / e) * (1.0 - 1.0 / e));
  const AlphaReport r = alpha_of(one, 2.0, 1.0);
  CHECK(std::abs(r.alpha - closed) <= 1e-12);
  CHECK(std::abs(r.alpha - 0.6613031) <= 1e-6);
  CHECK(std::abs(r.alpha - alpha_from_integrals(r.integral_delta_T, r.integral_Tmd_T)) <= 1e-12);

  for (double beta : {0.5, 1.0, 3.0})
    for (double T : {1.0, 2.5, 7.0})
      for (double frac : {0.1, 0.3, 0.5}) {
        const double d = frac * T;
        const GrowthBound b = GrowthBound::constant(0.5, 20, beta);
        const double want = 1.0 - std::exp(-(T - d) / beta) * std::exp(-d / beta) /
                                      ((1.0 - std::exp(-(T - d) / beta)) * (1.0 - std::exp(-d / beta)));
        CHECK(std::abs(alpha_of(b, T, d).alpha - want) <= 1e-12);
      }
}

TEST_CASE("alpha is symmetric in delta and T - delta") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const GrowthBound b = random_bound(rng, 50, 0.05);
    for (std::size_t m = 2; m <= 50; ++m) {
      const double T = 0.05 * static_cast<double>(m);
      for (std::size_t k = 1; k < m; ++k) {
        const double d = 0.05 * static_cast<double>(k);
        const double mirror = 0.05 * static_cast<double>(m - k);
        CHECK(std::abs(alpha_of(b, T, d).alpha - alpha_of(b, T, mirror).alpha) <= 1e-12);
      }
    }
  }
}

TEST_CASE("alpha is at most one and agrees with the independent oracle") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const GrowthBound b = random_bound(rng, 40, 0.05);
    const double T = 0.1 + 1.9 * u(rng);
    const double d = T * (0.02 + 0.96 * u(rng));
    const AlphaReport r = alpha_of(b, T, d);
    CHECK(r.alpha <= 1.0);
    const double i1 = oracle_integral(b.values(), 0.05, d, T);
    const double i2 = oracle_integral(b.values(), 0.05, T - d, T);
    CHECK(r.alpha == doctest::Approx(oracle_alpha(i1, i2)).epsilon(1e-5));
  }
}

TEST_CASE("a smaller growth bound never lowers alpha") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> shrink(0.5, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const GrowthBound big = random_bound(rng, 30, 0.1);
    std::vector<double> v = big.values();
    for (auto& x : v) x *= shrink(rng);
    const GrowthBound small = GrowthBound::from_values(0.1, v);  // envelope of values below big stays below big
    for (std::size_t m = 2; m <= 30; ++m)
      for (std::size_t k = 1; k < m; ++k) {
        const double T = 0.1 * static_cast<double>(m), d = 0.1 * static_cast<double>(k);
        CHECK(alpha_of(small, T, d).alpha >= alpha_of(big, T, d).alpha - 1e-12);
      }
  }
}

TEST_CASE("alpha diverges for vanishing control horizons") {
  const GrowthBound one = GrowthBound::constant(0.5, 40, 1.0);
  const std::vector<double> deltas{0.5, 0.05, 0.005};
  const auto a = divergence_probe(one, 2.0, deltas);
  CHECK(a[0] > a[1]);
  CHECK(a[1] > a[2]);
  CHECK(a[2] < -10.0);
  CHECK(alpha_of(one, 2.0, 1e-4).alpha < -1e3);
  const std::vector<double> axis{1.0};
  CHECK(divergence_probe(one, 2.0, axis)[0] == alpha_of(one, 2.0, 1.0).alpha);
  CHECK_THROWS_AS(alpha_of(one, 2.0, 2.0), ContractViolation);
  CHECK_THROWS_AS(alpha_from_integrals(0.0, 1.0), DegenerateHorizon);
}

TEST_CASE("alpha approaches one for long horizons") {
  const GrowthBound one = GrowthBound::constant(0.5, 40, 1.0);
  CHECK(alpha_of(one, 5.0, 0.5).alpha > alpha_of(one, 2.0, 0.5).alpha);
  CHECK(alpha_of(one, 20.0, 0.5).alpha > 0.99);
}

TEST_CASE("minimal stabilizing horizon") {
  const GrowthBound one = GrowthBound::constant(0.5, 10, 1.0);
  const double a10 = 1.0 - std::exp(-1.0) / std::pow(1.0 - std::exp(-0.5), 2);
  const double a15 = 1.0 - std::exp(-1.5) / ((1.0 - std::exp(-1.0)) * (1.0 - std::exp(-0.5)));
  CHECK(a10 == doctest::Approx(-1.376).epsilon(1e-3));
  CHECK(a15 == doctest::Approx(0.103).epsilon(1e-2));
  const HorizonSearch r = min_stabilizing_horizon(one, 0.5, 0.0);
  REQUIRE(r.found);
  CHECK(r.horizon == 1.5);
  CHECK(std::abs(r.alpha - a15) <= 1e-12);
  REQUIRE(r.alpha_below);
  CHECK(std::abs(*r.alpha_below - a10) <= 1e-12);

  const GrowthBound short_b = GrowthBound::constant(0.5, 2, 1.0);
  const HorizonSearch miss = min_stabilizing_horizon(short_b, 0.5, 0.0);
  CHECK_FALSE(miss.found);
  REQUIRE(miss.required_n_star);
  CHECK(*miss.required_n_star == 3);

  const HorizonSearch half = min_stabilizing_horizon_half(one, 0.0);
  REQUIRE(half.found);
  CHECK(alpha_of(one, half.horizon, half.horizon / 2).alpha > 0.0);
  CHECK(alpha_of(one, half.horizon - 0.5, (half.horizon - 0.5) / 2).alpha <= 0.0);
  CHECK_THROWS_AS(min_stabilizing_horizon(one, 0.5, 1.0), ContractViolation);
}

TEST_CASE("a-posteriori alpha") {
  CHECK(*a_posteriori_alpha(1.0, 1.0, 1.0) == 0.0);
  CHECK(*a_posteriori_alpha(2.0, 1.0, 0.5) == 2.0);
  CHECK_FALSE(a_posteriori_alpha(1.0, 1.0, 0.0));
}

TEST_CASE("scans: validity, symmetry and parallel equivalence") {
  std::mt19937 rng(12);
  const GrowthBound b = random_bound(rng, 40, 0.05);
  const auto Ts = uniform_grid(0.05, 1, 44);
  const auto ds = uniform_grid(0.05, 1, 39);
  const AlphaScan par = alpha_scan(b, Ts, ds);
  const AlphaScan ser = alpha_scan_serial(b, Ts, ds);
  CHECK(par == ser);
  for (std::size_t i = 0; i < Ts.size(); ++i)
    for (std::size_t j = 0; j < ds.size(); ++j) {
      const bool valid = ds[j] < Ts[i] - 1e-12 && Ts[i] <= b.coverage() + 1e-12;
      CHECK(par.at(i, j).has_value() == valid);
      if (!valid) continue;
      // Mirror entry (T, T - delta) lies on the grid at index i - j - 1.
      const std::size_t mirror = i - j - 1;
      if (par.at(i, mirror)) CHECK(std::abs(*par.at(i, j) - *par.at(i, mirror)) <= 1e-12);
    }

  const GrowthBound one = GrowthBound::constant(0.25, 16, 1.0);
  const auto over_T = scan_over_horizon(one, uniform_grid(0.25, 1, 16), 0.5);
  for (const auto& p : over_T) {
    if (p.horizon <= 0.5) {
      CHECK_FALSE(p.alpha);
      continue;
    }
    const double T = p.horizon;
    const double want = 1.0 - std::exp(-T) / ((1.0 - std::exp(-(T - 0.5))) * (1.0 - std::exp(-0.5)));
    CHECK(std::abs(*p.alpha - want) <= 1e-12);
  }
  const auto half = scan_over_horizon(one, uniform_grid(0.25, 1, 16), std::nullopt);
  for (const auto& p : half) CHECK(p.control_horizon == p.horizon / 2);
  const auto over_d = scan_over_control_horizon(one, 3.0, uniform_grid(0.25, 1, 11));
  for (std::size_t j = 0; j < over_d.size(); ++j)
    CHECK(std::abs(*over_d[j].alpha - *over_d[over_d.size() - 1 - j].alpha) <= 1e-12);
}
