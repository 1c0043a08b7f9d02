#include <doctest.h>

#include <cmath>
#include <random>

#include "bubbletower/configuration.hpp"
#include "bubbletower/error_field.hpp"
#include "bubbletower/errors.hpp"
#include "test_support.hpp"

using namespace bt;
using bt::test::random_point;

TEST_CASE("scales follow the ring size") {
  const auto c = make_configuration(4, 8, 12, 2.0, 3.0);
  CHECK(c.mu == doctest::Approx(2.0 / 64.0));
  CHECK(c.lambda == doctest::Approx(3.0 / 144.0));
  const auto c5 = make_configuration(5, 10, 10, 2.0, 2.0);
  CHECK(c5.mu == doctest::Approx(std::pow(2.0, 2.0 / 3.0) / 100.0));
  CHECK(c.num_sites() == 21);
}

TEST_CASE("centers lie on the constraint sphere and form regular polygons") {
  const auto c = make_configuration(5, 9, 7, 1.3, 0.8);
  for (const auto& x : c.xi) CHECK(norm2(x, 5) + c.mu * c.mu == doctest::Approx(1.0));
  for (const auto& x : c.eta) CHECK(norm2(x, 5) + c.lambda * c.lambda == doctest::Approx(1.0));
  for (int j = 0; j < c.k; ++j) {
    CHECK(c.xi[j][2] == 0.0);
    CHECK(std::atan2(c.xi[j][1], c.xi[j][0]) == doctest::Approx(std::remainder(2.0 * M_PI * j / 9, 2.0 * M_PI)));
  }
  const auto [d1, d2, d3] = min_separation(c);
  CHECK(d1 == doctest::Approx(2.0 * c.xi_norm() * std::sin(M_PI / 9)));
  CHECK(d2 == doctest::Approx(2.0 * c.eta_norm() * std::sin(M_PI / 7)));
  CHECK(d3 == doctest::Approx(std::sqrt(2.0 - c.mu * c.mu - c.lambda * c.lambda)));
}

TEST_CASE("site list order and signs") {
  const auto c = make_configuration(4, 3, 4, 1.0, 1.0);
  const auto s = c.sites();
  REQUIRE(s.size() == 8u);
  CHECK(s[0].kind == SiteKind::Center);
  CHECK(s[0].sign == 1.0);
  CHECK(s[1].kind == SiteKind::Ring1);
  CHECK(s[3].index == 2);
  CHECK(s[4].kind == SiteKind::Ring2);
  CHECK(s[4].sign == -1.0);
  CHECK(s[5].scale == doctest::Approx(c.lambda));
}

TEST_CASE("invalid parameters") {
  CHECK_THROWS_AS(make_configuration(4, 2, 8, 1, 1), ConfigError);
  CHECK_THROWS_AS(make_configuration(4, 8, 2, 1, 1), ConfigError);
  CHECK_THROWS_AS(make_configuration(3, 8, 8, 1, 1), ConfigError);
  CHECK_THROWS_AS(make_configuration(4, 8, 8, -1, 1), ConfigError);
  CHECK_THROWS_AS(make_configuration(4, 3, 3, 100, 1), ConfigError);  // mu > 1
  CHECK(make_configuration(4, 4, 8, 1, 1).small_ring_warning);
  CHECK_FALSE(make_configuration(4, 8, 8, 1, 1).small_ring_warning);
}

TEST_CASE("approximate solution is Kelvin invariant") {
  std::mt19937_64 rng(13);
  for (int n : {4, 5}) {
    const auto c = make_configuration(n, 8, 8, 1.0, 1.5);
    auto u = [&](const Point& x) { return eval_Ustar(c, x); };
    for (int t = 0; t < 100; ++t) {
      const Point y = random_point(rng, n, 2.5);
      CHECK(std::abs(kelvin(u, y, n) - u(y)) <= 1e-10 * std::max(1.0, std::abs(u(y))));
    }
  }
}

TEST_CASE("approximate solution is invariant under the ring group") {
  std::mt19937_64 rng(17);
  const int n = 5;
  const auto c = make_configuration(n, 6, 8, 1.0, 1.0);
  const unsigned all = reflection_mask_all(n);
  CHECK(all == ((1u << 1) | (1u << 3) | (1u << 4)));
  for (int t = 0; t < 50; ++t) {
    const Point y = random_point(rng, n, 1.2);
    const double u = eval_Ustar(c, y);
    for (unsigned mask : {0u, 2u, 8u, all})
      for (int j : {0, 1, 5})
        for (int l : {0, 3, -1})
          CHECK(eval_Ustar(c, symmetry_orbit(c, y, j, l, mask)) == doctest::Approx(u).epsilon(1e-12));
  }
  CHECK_THROWS_AS(symmetry_orbit(c, zero_point(), 0, 0, 1u), ConfigError);
}
