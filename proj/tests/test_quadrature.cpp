#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "bubbletower/configuration.hpp"
#include "bubbletower/error_field.hpp"
#include "bubbletower/errors.hpp"
#include "bubbletower/quadrature.hpp"
#include "test_support.hpp"

using namespace bt;
using bt::test::sphere_area;

namespace {

// Composite Simpson on [0, 1) after r = t / (1 - t); independent of the library rules.
template <class F>
double radial_oracle(const F& g, int panels = 200000) {
  const double h = 1.0 / panels;
  double s = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double t = std::min(i * h, 1.0 - 1e-12);
    const double r = t / (1.0 - t);
    const double jac = 1.0 / ((1.0 - t) * (1.0 - t));
    const double c = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += c * g(r) * jac;
  }
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("scheme defaults and validation") {
  CHECK(QuadratureScheme::defaults(4).q == doctest::Approx(3.0));
  CHECK(QuadratureScheme::defaults(6).q == doctest::Approx(4.5));
  QuadratureScheme s;
  s.q = 1.0;  // below n/2
  CHECK_THROWS_AS(s.validate(4), ConfigError);
  s.q = 3.0;
  CHECK_NOTHROW(s.validate(4));
  CHECK_THROWS_AS(validate_q(4, 4.0), ConfigError);
}

TEST_CASE("one-dimensional rules") {
  const Rule1D& g = gauss_legendre(6);
  double s = 0.0;
  for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * std::pow(g.x[i], 10);
  CHECK(s == doctest::Approx(2.0 / 11.0));

  const Rule1D r = radial_rule(0.0, 40.0, 0.1, 0.1, {1.0}, 10);
  double e = 0.0, c = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    e += r.w[i] * std::exp(-r.x[i]);
    c += r.w[i] * r.x[i] * r.x[i] * r.x[i];
  }
  CHECK(e == doctest::Approx(1.0 - std::exp(-40.0)).epsilon(1e-10));
  CHECK(c == doctest::Approx(std::pow(40.0, 4) / 4.0).epsilon(1e-10));
}

TEST_CASE("sphere and direction rules carry the surface measure") {
  for (int m = 1; m <= 5; ++m) {
    std::vector<std::vector<double>> dirs;
    std::vector<double> w;
    sphere_rule(m, 24, dirs, w);
    double total = 0.0, second = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      total += w[i];
      second += w[i] * dirs[i][0] * dirs[i][0];
    }
    CHECK(total == doctest::Approx(sphere_area(m)).epsilon(1e-10));
    CHECK(second == doctest::Approx(sphere_area(m) / (m + 1)).epsilon(1e-10));
  }
  for (int n = 4; n <= 6; ++n) {
    const DirectionRule d = direction_rule(n, 8, 8, 8, 24);
    double total = 0.0, fourth = 0.0, off_sphere = 0.0;
    for (std::size_t i = 0; i < d.w.size(); ++i) {
      off_sphere = std::max(off_sphere, std::abs(norm(d.dirs[i], n) - 1.0));
      total += d.w[i];
      fourth += d.w[i] * std::pow(d.dirs[i][0], 4);
    }
    // int x1^4 over S^{n-1} = 3 |S^{n-1}| / (n (n+2))
    CHECK(off_sphere <= 1e-14);
    CHECK(total == doctest::Approx(sphere_area(n - 1)).epsilon(1e-10));
    CHECK(fourth == doctest::Approx(3.0 * sphere_area(n - 1) / (n * (n + 2.0))).epsilon(1e-10));
  }
}

TEST_CASE("pairwise sum is order independent for exact data") {
  std::vector<double> v(1000, 0.1);
  CHECK(pairwise_sum(v) == doctest::Approx(100.0).epsilon(1e-14));
  CHECK(pairwise_sum({}) == 0.0);
  CHECK(pairwise_sum({3.0}) == 3.0);
}

TEST_CASE("refinement stops at the tolerance") {
  QuadratureScheme s;
  s.max_refine = 5;
  const auto r = refine([](int level) { return 1.0 + std::pow(10.0, -3.0 * level); }, s);
  CHECK(r.converged);
  CHECK(r.level == 3);
  s.max_refine = 1;
  CHECK_FALSE(refine([](int level) { return double(level); }, s).converged);
}

TEST_CASE("total mass of the central bubble equals the sphere area") {
  {
    const int n = 4;
    const auto cfg = make_configuration(n, 8, 8, 1.0, 1.0);
    const double expo = 2.0 * n / (n - 2.0);
    auto f = [n, expo](const Point& y) { return std::pow(eval_bubble(y, n), expo); };
    const double exact = sphere_area(n);
    const QuadratureScheme s = QuadratureScheme::defaults(n);
    const ScalarField tagged(f, cfg, kRing1Invariant | kRing2Invariant | kKelvinEven, reflection_mask_all(n), 2.0 * n,
                             2.0 * n);
    const auto r = integrate(tagged, cfg, s);
    CHECK(r.value == doctest::Approx(exact).epsilon(1e-6));
  }
}

TEST_CASE("untagged integration covers the whole space") {
  const auto cfg = make_configuration(4, 4, 4, 1.0, 1.0);
  auto f = [](const Point& y) { return std::pow(eval_bubble(y, 4), 4.0); };
  const ScalarField plain(f, cfg, 0, 0, 8.0);
  // no symmetry reduction, so the ring patches see fewer nodes than in the tagged run
  CHECK(integrate(plain, cfg, QuadratureScheme::defaults(4)).value == doctest::Approx(sphere_area(4)).epsilon(1e-5));
}

TEST_CASE("ring bubbles each carry the same mass") {
  const int n = 4;
  const auto cfg = make_configuration(n, 8, 8, 2.0, 1.0);
  auto f = [&](const Point& y) {
    double s = 0.0;
    for (int j = 1; j <= cfg.k; ++j) s += std::pow(eval_scaled_bubble(y, cfg.bubble_params(j)), 4.0);
    return s;
  };
  const ScalarField field(f, cfg, kRing1Invariant | kRing2Invariant | kKelvinEven, reflection_mask_all(n), 8.0, 8.0);
  const auto r = integrate(field, cfg, QuadratureScheme::defaults(n));
  CHECK(r.value == doctest::Approx(cfg.k * sphere_area(n)).epsilon(1e-5));
}

TEST_CASE("declared symmetry tags are spot-checked") {
  const auto cfg = make_configuration(4, 8, 8, 1.0, 1.0);
  auto f = [](const Point& y) { return y[0] + 2.0; };
  CHECK_THROWS_AS(ScalarField(f, cfg, kRing1Invariant), ConfigError);
}

TEST_CASE("weighted L^q norm of the bubble power") {
  const int n = 4;
  const double q = 3.0;
  const auto cfg = make_configuration(n, 8, 8, 1.0, 1.0);
  Point y = zero_point();
  y[1] = 2.0;
  CHECK(starstar_weight(y, n, q) == doctest::Approx(std::pow(3.0, 6.0 - 8.0 / 3.0)));
  auto f = [n](const Point& x) { return std::pow(eval_bubble(x, n), 3.0); };
  const ScalarField field(f, cfg, kRing1Invariant | kRing2Invariant, reflection_mask_all(n), 6.0);
  const auto r = starstar_power(field, cfg, QuadratureScheme::defaults(n));
  const double oracle = sphere_area(n - 1) * radial_oracle([&](double rr) {
    const double u = 2.0 / (1.0 + rr * rr);
    return std::pow(rr, n - 1) * std::pow(std::pow(1.0 + rr, 6.0 - 8.0 / 3.0) * u * u * u, q);
  });
  CHECK(r.value == doctest::Approx(oracle).epsilon(1e-5));
  CHECK(norm_starstar(field, cfg, QuadratureScheme::defaults(n)) == doctest::Approx(std::cbrt(oracle)).epsilon(1e-5));
}

TEST_CASE("sup norm of the bubble") {
  const auto cfg = make_configuration(4, 8, 8, 1.0, 1.0);
  auto f = [](const Point& x) { return eval_bubble(x, 4); };
  const ScalarField field(f, cfg, kRing1Invariant | kRing2Invariant, reflection_mask_all(4), 2.0);
  // (1 + |y|^2) U = 2 exactly
  CHECK(norm_star(field, cfg).value == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("integrals do not depend on the thread count") {
  const auto cfg = make_configuration(4, 8, 8, 1.0, 1.0);
  auto f = [&](const Point& y) { return std::pow(std::abs(eval_Ustar(cfg, y)), 4.0); };
  const ScalarField field(f, cfg, kRing1Invariant | kRing2Invariant | kKelvinEven, reflection_mask_all(4), 8.0, 8.0);
  setenv("BUBBLETOWER_THREADS", "1", 1);
  const double one = integrate_level(field, cfg, QuadratureScheme::defaults(4), 0);
  setenv("BUBBLETOWER_THREADS", "3", 1);
  const double three = integrate_level(field, cfg, QuadratureScheme::defaults(4), 0);
  unsetenv("BUBBLETOWER_THREADS");
  CHECK(one == three);
}
