#include <doctest.h>

#include <cmath>

#include "bubbletower/configuration.hpp"
#include "bubbletower/reduction.hpp"
#include "test_support.hpp"

using namespace bt;
using bt::test::sphere_area;

namespace {

// Simpson on [0, R] with R large; the integrands below decay like r^{-5}.
template <class F>
double simpson(const F& g, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double s = g(a) + g(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
  return s * h / 3.0;
}

double radial(double (*g)(double)) {
  // log substitution r = e^t covers many scales evenly
  return simpson([g](double t) { const double r = std::exp(t); return g(r) * r; }, -12.0, 12.0, 200000);
}

}  // namespace

TEST_CASE("projection denominator is the scale-free bubble integral") {
  // n = 4: U = 2/(1+r^2), Z0 = U (1-r^2)/(1+r^2)
  const double oracle = sphere_area(3) * radial([](double r) {
    const double u = 2.0 / (1.0 + r * r);
    const double z = u * (1.0 - r * r) / (1.0 + r * r);
    return r * r * r * u * u * z * z;
  });
  const auto s = QuadratureScheme::defaults(4);
  for (double delta : {1.0, 3.0}) {
    const auto cfg = make_configuration(4, 8, 8, delta, 1.0);
    CHECK(projection_denominator(cfg, 1, s).value == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(projection_denominator(cfg, 2, s).value == doctest::Approx(oracle).epsilon(1e-6));
  }
  CHECK(oracle == doctest::Approx(5.263789014).epsilon(1e-8));
}

TEST_CASE("projected coefficient swaps with the rings") {
  const auto s = QuadratureScheme::defaults(4);
  const auto a = make_configuration(4, 8, 8, 2.0, 3.0);
  const auto b = make_configuration(4, 8, 8, 3.0, 2.0);
  const auto p1 = projected_coefficient(a, 1, s);
  const auto p2 = projected_coefficient(b, 2, s);
  CHECK(p1.converged);
  CHECK(p1.value == doctest::Approx(p2.value).epsilon(1e-8));
  CHECK(p1.value == doctest::Approx(p1.pieces.numerator() / p1.denominator).epsilon(1e-10));
}

TEST_CASE("two numerator routes agree") {
  const auto s = QuadratureScheme::defaults(4);
  const auto a = make_configuration(4, 8, 8, 2.0, 3.0);
  const auto p = projected_coefficient(a, 1, s);
  const auto g = projection_numerator_global(a, 1, s);
  CHECK(g.value == doctest::Approx(p.numerator).epsilon(1e-7));
}

TEST_CASE("pair interaction approaches the far-field limit") {
  // ratio -> 2^{(n-2)/2} int U^{p-1} Z0 = 2 * (-1/3) int U^3 = -8 pi^2 / 3 at n = 4
  const double limit = -8.0 * M_PI * M_PI / 3.0;
  const auto s = QuadratureScheme::defaults(4);
  const auto c = make_configuration(4, 16, 16, 1.0, 1.0);
  const auto near = pair_interaction(c, 2, s);
  const auto cross = pair_interaction_cross(c, 0, s);
  CHECK(near.converged);
  CHECK(near.ratio == doctest::Approx(limit).epsilon(0.05));
  CHECK(cross.ratio == doctest::Approx(limit).epsilon(0.05));
  const auto far = pair_interaction(make_configuration(4, 32, 32, 1.0, 1.0), 2, s);
  CHECK(std::abs(far.ratio - limit) < std::abs(near.ratio - limit));
}

TEST_CASE("coefficient sample matches the projected coefficients") {
  const auto s = QuadratureScheme::defaults(4);
  const auto cs = reduced_coefficients(4, 8, 8, 2.0, 3.0, s, 0);
  const auto a = make_configuration(4, 8, 8, 2.0, 3.0);
  CHECK(cs.cbar0 == doctest::Approx(projected_coefficient_level(a, 1, s, 0).value).epsilon(1e-12));
  CHECK(cs.chat0 == doctest::Approx(projected_coefficient_level(a, 2, s, 0).value).epsilon(1e-12));
}
