#include <doctest.h>

#include <cmath>
#include <set>

#include <Eigen/Dense>

#include "bubbletower/configuration.hpp"
#include "bubbletower/error_field.hpp"
#include "bubbletower/kernel_basis.hpp"
#include "bubbletower/symmetry.hpp"
#include "test_support.hpp"

using namespace bt;
using bt::test::fd_laplacian;

TEST_CASE("kernel counts") {
  CHECK(kernel_count(4) == 15);
  CHECK(invariance_dimension(4) == 15);
  CHECK(kernel_count(5) == 20);
  CHECK(invariance_dimension(5) == 21);
  for (int n = 6; n <= 10; ++n) CHECK(kernel_count(n) < invariance_dimension(n));
}

TEST_CASE("rebasing is invertible and families cover all identities") {
  for (int n : {4, 5, 6}) {
    const Eigen::MatrixXd r = rebasing_matrix(n);
    CHECK(r.rows() == kernel_count(n));
    CHECK(std::abs(r.determinant()) > 1e-3);
    std::set<int> fam;
    for (int b = 0; b < kernel_count(n); ++b) fam.insert(decomposition_family(b, n));
    // families 3, 7, 9, 10 involve the directions beyond the fourth
    CHECK(static_cast<int>(fam.size()) == (n == 4 ? 7 : kDecompositionFamilies));
  }
}

TEST_CASE("site frames are orthogonal") {
  const auto c = make_configuration(5, 8, 6, 1.0, 1.0);
  for (int s = 0; s < c.num_sites(); ++s)
    for (int a = 1; a <= 5; ++a)
      for (int b = a + 1; b <= 5; ++b) CHECK(dot(site_frame(c, s, a), site_frame(c, s, b), 5) == doctest::Approx(0.0));
}

TEST_CASE("sample points avoid the bubble cores") {
  const auto c = make_configuration(4, 8, 8, 1.0, 1.0);
  const auto pts = kernel_sample_points(c, 100, 4);
  REQUIRE(pts.size() == 100u);
  for (const auto& y : pts) {
    const double r = norm(y, 4);
    CHECK(r >= 0.05);
    CHECK(r <= 20.0);
    for (int s = 1; s < c.num_sites(); ++s) CHECK(norm(sub(y, c.site(s).c, 4), 4) >= 2.0 * c.site(s).scale - 1e-12);
  }
  CHECK(kernel_sample_points(c, 100, 4)[17][2] == kernel_sample_points(c, 100, 4)[17][2]);
}

TEST_CASE("field decompositions hold pointwise") {
  for (auto [n, k] : {std::pair{4, 8}, std::pair{5, 6}}) {
    const auto c = make_configuration(n, k, k, 1.3, 0.9);
    const auto pts = kernel_sample_points(c, 100, 1);
    for (int b = 0; b < kernel_count(n); ++b) CHECK(decomposition_residual(b, c, pts) <= 1e-8);
    CHECK(kelvin_image_deviation(c, pts) <= 1e-10);
  }
}

TEST_CASE("linearized residual against finite differences") {
  const int n = 4;
  const auto c = make_configuration(n, 6, 6, 1.0, 1.0);
  const double p = critical_exponent(n), g = gamma_const(n);
  const auto pts = kernel_sample_points(c, 12, 9);
  for (int b = 0; b < kernel_count(n); ++b) {
    for (const auto& y : pts) {
      auto v = [&](const Point& x) { return eval_bold_z(b, x, c); };
      const double u = eval_Ustar(c, y);
      const double pot = p * g * std::pow(std::abs(u), p - 1.0) * v(y);
      const double lap = fd_laplacian(v, y, n, 2e-4);
      const double scale = std::abs(lap) + std::abs(pot) + 1e-6;
      // second differences lose about 1e-7 absolute where the two terms cancel
      CHECK(std::abs(linearized_residual(b, c, y) - (lap + pot)) <= 1e-4 * scale + 1e-6);
    }
  }
}

TEST_CASE("orbit-summed field integrals match direct integration") {
  const auto cfg = make_configuration(4, 3, 3, 1.0, 1.0);
  QuadratureScheme s;
  s.max_refine = 1;
  const auto fi = field_integrals(cfg, s);
  const int nf = field_count(cfg);
  for (auto [i, j] : {std::pair{field_index(cfg, 1, 1), field_index(cfg, 3, 4)},
                      std::pair{field_index(cfg, 0, 2), field_index(cfg, 0, 5)}}) {
    ScalarField f(
        [&, i = i, j = j](const Point& y) {
          std::vector<double> pi(nf), lpi(nf);
          eval_fields(cfg, y, pi.data(), lpi.data());
          return lpi[i] * pi[j];
        },
        cfg, 0, 0, 2.0 * cfg.n);
    const auto direct = integrate(f, cfg, s);
    CHECK(fi.linearized(i, j) == doctest::Approx(direct.value).epsilon(1e-6));
  }
}

TEST_CASE("Gram rank of the rebased family") {
  const auto cfg = make_configuration(4, 6, 6, 1.0, 1.0);
  const auto g = gram_rank(cfg, QuadratureScheme::defaults(4));
  CHECK(g.rank == 15);
  CHECK(g.min_singular_ratio > 1e-5);
  CHECK(g.asymmetry <= 1e-10 * g.singular_values(0));
  for (int r : g.rank_at_threshold) CHECK(r == 15);
}
