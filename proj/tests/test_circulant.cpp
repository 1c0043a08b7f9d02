#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "bubbletower/circulant.hpp"
#include "bubbletower/configuration.hpp"
#include "bubbletower/interaction.hpp"

using namespace bt;

namespace {

Eigen::VectorXd random_vector(std::mt19937_64& rng, int m) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(m);
  for (int i = 0; i < m; ++i) v(i) = g(rng);
  return v;
}

Eigen::VectorXd project_off(Eigen::VectorXd v, const std::vector<Eigen::VectorXd>& basis) {
  for (const auto& b : basis) v -= b.dot(v) / b.squaredNorm() * b;
  return v;
}

// Symmetric circulant with a positive spectrum except modes 1 and m-1.
CirculantMatrix ring_like(std::mt19937_64& rng, int m) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Eigen::VectorXd lam(m);
  for (int t = 0; t <= m / 2; ++t) lam(t) = lam((m - t) % m) = (t == 1 ? 0.0 : u(rng));
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int t = 0; t < m; ++t) s += lam(t) * std::cos(2.0 * M_PI * t * i / m);
    r(i) = s / m;
  }
  return {r};
}

// Minimum-norm solution through the symmetric eigendecomposition.
Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(rhs.size());
  for (int i = 0; i < rhs.size(); ++i) {
    const double l = es.eigenvalues()(i);
    if (std::abs(l) > 1e-10 * top) w += es.eigenvectors().col(i) * (es.eigenvectors().col(i).dot(rhs) / l);
  }
  return w;
}

}  // namespace

TEST_CASE("eigenvalues of a small circulant") {
  CirculantMatrix c{Eigen::Vector3d(4.0, 1.0, 1.0)};
  const auto lam = circ_eigenvalues(c);
  CHECK(lam(0).real() == doctest::Approx(6.0));
  CHECK(lam(1).real() == doctest::Approx(3.0));
  CHECK(lam(2).real() == doctest::Approx(3.0));
  CHECK(std::abs(lam(1).imag()) < 1e-14);
  CHECK(c.dense()(2, 0) == 1.0);
}

TEST_CASE("eigenvalues match Fourier vectors of the dense matrix") {
  std::mt19937_64 rng(21);
  for (int m : {3, 7, 16, 32}) {
    CirculantMatrix c{random_vector(rng, m)};
    const Eigen::MatrixXcd a = c.dense().cast<std::complex<double>>();
    const auto lam = circ_eigenvalues(c);
    for (int t = 0; t < m; ++t) {
      Eigen::VectorXcd f(m);
      for (int j = 0; j < m; ++j) f(j) = std::polar(1.0, 2.0 * M_PI * t * j / m);
      CHECK((a * f - lam(t) * f).norm() <= 1e-10 * f.norm() * (1.0 + std::abs(lam(t))));
    }
  }
}

TEST_CASE("matvec and fit against dense products") {
  std::mt19937_64 rng(22);
  for (int m = 1; m <= 32; ++m) {
    CirculantMatrix c{random_vector(rng, m)};
    const Eigen::VectorXd x = random_vector(rng, m);
    CHECK((circ_matvec(c, x) - c.dense() * x).norm() <= 1e-10 * (1.0 + (c.dense() * x).norm()));
    double dev = 1.0;
    const auto back = circulant_fit(c.dense(), &dev);
    CHECK(dev <= 1e-14);
    CHECK((back.first_row - c.first_row).norm() <= 1e-14);
  }
  CHECK(circ_matvec(CirculantMatrix{Eigen::VectorXd::Ones(5)}, Eigen::VectorXd::Zero(5)).norm() == 0.0);
}

TEST_CASE("deflated solve against a dense least-squares oracle") {
  std::mt19937_64 rng(23);
  for (int m : {6, 8, 13, 32}) {
    const CirculantMatrix c = ring_like(rng, m);
    const auto cs = cos_sin_vectors(m);
    CHECK(deflated_modes(m, cs) == std::vector<int>{1, m - 1});
    const Eigen::VectorXd rhs = project_off(random_vector(rng, m), cs);
    const Eigen::VectorXd w = circ_solve_deflated(c, rhs, cs);
    CHECK((c.dense() * w - rhs).norm() <= 1e-10 * rhs.norm());
    for (const auto& v : cs) CHECK(std::abs(v.dot(w)) <= 1e-10 * w.norm());
    CHECK((c.dense() - c.dense().transpose()).norm() <= 1e-12);
    const Eigen::VectorXd oracle = pinv_solve(c.dense(), rhs);
    CHECK((w - oracle).norm() <= 1e-10 * oracle.norm());
    CHECK(circ_solve_deflated(c, Eigen::VectorXd::Zero(m), cs).norm() == 0.0);
  }
}

TEST_CASE("inconsistent right-hand side is rejected") {
  std::mt19937_64 rng(24);
  const CirculantMatrix c = ring_like(rng, 10);
  const auto cs = cos_sin_vectors(10);
  Eigen::VectorXd rhs = project_off(random_vector(rng, 10), cs) + 0.1 * cs[0];
  try {
    circ_solve_deflated(c, rhs, cs);
    FAIL("expected ConsistencyError");
  } catch (const ConsistencyError& e) {
    REQUIRE(e.inner_products.size() == 2u);
    CHECK(std::abs(e.inner_products[0]) > 0.1);
  }
  // an undeflated zero eigenvalue is a numerical failure
  CHECK_THROWS_AS(circ_solve_deflated(c, project_off(random_vector(rng, 10), cs), {}), NumericalError);
}

TEST_CASE("block contraction against the dense oracle") {
  std::mt19937_64 rng(25);
  BlockInteractionSystem sys;
  sys.hbar = ring_like(rng, 8);
  sys.hhat = ring_like(rng, 12);
  sys.deflation_bar = cos_sin_vectors(8);
  sys.deflation_hat = cos_sin_vectors(12);
  sys.rbar = project_off(random_vector(rng, 8), sys.deflation_bar);
  sys.rhat = project_off(random_vector(rng, 12), sys.deflation_hat);

  SUBCASE("uncoupled system needs one sweep") {
    sys.gamma = 0.0;
    const auto r = solve_block_contraction(sys);
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK((r.wbar - circ_solve_deflated(sys.hbar, sys.rbar, sys.deflation_bar)).norm() <= 1e-12);
  }
  SUBCASE("coupled system") {
    sys.gamma = 0.02;
    const auto r = solve_block_contraction(sys);
    CHECK(r.converged);
    CHECK(r.sweep_rate < 1.0);
    Eigen::VectorXd w(20);
    w << r.wbar, r.what;
    const Eigen::VectorXd oracle = dense_block_solve(sys);
    CHECK((w - oracle).norm() <= 1e-10 * oracle.norm());
    Eigen::VectorXd rhs(20);
    rhs << sys.rbar, sys.rhat;
    CHECK((sys.dense() * w - rhs).norm() <= 1e-9 * rhs.norm());
  }
  SUBCASE("swapped copies give equal halves") {
    sys.hhat = sys.hbar;
    sys.deflation_hat = sys.deflation_bar;
    sys.rhat = sys.rbar;
    sys.gamma = 0.05;
    const auto r = solve_block_contraction(sys);
    CHECK((r.wbar - r.what).norm() <= 1e-10 * r.wbar.norm());
  }
  SUBCASE("divergent coupling is reported") {
    sys.gamma = 5.0;
    CHECK_THROWS_AS(solve_block_contraction(sys, 1e-12, 50), NumericalError);
  }
}

TEST_CASE("assembled interaction blocks at n = 4, k = h = 8") {
  const auto cfg = make_configuration(4, 8, 8, 3.3849432302, 3.3849432302);
  const auto b = assemble_interaction(cfg, QuadratureScheme::defaults(4));
  const double noise = b.noise();
  const auto beta = beta_table(b);
  // parity zeros
  for (auto [i, j] : {std::pair{0, 2}, std::pair{2, 0}, std::pair{1, 2}, std::pair{3, 4}, std::pair{0, 4}})
    CHECK(std::abs(beta(i, j)) <= 10.0 * noise);
  CHECK(beta(0, 0) > 0.0);
  for (const auto& c : block_identity_checks(b)) CHECK(c.deviation <= 2.0 * noise);
  for (const auto& c : circulant_property_checks(b)) CHECK(c.deviation <= 1e-10 * c.scale);
  for (const auto& c : factored_form_checks(b)) CHECK(c.deviation <= 1e-10 * std::max(1.0, c.scale));
  const auto orth = check_orthogonality_conditions(b, 3);
  for (std::size_t i = 0; i < 7; ++i) CHECK(orth.values[i] <= 1e-8);

  for (int alpha = 0; alpha <= 4; ++alpha) {
    const auto sys = block_system(b, alpha, 5);
    CHECK(sys.hbar.size() == 8);
    Eigen::VectorXd rhs(16);
    rhs << sys.rbar, sys.rhat;
    const Eigen::VectorXd oracle = dense_block_solve(sys);
    try {
      const auto r = solve_block_contraction(sys);
      Eigen::VectorXd w(16);
      w << r.wbar, r.what;
      CHECK((w - oracle).norm() <= 1e-8 * oracle.norm());
    } catch (const NumericalError&) {
      // directions where the alternating sweep does not contract still have the dense solution
      CHECK(alpha != 0);
    }
    CHECK((sys.dense() * oracle - rhs).norm() <= 1e-8 * rhs.norm());
  }
}
