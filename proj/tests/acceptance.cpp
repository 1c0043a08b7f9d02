// Acceptance checks, one per criterion: prints a PASS or FAIL line each and
// exits nonzero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "bubbletower/bubble.hpp"
#include "bubbletower/circulant.hpp"
#include "bubbletower/configuration.hpp"
#include "bubbletower/error_field.hpp"
#include "bubbletower/interaction.hpp"
#include "bubbletower/kernel_basis.hpp"
#include "bubbletower/nondegeneracy.hpp"
#include "bubbletower/reduction.hpp"

using namespace bt;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (ok ? "" : "[x] ") << what << "; ";
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Point random_point(std::mt19937_64& rng, int n, double a) {
  std::uniform_real_distribution<double> u(-a, a);
  Point y = zero_point();
  for (int i = 0; i < n; ++i) y[i] = u(rng);
  return y;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, int m) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(m);
  for (int i = 0; i < m; ++i) v(i) = g(rng);
  return v;
}

// Assembled n = 4 ring system shared by criteria 7 and 8.
const InteractionBlocks& assembled() {
  static const InteractionBlocks b =
      assemble_interaction(make_configuration(4, 8, 8, 1.0, 1.0), QuadratureScheme::defaults(4));
  return b;
}

void criterion1(Outcome& o) {
  std::mt19937_64 rng(1);
  double worst_fd = 0.0;
  const int n = 4;
  for (int t = 0; t < 20; ++t) {
    const Point y = random_point(rng, n, 1.5);
    const BubbleParams p{n, 1.0, zero_point()};
    const double h = 1e-3;
    double lap = 0.0;
    for (int i = 0; i < n; ++i) {
      Point a = y, b = y;
      a[i] += h;
      b[i] -= h;
      lap += (eval_bubble(a, n) - 2.0 * eval_bubble(y, n) + eval_bubble(b, n)) / (h * h);
    }
    const double u = eval_bubble(y, n);
    const double res = lap + gamma_const(n) * std::pow(u, critical_exponent(n));
    worst_fd = std::max(worst_fd, std::abs(res) / std::abs(laplacian_bubble(y, p)));
  }
  o.require(worst_fd <= 1e-5, "PDE residual by finite differences " + num(worst_fd) + " <= 1e-5");

  const auto cfg = make_configuration(n, 8, 8, 1.0, 1.0);
  auto u = [n](const Point& x) { return eval_bubble(x, n); };
  auto us = [&](const Point& x) { return eval_Ustar(cfg, x); };
  double ku = 0.0, kus = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Point y = random_point(rng, n, 3.0);
    ku = std::max(ku, std::abs(kelvin(u, y, n) - u(y)) / std::abs(u(y)));
    kus = std::max(kus, std::abs(kelvin(us, y, n) - us(y)) / std::max(1.0, std::abs(us(y))));
  }
  o.require(ku <= 1e-10, "Kelvin U " + num(ku) + " <= 1e-10");
  o.require(kus <= 1e-10, "Kelvin U_* " + num(kus) + " <= 1e-10");
}

void criterion2(Outcome& o) {
  o.require(kernel_count(4) == 15 && invariance_dimension(4) == 15, "n=4: N0=" + std::to_string(kernel_count(4)) +
                                                                        " N=" + std::to_string(invariance_dimension(4)));
  o.require(kernel_count(5) == 20 && invariance_dimension(5) == 21, "n=5: N0=" + std::to_string(kernel_count(5)) +
                                                                        " N=" + std::to_string(invariance_dimension(5)));
}

void criterion3(Outcome& o) {
  const auto cfg = make_configuration(4, 8, 8, 1.0, 1.0);
  const auto pts = kernel_sample_points(cfg, 100, 1);
  std::vector<double> fam(kDecompositionFamilies, -1.0);
  for (int b = 0; b < kernel_count(4); ++b) {
    const int f = decomposition_family(b, 4);
    fam[f] = std::max(fam[f], decomposition_residual(b, cfg, pts));
  }
  const double worst = *std::max_element(fam.begin(), fam.end());
  const auto present = std::count_if(fam.begin(), fam.end(), [](double v) { return v >= 0.0; });
  // the remaining families need directions beyond the fourth
  o.require(worst <= 1e-8, std::to_string(present) + " of " + std::to_string(kDecompositionFamilies) +
                               " decomposition families present at n=4, max " + num(worst) + " <= 1e-8");
  const double t = kelvin_identity_residual(cfg, pts);
  o.require(t <= 1e-8, "T(v) identity " + num(t) + " <= 1e-8");
}

void criterion4(Outcome& o) {
  const std::vector<double> ks{8, 12, 16, 24};
  std::vector<double> ext, in1;
  QuadratureScheme s = QuadratureScheme::defaults(4);
  s.q = 3.0;
  bool converged = true;
  for (double k : ks) {
    const auto e = error_breakdown(make_configuration(4, int(k), int(k), 1.0, 1.0), s, false);
    ext.push_back(e.exterior_norm);
    in1.push_back(e.interior_ring1_norm.front());
    converged = converged && e.converged;
  }
  const double se = loglog_slope(ks, ext), si = loglog_slope(ks, in1);
  const double pe = 1.0 - 4.0 / 3.0, pi = -4.0 / 3.0;
  o.require(std::abs(se - pe) <= 0.15, "exterior slope " + num(se) + " vs " + num(pe) + " +-0.15");
  o.require(std::abs(si - pi) <= 0.15, "interior slope " + num(si) + " vs " + num(pi) + " +-0.15");
  o.detail << "norms converged=" << converged << "; ";
}

void criterion5(Outcome& o) {
  const auto s = QuadratureScheme::defaults(4);
  double d8 = 0.0;
  for (int k : {8, 16}) {
    const auto r = solve_reduced(4, k, k, s);
    const double res = std::max(std::abs(r.cbar0), std::abs(r.chat0));
    o.require(std::abs(r.delta_star - r.eps_star) <= 1e-8 * r.delta_star,
              "k=" + std::to_string(k) + " delta*=" + num(r.delta_star) + " eps*=" + num(r.eps_star));
    o.require(res <= 1e-8, "k=" + std::to_string(k) + " residual " + num(res) + " <= 1e-8");
    if (k == 8) {
      d8 = r.delta_star;
    } else {
      const double drift = std::abs(r.delta_star - d8);
      o.require(drift <= 0.5 * std::abs(d8), "drift " + num(drift) + " <= " + num(0.5 * std::abs(d8)));
    }
  }
}

void criterion6(Outcome& o) {
  const auto cfg = make_configuration(4, 32, 32, 1.0, 1.0);
  const auto s = QuadratureScheme::defaults(4);
  std::vector<double> c;
  for (int j : {2, 3, 4}) c.push_back(pair_interaction(cfg, j, s).ratio);
  const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
  double mean = 0.0;
  for (double v : c) mean += v / c.size();
  const double spread = (*hi - *lo) / std::abs(mean);
  o.require(spread <= 0.05, "spread " + num(spread) + " <= 0.05");
  o.require(*lo > 0.0, "ratios " + num(c[0]) + ", " + num(c[1]) + ", " + num(c[2]) + " positive");
}

void criterion7(Outcome& o) {
  std::mt19937_64 rng(7);
  double mv = 0.0, sv = 0.0;
  for (int m = 3; m <= 32; ++m) {
    // symmetric first row with modes 1, m-1 removed, as for the ring blocks
    Eigen::VectorXd lam(m);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (int t = 0; t <= m / 2; ++t) lam(t) = lam((m - t) % m) = t == 1 ? 0.0 : u(rng);
    CirculantMatrix c{Eigen::VectorXd::Zero(m)};
    for (int i = 0; i < m; ++i)
      for (int t = 0; t < m; ++t) c.first_row(i) += lam(t) * std::cos(2.0 * M_PI * t * i / m) / m;
    const Eigen::MatrixXd d = c.dense();
    const Eigen::VectorXd x = random_vector(rng, m);
    mv = std::max(mv, (circ_matvec(c, x) - d * x).norm() / (d * x).norm());
    const auto cs = cos_sin_vectors(m);
    Eigen::VectorXd rhs = random_vector(rng, m);
    for (const auto& v : cs) rhs -= v.dot(rhs) / v.squaredNorm() * v;
    const Eigen::VectorXd w = circ_solve_deflated(c, rhs, cs);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d);
    Eigen::VectorXd oracle = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i)
      if (std::abs(es.eigenvalues()(i)) > 1e-10 * es.eigenvalues().cwiseAbs().maxCoeff())
        oracle += es.eigenvectors().col(i) * (es.eigenvectors().col(i).dot(rhs) / es.eigenvalues()(i));
    sv = std::max(sv, (w - oracle).norm() / oracle.norm());
  }
  o.require(mv <= 1e-10, "DFT matvec vs dense " + num(mv) + " <= 1e-10");
  o.require(sv <= 1e-10, "DFT deflated solve vs dense " + num(sv) + " <= 1e-10");

  const auto& b = assembled();
  const auto sys = block_system(b, 0, 1);
  const auto r = solve_block_contraction(sys);
  Eigen::VectorXd w(sys.rbar.size() + sys.rhat.size());
  w << r.wbar, r.what;
  const Eigen::VectorXd oracle = dense_block_solve(sys);
  const double bd = (w - oracle).norm() / oracle.norm();
  o.require(bd <= 1e-8, "block contraction vs dense " + num(bd) + " <= 1e-8 (" + std::to_string(r.iterations) +
                            " sweeps, sweep rate " + num(r.sweep_rate) + ")");
  o.require(r.factor < 0.5, "contraction factor " + num(r.factor) + " < 0.5");

  const double tol = 10.0 * b.noise() / b.full().cwiseAbs().maxCoeff();
  double kr = 0.0;
  for (double v : m1_kernel_residuals(b)) kr = std::max(kr, v);
  o.require(kr <= tol, "kernel relation residual " + num(kr) + " <= 10x quadrature noise " + num(tol));
}

void criterion8(Outcome& o) {
  const auto& b = assembled();
  const auto beta = beta_table(b);
  const double noise = b.noise();
  double z = 0.0;
  for (auto [i, j] : {std::pair{0, 2}, std::pair{2, 0}, std::pair{1, 2}, std::pair{3, 4}})
    z = std::max(z, std::abs(beta(i, j)));
  o.require(z <= 10.0 * noise, "parity zeros " + num(z) + " <= 10x noise " + num(10.0 * noise));
  for (const auto& c : block_identity_checks(b))
    o.require(c.deviation <= 2.0 * noise, c.name + " " + num(c.deviation) + " <= 2x noise");
}

void criterion9(Outcome& o) {
  const auto s = QuadratureScheme::defaults(4);
  const auto root = solve_reduced(4, 8, 8, s);
  const auto rep = certify(make_configuration(4, 8, 8, root.delta_star, root.eps_star), s, 1);
  o.require(rep.gram_rank == 15, "gram_rank " + std::to_string(rep.gram_rank) + " = 15");
  o.require(rep.min_singular_ratio > 1e-5, "min_singular_ratio " + num(rep.min_singular_ratio) + " > 1e-5");
  // longest run of thresholds at rank 15, in decades
  int run = 0, best = 0;
  for (int r : rep.rank_at_threshold) {
    run = r == 15 ? run + 1 : 0;
    best = std::max(best, run);
  }
  o.require(best - 1 >= 2, "rank stable over " + std::to_string(std::max(0, best - 1)) + " decades");
  o.detail << "delta*=" << num(root.delta_star) << "; ";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1..9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::function<void(Outcome&)>, double>> crit = {
      {criterion1, 5.0},   {criterion2, 1.0},   {criterion3, 30.0},  {criterion4, 600.0}, {criterion5, 600.0},
      {criterion6, 120.0}, {criterion7, 600.0}, {criterion8, 600.0}, {criterion9, 900.0}};
  bool all = true;
  for (int c = 1; c <= 9; ++c) {
    if (only && c != only) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      crit[c - 1].first(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs <= crit[c - 1].second, "runtime " + num(secs) + " s <= " + num(crit[c - 1].second) + " s");
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c << ": " << o.detail.str() << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
