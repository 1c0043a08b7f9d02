#include "bubbletower/kernel_basis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bubbletower/parallel.hpp"
#include "bubbletower/symmetry.hpp"

namespace bt {

int kernel_count(int n) {
  require_dimension(n);
  return 5 * (n - 1);
}

int invariance_dimension(int n) {
  require_dimension(n);
  return 2 * n + 1 + n * (n - 1) / 2;
}

int field_count(const TowerConfiguration& cfg) { return (cfg.n + 1) * cfg.num_sites(); }

Point site_frame(const TowerConfiguration& cfg, int site, int alpha) {
  const int n = cfg.n;
  if (alpha < 1 || alpha > n) throw ConfigError("frame direction must be in 1..n");
  if (site < 0 || site >= cfg.num_sites()) throw ConfigError("site index out of range");
  const Site st = cfg.site(site);
  Point f = zero_point();
  if (st.kind == SiteKind::Ring1 && alpha <= 2) {
    if (alpha == 1) {
      f = st.c;
    } else {
      f[0] = -st.c[1];
      f[1] = st.c[0];
    }
  } else if (st.kind == SiteKind::Ring2 && (alpha == 3 || alpha == 4)) {
    if (alpha == 3) {
      f = st.c;
    } else {
      f[2] = -st.c[3];
      f[3] = st.c[2];
    }
  } else {
    f[alpha - 1] = 1.0;
  }
  return f;
}

namespace {

// Field values of one site from the bubble jet.
void site_fields(const TowerConfiguration& cfg, const Site& st, const Point& y, const BubbleJet& j, int stride,
                 double* out) {
  const int n = cfg.n;
  const double m = 0.5 * (n - 2);
  double radial = 0.0;
  for (int i = 0; i < n; ++i) radial += j.grad[i] * (y[i] - st.c[i]);
  out[0] = m * j.value + radial;
  for (int a = 1; a <= n; ++a) out[a * stride] = j.grad[a - 1];
  if (st.kind == SiteKind::Ring1) {
    out[stride] = st.c[0] * j.grad[0] + st.c[1] * j.grad[1];
    out[2 * stride] = -st.c[1] * j.grad[0] + st.c[0] * j.grad[1];
  } else if (st.kind == SiteKind::Ring2) {
    out[3 * stride] = st.c[2] * j.grad[2] + st.c[3] * j.grad[3];
    out[4 * stride] = -st.c[3] * j.grad[2] + st.c[2] * j.grad[3];
  }
}

}  // namespace

void eval_fields(const TowerConfiguration& cfg, const Point& y, double* pi, double* lpi, double* weight) {
  const int n = cfg.n;
  const int ns = cfg.num_sites();
  thread_local std::vector<double> values;
  values.resize(ns);
  double u = 0.0;
  for (int s = 0; s < ns; ++s) {
    const Site st = cfg.site(s);
    const BubbleJet j = scaled_bubble_jet(y, BubbleParams{n, st.scale, st.c});
    values[s] = j.value;
    u += st.sign * j.value;
    site_fields(cfg, st, y, j, ns, pi + s);
  }
  const double pot = potential_power(u, n);
  if (weight) *weight = pot;
  if (!lpi) return;
  const double pg = critical_exponent(n) * gamma_const(n);
  for (int s = 0; s < ns; ++s) {
    const double c = pg * (pot - potential_power(values[s], n));
    for (int a = 0; a <= n; ++a) lpi[a * ns + s] = c * pi[a * ns + s];
  }
}

double eval_Zgroup(const TowerConfiguration& cfg, int alpha, int site, const Point& y) {
  const int n = cfg.n;
  if (alpha < 0 || alpha > n) throw ConfigError("Z index out of range");
  if (site < 0 || site >= cfg.num_sites()) throw ConfigError("site index out of range");
  const Site st = cfg.site(site);
  const BubbleJet j = scaled_bubble_jet(y, BubbleParams{n, st.scale, st.c});
  double out[kMaxDim + 1];
  site_fields(cfg, st, y, j, 1, out);
  return out[alpha];
}

// ---------------------------------------------------------------------------
// z family

namespace {

void check_beta(int beta, int n) {
  if (beta < 0 || beta >= kernel_count(n)) throw ConfigError("beta out of range");
}

double z_basic(int beta, const Point& y, const UstarJet& u, int n) {
  double z0 = 0.5 * (n - 2) * u.u;
  for (int i = 0; i < n; ++i) z0 += u.grad[i] * y[i];
  auto za = [&](int a) { return a == 0 ? z0 : u.grad[a - 1]; };
  auto ya = [&](int a) { return y[a - 1]; };
  // rotation generator in the (a, b) plane: -y_b d_a u + y_a d_b u
  auto rot = [&](int a, int b) { return -ya(b) * za(a) + ya(a) * za(b); };
  if (beta <= n) return za(beta);
  if (beta == n + 1) return rot(1, 2);
  if (beta == n + 2) return rot(3, 4);
  if (beta <= n + 6) {
    const int a = beta - n - 2;
    return -2.0 * ya(a) * z0 + norm2(y, n) * za(a);
  }
  if (beta <= 2 * n + 4) return rot(1, beta - n - 4);
  if (beta <= 3 * n + 2) return rot(2, beta - 2 * n - 2);
  if (beta <= 4 * n - 2) return rot(3, beta - 3 * n + 2);
  return rot(4, beta - 4 * n + 6);
}

}  // namespace

double eval_z(int beta, const Point& y, const UstarJet& u, int n) {
  check_beta(beta, n);
  return z_basic(beta, y, u, n);
}

double eval_z(int beta, const Point& y, const TowerConfiguration& cfg) {
  return eval_z(beta, y, eval_Ustar_jet(cfg, y), cfg.n);
}

double eval_bold_z(int beta, const Point& y, const UstarJet& u, int n) {
  check_beta(beta, n);
  if (beta >= n + 3 && beta <= n + 6) {
    const int a = beta - n - 2;
    return 0.5 * (z_basic(a, y, u, n) - z_basic(beta, y, u, n));
  }
  return z_basic(beta, y, u, n);
}

double eval_bold_z(int beta, const Point& y, const TowerConfiguration& cfg) {
  return eval_bold_z(beta, y, eval_Ustar_jet(cfg, y), cfg.n);
}

void eval_all_bold_z(const Point& y, const UstarJet& u, int n, double* out) {
  for (int b = 0; b < kernel_count(n); ++b) out[b] = eval_bold_z(b, y, u, n);
}

Eigen::MatrixXd rebasing_matrix(int n) {
  const int nz = kernel_count(n);
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(nz, nz);
  for (int a = 1; a <= 4; ++a) {
    r(n + 2 + a, n + 2 + a) = -0.5;
    r(n + 2 + a, a) = 0.5;
  }
  return r;
}

Eigen::MatrixXd decomposition_matrix(const TowerConfiguration& cfg) {
  const int n = cfg.n;
  const int ns = cfg.num_sites();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(kernel_count(n), field_count(cfg));
  // v . grad U_s expanded in the (orthogonal) frame of site s
  auto add_direction = [&](int beta, int s, const Point& v, double coef) {
    for (int a = 1; a <= n; ++a) {
      const Point f = site_frame(cfg, s, a);
      const double t = dot(v, f, n);
      if (t != 0.0) c(beta, field_index(cfg, a, s)) += coef * t / norm2(f, n);
    }
  };
  auto unit = [&](int a) {
    Point e = zero_point();
    e[a - 1] = 1.0;
    return e;
  };
  for (int s = 0; s < ns; ++s) {
    const Site st = cfg.site(s);
    const double sg = st.sign;
    // dilation: m U_s + grad U_s . y = Z_0s + c_s . grad U_s
    c(0, field_index(cfg, 0, s)) += sg;
    add_direction(0, s, st.c, sg);
    for (int a = 1; a <= n; ++a) add_direction(a, s, unit(a), sg);
    // rotations act on a bubble at c as (c_a e_b - c_b e_a) . grad U_c
    auto rotation = [&](int beta, int a, int b) {
      Point v = zero_point();
      v[b - 1] += st.c[a - 1];
      v[a - 1] -= st.c[b - 1];
      add_direction(beta, s, v, sg);
    };
    rotation(n + 1, 1, 2);
    rotation(n + 2, 3, 4);
    for (int a = 3; a <= n; ++a) rotation(n + a + 4, 1, a);
    for (int a = 3; a <= n; ++a) rotation(2 * n + a + 2, 2, a);
    for (int a = 5; a <= n; ++a) rotation(3 * n + a - 2, 3, a);
    for (int a = 5; a <= n; ++a) rotation(4 * n + a - 6, 4, a);
    // Kelvin rows: (z_a - z_{n+2+a})/2 = c_{s,a} [Z_0s + c_s . grad U_s] per bubble
    for (int a = 1; a <= 4; ++a) {
      const double ca = st.c[a - 1];
      if (ca == 0.0) continue;
      c(n + 2 + a, field_index(cfg, 0, s)) += sg * ca;
      add_direction(n + 2 + a, s, st.c, sg * ca);
    }
  }
  return c;
}

int decomposition_family(int beta, int n) {
  check_beta(beta, n);
  if (beta == 0) return 0;
  if (beta <= 2) return 1;
  if (beta <= 4) return 2;
  if (beta <= n) return 3;
  if (beta <= n + 2) return 4;
  if (beta <= n + 6) return 5;
  if (beta <= n + 8) return 6;
  if (beta <= 2 * n + 4) return 7;
  if (beta <= 2 * n + 6) return 8;
  if (beta <= 3 * n + 2) return 9;
  return 10;
}

double eval_decomposition(int beta, const TowerConfiguration& cfg, const Point& y) {
  const int n = cfg.n;
  check_beta(beta, n);
  if (!cfg.has_rings()) throw ConfigError("decomposition needs both rings");
  const int ns = cfg.num_sites();
  std::vector<double> pi(field_count(cfg));
  eval_fields(cfg, y, pi.data());
  auto Z0 = [&](int a) { return pi[a * ns]; };
  auto Zb = [&](int a, int j) { return pi[a * ns + 1 + j]; };
  auto Zh = [&](int a, int l) { return pi[a * ns + 1 + cfg.k + l]; };
  const double rx = cfg.xi_norm(), re = cfg.eta_norm();
  auto cb = [&](int j) { return std::cos(cfg.theta_bar[j]); };
  auto sb = [&](int j) { return std::sin(cfg.theta_bar[j]); };
  auto ch = [&](int l) { return std::cos(cfg.theta_hat[l]); };
  auto sh = [&](int l) { return std::sin(cfg.theta_hat[l]); };
  auto ring1 = [&](auto term) {
    double s = 0.0;
    for (int j = 0; j < cfg.k; ++j) s += term(j);
    return s;
  };
  auto ring2 = [&](auto term) {
    double s = 0.0;
    for (int l = 0; l < cfg.h; ++l) s += term(l);
    return s;
  };

  switch (decomposition_family(beta, n)) {
    case 0:
      return Z0(0) - ring1([&](int j) { return Zb(0, j) + Zb(1, j); }) -
             ring2([&](int l) { return Zh(0, l) + Zh(3, l); });
    case 1:
      if (beta == 1)
        return Z0(1) - ring1([&](int j) { return (cb(j) * Zb(1, j) - sb(j) * Zb(2, j)) / rx; }) -
               ring2([&](int l) { return Zh(1, l); });
      return Z0(2) - ring1([&](int j) { return (sb(j) * Zb(1, j) + cb(j) * Zb(2, j)) / rx; }) -
             ring2([&](int l) { return Zh(2, l); });
    case 2:
      if (beta == 3)
        return Z0(3) - ring1([&](int j) { return Zb(3, j); }) -
               ring2([&](int l) { return (ch(l) * Zh(3, l) - sh(l) * Zh(4, l)) / re; });
      return Z0(4) - ring1([&](int j) { return Zb(4, j); }) -
             ring2([&](int l) { return (sh(l) * Zh(3, l) + ch(l) * Zh(4, l)) / re; });
    case 3:
      return Z0(beta) - ring1([&](int j) { return Zb(beta, j); }) - ring2([&](int l) { return Zh(beta, l); });
    case 4:
      if (beta == n + 1) return -ring1([&](int j) { return Zb(2, j); });
      return -ring2([&](int l) { return Zh(4, l); });
    case 5: {
      const int a = beta - n - 2;
      if (a == 1) return -rx * ring1([&](int j) { return cb(j) * (Zb(0, j) + Zb(1, j)); });
      if (a == 2) return -rx * ring1([&](int j) { return sb(j) * (Zb(0, j) + Zb(1, j)); });
      if (a == 3) return -re * ring2([&](int l) { return ch(l) * (Zh(0, l) + Zh(3, l)); });
      return -re * ring2([&](int l) { return sh(l) * (Zh(0, l) + Zh(3, l)); });
    }
    case 6: {
      const int a = beta - n - 4;
      if (a == 3)
        return -rx * ring1([&](int j) { return cb(j) * Zb(3, j); }) + re * ring2([&](int l) { return ch(l) * Zh(1, l); });
      return -rx * ring1([&](int j) { return cb(j) * Zb(4, j); }) + re * ring2([&](int l) { return sh(l) * Zh(1, l); });
    }
    case 7: {
      const int a = beta - n - 4;
      return -rx * ring1([&](int j) { return cb(j) * Zb(a, j); });
    }
    case 8: {
      const int a = beta - 2 * n - 2;
      if (a == 3)
        return -rx * ring1([&](int j) { return sb(j) * Zb(3, j); }) + re * ring2([&](int l) { return ch(l) * Zh(2, l); });
      return -rx * ring1([&](int j) { return sb(j) * Zb(4, j); }) + re * ring2([&](int l) { return sh(l) * Zh(2, l); });
    }
    case 9: {
      const int a = beta - 2 * n - 2;
      return -rx * ring1([&](int j) { return sb(j) * Zb(a, j); });
    }
    default: {
      if (beta <= 4 * n - 2) {
        const int a = beta - 3 * n + 2;
        return -re * ring2([&](int l) { return ch(l) * Zh(a, l); });
      }
      const int a = beta - 4 * n + 6;
      return -re * ring2([&](int l) { return sh(l) * Zh(a, l); });
    }
  }
}

std::vector<Point> kernel_sample_points(const TowerConfiguration& cfg, int count, std::uint64_t seed) {
  const int n = cfg.n;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> logr(std::log(0.05), std::log(20.0));
  std::vector<Point> out;
  while (static_cast<int>(out.size()) < count) {
    Point y = zero_point();
    for (int i = 0; i < n; ++i) y[i] = gauss(rng);
    const double r = std::exp(logr(rng)) / norm(y, n);
    for (int i = 0; i < n; ++i) y[i] *= r;
    bool ok = true;
    for (int s = 1; s < cfg.num_sites() && ok; ++s) {
      const Site st = cfg.site(s);
      ok = norm(sub(y, st.c, n), n) >= 2.0 * st.scale;
    }
    if (ok) out.push_back(y);
  }
  return out;
}

double decomposition_residual(int beta, const TowerConfiguration& cfg, const std::vector<Point>& sample) {
  double worst = 0.0;
  for (const auto& y : sample)
    worst = std::max(worst, std::abs(eval_bold_z(beta, y, cfg) - eval_decomposition(beta, cfg, y)));
  return worst;
}

double kelvin_T(const Point& y, double v, const Point& grad, int n) {
  double radial = 0.0;
  for (int i = 0; i < n; ++i) radial += grad[i] * y[i];
  return (norm2(y, n) - 1.0) * grad[0] - 2.0 * y[0] * (0.5 * (n - 2) * v + radial);
}

double linearized_residual(int beta, const TowerConfiguration& cfg, const Point& y) {
  check_beta(beta, cfg.n);
  const int nf = field_count(cfg);
  std::vector<double> pi(nf), lpi(nf);
  eval_fields(cfg, y, pi.data(), lpi.data());
  const Eigen::MatrixXd c = decomposition_matrix(cfg);
  return c.row(beta).dot(Eigen::Map<const Eigen::VectorXd>(lpi.data(), nf));
}

double kelvin_image_deviation(const TowerConfiguration& cfg, const std::vector<Point>& sample) {
  const int n = cfg.n;
  const int nf = field_count(cfg);
  const int ns = cfg.num_sites();
  std::vector<double> pi(nf), lpi(nf), pk(nf), lk(nf);
  std::vector<double> diff(n + 1, 0.0), scale(n + 1, 0.0);
  for (const auto& y : sample) {
    eval_fields(cfg, y, pi.data(), lpi.data());
    eval_fields(cfg, kelvin_point(y, n), pk.data(), lk.data());
    const double w = std::pow(norm2(y, n), -0.5 * (n + 2));
    for (int a = 0; a <= n; ++a) {
      const double sgn = a == 0 ? -1.0 : 1.0;
      const double lhs = w * lk[a * ns];
      diff[a] = std::max(diff[a], std::abs(lhs - sgn * lpi[a * ns]));
      scale[a] = std::max(scale[a], std::abs(lpi[a * ns]));
    }
  }
  double worst = 0.0;
  for (int a = 0; a <= n; ++a)
    if (scale[a] > 0.0) worst = std::max(worst, diff[a] / scale[a]);
  return worst;
}

// ---------------------------------------------------------------------------
// Gram and residual norms

int numerical_rank(const Eigen::VectorXd& sv, double rel_threshold) {
  if (sv.size() == 0) return 0;
  const double top = sv.maxCoeff();
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > rel_threshold * top) ++r;
  return r;
}

GramResult gram_from_fields(const Eigen::MatrixXd& weighted, const TowerConfiguration& cfg, double err_est,
                            bool converged) {
  const Eigen::MatrixXd c = decomposition_matrix(cfg);
  GramResult g;
  g.gram = c * weighted * c.transpose();
  g.asymmetry = (g.gram - g.gram.transpose()).cwiseAbs().maxCoeff();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g.gram);
  g.singular_values = svd.singularValues();
  g.rank = numerical_rank(g.singular_values, kRankThreshold);
  g.min_singular_ratio = g.singular_values.minCoeff() / g.singular_values.maxCoeff();
  for (double t : {1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) {
    g.thresholds.push_back(t);
    g.rank_at_threshold.push_back(numerical_rank(g.singular_values, t));
  }
  // entry errors of the field products propagate through |C|
  g.err_est = err_est * (c.cwiseAbs() * Eigen::MatrixXd::Ones(c.cols(), c.cols()) * c.cwiseAbs().transpose()).maxCoeff();
  g.converged = converged;
  return g;
}

GramResult gram_rank(const TowerConfiguration& cfg, const QuadratureScheme& scheme) {
  const FieldIntegrals fi = field_integrals(cfg, scheme);
  return gram_from_fields(fi.weighted, cfg, fi.err_est, fi.converged);
}

namespace {

struct SparseEntry {
  int row, col;
  double val;
};

// Representation of the group on the rebased family, bold z(g y) = Dz(g) bold z(y).
std::vector<SparseEntry> kernel_map(const TowerConfiguration& cfg, const Eigen::MatrixXd& c,
                                    const Eigen::MatrixXd& c_pinv, const GroupElement& g) {
  const Eigen::MatrixXd cd = c * field_map(cfg, g).dense();
  const Eigen::MatrixXd dz = cd * c_pinv;
  const double miss = (dz * c - cd).cwiseAbs().maxCoeff();
  if (miss > 1e-9 * std::max(1.0, cd.cwiseAbs().maxCoeff()))
    throw NumericalError("kernel family is not closed under the ring symmetries");
  std::vector<SparseEntry> out;
  for (int i = 0; i < dz.rows(); ++i)
    for (int j = 0; j < dz.cols(); ++j)
      if (std::abs(dz(i, j)) > 1e-12) out.push_back({i, j, dz(i, j)});
  return out;
}

double abs_pow(double x, double q) {
  const double a = std::abs(x);
  if (q == 3.0) return a * a * a;
  if (q == 2.0) return a * a;
  return std::pow(a, q);
}

std::vector<double> residual_powers_level(const TowerConfiguration& cfg, const QuadratureScheme& scheme, int level,
                                          const Eigen::MatrixXd& c,
                                          const std::vector<std::vector<SparseEntry>>& all_maps,
                                          const std::vector<std::vector<SparseEntry>>& ring1_maps,
                                          const std::vector<std::vector<SparseEntry>>& ring2_maps) {
  const int n = cfg.n;
  const int nz = kernel_count(n);
  const int nf = field_count(cfg);
  const double q = scheme.q;
  const OrbitNodes nodes = orbit_nodes(cfg, scheme, level);
  auto eval_for = [&](const std::vector<std::vector<SparseEntry>>& maps) {
    return [&, maps_ptr = &maps](const Point& y, double* a, double* b) {
      thread_local std::vector<double> pi, lpi, lz, v;
      pi.resize(nf);
      lpi.resize(nf);
      lz.resize(nz);
      v.resize(nz);
      eval_fields(cfg, y, pi.data(), lpi.data());
      Eigen::Map<Eigen::VectorXd>(lz.data(), nz) = c * Eigen::Map<const Eigen::VectorXd>(lpi.data(), nf);
      const double w = starstar_weight(y, n, q);
      for (int i = 0; i < nz; ++i) a[i] = 0.0;
      for (const auto& map : *maps_ptr) {
        std::fill(v.begin(), v.end(), 0.0);
        for (const auto& e : map) v[e.row] += e.val * lz[e.col];
        for (int i = 0; i < nz; ++i) a[i] += abs_pow(w * v[i], q);
      }
      b[0] = 1.0;
    };
  };
  Eigen::VectorXd total = Eigen::VectorXd::Zero(nz);
  for (const auto& w : nodes.wedge) total += sum_outer(w, nz, 1, eval_for(all_maps)).col(0);
  total += sum_outer(nodes.ring1_patch[0], nz, 1, eval_for(ring1_maps)).col(0);
  total += sum_outer(nodes.ring2_patch[0], nz, 1, eval_for(ring2_maps)).col(0);
  return std::vector<double>(total.data(), total.data() + nz);
}

}  // namespace

ResidualNorms linearized_residual_norms(const TowerConfiguration& cfg, const QuadratureScheme& scheme) {
  scheme.validate(cfg.n);
  validate_q(cfg.n, scheme.q);
  const Eigen::MatrixXd c = decomposition_matrix(cfg);
  const Eigen::MatrixXd c_pinv = c.transpose() * (c * c.transpose()).inverse();
  std::vector<std::vector<SparseEntry>> all, r1, r2;
  for (int i = 0; i < group_order(cfg); ++i) all.push_back(kernel_map(cfg, c, c_pinv, group_element(cfg, i)));
  for (int m = 0; m < cfg.k; ++m) r1.push_back(kernel_map(cfg, c, c_pinv, GroupElement{m, 0, 0, 0}));
  for (int l = 0; l < cfg.h; ++l) r2.push_back(kernel_map(cfg, c, c_pinv, GroupElement{0, 0, l, 0}));

  ResidualNorms out;
  std::vector<double> prev = residual_powers_level(cfg, scheme, 0, c, all, r1, r2);
  std::vector<double> cur = prev;
  for (int level = 1; level <= scheme.max_refine; ++level) {
    cur = residual_powers_level(cfg, scheme, level, c, all, r1, r2);
    double worst = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const double d = std::abs(cur[i] - prev[i]);
      worst = std::max(worst, d / std::max(std::abs(cur[i]), 1e-300));
      ok = ok && d <= scheme.rel_tol * std::abs(cur[i]);
    }
    out.err_est = worst;
    out.converged = ok;
    if (ok) break;
    prev = cur;
  }
  for (double v : cur) out.values.push_back(std::pow(std::max(v, 0.0), 1.0 / scheme.q));
  return out;
}

}  // namespace bt
