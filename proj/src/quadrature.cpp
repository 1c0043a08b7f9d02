#include "bubbletower/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "bubbletower/parallel.hpp"

namespace bt {

namespace {
constexpr double kPi = std::numbers::pi;
}

// ---------------------------------------------------------------------------
// 1-D rules

const Rule1D& gauss_legendre(int m) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<Rule1D>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(m);
  if (it != cache.end()) return *it->second;
  if (m < 1) throw ConfigError("Gauss-Legendre order must be positive");
  auto rule = std::make_unique<Rule1D>();
  rule->x.resize(m);
  rule->w.resize(m);
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= m; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      if (m == 1) p0 = 1.0;
      dp = m * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= m; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    if (m == 1) p0 = 1.0;
    dp = m * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule->x[i] = -x;
    rule->x[m - 1 - i] = x;
    rule->w[i] = w;
    rule->w[m - 1 - i] = w;
  }
  if (m % 2 == 1) rule->x[m / 2] = 0.0;
  auto& ref = *rule;
  cache.emplace(m, std::move(rule));
  return ref;
}

Rule1D composite_gl(const std::vector<double>& breaks, int m) {
  const Rule1D& g = gauss_legendre(m);
  Rule1D out;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    if (!(b > a)) continue;
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    for (int j = 0; j < m; ++j) {
      out.x.push_back(c + h * g.x[j]);
      out.w.push_back(h * g.w[j]);
    }
  }
  return out;
}

Rule1D radial_rule(double r0, double r1, double scale, double ref_scale, std::vector<double> breaks, int m) {
  std::vector<double> pts{r0};
  std::sort(breaks.begin(), breaks.end());
  for (double b : breaks)
    if (b > r0 && b < r1) pts.push_back(b);
  pts.push_back(r1);
  const Rule1D& g = gauss_legendre(m);
  Rule1D out;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double ta = std::asinh(pts[i] / scale), tb = std::asinh(pts[i + 1] / scale);
    const double dref = std::asinh(pts[i + 1] / ref_scale) - std::asinh(pts[i] / ref_scale);
    const int panels = std::max(1, static_cast<int>(std::ceil(dref / 0.75)));
    const double step = (tb - ta) / panels;
    for (int p = 0; p < panels; ++p) {
      const double a = ta + p * step;
      const double h = 0.5 * step, c = a + h;
      for (int j = 0; j < m; ++j) {
        const double t = c + h * g.x[j];
        out.x.push_back(scale * std::sinh(t));
        out.w.push_back(h * g.w[j] * scale * std::cosh(t));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scheme

QuadratureScheme QuadratureScheme::defaults(int n) {
  QuadratureScheme s;
  s.q = 0.75 * n;
  return s;
}

void validate_q(int n, double q) {
  if (!(q > 0.5 * n && q < double(n))) {
    std::ostringstream os;
    os << "q must lie in (" << 0.5 * n << ", " << n << ")";
    throw ConfigError(os.str());
  }
}

void QuadratureScheme::validate(int n) const {
  validate_q(n, q);
  if (!(alpha_bar > 0.0) || !(alpha_hat > 0.0)) throw ConfigError("alpha_bar and alpha_hat must be positive");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw ConfigError("rel_tol must lie in (0, 1)");
  if (radial_nodes < 2 || radial_nodes > 64) throw ConfigError("radial_nodes must lie in [2, 64]");
  if (angular_degree < 4 || angular_degree > 128) throw ConfigError("angular_degree must lie in [4, 128]");
  if (max_refine < 1 || max_refine > 6) throw ConfigError("max_refine must lie in [1, 6]");
}

// ---------------------------------------------------------------------------
// Scalar fields

namespace {

Point rotate12(const Point& y, double a) {
  Point x = y;
  const double c = std::cos(a), s = std::sin(a);
  x[0] = c * y[0] - s * y[1];
  x[1] = s * y[0] + c * y[1];
  return x;
}

Point rotate34(const Point& y, double b) {
  Point x = y;
  const double c = std::cos(b), s = std::sin(b);
  x[2] = c * y[2] - s * y[3];
  x[3] = s * y[2] + c * y[3];
  return x;
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

ScalarField::ScalarField(Field f, const TowerConfiguration& cfg, unsigned tags, unsigned even_mask,
                         double decay_exponent, double kelvin_weight)
    : f_(std::move(f)), n_(cfg.n), tags_(tags), even_mask_(even_mask), decay_(decay_exponent) {
  const int n = n_;
  if ((tags & kRing1Invariant) && cfg.k == 0) throw ConfigError("ring-1 tag needs a ring");
  if ((tags & kRing2Invariant) && cfg.h == 0) throw ConfigError("ring-2 tag needs a ring");
  if ((tags & kKelvinEven) && (tags & kKelvinOdd)) throw ConfigError("field cannot be Kelvin even and odd");
  const double kw = kelvin_weight < 0.0 ? double(n - 2) : kelvin_weight;
  std::mt19937_64 rng(0x5eed1234u);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(std::log(0.05), std::log(20.0));
  for (int s = 0; s < 32 && (tags || even_mask); ++s) {
    Point y = zero_point();
    double r2 = 0.0;
    for (int i = 0; i < n; ++i) {
      y[i] = gauss(rng);
      r2 += y[i] * y[i];
    }
    const double r = std::exp(unif(rng)) / std::sqrt(r2);
    for (int i = 0; i < n; ++i) y[i] *= r;
    const double v = f_(y);
    auto fail = [&](const char* what) {
      throw ConfigError(std::string("declared symmetry tag violated: ") + what);
    };
    if ((tags & kRing1Invariant) && !close_rel(f_(rotate12(y, 2.0 * kPi / cfg.k)), v, 1e-8)) fail("ring1-invariant");
    if ((tags & kRing2Invariant) && !close_rel(f_(rotate34(y, 2.0 * kPi / cfg.h)), v, 1e-8)) fail("ring2-invariant");
    for (int i = 0; i < n; ++i) {
      if (!(even_mask & (1u << i))) continue;
      Point x = y;
      x[i] = -x[i];
      if (!close_rel(f_(x), v, 1e-8)) fail("even-mask");
    }
    if (tags & (kKelvinEven | kKelvinOdd)) {
      const double rr = norm2(y, n);
      const double kv = f_(kelvin_point(y, n)) * std::pow(rr, -0.5 * kw);
      const double sign = (tags & kKelvinEven) ? 1.0 : -1.0;
      if (!close_rel(kv, sign * v, 1e-8)) fail("kelvin");
    }
  }
}

// ---------------------------------------------------------------------------
// Partition geometry

double PatchGeometry::chi(SiteKind ring, double r) const {
  const double rp = ring == SiteKind::Ring2 ? rp2 : rp1;
  const double rq = ring == SiteKind::Ring2 ? rq2 : rq1;
  if (r <= rp) return 1.0;
  if (r >= rq) return 0.0;
  // C-infinity step built from exp(-1/x)
  const double x = (rq - r) / (rq - rp);
  const double fa = std::exp(-1.0 / x), fb = std::exp(-1.0 / (1.0 - x));
  return fa / (fa + fb);
}

PatchGeometry make_patch_geometry(const TowerConfiguration& cfg, const QuadratureScheme& scheme) {
  PatchGeometry g;
  if (!cfg.has_rings()) return g;
  const auto [d1, d2, d3] = min_separation(cfg);
  g.ball1 = scheme.alpha_bar / cfg.k;
  g.ball2 = scheme.alpha_hat / cfg.h;
  g.rq1 = 0.45 * std::min(d1, d3);
  g.rq2 = 0.45 * std::min(d2, d3);
  g.rp1 = std::max(g.ball1, 0.4 * g.rq1);
  g.rp2 = std::max(g.ball2, 0.4 * g.rq2);
  if (g.rp1 > 0.8 * g.rq1) throw ConfigError("alpha_bar too large for the ring-1 spacing");
  if (g.rp2 > 0.8 * g.rq2) throw ConfigError("alpha_hat too large for the ring-2 spacing");
  g.grade1 = g.rp1;
  g.grade2 = g.rp2;
  return g;
}

double remainder_weight(const TowerConfiguration& cfg, const PatchGeometry& g, const Point& y) {
  if (!cfg.has_rings()) return 1.0;
  const int n = cfg.n;
  double s = 0.0;
  // Patches are disjoint, so only the angularly nearest site of each ring can touch y.
  {
    const double a = std::atan2(y[1], y[0]);
    int j = static_cast<int>(std::lround(a * cfg.k / (2.0 * kPi)));
    j = ((j % cfg.k) + cfg.k) % cfg.k;
    const double r = norm(sub(y, cfg.xi[j], n), n);
    if (r < g.rq1) s += g.chi(SiteKind::Ring1, r);
  }
  {
    const double b = std::atan2(y[3], y[2]);
    int l = static_cast<int>(std::lround(b * cfg.h / (2.0 * kPi)));
    l = ((l % cfg.h) + cfg.h) % cfg.h;
    const double r = norm(sub(y, cfg.eta[l], n), n);
    if (r < g.rq2) s += g.chi(SiteKind::Ring2, r);
  }
  return 1.0 - s;
}

// ---------------------------------------------------------------------------
// Node sets

std::size_t NodeSet::count_nodes() const {
  std::size_t total = 0;
  std::vector<QNode> buf;
  for (std::size_t b = 0; b < blocks(); ++b) {
    buf.clear();
    block(b, buf);
    total += buf.size();
  }
  return total;
}

void sphere_rule(int m, int nodes, std::vector<std::vector<double>>& dirs, std::vector<double>& w) {
  dirs.clear();
  w.clear();
  if (m == 0) {
    dirs = {{1.0}, {-1.0}};
    w = {1.0, 1.0};
    return;
  }
  if (m == 1) {
    const int nt = std::max(4, 2 * nodes);
    for (int i = 0; i < nt; ++i) {
      const double a = 2.0 * kPi * i / nt;
      dirs.push_back({std::cos(a), std::sin(a)});
      w.push_back(2.0 * kPi / nt);
    }
    return;
  }
  std::vector<std::vector<double>> sub_dirs;
  std::vector<double> sub_w;
  sphere_rule(m - 1, nodes, sub_dirs, sub_w);
  const Rule1D th = composite_gl({0.0, kPi / 2, kPi}, std::max(2, nodes / 2));
  for (std::size_t i = 0; i < th.x.size(); ++i) {
    const double c = std::cos(th.x[i]), s = std::sin(th.x[i]);
    const double wt = th.w[i] * std::pow(s, m - 1);
    for (std::size_t j = 0; j < sub_dirs.size(); ++j) {
      std::vector<double> d{c};
      for (double v : sub_dirs[j]) d.push_back(s * v);
      dirs.push_back(std::move(d));
      w.push_back(wt * sub_w[j]);
    }
  }
}

namespace {

int round_up_multiple(int v, int m) {
  if (m <= 0) return v;
  return ((v + m - 1) / m) * m;
}

}  // namespace

DirectionRule direction_rule(int n, int n_mix, int n1, int n2, int n_extra) {
  DirectionRule out;
  const Rule1D& mix = gauss_legendre(n_mix);
  std::vector<std::vector<double>> tail_dirs;
  std::vector<double> tail_w;
  Rule1D phi;
  if (n > 4) {
    phi = composite_gl({0.0, kPi / 4, kPi / 2}, std::max(2, n_extra));
    sphere_rule(n - 5, n_extra, tail_dirs, tail_w);
  } else {
    phi.x = {kPi / 2};
    phi.w = {1.0};
    tail_dirs = {{}};
    tail_w = {1.0};
  }
  for (std::size_t ip = 0; ip < phi.x.size(); ++ip) {
    const double sp = std::sin(phi.x[ip]), cp = std::cos(phi.x[ip]);
    double wp = phi.w[ip];
    if (n > 4) wp *= sp * sp * sp * std::pow(cp, n - 5);
    for (std::size_t it = 0; it < tail_dirs.size(); ++it) {
      for (int im = 0; im < n_mix; ++im) {
        // s = sin^2(psi) is uniform for the measure cos(psi) sin(psi) dpsi
        const double s = 0.5 * (mix.x[im] + 1.0);
        const double ws = 0.25 * mix.w[im];
        const double c1 = std::sqrt(1.0 - s), c2 = std::sqrt(s);
        for (int i1 = 0; i1 < n1; ++i1) {
          const double a = 2.0 * kPi * i1 / n1;
          for (int i2 = 0; i2 < n2; ++i2) {
            const double b = 2.0 * kPi * i2 / n2;
            Point d = zero_point();
            d[0] = sp * c1 * std::cos(a);
            d[1] = sp * c1 * std::sin(a);
            d[2] = sp * c2 * std::cos(b);
            d[3] = sp * c2 * std::sin(b);
            for (std::size_t q = 0; q < tail_dirs[it].size(); ++q) d[4 + q] = cp * tail_dirs[it][q];
            out.dirs.push_back(d);
            out.w.push_back(wp * tail_w[it] * ws * (2.0 * kPi / n1) * (2.0 * kPi / n2));
          }
        }
      }
    }
  }
  return out;
}

PatchNodes::PatchNodes(int n, const Point& center, Rule1D radial, DirectionRule dirs, Cutoff cutoff,
                       const PatchGeometry* geom, SiteKind ring)
    : n_(n), center_(center), radial_(std::move(radial)), dirs_(std::move(dirs)), cutoff_(cutoff), ring_(ring) {
  if (geom) geom_ = *geom;
  if (cutoff_ == Cutoff::Partition && !geom) throw ConfigError("partition cutoff needs a patch geometry");
}

void PatchNodes::block(std::size_t b, std::vector<QNode>& out) const {
  const double r = radial_.x[b];
  double wr = radial_.w[b] * std::pow(r, n_ - 1);
  if (cutoff_ == Cutoff::Partition) wr *= geom_.chi(ring_, r);
  if (wr == 0.0) return;
  out.reserve(out.size() + dirs_.dirs.size());
  for (std::size_t i = 0; i < dirs_.dirs.size(); ++i) {
    QNode q;
    q.y = center_;
    for (int d = 0; d < n_; ++d) q.y[d] += r * dirs_.dirs[i][d];
    q.w = wr * dirs_.w[i];
    out.push_back(q);
  }
}

int angular_cells(int ring_size) { return ring_size > 0 ? ring_size : 4; }

namespace {

std::vector<double> graded_breaks(double lo, double hi, double ell_lo, double ell_hi) {
  // Breaks clustered geometrically toward both ends with finest width ell/4.
  std::vector<double> b{lo, hi};
  const double mid = 0.5 * (lo + hi);
  if (ell_lo > 0.0)
    for (double d = 0.25 * ell_lo; lo + d < mid; d *= 2.0) b.push_back(lo + d);
  if (ell_hi > 0.0)
    for (double d = 0.25 * ell_hi; hi - d > mid; d *= 2.0) b.push_back(hi - d);
  b.push_back(mid);
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

Rule1D cells_rule(const std::vector<int>& cells, int half_cells, int m) {
  Rule1D out;
  const Rule1D& g = gauss_legendre(m);
  const double width = 2.0 * kPi / half_cells;
  for (int c : cells) {
    const double a = c * width;
    for (int j = 0; j < m; ++j) {
      out.x.push_back(a + 0.5 * width * (g.x[j] + 1.0));
      out.w.push_back(0.5 * width * g.w[j]);
    }
  }
  return out;
}

}  // namespace

RemainderNodes::RemainderNodes(const TowerConfiguration& cfg, const PatchGeometry& geom,
                               const QuadratureScheme& scheme, int level, std::vector<int> a_cells,
                               std::vector<int> b_cells, bool kelvin_part)
    : cfg_(&cfg), geom_(geom), kelvin_(kelvin_part), ka_(angular_cells(cfg.k)), kb_(angular_cells(cfg.h)) {
  const int n = cfg.n;
  const int m = scheme.radial_at(level);
  const double l1 = cfg.has_rings() ? geom.grade1 : 0.0;
  const double l2 = cfg.has_rings() ? geom.grade2 : 0.0;
  t_ = composite_gl(graded_breaks(0.0, kPi / 2, l1, l2), m);
  const double lr = cfg.has_rings() ? std::min(l1, l2) : 0.0;
  std::vector<double> rb = graded_breaks(0.0, 1.0, 0.0, lr);
  rho_ = composite_gl(rb, m);
  const int na = std::max(4, (2 * scheme.angular_at(level)) / 3);
  a_ = cells_rule(a_cells, 2 * ka_, na);
  b_ = cells_rule(b_cells, 2 * kb_, na);
  if (n > 4) {
    phi_ = composite_gl(graded_breaks(0.0, kPi / 2, 0.0, lr > 0 ? lr : 0.25), m);
    std::vector<std::vector<double>> td;
    std::vector<double> tw;
    sphere_rule(n - 5, scheme.angular_at(level) / 2, td, tw);
    for (std::size_t i = 0; i < td.size(); ++i) {
      Point d = zero_point();
      for (std::size_t q = 0; q < td[i].size(); ++q) d[q] = td[i][q];
      tail_.dirs.push_back(d);
      tail_.w.push_back(tw[i]);
    }
  } else {
    phi_.x = {kPi / 2};
    phi_.w = {1.0};
    tail_.dirs = {zero_point()};
    tail_.w = {1.0};
  }
}

void RemainderNodes::block(std::size_t b, std::vector<QNode>& out) const {
  const int n = cfg_->n;
  const std::size_t ir = b / t_.x.size(), itt = b % t_.x.size();
  const double rho = rho_.x[ir], t = t_.x[itt];
  const double ct = std::cos(t), st = std::sin(t);
  const double w0 = rho_.w[ir] * t_.w[itt] * std::pow(rho, n - 1) * ct * st;
  for (std::size_t ip = 0; ip < phi_.x.size(); ++ip) {
    const double sp = std::sin(phi_.x[ip]), cp = std::cos(phi_.x[ip]);
    double w1 = w0 * phi_.w[ip];
    if (n > 4) w1 *= sp * sp * sp * std::pow(cp, n - 5);
    for (std::size_t iw = 0; iw < tail_.dirs.size(); ++iw) {
      const double w2 = w1 * tail_.w[iw];
      for (std::size_t ia = 0; ia < a_.x.size(); ++ia) {
        const double ca = std::cos(a_.x[ia]), sa = std::sin(a_.x[ia]);
        for (std::size_t ib = 0; ib < b_.x.size(); ++ib) {
          const double cb = std::cos(b_.x[ib]), sb = std::sin(b_.x[ib]);
          Point x = zero_point();
          x[0] = rho * sp * ct * ca;
          x[1] = rho * sp * ct * sa;
          x[2] = rho * sp * st * cb;
          x[3] = rho * sp * st * sb;
          for (int q = 4; q < n; ++q) x[q] = rho * cp * tail_.dirs[iw][q - 4];
          double w = w2 * a_.w[ia] * b_.w[ib];
          Point y = x;
          if (kelvin_) {
            const double r2 = rho * rho;
            for (int q = 0; q < n; ++q) y[q] = x[q] / r2;
            w *= std::pow(r2, -n);
          }
          w *= remainder_weight(*cfg_, geom_, y);
          if (w == 0.0) continue;
          out.push_back({y, w});
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Drivers

double pairwise_sum(const std::vector<double>& v) {
  std::vector<double> cur = v;
  while (cur.size() > 1) {
    std::vector<double> next((cur.size() + 1) / 2);
    for (std::size_t i = 0; i < next.size(); ++i)
      next[i] = cur[2 * i] + (2 * i + 1 < cur.size() ? cur[2 * i + 1] : 0.0);
    cur.swap(next);
  }
  return cur.empty() ? 0.0 : cur[0];
}

double sum_nodes(const NodeSet& nodes, const Field& f) {
  const std::size_t nb = nodes.blocks();
  std::vector<double> partial(nb, 0.0);
  parallel_for(nb, [&](std::size_t b) {
    std::vector<QNode> buf;
    nodes.block(b, buf);
    double s = 0.0;
    for (const auto& q : buf) s += q.w * f(q.y);
    partial[b] = s;
  });
  return pairwise_sum(partial);
}

Eigen::MatrixXd sum_outer(const NodeSet& nodes, int rows, int cols, const OuterEval& eval) {
  constexpr std::size_t kGroup = 16;
  constexpr int kBatch = 64;
  const std::size_t nb = nodes.blocks();
  const std::size_t ng = (nb + kGroup - 1) / kGroup;
  std::vector<Eigen::MatrixXd> partial(ng);
  parallel_for(ng, [&](std::size_t g) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::MatrixXd A(rows, kBatch), B(cols, kBatch);
    std::vector<QNode> buf;
    int fill = 0;
    auto flush = [&] {
      if (fill == 0) return;
      acc.noalias() += A.leftCols(fill) * B.leftCols(fill).transpose();
      fill = 0;
    };
    for (std::size_t b = g * kGroup; b < std::min(nb, (g + 1) * kGroup); ++b) {
      buf.clear();
      nodes.block(b, buf);
      for (const auto& q : buf) {
        eval(q.y, A.col(fill).data(), B.col(fill).data());
        A.col(fill) *= q.w;
        if (++fill == kBatch) flush();
      }
    }
    flush();
    partial[g] = std::move(acc);
  });
  // pairwise reduction over groups
  while (partial.size() > 1) {
    std::vector<Eigen::MatrixXd> next((partial.size() + 1) / 2);
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = partial[2 * i];
      if (2 * i + 1 < partial.size()) next[i] += partial[2 * i + 1];
    }
    partial.swap(next);
  }
  if (partial.empty()) return Eigen::MatrixXd::Zero(rows, cols);
  return partial[0];
}

IntegrationResult refine(const std::function<double(int)>& at_level, const QuadratureScheme& scheme,
                         double abs_floor) {
  IntegrationResult r;
  double prev = at_level(0);
  for (int level = 1; level <= scheme.max_refine; ++level) {
    const double cur = at_level(level);
    r.value = cur;
    r.err_est = std::abs(cur - prev);
    r.level = level;
    if (r.err_est <= scheme.rel_tol * std::max(std::abs(cur), abs_floor)) {
      r.converged = true;
      return r;
    }
    prev = cur;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Integration over R^n

namespace {

struct Reduction {
  std::vector<int> a_cells, b_cells;
  double mult = 1.0;
  bool ring1_once = false, ring2_once = false;
};

Reduction reduction_for(unsigned tags, unsigned mask, const TowerConfiguration& cfg) {
  Reduction r;
  const int ka = angular_cells(cfg.k), kb = angular_cells(cfg.h);
  const bool inv1 = tags & kRing1Invariant, inv2 = tags & kRing2Invariant;
  const bool ev2 = mask & (1u << 1), ev4 = mask & (1u << 3);
  if (inv1 && ev2) {
    r.a_cells = {0};
    r.mult *= 2.0 * ka;
  } else if (inv1) {
    r.a_cells = {0, 1};
    r.mult *= ka;
  } else if (ev2) {
    for (int c = 0; c < ka; ++c) r.a_cells.push_back(c);
    r.mult *= 2.0;
  } else {
    for (int c = 0; c < 2 * ka; ++c) r.a_cells.push_back(c);
  }
  if (inv2 && ev4) {
    r.b_cells = {0};
    r.mult *= 2.0 * kb;
  } else if (inv2) {
    r.b_cells = {0, 1};
    r.mult *= kb;
  } else if (ev4) {
    for (int c = 0; c < kb; ++c) r.b_cells.push_back(c);
    r.mult *= 2.0;
  } else {
    for (int c = 0; c < 2 * kb; ++c) r.b_cells.push_back(c);
  }
  r.ring1_once = inv1;
  r.ring2_once = inv2;
  return r;
}

enum class PatchRange { Full, Annulus };

}  // namespace

DirectionRule patch_directions(const TowerConfiguration& cfg, const QuadratureScheme& scheme, int level) {
  const int ang = scheme.angular_at(level);
  const int n1 = round_up_multiple(2 * ang, cfg.k);
  const int n2 = round_up_multiple(2 * ang, cfg.h);
  return direction_rule(cfg.n, ang, n1, n2, std::max(4, ang / 2));
}

double integrate_ball_level(const Field& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme,
                            int level, const Point& center, double r0, double r1, double scale,
                            double ref_scale, const std::vector<double>& breaks) {
  const Rule1D radial = radial_rule(r0, r1, scale, ref_scale, breaks, scheme.radial_at(level));
  PatchNodes nodes(cfg.n, center, radial, patch_directions(cfg, scheme, level));
  return sum_nodes(nodes, f);
}

IntegrationResult integrate_ball(const Field& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme,
                                 const Point& center, double r0, double r1, double scale, double ref_scale,
                                 const std::vector<double>& breaks) {
  return refine(
      [&](int level) {
        return integrate_ball_level(f, cfg, scheme, level, center, r0, r1, scale, ref_scale, breaks);
      },
      scheme);
}

namespace {

double ring_patches(const Field& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme,
                    const PatchGeometry& geom, int level, PatchRange range, bool ring1_once, bool ring2_once) {
  const DirectionRule dirs = patch_directions(cfg, scheme, level);
  const int m = scheme.radial_at(level);
  double total = 0.0;
  for (int ring = 1; ring <= 2; ++ring) {
    const SiteKind kind = ring == 1 ? SiteKind::Ring1 : SiteKind::Ring2;
    const double sigma = ring == 1 ? cfg.mu : cfg.lambda;
    const double rp = ring == 1 ? geom.rp1 : geom.rp2;
    const double rq = ring == 1 ? geom.rq1 : geom.rq2;
    const double ball = ring == 1 ? geom.ball1 : geom.ball2;
    const double r0 = range == PatchRange::Full ? 0.0 : ball;
    const Rule1D radial = radial_rule(r0, rq, sigma, sigma, {ball, rp}, m);
    const auto& centers = ring == 1 ? cfg.xi : cfg.eta;
    const bool once = ring == 1 ? ring1_once : ring2_once;
    const int count = static_cast<int>(centers.size());
    for (int j = 0; j < (once ? 1 : count); ++j) {
      PatchNodes nodes(cfg.n, centers[j], radial, dirs, PatchNodes::Cutoff::Partition, &geom, kind);
      total += (once ? count : 1) * sum_nodes(nodes, f);
    }
  }
  return total;
}

double integrate_level_impl(const Field& f, unsigned tags, unsigned mask, const TowerConfiguration& cfg,
                            const QuadratureScheme& scheme, int level, PatchRange range) {
  const PatchGeometry geom = make_patch_geometry(cfg, scheme);
  const Reduction red = reduction_for(tags, mask, cfg);
  double total = 0.0;
  if (cfg.has_rings())
    total += ring_patches(f, cfg, scheme, geom, level, range, red.ring1_once, red.ring2_once);
  for (bool kel : {false, true}) {
    RemainderNodes rem(cfg, geom, scheme, level, red.a_cells, red.b_cells, kel);
    total += red.mult * sum_nodes(rem, f);
  }
  return total;
}

void require_integrable(const ScalarField& f) {
  if (!(f.decay_exponent() > f.n())) throw ConfigError("declared decay is not integrable (needs exponent > n)");
}

}  // namespace

double integrate_level(const ScalarField& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme,
                       int level) {
  require_integrable(f);
  return integrate_level_impl(f.evaluator(), f.tags(), f.even_mask(), cfg, scheme, level, PatchRange::Full);
}

IntegrationResult integrate(const ScalarField& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme) {
  require_integrable(f);
  return refine(
      [&](int level) {
        return integrate_level_impl(f.evaluator(), f.tags(), f.even_mask(), cfg, scheme, level, PatchRange::Full);
      },
      scheme);
}

// ---------------------------------------------------------------------------
// Norms

namespace {

void sup_update(SupResult& s, const Field& f, const Point& y, int n) {
  const double r = norm(y, n);
  const double v = (1.0 + std::pow(r, n - 2)) * std::abs(f(y));
  ++s.samples;
  if (v > s.value) {
    s.value = v;
    s.argmax = y;
  }
}

SupResult sup_sample(const ScalarField& f, const TowerConfiguration& cfg, int density) {
  const int n = cfg.n;
  SupResult s;
  s.argmax = zero_point();
  const DirectionRule dirs = direction_rule(n, std::max(2, density / 2), density, density, std::max(2, density / 4));
  const Field& g = f.evaluator();
  // coarse ball |y| <= 2 and its Kelvin image
  for (int i = 0; i <= 4 * density; ++i) {
    const double r = 2.0 * i / (4.0 * density);
    if (r == 0.0) {
      sup_update(s, g, zero_point(), n);
      continue;
    }
    for (const auto& d : dirs.dirs) {
      Point y = zero_point();
      for (int q = 0; q < n; ++q) y[q] = r * d[q];
      sup_update(s, g, y, n);
      if (r >= 0.5) {
        Point x = zero_point();
        for (int q = 0; q < n; ++q) x[q] = d[q] * (2.0 / r) * 2.0;  // |x| = 4/r in [2, 8]
        sup_update(s, g, x, n);
        for (int q = 0; q < n; ++q) x[q] = d[q] / (r * r * 1e-3);  // far field
        sup_update(s, g, x, n);
      }
    }
  }
  // refined grids around each bubble
  for (const Site& st : cfg.sites()) {
    if (st.kind == SiteKind::Center) continue;
    const double sigma = st.scale;
    for (int i = 0; i <= 2 * density; ++i) {
      const double r = sigma * (std::pow(2.0, 10.0 * i / (2.0 * density)) - 1.0) * 0.05;
      for (const auto& d : dirs.dirs) {
        Point y = st.c;
        for (int q = 0; q < n; ++q) y[q] += r * d[q];
        sup_update(s, g, y, n);
        if (r == 0.0) break;
      }
    }
  }
  return s;
}

}  // namespace

SupResult norm_star(const ScalarField& f, const TowerConfiguration& cfg) {
  SupResult prev = sup_sample(f, cfg, 6);
  for (int density = 12; density <= 96; density *= 2) {
    SupResult cur = sup_sample(f, cfg, density);
    cur.samples += prev.samples;
    if (cur.value <= prev.value * (1.0 + 1e-3) && cur.value >= prev.value) return cur;
    if (cur.value < prev.value) {
      prev.samples = cur.samples;
      return prev;
    }
    prev = cur;
  }
  return prev;
}

double starstar_weight(const Point& y, int n, double q) {
  return std::pow(1.0 + norm(y, n), n + 2.0 - 2.0 * n / q);
}

IntegrationResult starstar_power(const ScalarField& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme,
                                 Region region) {
  const int n = cfg.n;
  const double q = scheme.q;
  validate_q(n, q);
  const Field& base = f.evaluator();
  const Field powered = [base, n, q](const Point& y) {
    return std::pow(std::abs(starstar_weight(y, n, q) * base(y)), q);
  };
  const double decay = q * (f.decay_exponent() - (n + 2.0 - 2.0 * n / q));
  // Ring invariance and reflection evenness carry over to |w f|^q.
  const unsigned tags = f.tags() & (kRing1Invariant | kRing2Invariant);
  const unsigned mask = f.even_mask();
  const PatchGeometry geom = make_patch_geometry(cfg, scheme);
  switch (region.kind) {
    case RegionKind::All:
    case RegionKind::Exterior: {
      if (!(decay > n)) throw ConfigError("weighted field is not L^q integrable");
      const PatchRange range = region.kind == RegionKind::All ? PatchRange::Full : PatchRange::Annulus;
      return refine(
          [&](int level) { return integrate_level_impl(powered, tags, mask, cfg, scheme, level, range); }, scheme);
    }
    case RegionKind::Ring1Ball:
    case RegionKind::Ring2Ball: {
      const bool r1 = region.kind == RegionKind::Ring1Ball;
      const auto& centers = r1 ? cfg.xi : cfg.eta;
      if (region.index < 0 || region.index >= static_cast<int>(centers.size()))
        throw ConfigError("region index out of range");
      const double ball = r1 ? geom.ball1 : geom.ball2;
      const double sigma = r1 ? cfg.mu : cfg.lambda;
      return integrate_ball(powered, cfg, scheme, centers[region.index], 0.0, ball, sigma, sigma);
    }
  }
  return {};
}

double norm_starstar(const ScalarField& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme,
                     Region region) {
  const IntegrationResult r = starstar_power(f, cfg, scheme, region);
  return std::pow(std::max(r.value, 0.0), 1.0 / scheme.q);
}

}  // namespace bt
