#include "bubbletower/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bubbletower/kernel_basis.hpp"

namespace bt {

int group_order(const TowerConfiguration& cfg) {
  if (!cfg.has_rings()) throw ConfigError("the ring symmetry group needs both rings");
  return 4 * cfg.k * cfg.h;
}

GroupElement group_element(const TowerConfiguration& cfg, int index) {
  if (index < 0 || index >= group_order(cfg)) throw ConfigError("group element index out of range");
  GroupElement g;
  g.f = index % 2;
  index /= 2;
  g.l = index % cfg.h;
  index /= cfg.h;
  g.e = index % 2;
  g.m = index / 2;
  return g;
}

namespace {

void rotate_pair(Point& y, int i, double a) {
  const double c = std::cos(a), s = std::sin(a);
  const double u = y[i], v = y[i + 1];
  y[i] = c * u - s * v;
  y[i + 1] = s * u + c * v;
}

}  // namespace

Point group_apply(const TowerConfiguration& cfg, const GroupElement& g, const Point& y) {
  Point x = y;
  if (g.e) x[1] = -x[1];
  rotate_pair(x, 0, 2.0 * std::numbers::pi * g.m / cfg.k);
  if (g.f) x[3] = -x[3];
  rotate_pair(x, 2, 2.0 * std::numbers::pi * g.l / cfg.h);
  return x;
}

Point group_apply_inverse(const TowerConfiguration& cfg, const GroupElement& g, const Point& y) {
  Point x = y;
  rotate_pair(x, 0, -2.0 * std::numbers::pi * g.m / cfg.k);
  if (g.e) x[1] = -x[1];
  rotate_pair(x, 2, -2.0 * std::numbers::pi * g.l / cfg.h);
  if (g.f) x[3] = -x[3];
  return x;
}

Eigen::MatrixXd SparseMap::dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(size, size);
  for (int i = 0; i < size; ++i)
    for (int t = start[i]; t < start[i + 1]; ++t) d(i, col[t]) += val[t];
  return d;
}

void SparseMap::apply(const double* x, double* out) const {
  for (int i = 0; i < size; ++i) {
    double s = 0.0;
    for (int t = start[i]; t < start[i + 1]; ++t) s += val[t] * x[col[t]];
    out[i] = s;
  }
}

SparseMap field_map(const TowerConfiguration& cfg, const GroupElement& g) {
  const int n = cfg.n;
  const int ns = cfg.num_sites();
  // site s is carried to the site whose center is g^{-1} c_s
  std::vector<int> target(ns, 0);
  for (int s = 1; s < ns; ++s) {
    const Site st = cfg.site(s);
    const Point c = group_apply_inverse(cfg, g, st.c);
    const int first = st.kind == SiteKind::Ring1 ? 1 : 1 + cfg.k;
    const int count = st.kind == SiteKind::Ring1 ? cfg.k : cfg.h;
    double best = std::numeric_limits<double>::infinity();
    for (int t = first; t < first + count; ++t) {
      const double d = norm(sub(cfg.site(t).c, c, n), n);
      if (d < best) {
        best = d;
        target[s] = t;
      }
    }
  }
  SparseMap m;
  m.size = field_count(cfg);
  m.start.assign(m.size + 1, 0);
  std::vector<std::vector<std::pair<int, double>>> rows(m.size);
  for (int s = 0; s < ns; ++s) {
    const int t = target[s];
    rows[field_index(cfg, 0, s)].push_back({field_index(cfg, 0, t), 1.0});
    for (int a = 1; a <= n; ++a) {
      const Point e = group_apply_inverse(cfg, g, site_frame(cfg, s, a));
      for (int b = 1; b <= n; ++b) {
        const Point f = site_frame(cfg, t, b);
        const double c = dot(e, f, n) / norm2(f, n);
        // frame vectors have length 1 or |xi|, |eta|; drop rounding residue
        if (std::abs(c) > 1e-13) rows[field_index(cfg, a, s)].push_back({field_index(cfg, b, t), c});
      }
    }
  }
  for (int i = 0; i < m.size; ++i) {
    m.start[i + 1] = m.start[i] + static_cast<int>(rows[i].size());
    for (const auto& [c, v] : rows[i]) {
      m.col.push_back(c);
      m.val.push_back(v);
    }
  }
  return m;
}

void accumulate_conjugate(const SparseMap& d, const Eigen::MatrixXd& m, Eigen::MatrixXd& out) {
  const int n = d.size;
  // t = D m, then out += t D^T
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, m.cols());
  for (int i = 0; i < n; ++i)
    for (int q = d.start[i]; q < d.start[i + 1]; ++q) t.row(i) += d.val[q] * m.row(d.col[q]);
  for (int j = 0; j < n; ++j)
    for (int q = d.start[j]; q < d.start[j + 1]; ++q) out.col(j) += d.val[q] * t.col(d.col[q]);
}

OrbitNodes orbit_nodes(const TowerConfiguration& cfg, const QuadratureScheme& scheme, int level) {
  if (!cfg.has_rings()) throw ConfigError("orbit sums need both rings");
  const PatchGeometry geom = make_patch_geometry(cfg, scheme);
  OrbitNodes out;
  for (bool kel : {false, true}) out.wedge.emplace_back(cfg, geom, scheme, level, std::vector<int>{0}, std::vector<int>{0}, kel);
  const DirectionRule dirs = patch_directions(cfg, scheme, level);
  const int m = scheme.radial_at(level);
  const Rule1D r1 = radial_rule(0.0, geom.rq1, cfg.mu, cfg.mu, {geom.ball1, geom.rp1}, m);
  const Rule1D r2 = radial_rule(0.0, geom.rq2, cfg.lambda, cfg.lambda, {geom.ball2, geom.rp2}, m);
  out.ring1_patch.emplace_back(cfg.n, cfg.xi[0], r1, dirs, PatchNodes::Cutoff::Partition, &geom, SiteKind::Ring1);
  out.ring2_patch.emplace_back(cfg.n, cfg.eta[0], r2, dirs, PatchNodes::Cutoff::Partition, &geom, SiteKind::Ring2);
  return out;
}

FieldIntegrals field_integrals_level(const TowerConfiguration& cfg, const QuadratureScheme& scheme, int level) {
  const int nf = field_count(cfg);
  const OrbitNodes nodes = orbit_nodes(cfg, scheme, level);
  const OuterEval eval = [&](const Point& y, double* a, double* b) {
    double w = 0.0;
    eval_fields(cfg, y, b, a + nf, &w);
    for (int i = 0; i < nf; ++i) a[i] = w * b[i];
  };
  Eigen::MatrixXd wedge = Eigen::MatrixXd::Zero(2 * nf, nf);
  for (const auto& w : nodes.wedge) wedge += sum_outer(w, 2 * nf, nf, eval);
  const Eigen::MatrixXd p1 = sum_outer(nodes.ring1_patch[0], 2 * nf, nf, eval);
  const Eigen::MatrixXd p2 = sum_outer(nodes.ring2_patch[0], 2 * nf, nf, eval);

  FieldIntegrals out;
  out.level = level;
  out.weighted = Eigen::MatrixXd::Zero(nf, nf);
  out.linearized = Eigen::MatrixXd::Zero(nf, nf);
  auto add = [&](const GroupElement& g, const Eigen::MatrixXd& part) {
    const SparseMap d = field_map(cfg, g);
    accumulate_conjugate(d, part.topRows(nf), out.weighted);
    accumulate_conjugate(d, part.bottomRows(nf), out.linearized);
  };
  for (int i = 0; i < group_order(cfg); ++i) add(group_element(cfg, i), wedge);
  for (int m = 0; m < cfg.k; ++m) add(GroupElement{m, 0, 0, 0}, p1);
  for (int l = 0; l < cfg.h; ++l) add(GroupElement{0, 0, l, 0}, p2);
  return out;
}

FieldIntegrals field_integrals(const TowerConfiguration& cfg, const QuadratureScheme& scheme) {
  scheme.validate(cfg.n);
  FieldIntegrals prev = field_integrals_level(cfg, scheme, 0);
  for (int level = 1; level <= scheme.max_refine; ++level) {
    FieldIntegrals cur = field_integrals_level(cfg, scheme, level);
    const double diff = std::max((cur.weighted - prev.weighted).cwiseAbs().maxCoeff(),
                                 (cur.linearized - prev.linearized).cwiseAbs().maxCoeff());
    const double scale = std::max(cur.weighted.cwiseAbs().maxCoeff(), cur.linearized.cwiseAbs().maxCoeff());
    cur.err_est = diff;
    cur.converged = diff <= scheme.rel_tol * scale;
    if (cur.converged || level == scheme.max_refine) return cur;
    prev = std::move(cur);
  }
  prev.converged = false;
  return prev;
}

}  // namespace bt
