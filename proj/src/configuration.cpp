#include "bubbletower/configuration.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace bt {

Site TowerConfiguration::site(int s) const {
  Site st;
  if (s == 0) {
    st.kind = SiteKind::Center;
    st.c = zero_point();
    st.scale = 1.0;
    st.sign = 1.0;
  } else if (s <= k) {
    st.kind = SiteKind::Ring1;
    st.index = s - 1;
    st.c = xi[s - 1];
    st.scale = mu;
    st.sign = -1.0;
  } else {
    st.kind = SiteKind::Ring2;
    st.index = s - 1 - k;
    st.c = eta[s - 1 - k];
    st.scale = lambda;
    st.sign = -1.0;
  }
  return st;
}

std::vector<Site> TowerConfiguration::sites() const {
  std::vector<Site> out;
  out.reserve(num_sites());
  for (int s = 0; s < num_sites(); ++s) out.push_back(site(s));
  return out;
}

BubbleParams TowerConfiguration::bubble_params(int s) const {
  const Site st = site(s);
  BubbleParams p;
  p.n = n;
  p.mu = st.scale;
  p.xi = st.c;
  return p;
}

TowerConfiguration TowerConfiguration::single_bubble(int n) {
  require_dimension(n);
  TowerConfiguration c;
  c.n = n;
  return c;
}

TowerConfiguration make_configuration(int n, int k, int h, double delta, double eps) {
  require_dimension(n);
  if (k < 3 || h < 3) throw ConfigError("ring sizes k and h must be ≥ 3");
  if (!(delta > 0.0) || !(eps > 0.0) || !std::isfinite(delta) || !std::isfinite(eps))
    throw ConfigError("delta and eps must be positive");
  TowerConfiguration c;
  c.n = n;
  c.k = k;
  c.h = h;
  c.delta = delta;
  c.eps = eps;
  const double e = 2.0 / double(n - 2);
  c.mu = std::pow(delta, e) / (double(k) * k);
  c.lambda = std::pow(eps, e) / (double(h) * h);
  if (c.mu >= 1.0 || c.lambda >= 1.0)
    throw ConfigError("scales mu and lambda must be below 1 (centers inside the unit ball)");
  c.small_ring_warning = k < kSmallRing || h < kSmallRing;
  c.in_admissible_box = delta >= kBoxLo && delta <= kBoxHi && eps >= kBoxLo && eps <= kBoxHi;

  const double rx = c.xi_norm();
  const double re = c.eta_norm();
  const double two_pi = 2.0 * std::numbers::pi;
  for (int j = 0; j < k; ++j) {
    const double t = two_pi * j / k;
    c.theta_bar.push_back(t);
    Point p = zero_point();
    p[0] = rx * std::cos(t);
    p[1] = rx * std::sin(t);
    c.xi.push_back(p);
  }
  for (int l = 0; l < h; ++l) {
    const double t = two_pi * l / h;
    c.theta_hat.push_back(t);
    Point p = zero_point();
    p[2] = re * std::cos(t);
    p[3] = re * std::sin(t);
    c.eta.push_back(p);
  }
  return c;
}

unsigned reflection_mask_all(int n) {
  unsigned m = (1u << 1) | (1u << 3);
  for (int i = 4; i < n; ++i) m |= (1u << i);
  return m;
}

Point symmetry_orbit(const TowerConfiguration& cfg, const Point& y, int j, int l, unsigned signs) {
  const int n = cfg.n;
  if (signs & ~reflection_mask_all(n)) throw ConfigError("reflection mask touches a non-reflectable coordinate");
  Point x = y;
  for (int i = 0; i < n; ++i)
    if (signs & (1u << i)) x[i] = -x[i];
  if (cfg.k > 0) {
    const double a = 2.0 * std::numbers::pi * (((j % cfg.k) + cfg.k) % cfg.k) / cfg.k;
    const double c = std::cos(a), s = std::sin(a);
    const double x0 = x[0], x1 = x[1];
    x[0] = c * x0 - s * x1;
    x[1] = s * x0 + c * x1;
  }
  if (cfg.h > 0) {
    const double b = 2.0 * std::numbers::pi * (((l % cfg.h) + cfg.h) % cfg.h) / cfg.h;
    const double c = std::cos(b), s = std::sin(b);
    const double x2 = x[2], x3 = x[3];
    x[2] = c * x2 - s * x3;
    x[3] = s * x2 + c * x3;
  }
  return x;
}

std::tuple<double, double, double> min_separation(const TowerConfiguration& cfg) {
  const int n = cfg.n;
  const double inf = std::numeric_limits<double>::infinity();
  // Rings are regular polygons, so neighbours realise the minimum.
  const double d1 = cfg.k > 1 ? norm(sub(cfg.xi[0], cfg.xi[1], n), n) : inf;
  const double d2 = cfg.h > 1 ? norm(sub(cfg.eta[0], cfg.eta[1], n), n) : inf;
  // Orthogonal planes: |xi_j - eta_l|^2 = |xi|^2 + |eta|^2 for every pair.
  double d3 = inf;
  if (cfg.k > 0 && cfg.h > 0) d3 = std::sqrt(norm2(cfg.xi[0], n) + norm2(cfg.eta[0], n));
  return {d1, d2, d3};
}

}  // namespace bt
