#include "bubbletower/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "bubbletower/error_field.hpp"
#include "bubbletower/kernel_basis.hpp"

namespace bt {

namespace {

struct RingView {
  SiteKind kind;
  int site;  // site index of the first ring member
  int count;
  double sigma;
  double alpha;
  const std::vector<Point>* centers;
};

RingView ring_view(const TowerConfiguration& cfg, int ring, const QuadratureScheme& scheme) {
  if (!cfg.has_rings()) throw ConfigError("projections need both rings");
  if (ring == 1) return {SiteKind::Ring1, 1, cfg.k, cfg.mu, scheme.alpha_bar, &cfg.xi};
  if (ring == 2) return {SiteKind::Ring2, 1 + cfg.k, cfg.h, cfg.lambda, scheme.alpha_hat, &cfg.eta};
  throw ConfigError("ring must be 1 or 2");
}

// Farthest point of the cutoff support (ball of radius rho and its Kelvin image) from c.
double support_radius(double rho, double rc, double sigma) {
  if (rc <= rho) throw ConfigError("cutoff support reaches the origin; decrease alpha");
  return std::max(rho, rho / (rc * (rc - rho)) + sigma * sigma / rc);
}

Field projection_integrand(const TowerConfiguration& cfg, const RingView& rv) {
  const TowerConfiguration* c = &cfg;
  return [c, rv](const Point& y) {
    const double chi = cutoff(*c, y, rv.kind, 0, rv.alpha);
    if (chi == 0.0) return 0.0;
    return chi * eval_error(*c, y) * eval_Zgroup(*c, 0, rv.site, y);
  };
}

// Angle at the origin between c and the points of radius t on the sphere
// |x - c| = d: 0 if that sphere misses radius t from outside, pi if it
// encloses it.
double sphere_angle(double t, double c, double d) {
  const double v = (t * t + c * c - d * d) / (2.0 * t * c);
  if (v >= 1.0) return 0.0;
  if (v <= -1.0) return std::numbers::pi;
  return std::acos(v);
}

// Cutoff geometry about a site center c: Euclidean balls of radius d for
// |y| <= 1, Kelvin images of them for |y| > 1.
struct CutoffGeometry {
  double c = 0.0;  // |center|
  double ball = 0.0, rho = 0.0;
  double sigma = 0.0, ref = 0.0;
  double angle_in(double t, double d) const { return sphere_angle(t, c, d); }
  double angle_kelvin(double t, double d) const { return sphere_angle(1.0 / t, c, d); }
  double support_angle(double t) const { return t <= 1.0 ? angle_in(t, rho) : angle_kelvin(t, rho); }
  double t_lo() const { return c - rho; }
  double t_hi() const { return std::max(1.0 / (c - rho), c + ball); }
  std::vector<double> t_breaks() const {
    std::vector<double> b{1.0, c + ball, c - ball, c + rho, 1.0 / (c + ball), 1.0 / (c - ball), 1.0 / (c + rho)};
    return b;
  }
};

// Rule in polar coordinates about the origin, y = t (cos(th) e + sin(th) v)
// with e = c/|c| and v on the unit sphere of e's complement. The radius is
// graded about |c|, the angle about 0; the unit sphere, the cutoff spheres
// and their Kelvin images are all panel ends, so the cutoff kinks never fall
// inside a panel.
class CapNodes : public NodeSet {
 public:
  CapNodes(int n, const Point& center, const CutoffGeometry& g, double t_max, bool kelvin_side, int m, int sphere_nodes)
      : n_(n), g_(g), kelvin_(kelvin_side), m_(m) {
    const double c = g.c;
    for (int i = 0; i < n; ++i) e_[i] = center[i] / c;
    // orthonormal complement of e by Gram-Schmidt on the coordinate axes,
    // taken cyclically after the dominant axis of e within the first four so
    // that swapping (y1,y2) with (y3,y4) maps the ring-1 rule onto the ring-2 rule
    int lead = 0;
    for (int a = 1; a < 4; ++a)
      if (std::abs(e_[a]) > std::abs(e_[lead])) lead = a;
    std::vector<int> axes;
    for (int a = 1; a <= 4; ++a) axes.push_back((lead + a) % 4);
    for (int a = 4; a < n; ++a) axes.push_back(a);
    for (int a : axes) {
      if (static_cast<int>(perp_.size()) == n - 1) break;
      Point v = zero_point();
      v[a] = 1.0;
      const double pe = dot(v, e_, n);
      for (int i = 0; i < n; ++i) v[i] -= pe * e_[i];
      for (const auto& u : perp_) {
        const double pu = dot(v, u, n);
        for (int i = 0; i < n; ++i) v[i] -= pu * u[i];
      }
      const double len = norm(v, n);
      if (len < 1e-8) continue;
      for (int i = 0; i < n; ++i) v[i] /= len;
      perp_.push_back(v);
    }
    sphere_rule(n - 2, sphere_nodes, sdirs_, sw_);
    std::vector<double> below, above;
    for (double b : g.t_breaks()) {
      if (b > g.t_lo() && b < c) below.push_back(c - b);
      if (b > c && b < t_max) above.push_back(b - c);
    }
    const Rule1D lo = radial_rule(0.0, c - g.t_lo(), g.sigma, g.ref, below, m);
    const Rule1D hi = radial_rule(0.0, t_max - c, g.sigma, g.ref, above, m);
    for (std::size_t i = 0; i < lo.x.size(); ++i) {
      t_.x.push_back(c - lo.x[i]);
      t_.w.push_back(lo.w[i]);
    }
    for (std::size_t i = 0; i < hi.x.size(); ++i) {
      t_.x.push_back(c + hi.x[i]);
      t_.w.push_back(hi.w[i]);
    }
  }
  std::size_t blocks() const override { return t_.x.size(); }
  void block(std::size_t b, std::vector<QNode>& out) const override {
    const double t = t_.x[b];
    const bool outer = kelvin_ && t > 1.0;
    const double a_ball = g_.angle_in(t, g_.ball);
    const double a_sup = g_.support_angle(t);
    const double a_max = std::max(a_sup, a_ball);
    if (a_max <= 0.0) return;
    std::vector<double> br{a_ball, a_sup};
    if (outer) br.push_back(g_.angle_kelvin(t, g_.ball));
    const Rule1D th = radial_rule(0.0, a_max, g_.sigma, g_.ref, br, m_);
    const double wt = t_.w[b] * std::pow(t, n_ - 1);
    for (std::size_t i = 0; i < th.x.size(); ++i) {
      const double ct = std::cos(th.x[i]), st = std::sin(th.x[i]);
      const double w = wt * th.w[i] * std::pow(st, n_ - 2);
      for (std::size_t j = 0; j < sdirs_.size(); ++j) {
        QNode q;
        q.y = zero_point();
        for (int d = 0; d < n_; ++d) {
          double v = ct * e_[d];
          for (int k = 0; k < n_ - 1; ++k) v += st * sdirs_[j][k] * perp_[k][d];
          q.y[d] = t * v;
        }
        q.w = w * sw_[j];
        out.push_back(q);
      }
    }
  }

 private:
  int n_;
  CutoffGeometry g_;
  bool kelvin_;
  int m_;
  Point e_{};
  std::vector<Point> perp_;
  std::vector<std::vector<double>> sdirs_;
  std::vector<double> sw_;
  Rule1D t_;
};

int cap_sphere_nodes(const QuadratureScheme& scheme, int level) {
  return std::max(4, 5 * scheme.angular_at(level) / 6);
}

CutoffGeometry cutoff_geometry(const TowerConfiguration& cfg, const RingView& rv) {
  CutoffGeometry g;
  g.c = norm((*rv.centers)[0], cfg.n);
  g.ball = rv.alpha / rv.count;
  g.rho = 2.0 * g.ball;
  if (g.c <= g.rho) throw ConfigError("cutoff support reaches the origin; decrease alpha");
  g.sigma = rv.sigma;
  g.ref = 1.0 / (double(rv.count) * rv.count);
  return g;
}

}  // namespace

ProjectedCoefficient projected_coefficient_level(const TowerConfiguration& cfg, int ring,
                                                 const QuadratureScheme& scheme, int level) {
  const int n = cfg.n;
  const RingView rv = ring_view(cfg, ring, scheme);
  const RingView other = ring_view(cfg, 3 - ring, scheme);
  const Point c = (*rv.centers)[0];
  const CutoffGeometry g = cutoff_geometry(cfg, rv);
  const double rsup = support_radius(g.rho, g.c, g.sigma);
  const Field f = projection_integrand(cfg, rv);

  struct Ball {
    Point c;
    double r, sigma;
    bool same;
  };
  std::vector<Ball> near;
  for (int t = 1; t < rv.count; ++t) {
    const Point& ct = (*rv.centers)[t];
    if (norm(sub(ct, c, n), n) < rsup + g.ball) near.push_back({ct, g.ball, rv.sigma, true});
  }
  const double oball = other.alpha / other.count;
  for (int t = 0; t < other.count; ++t) {
    const Point& ct = (*other.centers)[t];
    if (norm(sub(ct, c, n), n) < rsup + oball) near.push_back({ct, oball, other.sigma, false});
  }

  ProjectedCoefficient out;
  ProjectionPieces& p = out.pieces;
  p.support_radius = rsup;
  const CapNodes nodes(n, c, g, g.t_hi(), true, scheme.radial_at(level), cap_sphere_nodes(scheme, level));
  const Eigen::MatrixXd parts = sum_outer(nodes, 2, 1, [&](const Point& y, double* a, double* b) {
    b[0] = 1.0;
    a[0] = a[1] = 0.0;
    if (norm(sub(y, c, n), n) < g.ball) {
      a[0] = f(y);
      return;
    }
    for (const auto& bl : near)
      if (norm(sub(y, bl.c, n), n) < bl.r) return;
    a[1] = f(y);
  });
  p.inner_ball = parts(0, 0);
  p.annulus = parts(1, 0);
  for (const auto& bl : near) {
    const double v = integrate_ball_level(f, cfg, scheme, level, bl.c, 0.0, bl.r, bl.sigma, g.ref, {});
    (bl.same ? p.same_ring : p.other_ring) += v;
  }
  out.numerator = p.numerator();
  out.denominator = projection_denominator(cfg, ring, scheme).value;
  out.value = out.numerator / out.denominator;
  return out;
}

ProjectedCoefficient projected_coefficient(const TowerConfiguration& cfg, int ring, const QuadratureScheme& scheme) {
  scheme.validate(cfg.n);
  ProjectedCoefficient prev = projected_coefficient_level(cfg, ring, scheme, 0);
  for (int level = 1; level <= scheme.max_refine; ++level) {
    ProjectedCoefficient cur = projected_coefficient_level(cfg, ring, scheme, level);
    const double scale = std::max({std::abs(cur.numerator), std::abs(cur.pieces.inner_ball),
                                   std::abs(cur.pieces.annulus)});
    cur.err_est = std::abs(cur.numerator - prev.numerator) / cur.denominator;
    cur.converged = std::abs(cur.numerator - prev.numerator) <= scheme.rel_tol * scale;
    if (cur.converged || level == scheme.max_refine) return cur;
    prev = cur;
  }
  return prev;
}

IntegrationResult projection_numerator_global(const TowerConfiguration& cfg, int ring,
                                              const QuadratureScheme& scheme) {
  // E is Kelvin even with weight n+2 and the cutoff is Kelvin invariant, so
  // the |y| > 1 part folds onto the unit ball with Z0 replaced by its Kelvin
  // transform.
  const int n = cfg.n;
  const RingView rv = ring_view(cfg, ring, scheme);
  CutoffGeometry g = cutoff_geometry(cfg, rv);
  g.sigma *= 2.0;
  g.ref *= 2.0;
  const TowerConfiguration* cp = &cfg;
  const RingView v = rv;
  const Field folded = [cp, v, n](const Point& x) {
    const double chi = cutoff(*cp, x, v.kind, 0, v.alpha);
    if (chi == 0.0) return 0.0;
    const double z = eval_Zgroup(*cp, 0, v.site, x) +
                     std::pow(norm2(x, n), 1.0 - 0.5 * n) * eval_Zgroup(*cp, 0, v.site, kelvin_point(x, n));
    return chi * eval_error(*cp, x) * z;
  };
  const Point c = (*rv.centers)[0];
  return refine(
      [&](int level) {
        const CapNodes nodes(n, c, g, 1.0, false, scheme.radial_at(level), cap_sphere_nodes(scheme, level));
        return sum_nodes(nodes, folded);
      },
      scheme);
}

IntegrationResult projection_denominator(const TowerConfiguration& cfg, int ring, const QuadratureScheme& scheme) {
  const RingView rv = ring_view(cfg, ring, scheme);
  const TowerConfiguration* c = &cfg;
  const int n = cfg.n;
  const int site = rv.site;
  const Field f = [c, n, site](const Point& y) {
    const double z = eval_Zgroup(*c, 0, site, y);
    return potential_power(eval_scaled_bubble(y, c->bubble_params(site)), n) * z * z;
  };
  return integrate_ball(f, cfg, scheme, (*rv.centers)[0], 0.0, 1e4 * rv.sigma, rv.sigma, rv.sigma);
}

CutoffLeakage cutoff_leakage(const TowerConfiguration& cfg, const QuadratureScheme& scheme) {
  const TowerConfiguration* c = &cfg;
  const int k = cfg.k;
  const Field sum = [c, k](const Point& y) {
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += eval_Zgroup(*c, 0, 1 + j, y);
    return eval_error(*c, y) * z;
  };
  const ScalarField f(sum, cfg, kRing1Invariant | kRing2Invariant, reflection_mask_all(cfg.n), 2.0 * cfg.n);
  const IntegrationResult full = integrate(f, cfg, scheme);
  const ProjectedCoefficient proj = projected_coefficient(cfg, 1, scheme);
  CutoffLeakage out;
  out.full = full.value / k;
  out.leakage = proj.numerator - out.full;
  out.ratio = std::abs(out.leakage) / std::abs(out.full);
  out.converged = full.converged && proj.converged;
  return out;
}

namespace {

// int_{|z| < R} U^{p-1}(z) V(z) Z0(z) dz with V a (rescaled) bubble.
PairInteraction interaction(const TowerConfiguration& cfg, const QuadratureScheme& scheme, const Point& offset,
                            double rel_scale, double distance, double reference) {
  const int n = cfg.n;
  const double radius = scheme.alpha_bar / (cfg.mu * cfg.k);
  BubbleParams other{n, rel_scale, offset};
  const Field f = [n, other](const Point& z) {
    const double u = eval_bubble(z, n);
    return potential_power(u, n) * eval_scaled_bubble(z, other) * eval_Z(0, z, n);
  };
  const IntegrationResult r = integrate_ball(f, cfg, scheme, zero_point(), 0.0, radius, 1.0, 1.0);
  PairInteraction out;
  out.value = r.value;
  out.distance = distance;
  out.ratio = r.value / reference;
  out.converged = r.converged;
  return out;
}

}  // namespace

PairInteraction pair_interaction(const TowerConfiguration& cfg, int j, const QuadratureScheme& scheme) {
  if (!cfg.has_rings()) throw ConfigError("pair interaction needs rings");
  if (j <= 0 || j >= cfg.k) throw ConfigError("pair interaction needs a ring-1 site other than the first");
  const int n = cfg.n;
  const Point d = sub(cfg.xi[j], cfg.xi[0], n);
  const double dist = norm(d, n);
  Point off = zero_point();
  for (int i = 0; i < n; ++i) off[i] = d[i] / cfg.mu;
  return interaction(cfg, scheme, off, 1.0, dist, std::pow(cfg.mu / dist, n - 2));
}

PairInteraction pair_interaction_cross(const TowerConfiguration& cfg, int l, const QuadratureScheme& scheme) {
  if (!cfg.has_rings()) throw ConfigError("pair interaction needs rings");
  if (l < 0 || l >= cfg.h) throw ConfigError("ring-2 site index out of range");
  const int n = cfg.n;
  const Point d = sub(cfg.eta[l], cfg.xi[0], n);
  const double dist = norm(d, n);
  Point off = zero_point();
  for (int i = 0; i < n; ++i) off[i] = d[i] / cfg.mu;
  // in the rescaled variable the ring-2 bubble has scale lambda/mu and
  // carries the factor (mu/lambda)^{(n-2)/2} of its normalization
  return interaction(cfg, scheme, off, cfg.lambda / cfg.mu, dist,
                     std::pow(cfg.mu * cfg.lambda, 0.5 * (n - 2)) / std::pow(dist, n - 2));
}

// ---------------------------------------------------------------------------
// Balancing parameters

CoefficientSample reduced_coefficients(int n, int k, int h, double delta, double eps,
                                       const QuadratureScheme& scheme, int level) {
  const TowerConfiguration cfg = make_configuration(n, k, h, delta, eps);
  CoefficientSample s{delta, eps, 0.0, 0.0};
  s.cbar0 = projected_coefficient_level(cfg, 1, scheme, level).value;
  s.chat0 = projected_coefficient_level(cfg, 2, scheme, level).value;
  return s;
}

LeadingFit fit_leading(int n, int k, int h, double delta, double eps, int ring, const QuadratureScheme& scheme,
                       int level) {
  if (ring != 1 && ring != 2) throw ConfigError("ring must be 1 or 2");
  const double d0 = ring == 1 ? delta : eps;
  const double scale = std::pow(double(ring == 1 ? k : h), n - 2);
  LeadingFit fit;
  Eigen::Matrix3d a;
  Eigen::Vector3d b;
  int row = 0;
  for (double f : {0.5, 1.0, 1.5}) {
    const double d = f * d0;
    const CoefficientSample s = ring == 1 ? reduced_coefficients(n, k, h, d, eps, scheme, level)
                                          : reduced_coefficients(n, k, h, delta, d, scheme, level);
    fit.points.push_back(s);
    a.row(row) << -d * d / scale, d / scale, 1.0;
    b[row] = ring == 1 ? s.cbar0 : s.chat0;
    ++row;
  }
  const Eigen::Vector3d x = a.fullPivLu().solve(b);
  fit.a1 = x[0];
  fit.a2 = x[1];
  fit.offset = x[2];
  return fit;
}

namespace {

std::string table_text(const std::vector<CoefficientSample>& t) {
  std::ostringstream os;
  for (const auto& s : t) os << " (" << s.delta << ", " << s.eps << "): " << s.cbar0 << ", " << s.chat0 << ";";
  return os.str();
}

double clamp_box(double x) { return std::clamp(x, kBoxLo, kBoxHi); }

}  // namespace

ReducedSolution solve_reduced(int n, int k, int h, const QuadratureScheme& scheme, const SolverOptions& opts) {
  require_dimension(n);
  scheme.validate(n);
  if (opts.tol <= 0.0 || opts.max_iter < 1 || opts.fd_step <= 0.0 || opts.level < 0)
    throw ConfigError("invalid solver options");
  auto eval = [&](double d, double e) { return reduced_coefficients(n, k, h, d, e, scheme, opts.level); };

  ReducedSolution sol;
  sol.n = n;
  sol.k = k;
  sol.h = h;
  sol.q = scheme.q;

  // diagonal scan for a bracket of the ring-1 coefficient
  const int scan = 9;
  for (int i = 0; i < scan; ++i) {
    const double t = kBoxLo * std::pow(kBoxHi / kBoxLo, double(i) / (scan - 1));
    sol.scan.push_back(eval(t, t));
  }
  int bracket = -1;
  for (int i = 0; i + 1 < scan && bracket < 0; ++i)
    if ((sol.scan[i].cbar0 < 0.0) != (sol.scan[i + 1].cbar0 < 0.0)) bracket = i;
  if (bracket < 0) throw NoRootError("no sign change of the reduced coefficients in the box;" + table_text(sol.scan), sol.scan);

  const CoefficientSample& lo = sol.scan[bracket];
  const CoefficientSample& hi = sol.scan[bracket + 1];
  const double t0 = lo.delta - lo.cbar0 * (hi.delta - lo.delta) / (hi.cbar0 - lo.cbar0);

  // damped Newton with a difference Jacobian, Broyden updates afterwards
  Eigen::Vector2d x(t0, t0);
  CoefficientSample s = eval(x[0], x[1]);
  Eigen::Vector2d fx(s.cbar0, s.chat0);
  Eigen::Matrix2d jac;
  for (int c = 0; c < 2; ++c) {
    Eigen::Vector2d xp = x;
    xp[c] += opts.fd_step * x[c];
    const CoefficientSample sp = eval(xp[0], xp[1]);
    jac.col(c) = (Eigen::Vector2d(sp.cbar0, sp.chat0) - fx) / (xp[c] - x[c]);
  }
  bool done = fx.cwiseAbs().maxCoeff() <= opts.tol;
  int it = 0;
  for (; it < opts.max_iter && !done; ++it) {
    const Eigen::Vector2d step = -jac.fullPivLu().solve(fx);
    if (!step.allFinite()) break;
    double damp = 1.0;
    Eigen::Vector2d xn, fn;
    bool improved = false;
    for (int half = 0; half <= 8; ++half, damp *= 0.5) {
      xn = Eigen::Vector2d(clamp_box(x[0] + damp * step[0]), clamp_box(x[1] + damp * step[1]));
      const CoefficientSample sn = eval(xn[0], xn[1]);
      fn = Eigen::Vector2d(sn.cbar0, sn.chat0);
      if (fn.norm() < fx.norm()) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    const Eigen::Vector2d dx = xn - x, df = fn - fx;
    if (dx.squaredNorm() > 0.0) jac += (df - jac * dx) * dx.transpose() / dx.squaredNorm();
    x = xn;
    fx = fn;
    done = fx.cwiseAbs().maxCoeff() <= opts.tol;
  }
  sol.method = "newton";

  if (!done) {
    if (k != h) throw NumericalError("reduced solve did not converge;" + table_text(sol.scan));
    // symmetric input: Illinois on the diagonal, where both equations coincide
    double a = lo.delta, fa = lo.cbar0, b = hi.delta, fb = hi.cbar0;
    int side = 0;
    double c = a, fc = fa;
    for (it = 0; it < 200; ++it) {
      c = (a * fb - b * fa) / (fb - fa);
      fc = eval(c, c).cbar0;
      if (std::abs(fc) <= opts.tol) break;
      if ((fc < 0.0) == (fb < 0.0)) {
        b = c;
        fb = fc;
        if (side == -1) fa *= 0.5;
        side = -1;
      } else {
        a = c;
        fa = fc;
        if (side == 1) fb *= 0.5;
        side = 1;
      }
    }
    if (std::abs(fc) > opts.tol) throw NumericalError("reduced solve did not converge;" + table_text(sol.scan));
    x = Eigen::Vector2d(c, c);
    const CoefficientSample sc = eval(c, c);
    fx = Eigen::Vector2d(sc.cbar0, sc.chat0);
    sol.method = "bisection";
  }
  sol.iterations = it;
  sol.delta_star = x[0];
  sol.eps_star = x[1];
  sol.cbar0 = fx[0];
  sol.chat0 = fx[1];
  sol.fit_bar = fit_leading(n, k, h, x[0], x[1], 1, scheme, opts.level);
  sol.fit_hat = fit_leading(n, k, h, x[0], x[1], 2, scheme, opts.level);
  sol.half_delta_cbar0 = sol.fit_bar.points[0].cbar0;
  return sol;
}

}  // namespace bt
