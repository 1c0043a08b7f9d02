#include "bubbletower/error_field.hpp"

#include <cmath>

namespace bt {

double critical_power(double x, int n) {
  switch (n) {
    case 4: return x * x * x;
    case 6: return x * x;
    default: return std::pow(x, critical_exponent(n));
  }
}

double eval_Ustar(const TowerConfiguration& cfg, const Point& y) {
  const int n = cfg.n;
  double u = eval_bubble(y, n);
  for (int s = 1; s < cfg.num_sites(); ++s) u -= eval_scaled_bubble(y, cfg.bubble_params(s));
  return u;
}

UstarJet eval_Ustar_jet(const TowerConfiguration& cfg, const Point& y) {
  const int n = cfg.n;
  UstarJet out;
  out.grad = zero_point();
  for (int s = 0; s < cfg.num_sites(); ++s) {
    const Site st = cfg.site(s);
    BubbleParams bp{n, st.scale, st.c};
    const BubbleJet j = scaled_bubble_jet(y, bp);
    out.u += st.sign * j.value;
    for (int i = 0; i < n; ++i) out.grad[i] += st.sign * j.grad[i];
  }
  return out;
}

double eval_error(const TowerConfiguration& cfg, const Point& y) {
  const int n = cfg.n;
  const double u0 = eval_bubble(y, n);
  double us = u0;
  double sum_p = -critical_power(u0, n);
  for (int s = 1; s < cfg.num_sites(); ++s) {
    const double v = eval_scaled_bubble(y, cfg.bubble_params(s));
    us -= v;
    sum_p += critical_power(v, n);
  }
  const double nl = us >= 0.0 ? critical_power(us, n) : -critical_power(-us, n);
  return gamma_const(n) * (nl + sum_p);
}

double zeta(double s, CutoffOrientation orientation) {
  double v;
  if (s <= 1.0) {
    v = 1.0;
  } else if (s >= 2.0) {
    v = 0.0;
  } else {
    const double t = s - 1.0;
    v = 1.0 - t * t * (3.0 - 2.0 * t);
  }
  return orientation == CutoffOrientation::InnerOne ? v : 1.0 - v;
}

double cutoff(const TowerConfiguration& cfg, const Point& y, SiteKind ring, int index, double alpha,
              CutoffOrientation orientation) {
  const int n = cfg.n;
  const std::vector<Point>* centers = nullptr;
  int count = 0;
  if (ring == SiteKind::Ring1) {
    centers = &cfg.xi;
    count = cfg.k;
  } else if (ring == SiteKind::Ring2) {
    centers = &cfg.eta;
    count = cfg.h;
  } else {
    throw ConfigError("cutoffs exist only for ring sites");
  }
  if (index < 0 || index >= count) throw ConfigError("cutoff index out of range");
  const double r2 = norm2(y, n);
  // |y|^{-2} |y - c |y|^2| = |y/|y|^2 - c| for |y| > 1
  const Point z = r2 > 1.0 ? kelvin_point(y, n) : y;
  const double d = norm(sub(z, (*centers)[index], n), n);
  return zeta(count / alpha * d, orientation);
}

double nonlinear_remainder(const TowerConfiguration& cfg, const Field& phi, const Point& y) {
  const int n = cfg.n;
  const double p = critical_exponent(n);
  const double u = eval_Ustar(cfg, y);
  const double f = phi(y);
  const double v = u + f;
  auto signed_pow = [&](double x) { return x >= 0.0 ? critical_power(x, n) : -critical_power(-x, n); };
  return signed_pow(v) - signed_pow(u) - p * potential_power(u, n) * f;
}

ScalarField error_scalar_field(const TowerConfiguration& cfg) {
  const TowerConfiguration* c = &cfg;
  unsigned tags = kKelvinEven;
  if (cfg.has_rings()) tags |= kRing1Invariant | kRing2Invariant;
  return ScalarField([c](const Point& y) { return eval_error(*c, y); }, cfg, tags, reflection_mask_all(cfg.n),
                     double(cfg.n + 2), double(cfg.n + 2));
}

ErrorBreakdown error_breakdown(const TowerConfiguration& cfg, const QuadratureScheme& scheme, bool all_sites) {
  if (!cfg.has_rings()) throw ConfigError("error breakdown needs both rings");
  scheme.validate(cfg.n);
  const int n = cfg.n;
  const double q = scheme.q;
  ErrorBreakdown out;
  out.n = n;
  out.k = cfg.k;
  out.h = cfg.h;
  out.q = q;
  out.predicted_exterior_exponent = 1.0 - n / q;
  out.predicted_interior_exponent = -n / q;

  const ScalarField e = error_scalar_field(cfg);
  const IntegrationResult ext = starstar_power(e, cfg, scheme, {RegionKind::Exterior, 0});
  out.exterior_norm = std::pow(std::max(ext.value, 0.0), 1.0 / q);
  out.converged = ext.converged;

  // Rescaled errors mu^{(n+2)/2} E(c + mu z) on |z| < alpha/(mu k), weighted in z.
  auto interior = [&](const Point& c, double sigma, double radius) {
    const double pre = std::pow(sigma, 0.5 * (n + 2));
    const TowerConfiguration* cp = &cfg;
    Field g = [cp, c, sigma, pre, n, q](const Point& z) {
      Point y = c;
      for (int i = 0; i < n; ++i) y[i] += sigma * z[i];
      return std::pow(std::abs(starstar_weight(z, n, q) * pre * eval_error(*cp, y)), q);
    };
    const IntegrationResult r = integrate_ball(g, cfg, scheme, zero_point(), 0.0, radius, 1.0, 1.0);
    out.converged = out.converged && r.converged;
    return std::pow(std::max(r.value, 0.0), 1.0 / q);
  };
  const double rad1 = scheme.alpha_bar / (cfg.mu * cfg.k);
  const double rad2 = scheme.alpha_hat / (cfg.lambda * cfg.h);
  for (int j = 0; j < cfg.k; ++j)
    out.interior_ring1_norm.push_back(all_sites || j == 0 ? interior(cfg.xi[j], cfg.mu, rad1)
                                                          : out.interior_ring1_norm[0]);
  for (int l = 0; l < cfg.h; ++l)
    out.interior_ring2_norm.push_back(all_sites || l == 0 ? interior(cfg.eta[l], cfg.lambda, rad2)
                                                          : out.interior_ring2_norm[0]);
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& v) {
  if (x.size() != v.size() || x.size() < 2) throw ConfigError("slope fit needs at least two matching points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(v[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace bt
