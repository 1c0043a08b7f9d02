#include "bubbletower/bubble.hpp"

#include <string>

namespace bt {

Point zero_point() {
  Point p;
  p.fill(0.0);
  return p;
}

double dot(const Point& a, const Point& b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Point& a, int n) { return dot(a, a, n); }
double norm(const Point& a, int n) { return std::sqrt(norm2(a, n)); }

Point sub(const Point& a, const Point& b, int n) {
  Point r = zero_point();
  for (int i = 0; i < n; ++i) r[i] = a[i] - b[i];
  return r;
}

void require_dimension(int n) {
  if (n < 4) throw ConfigError("n must be ≥ 4");
  if (n > kMaxDim) throw ConfigError("n must be ≤ " + std::to_string(kMaxDim));
}

void BubbleParams::validate() const {
  require_dimension(n);
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("bubble scale mu must be positive");
}

double eval_bubble(const Point& y, int n) {
  require_dimension(n);
  return half_power(2.0 / (1.0 + norm2(y, n)), n);
}

double eval_scaled_bubble(const Point& y, const BubbleParams& params) {
  const int n = params.n;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = y[i] - params.xi[i];
    s2 += d * d;
  }
  s2 /= params.mu * params.mu;
  return half_power(2.0 / (1.0 + s2), n) / half_power(params.mu, n);
}

BubbleJet scaled_bubble_jet(const Point& y, const BubbleParams& params) {
  const int n = params.n;
  BubbleJet jet;
  jet.grad = zero_point();
  const double inv_mu = 1.0 / params.mu;
  double s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = (y[i] - params.xi[i]) * inv_mu;
    jet.grad[i] = d;
    s2 += d * d;
  }
  jet.s2 = s2;
  jet.value = half_power(2.0 / (1.0 + s2) * inv_mu, n);
  // d_a U = -(n-2) z_a U / (mu (1+|z|^2)), z = (y - xi)/mu
  const double f = -double(n - 2) * jet.value * inv_mu / (1.0 + s2);
  for (int i = 0; i < n; ++i) jet.grad[i] *= f;
  return jet;
}

double scaled_bubble_hessian(int a, int b, const Point& y, const BubbleParams& params) {
  const int n = params.n;
  const double mu = params.mu;
  double s2 = 0.0;
  Point z = zero_point();
  for (int i = 0; i < n; ++i) {
    z[i] = (y[i] - params.xi[i]) / mu;
    s2 += z[i] * z[i];
  }
  const double u = half_power(2.0 / (1.0 + s2) / mu, n);
  const double c = double(n - 2);
  const double t = 1.0 + s2;
  // U = mu^{-m} (2/t)^m; d_a d_b in z-variables then divide by mu^2
  double h = c * u * ((c + 2.0) * z[a] * z[b] / (t * t) - (a == b ? 1.0 : 0.0) / t);
  return h / (mu * mu);
}

double laplacian_bubble(const Point& y, const BubbleParams& params) {
  const double u = eval_scaled_bubble(y, params);
  return -gamma_const(params.n) * std::pow(u, critical_exponent(params.n));
}

double eval_Z(int alpha, const Point& y, int n) {
  require_dimension(n);
  if (alpha < 0 || alpha > n) throw ConfigError("Z index out of range");
  const double r2 = norm2(y, n);
  const double u = half_power(2.0 / (1.0 + r2), n);
  if (alpha == 0) return 0.5 * double(n - 2) * u * (1.0 - r2) / (1.0 + r2);
  return -double(n - 2) * y[alpha - 1] * u / (1.0 + r2);
}

Point kelvin_point(const Point& y, int n) {
  const double r2 = norm2(y, n);
  if (r2 == 0.0) throw DomainError("Kelvin transform is singular at the origin");
  Point x = zero_point();
  for (int i = 0; i < n; ++i) x[i] = y[i] / r2;
  return x;
}

double kelvin(const Field& f, const Point& y, int n) {
  const Point x = kelvin_point(y, n);
  const double r2 = norm2(y, n);
  // |y|^{2-n} = (r2)^{-(n-2)/2}
  return f(x) / half_power(r2, n);
}

}  // namespace bt
