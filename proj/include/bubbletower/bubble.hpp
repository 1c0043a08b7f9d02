#pragma once

#include <array>
#include <cmath>
#include <functional>

#include "bubbletower/errors.hpp"

namespace bt {

// Points live in a fixed-capacity array; only the first n slots are used.
constexpr int kMaxDim = 12;
using Point = std::array<double, kMaxDim>;

Point zero_point();
double dot(const Point& a, const Point& b, int n);
double norm2(const Point& a, int n);
double norm(const Point& a, int n);
Point sub(const Point& a, const Point& b, int n);

void require_dimension(int n);

inline double critical_exponent(int n) { return double(n + 2) / double(n - 2); }
inline double gamma_const(int n) { return double(n) * double(n - 2) / 4.0; }

// x^{(n-2)/2} without calling pow for the integer and half-integer cases.
inline double half_power(double x, int n) {
  const int m = n - 2;
  double r = 1.0;
  for (int i = 0; i < m / 2; ++i) r *= x;
  if (m % 2) r *= std::sqrt(x);
  return r;
}

// |x|^{p-1} = |x|^{4/(n-2)}.
inline double potential_power(double x, int n) {
  const double a = std::abs(x);
  switch (n) {
    case 4: return a * a;
    case 6: return a;
    case 10: return std::sqrt(a);
    default: return std::pow(a, 4.0 / double(n - 2));
  }
}

struct BubbleParams {
  int n = 4;
  double mu = 1.0;
  Point xi{};
  void validate() const;
};

// Value and gradient of a scaled bubble at one point.
struct BubbleJet {
  double value = 0.0;
  Point grad{};
  // |y - xi|^2 / mu^2, cached for the dilation generator.
  double s2 = 0.0;
};

double eval_bubble(const Point& y, int n);
double eval_scaled_bubble(const Point& y, const BubbleParams& params);
BubbleJet scaled_bubble_jet(const Point& y, const BubbleParams& params);
// Second derivative d^2/dy_a dy_b of the scaled bubble, closed form.
double scaled_bubble_hessian(int a, int b, const Point& y, const BubbleParams& params);
double laplacian_bubble(const Point& y, const BubbleParams& params);

// Z_0 (dilation generator) and Z_alpha = d_alpha U of the standard bubble.
double eval_Z(int alpha, const Point& y, int n);

using Field = std::function<double(const Point&)>;

Point kelvin_point(const Point& y, int n);
double kelvin(const Field& f, const Point& y, int n);

}  // namespace bt
