#pragma once

#include <vector>

#include "bubbletower/configuration.hpp"
#include "bubbletower/quadrature.hpp"

namespace bt {

// x^p with p = (n+2)/(n-2), for x >= 0.
double critical_power(double x, int n);

struct UstarJet {
  double u = 0.0;
  Point grad{};
};

double eval_Ustar(const TowerConfiguration& cfg, const Point& y);
UstarJet eval_Ustar_jet(const TowerConfiguration& cfg, const Point& y);
double eval_error(const TowerConfiguration& cfg, const Point& y);

// Default: 1 for s <= 1, 0 for s >= 2, cubic Hermite in between.
// Reversed: the mirror image (0 near the bubble, 1 far away).
enum class CutoffOrientation { InnerOne, Reversed };
double zeta(double s, CutoffOrientation orientation = CutoffOrientation::InnerOne);

// Cutoff around site `index` (0-based) of ring 1 or ring 2; for |y| > 1 the
// argument is taken at the Kelvin image of y.
double cutoff(const TowerConfiguration& cfg, const Point& y, SiteKind ring, int index, double alpha,
              CutoffOrientation orientation = CutoffOrientation::InnerOne);

double nonlinear_remainder(const TowerConfiguration& cfg, const Field& phi, const Point& y);

// E as a tagged field (ring invariant, even, Kelvin even with weight n+2).
ScalarField error_scalar_field(const TowerConfiguration& cfg);

struct ErrorBreakdown {
  int n = 0, k = 0, h = 0;
  double q = 0.0;
  double exterior_norm = 0.0;
  std::vector<double> interior_ring1_norm;
  std::vector<double> interior_ring2_norm;
  double predicted_exterior_exponent = 0.0;  // 1 - n/q
  double predicted_interior_exponent = 0.0;  // -n/q
  bool converged = true;
};

// all_sites = false computes the first site of each ring only and copies it.
ErrorBreakdown error_breakdown(const TowerConfiguration& cfg, const QuadratureScheme& scheme,
                               bool all_sites = true);

// Least-squares slope of log(v) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& v);

}  // namespace bt
