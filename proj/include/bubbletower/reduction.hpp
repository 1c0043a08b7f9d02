#pragma once

#include <string>
#include <vector>

#include "bubbletower/configuration.hpp"
#include "bubbletower/errors.hpp"
#include "bubbletower/quadrature.hpp"

namespace bt {

// Projection of the error onto the dilation field of the first site of a
// ring, with corrections set to zero:
//   c = int cutoff * E * Z0_site / int U_site^{p-1} Z0_site^2.
struct ProjectionPieces {
  double inner_ball = 0.0;   // B(c, a/k), a = alpha_bar (ring 1) or alpha_hat (ring 2)
  double annulus = 0.0;      // a/k <= |y - c| <= support radius, outside the other balls
  double same_ring = 0.0;    // balls around the other sites of the ring
  double other_ring = 0.0;   // balls around the sites of the other ring
  double support_radius = 0.0;
  double numerator() const { return inner_ball + annulus + same_ring + other_ring; }
};

struct ProjectedCoefficient {
  ProjectionPieces pieces;
  double numerator = 0.0;
  double denominator = 0.0;
  double value = 0.0;
  double err_est = 0.0;
  bool converged = false;
};

// ring is 1 or 2.
ProjectedCoefficient projected_coefficient_level(const TowerConfiguration& cfg, int ring,
                                                 const QuadratureScheme& scheme, int level);
ProjectedCoefficient projected_coefficient(const TowerConfiguration& cfg, int ring, const QuadratureScheme& scheme);

// Same numerator by folding the |y| > 1 part onto the unit ball through the
// Kelvin transform, on a differently graded grid.
IntegrationResult projection_numerator_global(const TowerConfiguration& cfg, int ring,
                                              const QuadratureScheme& scheme);

// int U_site^{p-1} Z0_site^2 on a ball of 1e4 scales.
IntegrationResult projection_denominator(const TowerConfiguration& cfg, int ring, const QuadratureScheme& scheme);

// Cutoff leakage: |int (cutoff - 1) E Z0_site| / |int E Z0_site| for ring 1.
struct CutoffLeakage {
  double full = 0.0;     // int E Z0_site over R^n
  double leakage = 0.0;  // int (cutoff - 1) E Z0_site
  double ratio = 0.0;
  bool converged = false;
};
CutoffLeakage cutoff_leakage(const TowerConfiguration& cfg, const QuadratureScheme& scheme);

// int_{|y| < alpha_bar/(mu k)} U^{p-1}(y) V(y) Z0(y) dy with V the rescaled
// bubble of site j (0-based, j != 0) seen from the first site of ring 1, and
// its ratio to mu^{n-2}/|xi_j - xi_0|^{n-2}.
struct PairInteraction {
  double value = 0.0;
  double ratio = 0.0;
  double distance = 0.0;
  bool converged = false;
};
PairInteraction pair_interaction(const TowerConfiguration& cfg, int j, const QuadratureScheme& scheme);
// Ring-2 site l seen from the first ring-1 site; ratio to (mu lambda)^{(n-2)/2}/|xi_0 - eta_l|^{n-2}.
PairInteraction pair_interaction_cross(const TowerConfiguration& cfg, int l, const QuadratureScheme& scheme);

// ---------------------------------------------------------------------------
// Balancing parameters

struct SolverOptions {
  double tol = 1e-8;  // on |cbar0|, |chat0|
  int max_iter = 40;
  int level = 0;  // fixed quadrature level during the solve, so the map is smooth
  double fd_step = 1e-4;
};

struct CoefficientSample {
  double delta = 0.0, eps = 0.0, cbar0 = 0.0, chat0 = 0.0;
};

// c(d) = -(d / k^{n-2}) (d a1 - a2) + offset, fitted through three points.
struct LeadingFit {
  double a1 = 0.0, a2 = 0.0, offset = 0.0;
  std::vector<CoefficientSample> points;
};

struct ReducedSolution {
  int n = 0, k = 0, h = 0;
  double q = 0.0;
  double delta_star = 0.0, eps_star = 0.0;
  double cbar0 = 0.0, chat0 = 0.0;  // residuals at the root
  int iterations = 0;
  std::string method;  // "newton" or "bisection"
  std::vector<CoefficientSample> scan;
  LeadingFit fit_bar, fit_hat;
  double half_delta_cbar0 = 0.0;  // cbar0 at (delta*/2, eps*)
};

struct NoRootError : NumericalError {
  NoRootError(const std::string& what, std::vector<CoefficientSample> table)
      : NumericalError(what), table(std::move(table)) {}
  std::vector<CoefficientSample> table;
};

CoefficientSample reduced_coefficients(int n, int k, int h, double delta, double eps,
                                       const QuadratureScheme& scheme, int level);

// Fit through (0.5, 1, 1.5) * d0 of ring `ring`, the other parameter held fixed.
LeadingFit fit_leading(int n, int k, int h, double delta, double eps, int ring, const QuadratureScheme& scheme,
                       int level);

ReducedSolution solve_reduced(int n, int k, int h, const QuadratureScheme& scheme, const SolverOptions& opts = {});

}  // namespace bt
