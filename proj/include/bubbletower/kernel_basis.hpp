#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "bubbletower/configuration.hpp"
#include "bubbletower/error_field.hpp"
#include "bubbletower/quadrature.hpp"

namespace bt {

// Number of invariance generated kernel candidates, 5(n-1).
int kernel_count(int n);
// Dimension of the full conformal invariance family, 2n+1+n(n-1)/2.
int invariance_dimension(int n);

// ---------------------------------------------------------------------------
// Site fields. Field (alpha, s) lives at index alpha*(1+k+h) + s, with the
// site order of TowerConfiguration (center, ring 1, ring 2).
//   alpha = 0: dilation about the site center
//   alpha >= 1: derivative along the site frame vector

int field_count(const TowerConfiguration& cfg);
inline int field_index(const TowerConfiguration& cfg, int alpha, int site) {
  return alpha * cfg.num_sites() + site;
}

// Frame vector for direction alpha (1..n) at a site: Cartesian at the
// center, (xi, xi_perp, e3, ...) on ring 1, (e1, e2, eta, eta_perp, e5, ...)
// on ring 2.
Point site_frame(const TowerConfiguration& cfg, int site, int alpha);

double eval_Zgroup(const TowerConfiguration& cfg, int alpha, int site, const Point& y);

// All site fields at y. lpi (optional) receives L of each field,
// p*gamma*(|U_*|^{p-1} - U_site^{p-1}) * field; weight (optional) receives |U_*|^{p-1}.
void eval_fields(const TowerConfiguration& cfg, const Point& y, double* pi, double* lpi = nullptr,
                 double* weight = nullptr);

// ---------------------------------------------------------------------------
// Kernel candidates z_beta built from the jet of u.

double eval_z(int beta, const Point& y, const UstarJet& u, int n);
double eval_z(int beta, const Point& y, const TowerConfiguration& cfg);
// Rebased family: beta = n+2+alpha (alpha = 1..4) is (z_alpha - z_{n+2+alpha})/2.
double eval_bold_z(int beta, const Point& y, const UstarJet& u, int n);
double eval_bold_z(int beta, const Point& y, const TowerConfiguration& cfg);
void eval_all_bold_z(const Point& y, const UstarJet& u, int n, double* out);

// Matrix of the map z -> bold z (identity except the four Kelvin rows).
Eigen::MatrixXd rebasing_matrix(int n);

// Coefficients of bold z_beta over the site fields, built from the action of
// each generator on a single bubble.
Eigen::MatrixXd decomposition_matrix(const TowerConfiguration& cfg);

// Family-by-family explicit sums over the site fields.
double eval_decomposition(int beta, const TowerConfiguration& cfg, const Point& y);
// Which of the eleven identity families a beta belongs to (0..10).
int decomposition_family(int beta, int n);
constexpr int kDecompositionFamilies = 11;

// Seeded points with 0.05 <= |y| <= 20 kept 2*scale away from every center.
std::vector<Point> kernel_sample_points(const TowerConfiguration& cfg, int count, std::uint64_t seed);

double decomposition_residual(int beta, const TowerConfiguration& cfg, const std::vector<Point>& sample);

// (|y|^2 - 1) d_1 v - 2 y_1 ((n-2)/2 v + grad v . y)
double kelvin_T(const Point& y, double v, const Point& grad, int n);

// L(bold z_beta)(y) through the site field identity.
double linearized_residual(int beta, const TowerConfiguration& cfg, const Point& y);

// Largest relative deviation from |y|^{-n-2} L(Z_a0)(y/|y|^2) = s_a L(Z_a0)(y),
// s_0 = -1, s_a = +1 otherwise, over the sample.
double kelvin_image_deviation(const TowerConfiguration& cfg, const std::vector<Point>& sample);

// ---------------------------------------------------------------------------
// Gram matrix of the rebased family with weight |U_*|^{p-1}.

struct GramResult {
  Eigen::MatrixXd gram;
  Eigen::VectorXd singular_values;
  int rank = 0;
  double min_singular_ratio = 0.0;
  std::vector<double> thresholds;
  std::vector<int> rank_at_threshold;
  double asymmetry = 0.0;  // max |G - G^T|
  double err_est = 0.0;
  bool converged = false;
};

constexpr double kRankThreshold = 1e-6;
int numerical_rank(const Eigen::VectorXd& singular_values, double rel_threshold);
GramResult gram_from_fields(const Eigen::MatrixXd& weighted_field_products, const TowerConfiguration& cfg,
                            double err_est, bool converged);
GramResult gram_rank(const TowerConfiguration& cfg, const QuadratureScheme& scheme);

// ||L bold z_beta||_** for every beta, by orbit sums over a wedge.
struct ResidualNorms {
  std::vector<double> values;
  double err_est = 0.0;
  bool converged = false;
};
ResidualNorms linearized_residual_norms(const TowerConfiguration& cfg, const QuadratureScheme& scheme);

}  // namespace bt
