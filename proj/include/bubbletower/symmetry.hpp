#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bubbletower/configuration.hpp"
#include "bubbletower/quadrature.hpp"

namespace bt {

// Element S1^m R2^e S2^l R4^f of the ring symmetry group: reflect y2 (e),
// rotate (y1,y2) by 2*pi*m/k, reflect y4 (f), rotate (y3,y4) by 2*pi*l/h.
struct GroupElement {
  int m = 0, e = 0, l = 0, f = 0;
};

int group_order(const TowerConfiguration& cfg);  // 4kh
GroupElement group_element(const TowerConfiguration& cfg, int index);
Point group_apply(const TowerConfiguration& cfg, const GroupElement& g, const Point& y);
Point group_apply_inverse(const TowerConfiguration& cfg, const GroupElement& g, const Point& y);

// Row-compressed linear map: out_i = sum_t val[t] * x[col[t]] over row i.
struct SparseMap {
  int size = 0;
  std::vector<int> start;
  std::vector<int> col;
  std::vector<double> val;
  Eigen::MatrixXd dense() const;
  void apply(const double* x, double* out) const;
};

// Site fields transform as Pi(g y) = D(g) Pi(y).
SparseMap field_map(const TowerConfiguration& cfg, const GroupElement& g);
// out += D M D^T
void accumulate_conjugate(const SparseMap& d, const Eigen::MatrixXd& m, Eigen::MatrixXd& out);

// Integrals over R^n of |U_*|^{p-1} Pi Pi^T and L(Pi) Pi^T.
struct FieldIntegrals {
  Eigen::MatrixXd weighted;
  Eigen::MatrixXd linearized;
  double err_est = 0.0;  // max entry change between the last two levels
  bool converged = false;
  int level = 0;
};

FieldIntegrals field_integrals_level(const TowerConfiguration& cfg, const QuadratureScheme& scheme, int level);
FieldIntegrals field_integrals(const TowerConfiguration& cfg, const QuadratureScheme& scheme);

// Node sets for orbit sums: the remainder restricted to the fundamental wedge
// a in [0, pi/k], b in [0, pi/h] (inside and Kelvin part), and the partition
// patches at the first site of each ring.
struct OrbitNodes {
  std::vector<RemainderNodes> wedge;
  std::vector<PatchNodes> ring1_patch;
  std::vector<PatchNodes> ring2_patch;
};
OrbitNodes orbit_nodes(const TowerConfiguration& cfg, const QuadratureScheme& scheme, int level);

}  // namespace bt
